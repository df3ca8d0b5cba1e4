//! Monte-Carlo check of the rate supermartingale inequality at a few states
//! of a noisy quadratic.

use wildtamer::convex_sgd::{step_size_hogwild, Noise, Quadratic};
use wildtamer::engine::stream_rng;
use wildtamer::martingale::{convex_w, verify_supermartingale, MIN_DRAWS};

fn main() -> wildtamer::Result<()> {
    let q = Quadratic::new(vec![0.0; 5], 1.0, 0.3, Noise::Rademacher, 1.0)?;
    let k = q.constants(2.0).with_run(0.01, 0.5, 0.0, 0.0)?;
    let alpha = step_size_hogwild(&k);
    let q = Quadratic { alpha, ..q };
    let w = convex_w(&k, alpha, vec![0.0; 5], false)?;
    let mut rng = stream_rng(5, 0);
    println!("alpha {alpha:.3e}");
    for (t, r) in [(0, 0.2), (10, 0.5), (1000, 1.0), (50, 2.0)] {
        let x = vec![r / 5f64.sqrt(); 5];
        let v = verify_supermartingale(&w, t, &x, &q, MIN_DRAWS, &mut rng)?;
        println!(
            "t {t:>4} |x| {r}: W {:.3} E[W'] {:.3} ± {:.1e} {}",
            v.current,
            v.estimate,
            v.std_err,
            if v.pass { "ok" } else { "VIOLATED" }
        );
    }
    Ok(())
}

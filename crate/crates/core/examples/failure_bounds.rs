//! Closed-form failure bounds next to an empirical failure rate.

use wildtamer::convex_sgd::{
    step_size_hogwild, train_quadratic, ConvexRunSpec, Noise, Quadratic, StepRule,
};
use wildtamer::martingale::{bound_corollaries, Corollary, CorollaryValue};

fn main() -> wildtamer::Result<()> {
    let q = Quadratic::new(vec![0.0], 1.0, 0.5, Noise::Rademacher, 1.0)?;
    let k = q.constants(1.2).with_run(0.01, 0.5, 0.0, 0.0)?;
    let alpha = step_size_hogwild(&k);
    let d0 = 1.0;
    let CorollaryValue::Horizon(h) = bound_corollaries(Corollary::SimplifiedHorizon {
        k: &k,
        dist0_sq: d0,
    })?
    else {
        unreachable!()
    };
    println!("alpha {alpha:.4e}, simplified horizon {h:.0} updates");
    for t in [1_000u64, 5_000, 20_000] {
        let CorollaryValue::Failure(b) = bound_corollaries(Corollary::Hogwild {
            k: &k,
            dist0_sq: d0,
            t: t as f64,
        })?
        else {
            unreachable!()
        };
        let runs = 200;
        let mut failed = 0;
        for seed in 0..runs {
            let mut spec = ConvexRunSpec::new(k, t, seed);
            spec.step = StepRule::Manual(alpha);
            spec.x0 = Some(vec![1.0]);
            spec.stop_on_success = true;
            if !train_quadratic(&spec, &q)?.succeeded_by(t) {
                failed += 1;
            }
        }
        println!(
            "T {t:>6}: bound {:.3}, observed {:.3}",
            b.value,
            failed as f64 / runs as f64
        );
    }
    Ok(())
}

//! Rank-1 stochastic power iteration from single-entry samples.

use wildtamer::alecton::{run_alecton, AlectonRunSpec};
use wildtamer::convex_sgd::Executor;
use wildtamer::data_io::{gen_spectral_matrix, log_spaced_spectrum};

fn main() -> wildtamer::Result<()> {
    let m = gen_spectral_matrix(200, &log_spaced_spectrum(10, 1.0, 2.0), 7)?;
    println!(
        "n {} gap {:.4} coherence {:.3} ‖A‖_F {:.3}",
        m.n(),
        m.eigengap(),
        m.coherence(),
        m.frobenius()
    );
    for exec in [Executor::Sequential, Executor::Async(4)] {
        let mut spec = AlectonRunSpec::new(2e-5, 0.1, 4_000_000, 0);
        spec.executor = exec.clone();
        spec.check_every = 10_000;
        let r = run_alecton(&m, &spec)?;
        let start = r.trace.first().map_or(0.0, |t| t.1);
        println!(
            "{exec:?}: alignment {start:.4} -> {:.4}, success at write {:?}, C = {:.1e}",
            r.final_alignment, r.success_write, r.measured_c
        );
    }
    Ok(())
}

//! Single-threaded execution with stale reads drawn from a chosen delay law.

use wildtamer::convex_sgd::{train_quadratic, ConvexRunSpec, Executor, Noise, Quadratic, StepRule};
use wildtamer::engine::DelayDistribution;

fn main() -> wildtamer::Result<()> {
    let q = Quadratic::new(vec![0.0; 20], 1.0, 0.5, Noise::Gaussian, 1.0)?;
    let k = q.constants(2.0).with_run(0.05, 0.5, 0.0, 0.0)?;
    for mean in [0.0, 1.0, 10.0, 100.0] {
        let delays = DelayDistribution::geometric_with_mean(mean)?;
        let mut spec = ConvexRunSpec::new(k, 20_000, 1);
        spec.step = StepRule::Manual(0.01);
        spec.executor = Executor::Simulated(delays);
        spec.x0 = Some(vec![1.0; 20]);
        spec.stop_on_success = true;
        let r = train_quadratic(&spec, &q)?;
        println!(
            "mean delay {mean:>5}: measured {:.3}, success after {:?} updates",
            r.mean_staleness,
            r.success_update()
        );
    }
    Ok(())
}

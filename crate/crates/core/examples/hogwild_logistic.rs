//! Lock-free logistic regression on a synthetic sparse benchmark.
//!
//! Usage: `cargo run --release --example hogwild_logistic [threads]`

use wildtamer::convex_sgd::{
    solve_optimum, train, training_loss, ConvexRunSpec, Executor, StepRule,
};
use wildtamer::data_io::gen_synthetic_logistic;
use wildtamer::model::{dist_sq, estimate_constants, GlmModel};

fn main() -> wildtamer::Result<()> {
    let threads: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    let reg = 1e-3;
    let (data, _) = gen_synthetic_logistic(1000, 10_000, 10, 1)?;
    let x_star = solve_optimum(&data, GlmModel::Logistic, reg, 1e-8, 100_000)?;
    let k =
        estimate_constants(&data, GlmModel::Logistic, reg, 1.5)?.with_run(0.1, 0.5, 0.0, 0.0)?;

    for exec in [Executor::Sequential, Executor::Async(threads)] {
        let mut spec = ConvexRunSpec::new(k, 200_000, 0);
        spec.step = StepRule::Manual(0.05);
        spec.executor = exec.clone();
        let r = train(&spec, &data, GlmModel::Logistic, reg, Some(&x_star))?;
        println!(
            "{exec:?}: loss {:.5} (optimum {:.5}) dist² {:.4} tau {:.2} in {:?}",
            r.loss,
            training_loss(&x_star, &data, GlmModel::Logistic, reg),
            dist_sq(&r.run.final_x, &x_star),
            r.run.mean_staleness,
            r.run.wall_time,
        );
    }
    Ok(())
}

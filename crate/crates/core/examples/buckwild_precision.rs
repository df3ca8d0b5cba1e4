//! Same run at 32, 16 and 8 bits: data is rounded once, updates every write.

use wildtamer::convex_sgd::{train, ConvexRunSpec, Precision, StepRule};
use wildtamer::data_io::gen_synthetic_logistic;
use wildtamer::fixedpoint::Bits;
use wildtamer::model::{estimate_constants, GlmModel};

fn main() -> wildtamer::Result<()> {
    let reg = 1e-3;
    let (data, _) = gen_synthetic_logistic(1000, 10_000, 10, 1)?;
    let k =
        estimate_constants(&data, GlmModel::Logistic, reg, 1.5)?.with_run(1.0, 0.5, 0.0, 0.0)?;
    for precision in [
        Precision::Full,
        Precision::Fixed(Bits::Sixteen),
        Precision::Fixed(Bits::Eight),
    ] {
        let mut spec = ConvexRunSpec::new(k, 200_000, 3);
        spec.step = StepRule::Manual(0.05);
        spec.precision = precision;
        let r = train(&spec, &data, GlmModel::Logistic, reg, None)?;
        let scale = r.update_format.map(|f| f.scale);
        println!(
            "{precision:?}: loss {:.6} update scale {scale:?} saturated {:.2e}",
            r.loss,
            r.run.saturation.rate()
        );
    }
    Ok(())
}

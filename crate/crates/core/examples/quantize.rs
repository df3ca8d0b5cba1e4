//! Stochastic rounding to 8-bit codes: each draw lands on a neighbouring
//! grid point, and the average recovers the input.

use wildtamer::fixedpoint::{dequantize, quantize, Bits, FixedPointSpec, QuantState};

fn main() -> wildtamer::Result<()> {
    let spec = FixedPointSpec::new(Bits::Eight, 0.01)?;
    let mut state = QuantState::new(42, 0);
    println!(
        "range [{}, {}], step {}",
        spec.min_value(),
        spec.max_value(),
        spec.scale
    );
    for x in [0.123456, -0.5005, 1.0, 0.0042] {
        let draws = 100_000;
        let mut sum = 0.0;
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..draws {
            let code = quantize(x, &spec, &mut state)?;
            seen.insert(code);
            sum += dequantize(code, &spec)?;
        }
        println!("x = {x:>9} codes {seen:?} mean {:.6}", sum / draws as f64);
    }
    Ok(())
}

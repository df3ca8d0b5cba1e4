//! Concurrent writers on a shared parameter vector, in f64 and fixed point.

use std::thread;

use wildtamer::engine::ParamVector;
use wildtamer::fixedpoint::{Bits, FixedPointSpec};

fn hammer(p: &ParamVector, threads: usize) {
    thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| {
                for i in 0..100_000 {
                    // fixed-point cells accumulate integer codes
                    if p.fixed_spec().is_some() {
                        p.add_code(i % p.dim(), 1);
                    } else {
                        p.add(i % p.dim(), 0.001);
                    }
                }
            });
        }
    });
}

fn main() -> wildtamer::Result<()> {
    let full = ParamVector::zeros(4);
    hammer(&full, 8);
    println!("f64 cells: {:?}", full.snapshot());

    let fixed =
        ParamVector::fixed_from_slice(&[0.0; 4], FixedPointSpec::new(Bits::Sixteen, 1e-3)?)?;
    hammer(&fixed, 8);
    println!("fixed-point cells: {:?}", fixed.snapshot());
    Ok(())
}

use std::sync::atomic::{AtomicI32, AtomicU64, Ordering};

use crate::error::{contract, Result};
use crate::fixedpoint::FixedPointSpec;

enum Cells {
    Float(Vec<AtomicU64>),
    /// i32 accumulators at the update format's scale, so a quantized update
    /// commits with one integer fetch-add.
    Fixed {
        codes: Vec<AtomicI32>,
        spec: FixedPointSpec,
    },
}

/// Shared iterate with lock-free reads and atomic per-cell adds.
pub struct ParamVector {
    cells: Cells,
}

impl ParamVector {
    pub fn from_slice(x: &[f64]) -> Self {
        ParamVector {
            cells: Cells::Float(x.iter().map(|v| AtomicU64::new(v.to_bits())).collect()),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_slice(&vec![0.0; dim])
    }

    /// Fixed-point storage at `spec.scale`; initial values are rounded to
    /// the nearest code.
    pub fn fixed_from_slice(x: &[f64], spec: FixedPointSpec) -> Result<Self> {
        let mut codes = Vec::with_capacity(x.len());
        for &v in x {
            let q = (v / spec.scale).round();
            if !(q.abs() <= i32::MAX as f64) {
                return contract(format!("initial value {v} does not fit the accumulator"));
            }
            codes.push(AtomicI32::new(q as i32));
        }
        Ok(ParamVector {
            cells: Cells::Fixed { codes, spec },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.cells {
            Cells::Float(c) => c.len(),
            Cells::Fixed { codes, .. } => codes.len(),
        }
    }

    pub fn fixed_spec(&self) -> Option<&FixedPointSpec> {
        match &self.cells {
            Cells::Float(_) => None,
            Cells::Fixed { spec, .. } => Some(spec),
        }
    }

    #[inline]
    pub fn read(&self, i: usize) -> f64 {
        match &self.cells {
            Cells::Float(c) => f64::from_bits(c[i].load(Ordering::Relaxed)),
            Cells::Fixed { codes, spec } => codes[i].load(Ordering::Relaxed) as f64 * spec.scale,
        }
    }

    /// Atomic read-add-write of a real delta; returns the previous value.
    ///
    /// Panics on fixed-point storage, which only accepts codes.
    #[inline]
    pub fn add(&self, i: usize, delta: f64) -> f64 {
        match &self.cells {
            Cells::Float(c) => {
                let cell = &c[i];
                let mut cur = cell.load(Ordering::Relaxed);
                loop {
                    let new = (f64::from_bits(cur) + delta).to_bits();
                    match cell.compare_exchange_weak(cur, new, Ordering::AcqRel, Ordering::Relaxed)
                    {
                        Ok(prev) => return f64::from_bits(prev),
                        Err(actual) => cur = actual,
                    }
                }
            }
            Cells::Fixed { .. } => panic!("fixed-point cells take integer codes"),
        }
    }

    /// Native integer fetch-add of a quantized delta; returns the previous code.
    #[inline]
    pub fn add_code(&self, i: usize, code: i32) -> i32 {
        match &self.cells {
            Cells::Fixed { codes, .. } => codes[i].fetch_add(code, Ordering::AcqRel),
            Cells::Float(_) => panic!("float cells take real deltas"),
        }
    }

    pub fn snapshot(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.read(i)).collect()
    }

    pub fn snapshot_into(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.dim()).map(|i| self.read(i)));
    }
}

impl std::fmt::Debug for ParamVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParamVector")
            .field("dim", &self.dim())
            .field("fixed", &self.fixed_spec())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::Bits;
    use std::thread;

    #[test]
    fn concurrent_adds_are_not_lost() {
        let p = ParamVector::zeros(1);
        let (k, m) = (8, 20_000);
        thread::scope(|s| {
            for _ in 0..k {
                s.spawn(|| {
                    for _ in 0..m {
                        p.add(0, 1.0);
                    }
                });
            }
        });
        assert_eq!(p.read(0), (k * m) as f64);

        let spec = FixedPointSpec::new(Bits::Eight, 0.5).unwrap();
        let q = ParamVector::fixed_from_slice(&[0.0], spec).unwrap();
        thread::scope(|s| {
            for _ in 0..k {
                s.spawn(|| {
                    for _ in 0..m {
                        q.add_code(0, 2);
                    }
                });
            }
        });
        assert_eq!(q.read(0), (k * m) as f64);
    }

    #[test]
    fn add_returns_previous() {
        let p = ParamVector::from_slice(&[1.5, 2.0]);
        assert_eq!(p.add(1, 0.5), 2.0);
        assert_eq!(p.snapshot(), vec![1.5, 2.5]);
    }
}

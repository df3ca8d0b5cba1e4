//! Unbiased stochastic-rounding fixed-point codec.
//!
//! A value `x` is represented by an integer code `k` with `x ≈ k·s`. Rounding
//! picks one of the two neighbouring grid points with probabilities that make
//! the result unbiased whenever the code does not saturate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, Result};

/// Storage headroom applied when sizing a format from observed data.
pub const STORAGE_HEADROOM: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bits {
    Eight,
    Sixteen,
}

impl Bits {
    pub fn from_u32(bits: u32) -> Result<Bits> {
        match bits {
            8 => Ok(Bits::Eight),
            16 => Ok(Bits::Sixteen),
            other => contract(format!("unsupported precision {other} bits (use 8 or 16)")),
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Bits::Eight => 8,
            Bits::Sixteen => 16,
        }
    }

    pub fn min_code(self) -> i32 {
        -(1 << (self.count() - 1))
    }

    pub fn max_code(self) -> i32 {
        (1 << (self.count() - 1)) - 1
    }

    pub fn bytes(self) -> usize {
        self.count() as usize / 8
    }
}

/// Signed fixed-point format: value = code · scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointSpec {
    pub bits: Bits,
    pub scale: f64,
}

impl FixedPointSpec {
    pub fn new(bits: Bits, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return contract(format!("scale must be positive and finite, got {scale}"));
        }
        Ok(FixedPointSpec { bits, scale })
    }

    pub fn min_value(&self) -> f64 {
        self.bits.min_code() as f64 * self.scale
    }

    pub fn max_value(&self) -> f64 {
        self.bits.max_code() as f64 * self.scale
    }
}

/// Per-thread rounding state: a counter-based random stream plus saturation
/// accounting.
#[derive(Debug, Clone)]
pub struct QuantState {
    rng: ChaCha8Rng,
    pub stats: SaturationStats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SaturationStats {
    pub saturated: u64,
    pub total: u64,
}

impl SaturationStats {
    pub fn merge(&mut self, other: SaturationStats) {
        self.saturated += other.saturated;
        self.total += other.total;
    }

    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.saturated as f64 / self.total as f64
        }
    }
}

impl QuantState {
    /// Stream `stream` of the ChaCha generator keyed by `seed`; the draw
    /// counter is the generator's word position.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        QuantState {
            rng,
            stats: SaturationStats::default(),
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Round `x` given an explicit uniform draw `u ∈ [0, 1)`.
///
/// For a fixed `u` this is non-decreasing in `x`, which couples the rounding
/// of two inputs monotonically. Returns the code and whether it saturated.
pub fn quantize_with_uniform(x: f64, spec: &FixedPointSpec, u: f64) -> (i32, bool) {
    let lo_code = spec.bits.min_code() as f64;
    let hi_code = spec.bits.max_code() as f64;
    // clamp before flooring so huge inputs cannot overflow the cast
    let q = (x / spec.scale).clamp(lo_code - 1.0, hi_code + 1.0);
    let lo = q.floor();
    let frac = q - lo;
    let k = if u < frac { lo + 1.0 } else { lo };
    if k > hi_code {
        (hi_code as i32, true)
    } else if k < lo_code {
        (lo_code as i32, true)
    } else {
        (k as i32, false)
    }
}

/// Stochastically round `x` to a code of `spec`, clamping on overflow.
pub fn quantize(x: f64, spec: &FixedPointSpec, state: &mut QuantState) -> Result<i32> {
    if !x.is_finite() {
        return contract(format!("cannot quantize non-finite value {x}"));
    }
    let u = state.uniform();
    let (code, saturated) = quantize_with_uniform(x, spec, u);
    state.stats.total += 1;
    if saturated {
        state.stats.saturated += 1;
    }
    Ok(code)
}

pub fn dequantize(code: i32, spec: &FixedPointSpec) -> Result<f64> {
    if code < spec.bits.min_code() || code > spec.bits.max_code() {
        return contract(format!(
            "code {code} outside the {}-bit range",
            spec.bits.count()
        ));
    }
    Ok(code as f64 * spec.scale)
}

/// Format for quantizing SGD updates: `s = ακM`, so a single rounding step
/// errs by less than `ακM`, while the code range must still cover any update
/// of magnitude `αM`.
pub fn choose_scale(alpha: f64, kappa: f64, grad_bound: f64, bits: Bits) -> Result<FixedPointSpec> {
    if kappa == 0.0 {
        return contract("zero quantization step requested");
    }
    if !(alpha > 0.0 && kappa > 0.0 && grad_bound > 0.0) {
        return contract("step size, precision factor and gradient bound must be positive");
    }
    let scale = alpha * kappa * grad_bound;
    let reach = bits.max_code() as f64 * scale;
    let needed = alpha * grad_bound;
    // relative slack absorbs round-off when κ is exactly 1/max_code
    if reach < needed * (1.0 - 1e-12) {
        return contract(format!(
            "κ = {kappa} too small for {} bits: range {reach:e} cannot cover updates up to αM = {needed:e}",
            bits.count()
        ));
    }
    FixedPointSpec::new(bits, scale)
}

/// Format for storing values whose magnitude is at most `max_abs`, with
/// [`STORAGE_HEADROOM`] times the observed range.
pub fn storage_scale(max_abs: f64, bits: Bits) -> Result<FixedPointSpec> {
    if !(max_abs > 0.0 && max_abs.is_finite()) {
        return contract("storage range must be positive and finite");
    }
    FixedPointSpec::new(bits, STORAGE_HEADROOM * max_abs / bits.max_code() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(bits: Bits, scale: f64) -> FixedPointSpec {
        FixedPointSpec::new(bits, scale).unwrap()
    }

    #[test]
    fn on_grid_is_exact() {
        let s = spec(Bits::Eight, 1.0);
        let mut st = QuantState::new(1, 0);
        for _ in 0..1000 {
            assert_eq!(quantize(3.0, &s, &mut st).unwrap(), 3);
        }
        assert_eq!(st.stats.saturated, 0);
    }

    #[test]
    fn off_grid_outcomes_enumerated() {
        // q = 2.25: code 3 iff u < 0.25
        let s = spec(Bits::Eight, 1.0);
        assert_eq!(quantize_with_uniform(2.25, &s, 0.0).0, 3);
        assert_eq!(quantize_with_uniform(2.25, &s, 0.2499).0, 3);
        assert_eq!(quantize_with_uniform(2.25, &s, 0.25).0, 2);
        assert_eq!(quantize_with_uniform(2.25, &s, 0.9999).0, 2);
        let expectation = 0.25 * 3.0 + 0.75 * 2.0;
        assert_eq!(expectation, 2.25);
    }

    #[test]
    fn saturation_clamps_and_counts() {
        let s = spec(Bits::Eight, 1.0);
        let mut st = QuantState::new(1, 0);
        assert_eq!(quantize(300.0, &s, &mut st).unwrap(), 127);
        assert_eq!(quantize(-1e300, &s, &mut st).unwrap(), -128);
        assert_eq!(
            st.stats,
            SaturationStats {
                saturated: 2,
                total: 2
            }
        );
        assert!(quantize(f64::NAN, &s, &mut st).is_err());
    }

    #[test]
    fn dequantize_cases() {
        let s = spec(Bits::Eight, 0.01);
        assert_eq!(dequantize(0, &s).unwrap(), 0.0);
        assert!((dequantize(-128, &s).unwrap() + 1.28).abs() < 1e-15);
        assert!(dequantize(128, &s).is_err());
        let mut st = QuantState::new(9, 3);
        for k in -128..=127 {
            let x = dequantize(k, &s).unwrap();
            assert_eq!(quantize(x, &s, &mut st).unwrap(), k);
        }
    }

    #[test]
    fn choose_scale_cases() {
        let f = choose_scale(0.01, 0.1, 1.0, Bits::Eight).unwrap();
        assert!((f.scale - 0.001).abs() < 1e-18);
        assert!((f.min_value() + 0.128).abs() < 1e-15);
        assert!(f.max_value() >= 0.01);
        let err = choose_scale(0.01, 0.0, 1.0, Bits::Eight).unwrap_err();
        assert!(err.to_string().contains("zero quantization step requested"));
        assert!(choose_scale(0.01, 0.005, 1.0, Bits::Eight).is_err());
        let wide = choose_scale(0.01, 0.1, 1.0, Bits::Sixteen).unwrap();
        assert_eq!(wide.scale, f.scale);
        assert_eq!(wide.min_value() / f.min_value(), 256.0);
    }

    #[test]
    fn storage_scale_has_headroom() {
        let f = storage_scale(1.0, Bits::Eight).unwrap();
        assert!((f.max_value() - STORAGE_HEADROOM).abs() < 1e-12);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = QuantState::new(5, 0);
        let mut b = QuantState::new(5, 0);
        let mut c = QuantState::new(5, 1);
        let xa: Vec<f64> = (0..8).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..8).map(|_| b.uniform()).collect();
        let xc: Vec<f64> = (0..8).map(|_| c.uniform()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn unclamped_error_below_scale(x in -1.0f64..1.0, u in 0.0f64..1.0) {
                let s = spec(Bits::Eight, 0.01);
                let (k, sat) = quantize_with_uniform(x, &s, u);
                prop_assert!(!sat);
                prop_assert!((k as f64 * s.scale - x).abs() < s.scale);
            }

            #[test]
            fn coupled_rounding_is_monotone(a in -2.0f64..2.0, b in -2.0f64..2.0, u in 0.0f64..1.0) {
                let s = spec(Bits::Eight, 0.01);
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(quantize_with_uniform(lo, &s, u).0 <= quantize_with_uniform(hi, &s, u).0);
            }
        }
    }
}

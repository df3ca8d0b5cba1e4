use rand::Rng;

use crate::error::{contract, Result};

/// Distribution of the read delay τ̃ (in writes) used by the simulated
/// executor and by the stopped-process construction.
#[derive(Debug, Clone, PartialEq)]
pub enum DelayDistribution {
    Zero,
    Constant(u64),
    /// `P(τ̃ = k) = p(1 − p)^k` on `k = 0, 1, 2, …`
    Geometric {
        p: f64,
    },
    /// Normalized probability mass on `0..pmf.len()`.
    Empirical {
        pmf: Vec<f64>,
    },
}

impl DelayDistribution {
    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return contract(format!("geometric parameter must lie in (0, 1], got {p}"));
        }
        Ok(DelayDistribution::Geometric { p })
    }

    /// Build from a histogram of observed delays (`counts[k]` = number of
    /// reads with delay `k`).
    pub fn from_histogram(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return contract("empty delay histogram");
        }
        Ok(DelayDistribution::Empirical {
            pmf: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    /// Geometric distribution with the given mean delay.
    pub fn geometric_with_mean(mean: f64) -> Result<Self> {
        if !(mean >= 0.0) {
            return contract("mean delay must be non-negative");
        }
        Self::geometric(1.0 / (1.0 + mean))
    }

    /// `P(τ̃ ≥ k)`.
    pub fn tail(&self, k: u64) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match self {
            DelayDistribution::Zero => 0.0,
            DelayDistribution::Constant(d) => {
                if k <= *d {
                    1.0
                } else {
                    0.0
                }
            }
            DelayDistribution::Geometric { p } => (1.0 - p).powf(k as f64),
            DelayDistribution::Empirical { pmf } => {
                pmf.iter().skip(k as usize).sum::<f64>().clamp(0.0, 1.0)
            }
        }
    }

    /// `Σ_{m ≥ k} P(τ̃ ≥ m)` for `k ≥ 1`.
    pub fn tail_sum_from(&self, k: u64) -> f64 {
        let k = k.max(1);
        match self {
            DelayDistribution::Zero => 0.0,
            DelayDistribution::Constant(d) => d.saturating_sub(k - 1) as f64,
            DelayDistribution::Geometric { p } => (1.0 - p).powf(k as f64) / p,
            DelayDistribution::Empirical { pmf } => {
                // Σ_{m≥k} P(τ̃ ≥ m) = Σ_j pmf[j]·max(0, j − k + 1)
                pmf.iter()
                    .enumerate()
                    .map(|(j, &q)| q * (j as f64 - k as f64 + 1.0).max(0.0))
                    .sum()
            }
        }
    }

    /// Expected delay τ = Σ_{k≥1} P(τ̃ ≥ k).
    pub fn mean(&self) -> f64 {
        match self {
            DelayDistribution::Zero => 0.0,
            DelayDistribution::Constant(d) => *d as f64,
            DelayDistribution::Geometric { p } => (1.0 - p) / p,
            DelayDistribution::Empirical { pmf } => {
                pmf.iter().enumerate().map(|(k, &q)| k as f64 * q).sum()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            DelayDistribution::Zero => 0,
            DelayDistribution::Constant(d) => *d,
            DelayDistribution::Geometric { p } => {
                if *p >= 1.0 {
                    return 0;
                }
                // inverse CDF on (0, 1]
                let u = 1.0 - rng.random::<f64>();
                let k = (u.ln() / (1.0 - p).ln()).floor();
                if k >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    k as u64
                }
            }
            DelayDistribution::Empirical { pmf } => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for (k, &q) in pmf.iter().enumerate() {
                    acc += q;
                    if u < acc {
                        return k as u64;
                    }
                }
                pmf.len().saturating_sub(1) as u64
            }
        }
    }
}

impl std::str::FromStr for DelayDistribution {
    type Err = crate::Error;

    /// `zero`, `const:K`, `geom:P`.
    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || crate::Error::Contract(format!("bad delay spec `{s}` (zero | const:K | geom:P)"));
        if s == "zero" {
            return Ok(DelayDistribution::Zero);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "const" => Ok(DelayDistribution::Constant(arg.parse().map_err(|_| bad())?)),
            "geom" => DelayDistribution::geometric(arg.parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tail_series(d: &DelayDistribution) -> f64 {
        (1..20_000).map(|k| d.tail(k)).sum()
    }

    #[test]
    fn tail_sums_to_mean() {
        let cases = [
            DelayDistribution::Zero,
            DelayDistribution::Constant(7),
            DelayDistribution::geometric(0.5).unwrap(),
            DelayDistribution::geometric(0.9).unwrap(),
            DelayDistribution::geometric(0.05).unwrap(),
            DelayDistribution::from_histogram(&[3, 0, 5, 1, 1]).unwrap(),
        ];
        for d in &cases {
            assert!((tail_series(d) - d.mean()).abs() < 1e-9, "{d:?}");
            assert!((d.tail_sum_from(1) - d.mean()).abs() < 1e-9, "{d:?}");
            for k in 1..30 {
                assert!(d.tail(k + 1) <= d.tail(k));
                let direct: f64 = (k..20_000).map(|m| d.tail(m)).sum();
                assert!((d.tail_sum_from(k) - direct).abs() < 1e-9, "{d:?} k={k}");
            }
        }
    }

    #[test]
    fn constant_one_tail_sum() {
        let d = DelayDistribution::Constant(1);
        assert_eq!(d.tail_sum_from(1), 1.0);
        assert_eq!(d.tail_sum_from(2), 0.0);
    }

    #[test]
    fn geometric_sample_mean() {
        let d = DelayDistribution::geometric(0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng) as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = (1.0 - 0.25) / (0.25 * 0.25);
        assert!((mean - d.mean()).abs() < 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn parse() {
        assert_eq!(
            "zero".parse::<DelayDistribution>().unwrap(),
            DelayDistribution::Zero
        );
        assert_eq!(
            "const:3".parse::<DelayDistribution>().unwrap(),
            DelayDistribution::Constant(3)
        );
        assert!("geom:0".parse::<DelayDistribution>().is_err());
        assert!("pareto:1".parse::<DelayDistribution>().is_err());
    }
}

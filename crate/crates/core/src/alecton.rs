//! Rank-1 Alecton: stochastic power iteration from entrywise samples,
//! `x ← x + ηn²·A_ij·x_j·e_i` with `(i, j)` uniform.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::convex_sgd::{execute, Executor};
use crate::engine::{RunConfig, RunReport, StreamRng, UpdateSource};
use crate::error::{contract, Result};
use crate::martingale::{alecton_horizon_and_failure, BoundValue};
use crate::model::{alignment, norm, norm_l1, AlectonConstants, SuccessRegion};

/// Symmetric `A = Σ_m λ_m u_m u_mᵀ` over an orthonormal set `u_1…u_k`,
/// with entries computed on demand.
#[derive(Debug, Clone)]
pub struct SpectralMatrix {
    n: usize,
    eigenvalues: Vec<f64>,
    /// `rows[i][m] = u_m[i]`
    rows: Vec<Vec<f64>>,
    /// `scaled[i][m] = λ_m·u_m[i]`
    scaled: Vec<Vec<f64>>,
    coherence: f64,
    frobenius: f64,
}

impl SpectralMatrix {
    /// `basis[m]` is the eigenvector for `eigenvalues[m]`; eigenvalues must
    /// be positive with `λ₁ > λ₂ ≥ …`.
    pub fn from_basis(eigenvalues: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self> {
        if eigenvalues.len() < 2 {
            return contract("need at least two eigenvalues");
        }
        if eigenvalues.len() != basis.len() {
            return contract("one basis vector per eigenvalue required");
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return contract("eigenvalues must be positive");
        }
        if !(eigenvalues[0] > eigenvalues[1]) || eigenvalues[1..].windows(2).any(|w| w[0] < w[1]) {
            return contract("eigenvalues must satisfy λ₁ > λ₂ ≥ λ₃ ≥ …");
        }
        let n = basis[0].len();
        if n == 0 || basis.iter().any(|b| b.len() != n) {
            return contract("basis vectors must share a positive dimension");
        }
        for (a, u) in basis.iter().enumerate() {
            for v in &basis[a..] {
                let d: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
                let want = if std::ptr::eq(u, v) { 1.0 } else { 0.0 };
                if (d - want).abs() > 1e-9 {
                    return contract("basis is not orthonormal");
                }
            }
        }
        let k = basis.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..k).map(|m| basis[m][i]).collect())
            .collect();
        let scaled = rows
            .iter()
            .map(|r| r.iter().zip(&eigenvalues).map(|(u, l)| u * l).collect())
            .collect();
        let max_sq = rows
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |a, u| a.max(u * u));
        let frobenius = eigenvalues.iter().map(|l| l * l).sum::<f64>().sqrt();
        Ok(SpectralMatrix {
            n,
            eigenvalues,
            rows,
            scaled,
            coherence: (n as f64 * max_sq).sqrt(),
            frobenius,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigengap(&self) -> f64 {
        self.eigenvalues[0] - self.eigenvalues[1]
    }

    /// Incoherence `μ`: `max_{j,m} n·u_m[j]² = μ²` over the stored basis.
    pub fn coherence(&self) -> f64 {
        self.coherence
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius
    }

    pub fn eigenvector(&self, m: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[m]).collect()
    }

    pub fn top_eigenvector(&self) -> Vec<f64> {
        self.eigenvector(0)
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.scaled[i]
            .iter()
            .zip(&self.rows[j])
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let k = self.eigenvalues.len();
        let mut proj = vec![0.0; k];
        for (r, &xi) in self.rows.iter().zip(x) {
            for m in 0..k {
                proj[m] += r[m] * xi;
            }
        }
        self.scaled
            .iter()
            .map(|s| s.iter().zip(&proj).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Constants for the analysis; `norm_bound` is the `C` of the run.
    pub fn constants(
        &self,
        gamma: f64,
        theta: f64,
        epsilon: f64,
        norm_bound: f64,
    ) -> AlectonConstants {
        AlectonConstants {
            n: self.n,
            eigengap: self.eigengap(),
            coherence: self.coherence,
            gamma,
            theta,
            epsilon,
            norm_bound,
            frobenius: self.frobenius,
        }
    }
}

/// Default `ϑ = ½·(1 + ε)⁻¹`.
pub fn default_theta(epsilon: f64) -> f64 {
    0.5 / (1.0 + epsilon)
}

/// `η = Δεγϑ / (2nμ⁴‖A‖_F²)`
pub fn alecton_step_size(k: &AlectonConstants) -> f64 {
    let mu2 = k.coherence * k.coherence;
    k.eigengap * k.epsilon * k.gamma * k.theta
        / (2.0 * k.n as f64 * mu2 * mu2 * k.frobenius * k.frobenius)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlectonHorizon {
    /// horizon `T`, in single-entry writes
    pub horizon: f64,
    pub failure: BoundValue,
}

/// Horizon `T` and failure bound for expected delay `tau`; the bound is
/// flagged vacuous when `μ² ≤ 4Cϑτ√ε`.
pub fn alecton_t_and_bound(k: &AlectonConstants, tau: f64) -> Result<AlectonHorizon> {
    k.validate()?;
    let (horizon, failure) = alecton_horizon_and_failure(k, tau);
    Ok(AlectonHorizon { horizon, failure })
}

/// One sampled update applied to a plain vector; returns the drawn `(i, j)`.
pub fn alecton_update(
    x: &mut [f64],
    m: &SpectralMatrix,
    eta: f64,
    rng: &mut StreamRng,
) -> (usize, usize) {
    let n = m.n;
    let i = rng.random_range(0..n);
    let j = rng.random_range(0..n);
    let nf = n as f64;
    x[i] += eta * nf * nf * m.entry(i, j) * x[j];
    (i, j)
}

/// Uniform point on the sphere of the given radius.
pub fn init_x0(n: usize, radius: f64, rng: &mut StreamRng) -> Result<Vec<f64>> {
    if !(radius > 0.0) || n == 0 {
        return contract("need n ≥ 1 and a positive radius");
    }
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 0.0 {
            return Ok(v.into_iter().map(|x| x * radius / r).collect());
        }
    }
}

/// Entrywise update stream for the engine: reads `x_j`, writes `x_i`.
pub struct AlectonSource<'a> {
    matrix: &'a SpectralMatrix,
    step: f64,
}

impl<'a> AlectonSource<'a> {
    pub fn new(matrix: &'a SpectralMatrix, eta: f64) -> Self {
        let n = matrix.n as f64;
        AlectonSource {
            matrix,
            step: eta * n * n,
        }
    }
}

impl UpdateSource for AlectonSource<'_> {
    type Draw = (usize, usize);

    fn dim(&self) -> usize {
        self.matrix.n
    }

    fn draw(&self, rng: &mut StreamRng) -> (usize, usize) {
        let n = self.matrix.n;
        (rng.random_range(0..n), rng.random_range(0..n))
    }

    fn reads(&self, &(_, j): &(usize, usize), out: &mut Vec<usize>) {
        out.push(j);
    }

    fn deltas(&self, &(i, j): &(usize, usize), read: &[f64], out: &mut Vec<(usize, f64)>) {
        out.push((i, self.step * self.matrix.entry(i, j) * read[0]));
    }
}

#[derive(Debug, Clone)]
pub struct AlectonRunSpec {
    pub eta: f64,
    pub epsilon: f64,
    pub executor: Executor,
    /// budget in single-entry writes
    pub max_writes: u64,
    pub seed: u64,
    pub x0_radius: f64,
    /// success and norm checks happen every this many writes
    pub check_every: u64,
    pub stop_on_success: bool,
}

impl AlectonRunSpec {
    pub fn new(eta: f64, epsilon: f64, max_writes: u64, seed: u64) -> Self {
        AlectonRunSpec {
            eta,
            epsilon,
            executor: Executor::Sequential,
            max_writes,
            seed,
            x0_radius: 1.0,
            check_every: 1000,
            stop_on_success: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlectonReport {
    pub run: RunReport,
    pub x0: Vec<f64>,
    pub final_alignment: f64,
    /// writes until the first passing success check
    pub success_write: Option<u64>,
    /// largest `‖x‖₁` seen at a check: the measured `C`
    pub measured_c: f64,
    /// checks at which `‖x‖ < 1`
    pub norm_violations: u64,
    pub checks: u64,
    /// `(writes, alignment)` at every check, starting from `x₀`
    pub trace: Vec<(u64, f64)>,
}

/// Run Alecton on `matrix`; `x₀` is uniform on the sphere of radius
/// `spec.x0_radius`, drawn from a stream separate from the update stream.
pub fn run_alecton(matrix: &SpectralMatrix, spec: &AlectonRunSpec) -> Result<AlectonReport> {
    if !(spec.eta >= 0.0 && spec.eta.is_finite()) {
        return contract("η must be finite and non-negative");
    }
    if spec.check_every == 0 {
        return contract("check interval must be positive");
    }
    let mut x0_rng = crate::engine::stream_rng(spec.seed, X0_STREAM);
    let x0 = init_x0(matrix.n, spec.x0_radius, &mut x0_rng)?;
    let source = AlectonSource::new(matrix, spec.eta);
    let u1 = matrix.top_eigenvector();
    let region = SuccessRegion::Alignment {
        direction: u1.clone(),
        epsilon: spec.epsilon,
    };
    // one write per update, so update and write counts coincide
    let cfg = RunConfig {
        max_updates: spec.max_writes,
        max_writes: None,
        stop_on_success: spec.stop_on_success,
        check_every: spec.check_every,
        snapshot_every: Some(spec.check_every),
        log_writes: false,
        seed: spec.seed,
        ..RunConfig::default()
    };
    let mut run = execute(&source, &x0, None, &spec.executor, Some(&region), &cfg)?;
    let mut measured_c = norm_l1(&x0);
    let mut norm_violations = u64::from(norm(&x0) < 1.0);
    let checks = run.snapshots.len() as u64 + 1;
    let mut trace = vec![(0, alignment(&u1, &x0))];
    for s in &run.snapshots {
        trace.push((s.t, alignment(&u1, &s.values)));
        measured_c = measured_c.max(norm_l1(&s.values));
        if norm(&s.values) < 1.0 {
            norm_violations += 1;
        }
    }
    measured_c = measured_c.max(norm_l1(&run.final_x));
    run.snapshots.clear();
    let final_alignment = alignment(&u1, &run.final_x);
    let success_write = run.success.as_ref().map(|s| s.write);
    Ok(AlectonReport {
        x0,
        final_alignment,
        success_write,
        measured_c,
        norm_violations,
        checks,
        trace,
        run,
    })
}

const X0_STREAM: u64 = 1 << 44;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::stream_rng;

    fn diag21() -> SpectralMatrix {
        SpectralMatrix::from_basis(vec![2.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn coherent_extreme() {
        let m = diag21();
        assert!((m.coherence().powi(2) - 2.0).abs() < 1e-12);
        assert_eq!(m.entry(0, 0), 2.0);
        assert_eq!(m.entry(0, 1), 0.0);
        assert_eq!(m.entry(1, 1), 1.0);
        assert!((m.frobenius().powi(2) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_update() {
        let m = diag21();
        let src = AlectonSource::new(&m, 0.1);
        let mut x = vec![1.0, 1.0];
        crate::engine::apply_update(&src, &(0, 0), &mut x);
        assert!((x[0] - 1.8).abs() < 1e-15);
        assert_eq!(x[1], 1.0);
    }

    #[test]
    fn zero_step_leaves_x() {
        let m = diag21();
        let mut x = vec![0.3, -0.4];
        let mut rng = stream_rng(1, 0);
        alecton_update(&mut x, &m, 0.0, &mut rng);
        assert_eq!(x, vec![0.3, -0.4]);
    }

    #[test]
    fn step_size_example() {
        let k = AlectonConstants {
            n: 10,
            eigengap: 1.0,
            coherence: 1.0,
            gamma: 0.1,
            theta: 0.5,
            epsilon: 0.1,
            norm_bound: 1.0,
            frobenius: 2f64.sqrt(),
        };
        assert!((alecton_step_size(&k) - 1.25e-4).abs() < 1e-17);
        let k2 = AlectonConstants {
            coherence: 2.0,
            ..k
        };
        assert!((alecton_step_size(&k) / alecton_step_size(&k2) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_radius() {
        let mut rng = stream_rng(3, 0);
        let x = init_x0(50, 2.5, &mut rng).unwrap();
        assert!((norm(&x) - 2.5).abs() < 1e-12);
        assert!(init_x0(5, 0.0, &mut rng).is_err());
    }
}

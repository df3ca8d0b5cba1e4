//! Rate supermartingales, the delay-compensated stopped process, Monte-Carlo
//! supermartingale checks, and the closed-form failure bounds.
//!
//! A rate supermartingale `W` is non-increasing in conditional expectation
//! until the iterate reaches its stopping set, and dominates `t` while the
//! run has not succeeded. Then `P(no success by T) ≤ E[W₀]/T`. Under
//! asynchrony with expected delay `τ` the bound becomes
//! `E[W₀]/((1 − HRξτ)T)` when `W` is `(H, R, ξ)`-bounded.

use crate::engine::{apply_update, DelayDistribution, StreamRng, UpdateSource};
use crate::error::{contract, Result};
use crate::model::{
    alignment, dist_sq, dot_and_norm_sq, AlectonConstants, ConvexConstants, SuccessRegion,
};

/// Draw count required by [`verify_supermartingale`].
pub const MIN_DRAWS: usize = 10_000;

/// Piecewise logarithm: `x` for `x ≤ 1`, `log(ex)` above.
pub fn plog(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return contract(format!("plog needs x ≥ 0, got {x}"));
    }
    Ok(plog_unchecked(x))
}

#[inline]
fn plog_unchecked(x: f64) -> f64 {
    if x <= 1.0 {
        x
    } else {
        1.0 + x.ln()
    }
}

pub fn plog_derivative(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else {
        1.0 / x
    }
}

/// `τ(x) = (u₁ᵀx)² / ((1 − γ/n)(u₁ᵀx)² + (γ/n)‖x‖²)`.
pub fn tau_fn(x: &[f64], u1: &[f64], gamma: f64, n: usize) -> Result<f64> {
    if x.len() != u1.len() {
        return contract("τ(x): dimension mismatch");
    }
    let (d, sq) = dot_and_norm_sq(u1, x);
    if sq == 0.0 {
        return contract("τ(x) is undefined at the zero vector");
    }
    Ok(tau_from_parts(d * d, sq, gamma, n))
}

#[inline]
fn tau_from_parts(dot_sq: f64, norm_sq: f64, gamma: f64, n: usize) -> f64 {
    let g = gamma / n as f64;
    let v = dot_sq / ((1.0 - g) * dot_sq + g * norm_sq);
    v.clamp(0.0, 1.0)
}

/// `(H, R, ξ)`: `W` is `H`-Lipschitz in the current iterate, the update is
/// `R`-Lipschitz in expectation in the 1-norm, and `E‖G̃‖ ≤ ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundedness {
    pub h: f64,
    pub r: f64,
    pub xi: f64,
}

impl Boundedness {
    /// `HRξτ`; the asynchronous bound needs it below 1.
    pub fn delay_factor(&self, tau: f64) -> f64 {
        self.h * self.r * self.xi * tau
    }
}

pub trait RateSupermartingale {
    /// Unstopped value at time `t` for current iterate `x`.
    fn value(&self, t: f64, x: &[f64]) -> f64;

    /// Whether reaching `x` stops the process.
    fn stopped(&self, x: &[f64]) -> bool;

    /// `B`; infinite when `W_t ≥ t` holds for every `t`.
    fn horizon(&self) -> f64;

    fn boundedness(&self) -> Boundedness;

    /// Values along `x_0, x_1, …`, frozen after the first stopping time.
    fn evaluate_trajectory(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(xs.len());
        let mut frozen: Option<f64> = None;
        for (t, x) in xs.iter().enumerate() {
            if let Some(v) = frozen {
                out.push(v);
                continue;
            }
            let v = self.value(t as f64, x);
            if self.stopped(x) {
                frozen = Some(v);
            }
            out.push(v);
        }
        out
    }
}

/// `W_t = K·plog(‖x − x*‖²/ε) + t` with `K = ε/(2αcε − α²M²(1+κ²))`.
#[derive(Debug, Clone)]
pub struct ConvexW {
    pub center: Vec<f64>,
    pub epsilon: f64,
    /// `K`
    pub scale: f64,
    pub bounds: Boundedness,
}

/// Convex rate supermartingale for step size `alpha`; `low_precision`
/// switches in the quantization factor κ from `k`.
pub fn convex_w(
    k: &ConvexConstants,
    alpha: f64,
    center: Vec<f64>,
    low_precision: bool,
) -> Result<ConvexW> {
    k.validate()?;
    let kappa = if low_precision { k.kappa } else { 0.0 };
    let ConvexConstants {
        strong_convexity: c,
        lipschitz: l,
        grad_bound: m,
        epsilon: eps,
        ..
    } = *k;
    let q = 1.0 + kappa * kappa;
    let den = 2.0 * alpha * c * eps - alpha * alpha * m * m * q;
    if !(den > 0.0) {
        return contract(format!(
            "2αcε − α²M²(1+κ²) must be positive, got {den:e} (α = {alpha:e} is too large)"
        ));
    }
    Ok(ConvexW {
        center,
        epsilon: eps,
        scale: eps / den,
        bounds: Boundedness {
            h: 2.0 * eps.sqrt() / den,
            r: alpha * l,
            xi: alpha * m * q.sqrt(),
        },
    })
}

impl ConvexW {
    pub fn initial_value(&self, x0: &[f64]) -> f64 {
        self.value(0.0, x0)
    }

    pub fn region(&self) -> SuccessRegion {
        SuccessRegion::Ball {
            center: self.center.clone(),
            radius_sq: self.epsilon,
        }
    }
}

impl RateSupermartingale for ConvexW {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.scale * plog_unchecked(dist_sq(x, &self.center) / self.epsilon) + t
    }

    fn stopped(&self, x: &[f64]) -> bool {
        dist_sq(x, &self.center) <= self.epsilon
    }

    fn horizon(&self) -> f64 {
        f64::INFINITY
    }

    fn boundedness(&self) -> Boundedness {
        self.bounds
    }
}

/// Rank-1 Alecton rate supermartingale:
/// `W_t = (2/ηΔ)·plog(n(1 − τ(x))/(γε)) + 2B(1 − τ(x)) + t`,
/// stopped on success or once `τ(x) ≤ ½`.
#[derive(Debug, Clone)]
pub struct AlectonW {
    pub u1: Vec<f64>,
    pub n: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub eigengap: f64,
    pub b: f64,
    pub bounds: Boundedness,
}

pub fn alecton_w(k: &AlectonConstants, eta: f64, b: f64, u1: Vec<f64>) -> Result<AlectonW> {
    k.validate()?;
    if u1.len() != k.n {
        return contract("u₁ dimension does not match n");
    }
    if !(eta > 0.0) || !(b > 0.0) {
        return contract("η and B must be positive");
    }
    let prod = eta * k.gamma * k.epsilon * k.eigengap * b;
    if prod > 1.0 {
        return contract(format!("horizon too large: ηγεΔB = {prod:e} exceeds 1"));
    }
    let n = k.n as f64;
    let r = eta * k.coherence * k.frobenius;
    Ok(AlectonW {
        u1,
        n: k.n,
        gamma: k.gamma,
        epsilon: k.epsilon,
        eta,
        eigengap: k.eigengap,
        b,
        bounds: Boundedness {
            h: 8.0 * n / (eta * k.gamma * k.eigengap * k.epsilon.sqrt()),
            r,
            xi: r * k.norm_bound,
        },
    })
}

impl AlectonW {
    /// `E[W₀] ≤ (2/ηΔ)·log(en/(γε)) + B√(2πγ)` for `x₀` uniform on a sphere.
    pub fn initial_bound(&self) -> f64 {
        let n = self.n as f64;
        2.0 / (self.eta * self.eigengap)
            * (std::f64::consts::E * n / (self.gamma * self.epsilon)).ln()
            + self.b * (2.0 * std::f64::consts::PI * self.gamma).sqrt()
    }

    pub fn tau(&self, x: &[f64]) -> f64 {
        let (d, sq) = dot_and_norm_sq(&self.u1, x);
        if sq == 0.0 {
            return 0.0;
        }
        tau_from_parts(d * d, sq, self.gamma, self.n)
    }

    pub fn region(&self) -> SuccessRegion {
        SuccessRegion::Alignment {
            direction: self.u1.clone(),
            epsilon: self.epsilon,
        }
    }
}

impl RateSupermartingale for AlectonW {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        let one_minus = 1.0 - self.tau(x);
        let arg = self.n as f64 * one_minus / (self.gamma * self.epsilon);
        2.0 / (self.eta * self.eigengap) * plog_unchecked(arg) + 2.0 * self.b * one_minus + t
    }

    fn stopped(&self, x: &[f64]) -> bool {
        alignment(&self.u1, x) >= 1.0 - self.epsilon || self.tau(x) <= 0.5
    }

    fn horizon(&self) -> f64 {
        self.b
    }

    fn boundedness(&self) -> Boundedness {
        self.bounds
    }
}

/// Outcome of a Monte-Carlo supermartingale check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    /// current value
    pub current: f64,
    /// estimate of the expected next value
    pub estimate: f64,
    pub std_err: f64,
    /// `current + 3·std_err − estimate`; non-negative iff the check passes
    pub margin: f64,
    pub pass: bool,
    pub draws: usize,
}

impl Verdict {
    fn from_diffs(current: f64, diffs: &[f64]) -> Verdict {
        let n = diffs.len() as f64;
        // a zero-variance update must give an exact zero standard error
        let mean = if diffs.iter().all(|&d| d == diffs[0]) {
            diffs[0]
        } else {
            diffs.iter().sum::<f64>() / n
        };
        let var = if diffs.len() > 1 {
            diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_err = (var / n).sqrt();
        let margin = 3.0 * std_err - mean;
        Verdict {
            current,
            estimate: current + mean,
            std_err,
            margin,
            pass: margin >= 0.0,
            draws: diffs.len(),
        }
    }
}

/// Check `E[W_{t+1}(x − G̃(x))] ≤ W_t(x)` at a non-stopped state with
/// `draws` independent updates.
pub fn verify_supermartingale<W: RateSupermartingale, S: UpdateSource>(
    w: &W,
    t: u64,
    x: &[f64],
    source: &S,
    draws: usize,
    rng: &mut StreamRng,
) -> Result<Verdict> {
    if draws < MIN_DRAWS {
        return contract(format!("need at least {MIN_DRAWS} draws, got {draws}"));
    }
    if x.len() != source.dim() {
        return contract("state dimension does not match update source");
    }
    if w.stopped(x) {
        return contract("state lies in the stopping set");
    }
    let t = t as f64;
    let current = w.value(t, x);
    let mut next = x.to_vec();
    let mut diffs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let d = source.draw(rng);
        next.copy_from_slice(x);
        apply_update(source, &d, &mut next);
        diffs.push(w.value(t + 1.0, &next) - current);
    }
    Ok(Verdict::from_diffs(current, &diffs))
}

/// The delay-compensated process
/// `V_t = W_t − HRξτt + HR·Σ_{k≥1} ‖x_{t−k+1} − x_{t−k}‖·Σ_{m≥k} P(τ̃ ≥ m)`,
/// frozen when `W` stops. Time counts single-coordinate writes.
pub struct StoppedProcess<'a, W> {
    w: &'a W,
    delays: DelayDistribution,
    tau: f64,
    hr: f64,
}

pub fn build_v<W: RateSupermartingale>(
    w: &W,
    delays: DelayDistribution,
) -> Result<StoppedProcess<'_, W>> {
    let tau = delays.mean();
    if !tau.is_finite() {
        return contract("delay distribution must have a finite mean");
    }
    let b = w.boundedness();
    Ok(StoppedProcess {
        w,
        delays,
        tau,
        hr: b.h * b.r,
    })
}

impl<W: RateSupermartingale> StoppedProcess<'_, W> {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn delays(&self) -> &DelayDistribution {
        &self.delays
    }

    fn tail_sums(&self, upto: usize) -> Vec<f64> {
        // index k holds Σ_{m≥k} P(τ̃ ≥ m); index 0 unused
        let mut out = vec![0.0; upto + 1];
        for (k, v) in out.iter_mut().enumerate().skip(1) {
            *v = self.delays.tail_sum_from(k as u64);
        }
        out
    }

    fn raw(&self, history: &[Vec<f64>], tails: &[f64]) -> f64 {
        let t = history.len() - 1;
        let b = self.w.boundedness();
        let mut corr = 0.0;
        for k in 1..=t {
            let step = dist_sq(&history[t - k + 1], &history[t - k]).sqrt();
            if step != 0.0 {
                corr += step * tails[k];
            }
        }
        self.w.value(t as f64, &history[t]) - b.h * b.r * b.xi * self.tau * t as f64
            + self.hr * corr
    }

    /// `V_t` for the history `x_0, …, x_t`.
    pub fn evaluate(&self, history: &[Vec<f64>]) -> Result<f64> {
        if history.is_empty() {
            return contract("empty history");
        }
        let stop = history
            .iter()
            .position(|x| self.w.stopped(x))
            .unwrap_or(history.len() - 1);
        let tails = self.tail_sums(stop);
        Ok(self.raw(&history[..=stop], &tails))
    }

    pub fn evaluate_trajectory(&self, history: &[Vec<f64>]) -> Result<Vec<f64>> {
        if history.is_empty() {
            return Ok(Vec::new());
        }
        let tails = self.tail_sums(history.len());
        let mut out = Vec::with_capacity(history.len());
        let mut frozen = None;
        for t in 0..history.len() {
            if let Some(v) = frozen {
                out.push(v);
                continue;
            }
            let v = self.raw(&history[..=t], &tails);
            if self.w.stopped(&history[t]) {
                frozen = Some(v);
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Check `E[V_{t+1}] ≤ V_t` given the history `x_0, …, x_t`: every
    /// coordinate read draws its own delay and sees `x_{t−τ̃}` (reads before
    /// time 0 see `x_0`).
    pub fn verify<S: UpdateSource>(
        &self,
        history: &[Vec<f64>],
        source: &S,
        draws: usize,
        rng: &mut StreamRng,
    ) -> Result<Verdict> {
        if draws < MIN_DRAWS {
            return contract(format!("need at least {MIN_DRAWS} draws, got {draws}"));
        }
        let Some(x) = history.last() else {
            return contract("empty history");
        };
        if history.iter().any(|h| self.w.stopped(h)) {
            return contract("history has already reached the stopping set");
        }
        if x.len() != source.dim() {
            return contract("state dimension does not match update source");
        }
        let t = history.len() - 1;
        let b = self.w.boundedness();
        // V_{t+1} − V_t = W_{t+1} − W_t − HRξτ
        //               + HR(τ‖x_{t+1} − x_t‖ − Σ_k ‖x_{t+1−k} − x_{t−k}‖ P(τ̃ ≥ k))
        let mut fixed = -b.h * b.r * b.xi * self.tau;
        for k in 1..=t {
            let step = dist_sq(&history[t + 1 - k], &history[t - k]).sqrt();
            if step != 0.0 {
                fixed -= self.hr * step * self.delays.tail(k as u64);
            }
        }
        let current = self.evaluate(history)?;
        let w_now = self.w.value(t as f64, x);
        let mut reads = Vec::new();
        let mut vals = Vec::new();
        let mut deltas = Vec::new();
        let mut next = x.clone();
        let mut diffs = Vec::with_capacity(draws);
        for _ in 0..draws {
            let d = source.draw(rng);
            reads.clear();
            source.reads(&d, &mut reads);
            vals.clear();
            for &i in &reads {
                let k = (self.delays.sample(rng) as usize).min(t);
                vals.push(history[t - k][i]);
            }
            deltas.clear();
            source.deltas(&d, &vals, &mut deltas);
            next.copy_from_slice(x);
            for &(i, dv) in &deltas {
                next[i] += dv;
            }
            let step = dist_sq(&next, x).sqrt();
            let dw = self.w.value(t as f64 + 1.0, &next) - w_now;
            diffs.push(dw + self.hr * self.tau * step + fixed);
        }
        Ok(Verdict::from_diffs(current, &diffs))
    }
}

/// Whether `W_t ≥ t` on a trajectory prefix that has not succeeded (for
/// `t < B`), and `W_t ≥ B` for `t ≥ B` once stopped outside success.
pub fn dominates_time<W: RateSupermartingale>(
    w: &W,
    xs: &[Vec<f64>],
    success: &SuccessRegion,
) -> bool {
    let values = w.evaluate_trajectory(xs);
    for (t, (x, v)) in xs.iter().zip(&values).enumerate() {
        if success.contains_unchecked(x) {
            return true;
        }
        let t = t as f64;
        if t < w.horizon() && *v < t {
            return false;
        }
    }
    true
}

/// A failure probability bound, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    /// the formula value before clamping (infinite when vacuous)
    pub raw: f64,
    /// formula exceeded 1 (or fell below 0) and was clamped
    pub clamped: bool,
    /// the formula's precondition failed; `value` is 1
    pub vacuous: bool,
}

impl BoundValue {
    fn from_raw(raw: f64) -> Self {
        let value = raw.clamp(0.0, 1.0);
        BoundValue {
            value,
            raw,
            clamped: value != raw,
            vacuous: false,
        }
    }

    fn vacuous() -> Self {
        BoundValue {
            value: 1.0,
            raw: f64::INFINITY,
            clamped: true,
            vacuous: true,
        }
    }
}

/// `P(F_T) ≤ min(1, W₀/T)`.
pub fn bound_sequential(w0: f64, t: f64) -> Result<BoundValue> {
    if !(t >= 1.0) {
        return contract("horizon T must be at least 1");
    }
    Ok(BoundValue::from_raw(w0 / t))
}

/// `P(F_T) ≤ min(1, W₀/((1 − HRξτ)T))`, vacuous once `HRξτ ≥ 1`.
pub fn bound_async(w0: f64, h: f64, r: f64, xi: f64, tau: f64, t: f64) -> Result<BoundValue> {
    if !(t >= 1.0) {
        return contract("horizon T must be at least 1");
    }
    let f = h * r * xi * tau;
    if !(f < 1.0) {
        return Ok(BoundValue::vacuous());
    }
    Ok(BoundValue::from_raw(w0 / ((1.0 - f) * t)))
}

#[derive(Debug, Clone, Copy)]
pub enum Corollary<'a> {
    /// full-precision asynchronous convex SGD at the Hogwild step size
    Hogwild {
        k: &'a ConvexConstants,
        dist0_sq: f64,
        t: f64,
    },
    /// low-precision asynchronous convex SGD at the Buckwild step size
    Buckwild {
        k: &'a ConvexConstants,
        dist0_sq: f64,
        t: f64,
    },
    /// asynchronous rank-1 Alecton
    Alecton { k: &'a AlectonConstants, tau: f64 },
    /// horizon of the simplified convex analysis
    SimplifiedHorizon {
        k: &'a ConvexConstants,
        dist0_sq: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorollaryValue {
    Failure(BoundValue),
    Alecton { horizon: f64, failure: BoundValue },
    Horizon(f64),
}

pub fn bound_corollaries(which: Corollary<'_>) -> Result<CorollaryValue> {
    match which {
        Corollary::Hogwild { k, dist0_sq, t } => {
            let num = k.grad_bound * k.grad_bound
                + 2.0 * k.lipschitz * k.grad_bound * k.tau * k.epsilon.sqrt();
            convex_failure(k, num, dist0_sq, t)
        }
        Corollary::Buckwild { k, dist0_sq, t } => {
            let k2 = k.kappa * k.kappa;
            let num = k.grad_bound * k.grad_bound * (1.0 + k2)
                + k.lipschitz * k.grad_bound * k.tau * (2.0 + k2) * k.epsilon.sqrt();
            convex_failure(k, num, dist0_sq, t)
        }
        Corollary::Alecton { k, tau } => {
            k.validate()?;
            let (horizon, failure) = alecton_horizon_and_failure(k, tau);
            Ok(CorollaryValue::Alecton { horizon, failure })
        }
        Corollary::SimplifiedHorizon { k, dist0_sq } => {
            k.validate()?;
            if !(dist0_sq > 0.0) {
                return contract("initial distance must be positive");
            }
            let c = k.strong_convexity;
            let m = k.grad_bound;
            let num = 2.0 * k.lipschitz * m * k.tau * k.epsilon.sqrt() + m * m;
            Ok(CorollaryValue::Horizon(
                num / (c * c * k.theta * k.epsilon) * (dist0_sq / k.epsilon).ln(),
            ))
        }
    }
}

fn convex_failure(k: &ConvexConstants, num: f64, dist0_sq: f64, t: f64) -> Result<CorollaryValue> {
    k.validate()?;
    if !(t >= 1.0) {
        return contract("horizon T must be at least 1");
    }
    if !(dist0_sq >= 0.0) {
        return contract("initial distance must be non-negative");
    }
    let c = k.strong_convexity;
    let raw =
        num / (c * c * k.epsilon * k.theta * t) * (std::f64::consts::E * dist0_sq / k.epsilon).ln();
    Ok(CorollaryValue::Failure(BoundValue::from_raw(raw)))
}

/// `T = 4nμ⁴‖A‖_F² / (Δ²εγϑ√(2πγ)) · log(en/(γε))` and
/// `P(F_T) ≤ √(8πγ)μ² / (μ² − 4Cϑτ√ε)`.
pub(crate) fn alecton_horizon_and_failure(k: &AlectonConstants, tau: f64) -> (f64, BoundValue) {
    use std::f64::consts::{E, PI};
    let n = k.n as f64;
    let mu2 = k.coherence * k.coherence;
    let a2 = k.frobenius * k.frobenius;
    let horizon = 4.0 * n * mu2 * mu2 * a2
        / (k.eigengap * k.eigengap * k.epsilon * k.gamma * k.theta * (2.0 * PI * k.gamma).sqrt())
        * (E * n / (k.gamma * k.epsilon)).ln();
    let den = mu2 - 4.0 * k.norm_bound * k.theta * tau * k.epsilon.sqrt();
    let failure = if den > 0.0 {
        BoundValue::from_raw((8.0 * PI * k.gamma).sqrt() * mu2 / den)
    } else {
        BoundValue::vacuous()
    };
    (horizon, failure)
}

/// Monte-Carlo estimate of `E‖G̃(u) − G̃(v)‖` with common random draws,
/// as `(mean, standard error)`.
pub fn estimate_update_difference<S: UpdateSource>(
    source: &S,
    u: &[f64],
    v: &[f64],
    draws: usize,
    rng: &mut StreamRng,
) -> (f64, f64) {
    let mut a = u.to_vec();
    let mut b = v.to_vec();
    let samples: Vec<f64> = (0..draws)
        .map(|_| {
            let d = source.draw(rng);
            a.copy_from_slice(u);
            b.copy_from_slice(v);
            apply_update(source, &d, &mut a);
            apply_update(source, &d, &mut b);
            a.iter()
                .zip(u)
                .zip(b.iter().zip(v))
                .map(|((an, ao), (bn, bo))| ((an - ao) - (bn - bo)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    mean_and_se(&samples)
}

/// Monte-Carlo estimate of `E‖G̃(x)‖` as `(mean, standard error)`.
pub fn estimate_update_magnitude<S: UpdateSource>(
    source: &S,
    x: &[f64],
    draws: usize,
    rng: &mut StreamRng,
) -> (f64, f64) {
    let mut a = x.to_vec();
    let samples: Vec<f64> = (0..draws)
        .map(|_| {
            let d = source.draw(rng);
            a.copy_from_slice(x);
            apply_update(source, &d, &mut a);
            dist_sq(&a, x).sqrt()
        })
        .collect();
    mean_and_se(&samples)
}

pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plog_examples() {
        assert_eq!(plog(1.0).unwrap(), 1.0);
        assert_eq!(plog(0.5).unwrap(), 0.5);
        assert!((plog(std::f64::consts::E).unwrap() - 2.0).abs() < 1e-15);
        assert!(plog(-0.1).is_err());
    }

    #[test]
    fn tau_examples() {
        let u = [0.6, 0.8];
        assert!((tau_fn(&u, &u, 0.3, 2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(tau_fn(&[0.8, -0.6], &u, 0.3, 2).unwrap(), 0.0);
        let x = [1.0, 2.0];
        let a = alignment(&u, &x);
        assert!((tau_fn(&x, &u, 2.0, 2).unwrap() - a).abs() < 1e-15);
        assert!(tau_fn(&[0.0, 0.0], &u, 0.3, 2).is_err());
    }

    fn k() -> ConvexConstants {
        ConvexConstants::new(1.0, 1.0, 1.0, 0.01, 0.5, 0.0, 0.0).unwrap()
    }

    #[test]
    fn convex_w_constants() {
        let w = convex_w(&k(), 0.005, vec![0.0], false).unwrap();
        assert!((w.bounds.h - 0.2 / 7.5e-5).abs() < 1e-9);
        assert!((w.bounds.r - 0.005).abs() < 1e-18);
        // on the ball boundary the log term is 1
        let x = [0.1];
        assert!((w.value(3.0, &x) - (0.01 / 7.5e-5 + 3.0)).abs() < 1e-9);
        assert!(convex_w(&k(), 0.03, vec![0.0], false).is_err());
    }

    #[test]
    fn sequential_and_async_bounds() {
        assert_eq!(bound_sequential(100.0, 1000.0).unwrap().value, 0.1);
        assert!(bound_sequential(100.0, 10.0).unwrap().clamped);
        let half = bound_async(100.0, 1.0, 1.0, 1.0, 0.5, 1000.0).unwrap();
        assert_eq!(half.value, 0.2);
        assert!(bound_async(1.0, 1.0, 1.0, 1.0, 1.0, 10.0).unwrap().vacuous);
    }

    #[test]
    fn corollary_examples() {
        let t = 1e6;
        let CorollaryValue::Failure(b) = bound_corollaries(Corollary::Hogwild {
            k: &k(),
            dist0_sq: 1.0,
            t,
        })
        .unwrap() else {
            panic!()
        };
        let want = 200.0 * (1.0 + 100f64.ln()) / t;
        assert!((b.value - want).abs() < 1e-15);
        let CorollaryValue::Horizon(h) = bound_corollaries(Corollary::SimplifiedHorizon {
            k: &k(),
            dist0_sq: 1.0,
        })
        .unwrap() else {
            panic!()
        };
        assert!((h - 200.0 * 100f64.ln()).abs() < 1e-9);
        assert_eq!(h.round(), 921.0);
    }

    #[test]
    fn zero_delay_v_equals_w() {
        let w = convex_w(&k(), 0.004, vec![0.0], false).unwrap();
        let v = build_v(&w, DelayDistribution::Zero).unwrap();
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0 - 0.01 * i as f64]).collect();
        assert_eq!(
            v.evaluate_trajectory(&xs).unwrap(),
            w.evaluate_trajectory(&xs)
        );
    }

    #[test]
    fn constant_one_delay_v_reduces() {
        let w = convex_w(&k(), 0.004, vec![0.0], false).unwrap();
        let v = build_v(&w, DelayDistribution::Constant(1)).unwrap();
        let xs = vec![vec![1.0], vec![0.9], vec![0.7]];
        let b = w.bounds;
        let want = w.value(2.0, &xs[2]) - b.h * b.r * b.xi * 2.0 + b.h * b.r * 0.2;
        assert!((v.evaluate(&xs).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn frozen_after_success() {
        let w = convex_w(&k(), 0.004, vec![0.0], false).unwrap();
        let xs = vec![vec![1.0], vec![0.05], vec![0.5], vec![2.0]];
        let vals = w.evaluate_trajectory(&xs);
        assert_eq!(vals[1], vals[2]);
        assert_eq!(vals[1], vals[3]);
        let v = build_v(&w, DelayDistribution::geometric(0.5).unwrap()).unwrap();
        let vv = v.evaluate_trajectory(&xs).unwrap();
        assert_eq!(vv[1], vv[3]);
        assert_eq!(v.evaluate(&xs).unwrap(), vv[1]);
    }
}

//! Verification suites behind `wildtamer verify`.
//!
//! Each suite returns a list of [`Check`]s (name, statistic, threshold,
//! verdict). [`Scale::Quick`] shrinks state counts and run counts for
//! interactive use; [`Scale::Full`] runs the sizes the acceptance tests use.

use std::thread;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::alecton::{
    alecton_step_size, alecton_t_and_bound, default_theta, run_alecton, AlectonRunSpec,
    AlectonSource, SpectralMatrix,
};
use crate::convex_sgd::{
    solve_optimum, step_size_buckwild, step_size_hogwild, train, train_quadratic, ConvexRunSpec,
    Executor, GlmObjective, Noise, Precision, Quadratic, StepRule,
};
use crate::data_io::{gen_spectral_matrix, gen_synthetic_logistic, log_spaced_spectrum};
use crate::engine::{
    measure_tau, run_async, run_sequential, run_simulated, stream_rng, DelayDistribution,
    ParamVector, RunConfig, StreamRng,
};
use crate::error::{contract, Result};
use crate::fixedpoint::{quantize, Bits, FixedPointSpec, QuantState};
use crate::martingale::{
    alecton_w, bound_async, bound_corollaries, bound_sequential, build_v, convex_w, dominates_time,
    estimate_update_difference, estimate_update_magnitude, plog, plog_derivative, tau_fn,
    verify_supermartingale, AlectonW, Corollary, CorollaryValue, RateSupermartingale, Verdict,
    MIN_DRAWS,
};
use crate::model::{
    alignment, dist_sq, estimate_constants, norm, norm_l1, AlectonConstants, ConvexConstants,
    Dataset, GlmModel,
};

const SEED: u64 = 20_160_612;

pub const SUITES: &[&str] = &[
    "plog",
    "tau",
    "quantizer",
    "formulas",
    "lipschitz",
    "supermartingale",
    "stopped",
    "engine",
    "bounds",
    "parity",
    "alecton",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

impl Scale {
    fn pick<T>(self, quick: T, full: T) -> T {
        match self {
            Scale::Quick => quick,
            Scale::Full => full,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// Passes iff `statistic ≤ threshold`.
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
        }
    }

    /// Passes iff `statistic < threshold`.
    pub fn below(name: impl Into<String>, statistic: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            statistic,
            threshold,
            pass: statistic < threshold,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Check {
        Check {
            name: name.into(),
            statistic: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            pass: ok,
        }
    }
}

pub fn run_suite(name: &str, scale: Scale) -> Result<Vec<Check>> {
    match name {
        "plog" => plog_suite(),
        "tau" => tau_suite(),
        "quantizer" => quantizer_suite(scale),
        "formulas" => formula_suite(),
        "lipschitz" => lipschitz_suite(scale),
        "supermartingale" => supermartingale_suite(scale),
        "stopped" => stopped_suite(scale),
        "engine" => engine_suite(scale),
        "bounds" => bounds_suite(scale),
        "parity" => parity_suite(scale),
        "alecton" => alecton_suite(scale),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, scale)?);
            }
            Ok(out)
        }
        other => contract(format!(
            "unknown suite `{other}`; expected one of {} or all",
            SUITES.join(", ")
        )),
    }
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn unit_gaussian(n: usize, rng: &mut StreamRng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let r = norm(&v);
    v.into_iter().map(|x| x / r).collect()
}

/// Binomial standard error of a failure fraction under probability `p`.
pub fn binomial_se(p: f64, runs: usize) -> f64 {
    (p * (1.0 - p) / runs as f64).sqrt()
}

// ---------------------------------------------------------------- benchmarks

/// The synthetic logistic benchmark together with its regularized optimum.
#[derive(Debug, Clone)]
pub struct LogisticBench {
    pub dataset: Dataset,
    pub x_star: Vec<f64>,
    pub reg: f64,
}

impl LogisticBench {
    pub fn generate(n: usize, m: usize, nnz: usize, reg: f64, seed: u64) -> Result<Self> {
        let (dataset, _) = gen_synthetic_logistic(n, m, nnz, seed)?;
        let x_star = solve_optimum(&dataset, GlmModel::Logistic, reg, 1e-10, 1_000_000)?;
        Ok(LogisticBench {
            dataset,
            x_star,
            reg,
        })
    }

    /// Desk-scale default: 1000 features, 10⁴ samples, 10 nonzeros.
    pub fn standard(reg: f64) -> Result<Self> {
        Self::generate(1000, 10_000, 10, reg, 1)
    }

    /// Dense 10-feature instance used where hundreds of runs are needed.
    pub fn small() -> Result<Self> {
        Self::generate(10, 1000, 10, 0.1, 1)
    }

    pub fn sup_norm(&self) -> f64 {
        self.x_star.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn constants(
        &self,
        box_radius: f64,
        epsilon: f64,
        theta: f64,
        tau: f64,
    ) -> Result<ConvexConstants> {
        estimate_constants(&self.dataset, GlmModel::Logistic, self.reg, box_radius)?
            .with_run(epsilon, theta, 0.0, tau)
    }
}

/// Default spectral matrix: `n`×`n` with 10 eigenvalues log-spaced in [1, 2].
pub fn standard_spectral(n: usize) -> Result<SpectralMatrix> {
    gen_spectral_matrix(n, &log_spaced_spectrum(10, 1.0, 2.0), 7)
}

/// 1-D quadratic `½c(x − x*)²` with optional additive noise, and its
/// constants over `|x − x*| ≤ radius`.
fn quadratic_1d(
    sigma: f64,
    radius: f64,
    epsilon: f64,
    tau: f64,
) -> Result<(Quadratic, ConvexConstants)> {
    let q = Quadratic::new(vec![0.0], 1.0, sigma, Noise::Rademacher, 1.0)?;
    let k = q.constants(radius).with_run(epsilon, 0.5, 0.0, tau)?;
    Ok((q, k))
}

// ---------------------------------------------------------------- plog / τ

pub fn plog_suite() -> Result<Vec<Check>> {
    // dyadic grid keeps the linear branch exact in floating point
    let grid: Vec<f64> = (0..10_000)
        .map(|i| plog(i as f64 / 1024.0))
        .collect::<Result<_>>()?;
    let concavity = max_of(grid.windows(3).map(|w| w[0] + w[2] - 2.0 * w[1]));
    let decrease = max_of(grid.windows(2).map(|w| w[0] - w[1]));

    let mut first_order = f64::NEG_INFINITY;
    for i in 0..=640 {
        let x = 1.0 + i as f64 / 64.0;
        let px = plog(x)?;
        for k in 0..=672 {
            let d = (k as f64 - 32.0) / 64.0;
            first_order = first_order.max(plog(x * (1.0 + d))? - px - d);
        }
    }
    Ok(vec![
        Check::at_most("plog.concavity.max_second_difference", concavity, 0.0),
        Check::at_most("plog.monotone.max_decrease", decrease, 0.0),
        Check::at_most("plog.first_order.max_excess", first_order, 0.0),
        Check::at_most("plog.value_at_1", (plog(1.0)? - 1.0).abs(), 0.0),
        Check::at_most("plog.value_at_half", (plog(0.5)? - 0.5).abs(), 0.0),
        Check::at_most(
            "plog.value_at_e",
            (plog(std::f64::consts::E)? - 2.0).abs(),
            2.0 * f64::EPSILON,
        ),
        Check::at_most(
            "plog.slope_jump_at_1",
            (plog_derivative(1.0) - plog_derivative(1.0 - 1e-12)).abs(),
            1e-11,
        ),
        Check::holds("plog.rejects_negative", plog(-1e-300).is_err()),
    ])
}

pub fn tau_suite() -> Result<Vec<Check>> {
    let n = 50;
    let gamma = 0.1;
    let epsilon = 0.1;
    let mut rng = stream_rng(SEED, 0x7a);
    let u1 = unit_gaussian(n, &mut rng);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut gap = f64::NEG_INFINITY;
    let mut collapse = 0.0f64;
    let mut outside = 0;
    while outside < 10_000 {
        let a = rng.random_range(0.0..20.0);
        let x: Vec<f64> = u1
            .iter()
            .map(|u| a * u + rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt())
            .collect();
        let t = tau_fn(&x, &u1, gamma, n)?;
        lo = lo.min(t);
        hi = hi.max(t);
        let full = tau_fn(&x, &u1, n as f64, n)?;
        collapse = collapse.max((full - alignment(&u1, &x)).abs());
        if alignment(&u1, &x) < 1.0 - epsilon {
            outside += 1;
            gap = gap.max(gamma * epsilon / n as f64 - (1.0 - t));
        }
    }

    let mut e0 = vec![0.0; n];
    e0[0] = 1.0;
    let mut orth: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    orth[0] = 0.0;

    Ok(vec![
        Check::at_most("tau.range.min_below_zero", -lo, 0.0),
        Check::at_most("tau.range.max_above_one", hi - 1.0, 0.0),
        Check::at_most(
            "tau.at_u1",
            (tau_fn(&e0, &e0, gamma, n)? - 1.0).abs(),
            4.0 * f64::EPSILON,
        ),
        Check::at_most("tau.orthogonal", tau_fn(&orth, &e0, gamma, n)?, 0.0),
        Check::at_most("tau.gamma_equals_n.max_abs_diff", collapse, 1e-14),
        Check::below("tau.one_minus_tau_exceeds_gamma_eps_over_n", gap, 0.0),
        Check::holds(
            "tau.rejects_zero_vector",
            tau_fn(&vec![0.0; n], &u1, gamma, n).is_err(),
        ),
    ])
}

// ---------------------------------------------------------------- quantizer

pub fn quantizer_suite(scale: Scale) -> Result<Vec<Check>> {
    let draws: u64 = scale.pick(100_000, 1_000_000);
    let spec = FixedPointSpec::new(Bits::Eight, 0.01)?;
    let mut rng = stream_rng(SEED, 0x51);
    let mut state = QuantState::new(SEED, 0x52);
    let tol = 4.0 * (spec.scale / 2.0) / (draws as f64).sqrt();
    let start = Instant::now();
    let mut out = Vec::new();
    for k in 0..20 {
        let x: f64 = rng.random_range(-1.0..1.0);
        let mut sum: i64 = 0;
        for _ in 0..draws {
            sum += quantize(x, &spec, &mut state)? as i64;
        }
        let mean = sum as f64 * spec.scale / draws as f64;
        out.push(Check::at_most(
            format!("quantizer.bias[{k}]"),
            (mean - x).abs(),
            tol,
        ));
    }
    out.push(Check::below(
        "quantizer.runtime_seconds",
        start.elapsed().as_secs_f64(),
        10.0,
    ));
    Ok(out)
}

// ---------------------------------------------------------------- formulas

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Hand-evaluated examples for every closed-form evaluator.
pub fn formula_suite() -> Result<Vec<Check>> {
    let base = ConvexConstants::new(1.0, 1.0, 1.0, 0.01, 0.5, 0.0, 0.0)?;
    let t10 = base.with_tau(10.0)?;
    let t10k1 = t10.with_kappa(1.0)?;
    let mut out = vec![
        Check::at_most(
            "formulas.hogwild_tau0",
            rel(step_size_hogwild(&base), 0.005),
            1e-12,
        ),
        Check::at_most(
            "formulas.hogwild_tau10",
            rel(step_size_hogwild(&t10), 0.005 / 3.0),
            1e-12,
        ),
        Check::at_most(
            "formulas.buckwild_tau10_kappa1",
            rel(step_size_buckwild(&t10k1), 0.001),
            1e-12,
        ),
    ];

    let w = convex_w(&base, 0.005, vec![0.0], false)?;
    out.push(Check::at_most(
        "formulas.convex_w_lipschitz",
        rel(w.bounds.h, 0.2 / 7.5e-5),
        1e-12,
    ));
    out.push(Check::at_most(
        "formulas.convex_w_at_boundary",
        rel(w.value(3.0, &[0.1]), 0.01 / 7.5e-5 + 3.0),
        1e-12,
    ));

    let ak = AlectonConstants {
        n: 10,
        eigengap: 1.0,
        coherence: 1.0,
        gamma: 0.1,
        theta: 0.5,
        epsilon: 0.1,
        norm_bound: 1.0,
        frobenius: 2f64.sqrt(),
    };
    out.push(Check::at_most(
        "formulas.alecton_step",
        rel(alecton_step_size(&ak), 1.25e-4),
        1e-12,
    ));
    let aw = alecton_w(&ak, 1e-4, 1e4, {
        let mut u = vec![0.0; 10];
        u[0] = 1.0;
        u
    })?;
    let w0 =
        2e4 * (std::f64::consts::E * 10.0 / 0.01).ln() + 1e4 * (0.2 * std::f64::consts::PI).sqrt();
    out.push(Check::at_most(
        "formulas.alecton_initial_bound",
        rel(aw.initial_bound(), w0),
        1e-12,
    ));
    out.push(Check::holds(
        "formulas.alecton_horizon_too_large",
        alecton_w(&ak, 1e-4, 1e7, aw.u1.clone()).is_err(),
    ));

    let tk = AlectonConstants {
        n: 100,
        frobenius: 10f64.sqrt(),
        gamma: 0.01,
        ..ak
    };
    let t_hand = 4.0 * 100.0 * 10.0
        / (0.1 * 0.01 * 0.5 * (2.0 * std::f64::consts::PI * 0.01).sqrt())
        * (std::f64::consts::E * 100.0 / (0.01 * 0.1)).ln();
    out.push(Check::at_most(
        "formulas.alecton_horizon",
        rel(alecton_t_and_bound(&tk, 0.0)?.horizon, t_hand),
        1e-12,
    ));

    out.push(Check::at_most(
        "formulas.bound_sequential",
        (bound_sequential(100.0, 1000.0)?.value - 0.1).abs(),
        0.0,
    ));
    let seq = bound_sequential(100.0, 1e4)?.value;
    out.push(Check::at_most(
        "formulas.bound_async_zero_factor",
        (bound_async(100.0, 0.0, 1.0, 1.0, 1.0, 1e4)?.value - seq).abs(),
        0.0,
    ));
    out.push(Check::at_most(
        "formulas.bound_async_half_factor",
        (bound_async(100.0, 0.5, 1.0, 1.0, 1.0, 1e4)?.value - 2.0 * seq).abs(),
        0.0,
    ));
    out.push(Check::holds(
        "formulas.bound_async_vacuous",
        bound_async(100.0, 1.0, 1.0, 1.0, 1.0, 1e4)?.vacuous,
    ));

    let cor31 = |k: &ConvexConstants, t: f64| -> Result<f64> {
        match bound_corollaries(Corollary::Hogwild {
            k,
            dist0_sq: 1.0,
            t,
        })? {
            CorollaryValue::Failure(b) => Ok(b.raw),
            _ => unreachable!(),
        }
    };
    let cor32 = |k: &ConvexConstants, t: f64| -> Result<f64> {
        match bound_corollaries(Corollary::Buckwild {
            k,
            dist0_sq: 1.0,
            t,
        })? {
            CorollaryValue::Failure(b) => Ok(b.raw),
            _ => unreachable!(),
        }
    };
    out.push(Check::at_most(
        "formulas.corollary_hogwild",
        rel(cor31(&base, 1e4)?, 200.0 * (1.0 + 100f64.ln()) / 1e4),
        1e-12,
    ));
    let horizon = match bound_corollaries(Corollary::SimplifiedHorizon {
        k: &base,
        dist0_sq: 1.0,
    })? {
        CorollaryValue::Horizon(h) => h,
        _ => unreachable!(),
    };
    out.push(Check::at_most(
        "formulas.simplified_horizon",
        (horizon - 921.034).abs(),
        1e-3,
    ));

    // κ = 0 must reproduce the full-precision formulas bit for bit
    let mut rng = stream_rng(SEED, 0xf0);
    let mut mismatches = 0u32;
    for _ in 0..1000 {
        let k = ConvexConstants::new(
            rng.random_range(0.01..2.0),
            rng.random_range(0.0..5.0),
            rng.random_range(0.1..5.0),
            rng.random_range(1e-3..1.0),
            rng.random_range(0.05..0.95),
            0.0,
            rng.random_range(0.0..20.0),
        )?;
        let t = rng.random_range(1.0..1e6);
        if step_size_buckwild(&k) != step_size_hogwild(&k) || cor32(&k, t)? != cor31(&k, t)? {
            mismatches += 1;
        }
    }
    out.push(Check::at_most(
        "formulas.kappa_zero_identity.mismatches",
        mismatches as f64,
        0.0,
    ));
    Ok(out)
}

// ---------------------------------------------------------------- (H, R, ξ)

pub fn lipschitz_suite(scale: Scale) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let states = scale.pick(10, 100);
    let draws = MIN_DRAWS;
    let mut rng = stream_rng(SEED, 0x1b);

    // convex W and the GLM update on the small logistic instance
    let bench = LogisticBench::small()?;
    let radius = bench.sup_norm() + 1.0;
    let k = bench.constants(radius, 0.1, 0.5, 0.0)?;
    let alpha = step_size_hogwild(&k);
    let w = convex_w(&k, alpha, bench.x_star.clone(), false)?;
    let source = GlmObjective::new(&bench.dataset, GlmModel::Logistic, bench.reg, alpha)?;
    let dim = bench.dataset.dim;
    let in_box = |rng: &mut StreamRng| -> Vec<f64> {
        (0..dim)
            .map(|_| rng.random_range(-radius..radius))
            .collect()
    };

    let mut h_ratio = 0.0f64;
    for _ in 0..10_000 {
        let u = in_box(&mut rng);
        let v = in_box(&mut rng);
        let d = dist_sq(&u, &v).sqrt();
        h_ratio = h_ratio.max((w.value(0.0, &u) - w.value(0.0, &v)).abs() / d);
    }
    out.push(Check::at_most("lipschitz.convex_w.h", h_ratio, w.bounds.h));

    let mut r_excess = f64::NEG_INFINITY;
    let mut xi_excess = f64::NEG_INFINITY;
    for s in 0..states {
        let u = in_box(&mut rng);
        let mut v = u.clone();
        if s % 2 == 0 {
            let j = rng.random_range(0..dim);
            v[j] = rng.random_range(-radius..radius);
        } else {
            v = in_box(&mut rng);
        }
        let (mean, se) = estimate_update_difference(&source, &u, &v, draws, &mut rng);
        r_excess = r_excess.max(mean - 3.0 * se - w.bounds.r * norm_l1(&sub(&u, &v)));
        let (mean, se) = estimate_update_magnitude(&source, &u, draws, &mut rng);
        xi_excess = xi_excess.max(mean - 3.0 * se - w.bounds.xi);
    }
    out.push(Check::at_most("lipschitz.glm.r.max_excess", r_excess, 0.0));
    out.push(Check::at_most(
        "lipschitz.glm.xi.max_excess",
        xi_excess,
        0.0,
    ));

    // Alecton W and update on the n = 100 spectral matrix
    let m = standard_spectral(100)?;
    let (ak, eta, b) = alecton_setup(&m, 1.0)?;
    let aw = alecton_w(&ak, eta, b, m.top_eigenvector())?;
    let asrc = AlectonSource::new(&m, eta);
    let mut h_ratio = 0.0f64;
    for _ in 0..10_000 {
        let u = alecton_state(&aw, &mut rng);
        let v = alecton_state(&aw, &mut rng);
        let d = dist_sq(&u, &v).sqrt();
        h_ratio = h_ratio.max((aw.value(0.0, &u) - aw.value(0.0, &v)).abs() / d);
    }
    out.push(Check::at_most(
        "lipschitz.alecton_w.h",
        h_ratio,
        aw.bounds.h,
    ));
    let mut r_excess = f64::NEG_INFINITY;
    let mut xi_excess = f64::NEG_INFINITY;
    for _ in 0..states {
        let u = alecton_state(&aw, &mut rng);
        let v = alecton_state(&aw, &mut rng);
        let (mean, se) = estimate_update_difference(&asrc, &u, &v, draws, &mut rng);
        r_excess = r_excess.max(mean - 3.0 * se - aw.bounds.r * norm_l1(&sub(&u, &v)));
        let (mean, se) = estimate_update_magnitude(&asrc, &u, draws, &mut rng);
        // ξ = R·C with C the 1-norm of the iterate
        xi_excess = xi_excess.max(mean - 3.0 * se - aw.bounds.r * norm_l1(&u));
    }
    out.push(Check::at_most(
        "lipschitz.alecton.r.max_excess",
        r_excess,
        0.0,
    ));
    out.push(Check::at_most(
        "lipschitz.alecton.xi.max_excess",
        xi_excess,
        0.0,
    ));
    Ok(out)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Constants, theoretical step size and the largest admissible horizon for
/// Alecton on `m` with `γ = 0.1`, `ε = 0.1`.
fn alecton_setup(m: &SpectralMatrix, norm_bound: f64) -> Result<(AlectonConstants, f64, f64)> {
    let epsilon = 0.1;
    let k = m.constants(0.1, default_theta(epsilon), epsilon, norm_bound);
    let eta = alecton_step_size(&k);
    let b = (1.0 - 1e-9) / (eta * k.gamma * k.epsilon * k.eigengap);
    Ok((k, eta, b))
}

/// Random iterate outside the stopping set with `‖x‖ ≥ 1`: a Gaussian
/// direction plus a random amount of `u₁`.
fn alecton_state(w: &AlectonW, rng: &mut StreamRng) -> Vec<f64> {
    let u1 = &w.u1;
    let n = u1.len();
    loop {
        let a = rng.random_range(0.0..3.0);
        let r = rng.random_range(1.0..3.0);
        let g = unit_gaussian(n, rng);
        let x: Vec<f64> = g.iter().zip(u1).map(|(g, u)| r * (g + a * u)).collect();
        if norm(&x) >= 1.0 && !w.stopped(&x) {
            return x;
        }
    }
}

// ---------------------------------------------------------------- W checks

#[derive(Debug, Default)]
struct VerdictSummary {
    failures: usize,
    worst: f64,
    max_se: f64,
    count: usize,
}

impl VerdictSummary {
    fn new() -> Self {
        VerdictSummary {
            worst: f64::NEG_INFINITY,
            ..Default::default()
        }
    }

    fn add(&mut self, v: &Verdict) {
        self.count += 1;
        if !v.pass {
            self.failures += 1;
        }
        self.worst = self.worst.max(-v.margin);
        self.max_se = self.max_se.max(v.std_err);
    }

    fn checks(&self, prefix: &str) -> Vec<Check> {
        vec![
            Check::at_most(
                format!("{prefix}.failures_of_{}", self.count),
                self.failures as f64,
                0.0,
            ),
            Check::at_most(format!("{prefix}.worst_excess_over_3se"), self.worst, 0.0),
        ]
    }
}

pub fn supermartingale_suite(scale: Scale) -> Result<Vec<Check>> {
    let states = scale.pick(10, 100);
    let draws = MIN_DRAWS;
    let mut rng = stream_rng(SEED, 0x3a);
    let mut out = Vec::new();

    // (a) exact gradients on the 1-D quadratic
    let (q, k) = quadratic_1d(0.0, 2.0, 0.01, 0.0)?;
    let alpha = step_size_hogwild(&k);
    let q = Quadratic { alpha, ..q };
    let w = convex_w(&k, alpha, vec![0.0], false)?;
    let mut summary = VerdictSummary::new();
    while summary.count < states {
        let x = [rng.random_range(-2.0..2.0)];
        if x[0] * x[0] <= k.epsilon {
            continue;
        }
        let t = rng.random_range(0..1000);
        summary.add(&verify_supermartingale(&w, t, &x, &q, draws, &mut rng)?);
    }
    out.extend(summary.checks("supermartingale.quadratic"));
    out.push(Check::at_most(
        "supermartingale.quadratic.max_std_err",
        summary.max_se,
        0.0,
    ));

    // (b) the logistic benchmark
    let bench = LogisticBench::standard(0.01)?;
    let radius = bench.sup_norm() + 1.0;
    let k = bench.constants(radius, 0.1, 0.5, 0.0)?;
    let alpha = step_size_hogwild(&k);
    let w = convex_w(&k, alpha, bench.x_star.clone(), false)?;
    let source = GlmObjective::new(&bench.dataset, GlmModel::Logistic, bench.reg, alpha)?;
    let dim = bench.dataset.dim;
    let mut summary = VerdictSummary::new();
    for _ in 0..states {
        let r2 = rng.random_range(k.epsilon..10.0 * k.epsilon);
        let dir = unit_gaussian(dim, &mut rng);
        let x: Vec<f64> = bench
            .x_star
            .iter()
            .zip(&dir)
            .map(|(c, d)| c + r2.sqrt() * d)
            .collect();
        let t = rng.random_range(0..1000);
        summary.add(&verify_supermartingale(
            &w, t, &x, &source, draws, &mut rng,
        )?);
    }
    out.extend(summary.checks("supermartingale.logistic"));

    // (c) Alecton on n = 100
    let m = standard_spectral(100)?;
    let (ak, eta, b) = alecton_setup(&m, 1.0)?;
    let aw = alecton_w(&ak, eta, b, m.top_eigenvector())?;
    let asrc = AlectonSource::new(&m, eta);
    let mut summary = VerdictSummary::new();
    for _ in 0..states {
        let x = alecton_state(&aw, &mut rng);
        let t = rng.random_range(0..1000);
        summary.add(&verify_supermartingale(&aw, t, &x, &asrc, draws, &mut rng)?);
    }
    out.extend(summary.checks("supermartingale.alecton"));

    // W_t ≥ t until success, along sequential trajectories
    let (q, k) = quadratic_1d(0.5, 2.0, 0.01, 0.0)?;
    let alpha = step_size_hogwild(&k);
    let q = Quadratic { alpha, ..q };
    let w = convex_w(&k, alpha, vec![0.0], false)?;
    let ball = w.region();
    let mut violations = 0;
    for seed in 0..20 {
        let history = delayed_history(&q, &[1.5], &DelayDistribution::Zero, 5000, seed)?;
        if !dominates_time(&w, &history, &ball) {
            violations += 1;
        }
    }
    let cone = aw.region();
    for seed in 0..5 {
        let mut r = stream_rng(seed, 0xd0);
        let x0 = alecton_state(&aw, &mut r);
        let cfg = RunConfig {
            max_updates: 2000,
            stop_on_success: false,
            snapshot_every: Some(1),
            seed,
            ..RunConfig::default()
        };
        let run = run_sequential(&asrc, &ParamVector::from_slice(&x0), None, &cfg)?;
        let mut history = vec![x0];
        history.extend(run.snapshots.into_iter().map(|s| s.values));
        if !dominates_time(&aw, &history, &cone) {
            violations += 1;
        }
    }
    out.push(Check::at_most(
        "supermartingale.dominates_time.violations",
        violations as f64,
        0.0,
    ));
    Ok(out)
}

pub fn stopped_suite(scale: Scale) -> Result<Vec<Check>> {
    let states = scale.pick(10, 100);
    let mut rng = stream_rng(SEED, 0x5b);
    let mut out = Vec::new();
    for p in [0.5, 0.9] {
        let delays = DelayDistribution::geometric(p)?;
        let (q, k) = quadratic_1d(0.5, 2.0, 0.01, delays.mean())?;
        let alpha = step_size_hogwild(&k);
        let q = Quadratic { alpha, ..q };
        let w = convex_w(&k, alpha, vec![0.0], false)?;
        let v = build_v(&w, delays.clone())?;
        let mut summary = VerdictSummary::new();
        while summary.count < states {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let x0 = vec![sign * rng.random_range(0.3..1.5)];
            let len = rng.random_range(5..200);
            let history = delayed_history(&q, &x0, &delays, len, rng.random())?;
            if history.iter().any(|x| w.stopped(x)) {
                continue;
            }
            summary.add(&v.verify(&history, &q, MIN_DRAWS, &mut rng)?);
        }
        out.extend(summary.checks(&format!("stopped.geometric_{p}")));
    }

    // zero delays: V and W agree bit for bit along whole trajectories
    let (q, k) = quadratic_1d(0.5, 2.0, 0.01, 0.0)?;
    let alpha = step_size_hogwild(&k);
    let q = Quadratic { alpha, ..q };
    let w = convex_w(&k, alpha, vec![0.0], false)?;
    let v = build_v(&w, DelayDistribution::Zero)?;
    let mut mismatches = 0usize;
    for seed in 0..20 {
        let history = delayed_history(&q, &[1.0], &DelayDistribution::Zero, 2000, seed)?;
        let vs = v.evaluate_trajectory(&history)?;
        let ws = w.evaluate_trajectory(&history);
        mismatches += vs
            .iter()
            .zip(&ws)
            .filter(|(a, b)| a.to_bits() != b.to_bits())
            .count();
    }
    out.push(Check::at_most(
        "stopped.zero_delay_equals_w.mismatches",
        mismatches as f64,
        0.0,
    ));
    Ok(out)
}

/// `x₀, …, x_len` from the simulated executor.
fn delayed_history(
    q: &Quadratic,
    x0: &[f64],
    delays: &DelayDistribution,
    len: u64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let cfg = RunConfig {
        max_updates: len,
        stop_on_success: false,
        snapshot_every: Some(1),
        seed,
        ..RunConfig::default()
    };
    let run = run_simulated(q, &ParamVector::from_slice(x0), delays, None, &cfg)?;
    let mut h = vec![x0.to_vec()];
    h.extend(run.snapshots.into_iter().map(|s| s.values));
    Ok(h)
}

// ---------------------------------------------------------------- engine

pub fn engine_suite(scale: Scale) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let threads = 8;
    let adds: u64 = scale.pick(10_000, 100_000);

    let p = ParamVector::zeros(2);
    thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| {
                for _ in 0..adds {
                    p.add(0, 1.0);
                    p.add(1, 0.5);
                }
            });
        }
    });
    let expect = (threads as u64 * adds) as f64;
    out.push(Check::at_most(
        "engine.atomic_add.f64_lost",
        (expect - p.read(0)).abs() + (0.5 * expect - p.read(1)).abs(),
        0.0,
    ));
    let fp = ParamVector::fixed_from_slice(&[0.0], FixedPointSpec::new(Bits::Sixteen, 1e-6)?)?;
    thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| {
                for _ in 0..adds {
                    fp.add_code(0, 1);
                }
            });
        }
    });
    out.push(Check::at_most(
        "engine.atomic_add.fixed_lost",
        (expect * 1e-6 - fp.read(0)).abs(),
        expect * 1e-6 * 1e-12,
    ));

    // one thread, zero delay and plain sequential agree byte for byte
    let bench = LogisticBench::small()?;
    let source = GlmObjective::new(&bench.dataset, GlmModel::Logistic, bench.reg, 0.01)?;
    let mut differing = 0usize;
    for format in [
        None,
        Some(FixedPointSpec::new(Bits::Eight, 0.01 / 127.0 * 3.0)?),
    ] {
        let cfg = RunConfig {
            max_updates: 5000,
            stop_on_success: false,
            log_writes: true,
            seed: 11,
            ..RunConfig::default()
        };
        let x0 = vec![0.0; bench.dataset.dim];
        let fresh = || -> Result<ParamVector> {
            Ok(match format {
                None => ParamVector::from_slice(&x0),
                Some(f) => ParamVector::fixed_from_slice(&x0, f)?,
            })
        };
        let a = run_sequential(&source, &fresh()?, None, &cfg)?;
        let b = run_async(&source, &fresh()?, 1, None, &cfg)?;
        let c = run_simulated(&source, &fresh()?, &DelayDistribution::Zero, None, &cfg)?;
        for other in [&b, &c] {
            differing += a
                .final_x
                .iter()
                .zip(&other.final_x)
                .filter(|(x, y)| x.to_bits() != y.to_bits())
                .count();
            if a.log != other.log {
                differing += 1;
            }
        }
    }
    out.push(Check::at_most(
        "engine.single_thread_equivalence.differences",
        differing as f64,
        0.0,
    ));

    // simulated staleness is dominated by the configured tail
    let delays = DelayDistribution::geometric(0.5)?;
    let (q, _) = quadratic_1d(0.5, 2.0, 0.01, 0.0)?;
    let q = Quadratic { alpha: 1e-3, ..q };
    let steps: u64 = 100_000;
    let cfg = RunConfig {
        max_updates: steps,
        stop_on_success: false,
        log_writes: true,
        seed: 5,
        ..RunConfig::default()
    };
    let run = run_simulated(&q, &ParamVector::from_slice(&[1.0]), &delays, None, &cfg)?;
    let log = run.log.as_ref().expect("log requested");
    let n = log.len() as f64;
    let mut worst = f64::NEG_INFINITY;
    for k in 1..=20u64 {
        let emp = log.records.iter().filter(|r| r.staleness >= k).count() as f64 / n;
        let conf = delays.tail(k);
        let se = (conf * (1.0 - conf) / n).sqrt();
        worst = worst.max(emp - conf - 3.0 * se);
    }
    out.push(Check::at_most("engine.delay_tail.worst_excess", worst, 0.0));
    let tau = measure_tau(log)?;
    // geometric(p) on {0, 1, …}: variance (1 − p)/p²
    let se = ((1.0 - 0.5) / 0.25 / n).sqrt();
    out.push(Check::at_most(
        "engine.measured_tau.abs_error",
        (tau - delays.mean()).abs(),
        3.0 * se,
    ));
    Ok(out)
}

// ---------------------------------------------------------------- bounds

/// One convex problem for the bound-vs-empirical experiment.
enum Problem {
    Quadratic(Quadratic),
    Logistic(LogisticBench),
}

/// Failure bound target used to pick `T`.
const TARGET_BOUND: f64 = 0.5;

/// Empirical failure fraction over seeded runs of each configuration,
/// against the Hogwild corollary bound at its own horizon.
pub fn bounds_suite(scale: Scale) -> Result<Vec<Check>> {
    let runs = scale.pick(20, 200);
    let mut out = Vec::new();

    let (q, qk) = quadratic_1d(0.5, 1.2, 0.01, 0.0)?;
    out.extend(bound_experiment(
        "quadratic",
        &Problem::Quadratic(q),
        qk,
        vec![1.0],
        runs,
    )?);

    let bench = LogisticBench::small()?;
    let radius = bench.sup_norm() + 0.1f64.sqrt() + 0.5;
    let lk = bench.constants(radius, 0.1, 0.5, 0.0)?;
    let x0 = vec![0.0; bench.dataset.dim];
    out.extend(bound_experiment(
        "logistic",
        &Problem::Logistic(bench),
        lk,
        x0,
        runs,
    )?);
    Ok(out)
}

struct Outcome {
    failures: usize,
    /// staleness averaged over every write of every run
    tau: f64,
}

fn run_many(
    problem: &Problem,
    k: &ConvexConstants,
    x0: &[f64],
    exec: &Executor,
    horizon: u64,
    runs: usize,
) -> Result<Outcome> {
    let mut failures = 0;
    let mut stale = 0.0f64;
    let mut writes = 0u64;
    for seed in 0..runs as u64 {
        let mut spec = ConvexRunSpec::new(*k, horizon, seed);
        spec.executor = exec.clone();
        spec.stop_on_success = true;
        spec.x0 = Some(x0.to_vec());
        let run = match problem {
            Problem::Quadratic(q) => train_quadratic(&spec, q)?,
            Problem::Logistic(b) => {
                train(
                    &spec,
                    &b.dataset,
                    GlmModel::Logistic,
                    b.reg,
                    Some(&b.x_star),
                )?
                .run
            }
        };
        if !run.succeeded_by(horizon) {
            failures += 1;
        }
        stale += run.mean_staleness * run.writes as f64;
        writes += run.writes;
    }
    Ok(Outcome {
        failures,
        tau: stale / writes.max(1) as f64,
    })
}

fn corollary_horizon(k: &ConvexConstants, dist0_sq: f64) -> Result<(u64, f64)> {
    let raw = match bound_corollaries(Corollary::Hogwild {
        k,
        dist0_sq,
        t: 1.0,
    })? {
        CorollaryValue::Failure(b) => b.raw,
        _ => unreachable!(),
    };
    let t = (raw / TARGET_BOUND).ceil().max(1.0);
    let bound = match bound_corollaries(Corollary::Hogwild { k, dist0_sq, t })? {
        CorollaryValue::Failure(b) => b.value,
        _ => unreachable!(),
    };
    Ok((t as u64, bound))
}

const ASYNC_ROUNDS: usize = 4;

fn failure_check(name: &str, label: &str, failures: usize, runs: usize, bound: f64) -> Check {
    Check::at_most(
        format!("bounds.{name}.{label}.failure_rate"),
        failures as f64 / runs as f64,
        bound + 3.0 * binomial_se(bound, runs),
    )
}

fn bound_experiment(
    name: &str,
    problem: &Problem,
    base: ConvexConstants,
    x0: Vec<f64>,
    runs: usize,
) -> Result<Vec<Check>> {
    let center = match problem {
        Problem::Quadratic(q) => q.center.clone(),
        Problem::Logistic(b) => b.x_star.clone(),
    };
    let dist0_sq = dist_sq(&x0, &center);
    let mut out = Vec::new();
    let configs: Vec<(String, Executor, f64)> = vec![
        ("sequential".into(), Executor::Sequential, 0.0),
        (
            "simulated_tau1".into(),
            Executor::Simulated(DelayDistribution::geometric_with_mean(1.0)?),
            1.0,
        ),
        (
            "simulated_tau10".into(),
            Executor::Simulated(DelayDistribution::geometric_with_mean(10.0)?),
            10.0,
        ),
    ];
    for (label, exec, tau) in configs {
        let k = base.with_tau(tau)?;
        let (horizon, bound) = corollary_horizon(&k, dist0_sq)?;
        let outcome = run_many(problem, &k, &x0, &exec, horizon, runs)?;
        out.push(failure_check(name, &label, outcome.failures, runs, bound));
    }

    // async: the step size assumes a delay τ; when the staleness measured
    // over the batch exceeds it, the batch is rerun assuming twice the
    // measurement
    let threads = 4;
    let label = format!("async{threads}");
    let mut tau = 1.0;
    let mut last = None;
    for _ in 0..ASYNC_ROUNDS {
        let k = base.with_tau(tau)?;
        let (horizon, bound) = corollary_horizon(&k, dist0_sq)?;
        let outcome = run_many(problem, &k, &x0, &Executor::Async(threads), horizon, runs)?;
        let measured = outcome.tau;
        last = Some((outcome, bound, tau));
        if measured <= tau {
            break;
        }
        tau = 2.0 * measured;
    }
    let (outcome, bound, tau) = last.expect("at least one round");
    out.push(failure_check(name, &label, outcome.failures, runs, bound));
    out.push(Check::at_most(
        format!("bounds.{name}.{label}.measured_tau_estimate"),
        outcome.tau,
        tau,
    ));
    Ok(out)
}

// ---------------------------------------------------------------- parity

/// Mean final training loss over seeds for one precision.
pub fn mean_loss(
    bench: &Dataset,
    reg: f64,
    k: &ConvexConstants,
    alpha: f64,
    updates: u64,
    precision: Precision,
    executor: &Executor,
    seeds: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for seed in 0..seeds {
        let mut spec = ConvexRunSpec::new(*k, updates, seed);
        spec.step = StepRule::Manual(alpha);
        spec.precision = precision;
        spec.executor = executor.clone();
        total += train(&spec, bench, GlmModel::Logistic, reg, None)?.loss;
    }
    Ok(total / seeds as f64)
}

pub fn parity_suite(scale: Scale) -> Result<Vec<Check>> {
    let (m, updates, seeds) = scale.pick((2000, 40_000, 2), (10_000, 200_000, 5));
    let reg = 1e-3;
    let alpha = 0.05;
    let (data, _) = gen_synthetic_logistic(1000, m, 10, 1)?;
    // 1.5 is a loose sup-norm box for the iterates at this regularization
    let k =
        estimate_constants(&data, GlmModel::Logistic, reg, 1.5)?.with_run(1.0, 0.5, 0.0, 0.0)?;
    let seq = Executor::Sequential;
    let full = mean_loss(&data, reg, &k, alpha, updates, Precision::Full, &seq, seeds)?;
    let p16 = mean_loss(
        &data,
        reg,
        &k,
        alpha,
        updates,
        Precision::Fixed(Bits::Sixteen),
        &seq,
        seeds,
    )?;
    let p8 = mean_loss(
        &data,
        reg,
        &k,
        alpha,
        updates,
        Precision::Fixed(Bits::Eight),
        &seq,
        seeds,
    )?;
    let async12 = mean_loss(
        &data,
        reg,
        &k,
        alpha,
        updates,
        Precision::Full,
        &Executor::Async(12),
        1,
    )?;
    let seq1 = mean_loss(&data, reg, &k, alpha, updates, Precision::Full, &seq, 1)?;
    Ok(vec![
        Check::at_most("parity.loss_gap_8bit", (p8 - full).abs(), 0.005),
        Check::at_most("parity.loss_gap_16bit", (p16 - full).abs(), 0.001),
        Check::at_most("parity.loss_gap_async12", (async12 - seq1).abs(), 0.01),
    ])
}

// ---------------------------------------------------------------- alecton

/// Step size used for desk-scale Alecton runs; the theoretical η is many
/// orders of magnitude smaller and would not finish.
pub const ALECTON_ETA: f64 = 2e-6;
pub const ALECTON_WRITES: u64 = 20_000_000;
pub const ALECTON_GAMMA: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct AlectonBatch {
    pub successes: usize,
    pub alignments: Vec<f64>,
    pub max_c: f64,
    pub tau: f64,
}

pub fn alecton_batch(
    m: &SpectralMatrix,
    executor: &Executor,
    runs: usize,
    horizon: f64,
) -> Result<AlectonBatch> {
    let mut b = AlectonBatch {
        successes: 0,
        alignments: Vec::with_capacity(runs),
        max_c: 0.0,
        tau: 0.0,
    };
    for seed in 0..runs as u64 {
        let mut spec = AlectonRunSpec::new(ALECTON_ETA, 0.1, ALECTON_WRITES, seed);
        spec.executor = executor.clone();
        let r = run_alecton(m, &spec)?;
        if matches!(r.success_write, Some(w) if (w as f64) <= horizon) {
            b.successes += 1;
        }
        b.alignments.push(r.final_alignment);
        b.max_c = b.max_c.max(r.measured_c);
        b.tau = b.tau.max(r.run.mean_staleness);
    }
    Ok(b)
}

pub fn alecton_suite(scale: Scale) -> Result<Vec<Check>> {
    let runs = scale.pick(2, 50);
    let m = standard_spectral(1000)?;
    let epsilon = 0.1;
    let theta = default_theta(epsilon);
    let k0 = m.constants(ALECTON_GAMMA, theta, epsilon, 1.0);
    let horizon = alecton_t_and_bound(&k0, 0.0)?.horizon;
    let mut out = vec![Check::at_most(
        "alecton.write_budget_within_horizon",
        ALECTON_WRITES as f64,
        horizon,
    )];
    let mut means = Vec::new();
    for (label, exec) in [
        ("sequential", Executor::Sequential),
        ("async4", Executor::Async(4)),
    ] {
        let batch = alecton_batch(&m, &exec, runs, horizon)?;
        let tau = if matches!(exec, Executor::Sequential) {
            0.0
        } else {
            batch.tau
        };
        let k = m.constants(ALECTON_GAMMA, theta, epsilon, batch.max_c);
        let bound = alecton_t_and_bound(&k, tau)?.failure.value;
        let frac = 1.0 - batch.successes as f64 / runs as f64;
        out.push(Check::at_most(
            format!("alecton.{label}.failure_rate"),
            frac,
            bound + 3.0 * binomial_se(bound, runs),
        ));
        means.push(batch.alignments.iter().sum::<f64>() / runs as f64);
    }
    out.push(Check::at_most(
        "alecton.mean_alignment_gap",
        (means[0] - means[1]).abs(),
        0.05,
    ));
    Ok(out)
}

//! Convex SGD drivers: sequential, Hogwild (lock-free) and Buckwild
//! (lock-free with unbiased low-precision updates).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data_io::quantize_values;
use crate::engine::{
    run_async, run_sequential, run_simulated, DelayDistribution, ParamVector, RunConfig, RunReport,
    StreamRng, UpdateSource,
};
use crate::error::{contract, Error, Result};
use crate::fixedpoint::{choose_scale, storage_scale, Bits, FixedPointSpec, SaturationStats};
use crate::model::{ConvexConstants, Dataset, GlmModel, GradientConstants, SuccessRegion};

/// Random stream used to round the dataset once at ingestion.
const DATA_STREAM: u64 = 1 << 48;

/// `α = cεϑ / (M² + 2LMτ√ε)`
pub fn step_size_hogwild(k: &ConvexConstants) -> f64 {
    let ConvexConstants {
        strong_convexity: c,
        lipschitz: l,
        grad_bound: m,
        epsilon: eps,
        theta,
        tau,
        ..
    } = *k;
    c * eps * theta / (m * m + 2.0 * l * m * tau * eps.sqrt())
}

/// `α = cεϑ / (M²(1 + κ²) + LMτ(2 + κ²)√ε)`
pub fn step_size_buckwild(k: &ConvexConstants) -> f64 {
    let ConvexConstants {
        strong_convexity: c,
        lipschitz: l,
        grad_bound: m,
        epsilon: eps,
        theta,
        kappa,
        tau,
    } = *k;
    let k2 = kappa * kappa;
    c * eps * theta / (m * m * (1.0 + k2) + l * m * tau * (2.0 + k2) * eps.sqrt())
}

/// Mean per-sample loss plus `(reg/2)‖w‖²`, always in full precision.
pub fn training_loss(w: &[f64], dataset: &Dataset, model: GlmModel, reg: f64) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let data: f64 = dataset
        .examples
        .iter()
        .map(|ex| model.loss(ex.dot(w), ex.label))
        .sum::<f64>()
        / dataset.len() as f64;
    data + 0.5 * reg * w.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of [`training_loss`].
pub fn full_gradient(w: &[f64], dataset: &Dataset, model: GlmModel, reg: f64) -> Vec<f64> {
    let mut g: Vec<f64> = w.iter().map(|v| reg * v).collect();
    let inv_m = 1.0 / dataset.len() as f64;
    for ex in &dataset.examples {
        let d = model.dloss(ex.dot(w), ex.label) * inv_m;
        if d != 0.0 {
            for (&i, &v) in ex.indices.iter().zip(&ex.values) {
                g[i] += d * v;
            }
        }
    }
    g
}

/// Minimizer of the regularized objective by full-batch gradient descent
/// with step `1/(β·max‖a‖² + reg)`; stops when `‖∇f‖ ≤ tol`.
pub fn solve_optimum(
    dataset: &Dataset,
    model: GlmModel,
    reg: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return contract("dataset is empty");
    }
    let Some(beta) = model.curvature_bound() else {
        return contract("optimum solver needs a smooth loss");
    };
    let max_sq = dataset
        .examples
        .iter()
        .map(|e| e.norm_sq())
        .fold(0.0, f64::max);
    let step = 1.0 / (beta * max_sq + reg);
    let mut w = vec![0.0; dataset.dim];
    for _ in 0..max_iter {
        let g = full_gradient(&w, dataset, model, reg);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !gn.is_finite() {
            return Err(Error::Diverged(
                "optimum solver gradient is not finite".into(),
            ));
        }
        if gn <= tol {
            return Ok(w);
        }
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= step * gi;
        }
    }
    log::warn!("optimum solver hit {max_iter} iterations before tolerance {tol:e}");
    Ok(w)
}

/// Uniform-with-replacement sampling of a regularized GLM objective.
///
/// The ℓ2 term is applied on the sample support only, scaled by inverse
/// feature frequency, so every write stays inside the sample support and the
/// update is still unbiased for the full gradient.
pub struct GlmObjective<'a> {
    data: &'a Dataset,
    model: GlmModel,
    reg: f64,
    alpha: f64,
    inv_freq: Vec<f64>,
}

impl<'a> GlmObjective<'a> {
    pub fn new(data: &'a Dataset, model: GlmModel, reg: f64, alpha: f64) -> Result<Self> {
        Self::with_frequencies(data, model, reg, alpha, data.inverse_frequencies())
    }

    /// Use frequencies from another view of the same data (e.g. the
    /// full-precision original of a quantized copy).
    pub fn with_frequencies(
        data: &'a Dataset,
        model: GlmModel,
        reg: f64,
        alpha: f64,
        inv_freq: Vec<f64>,
    ) -> Result<Self> {
        if data.is_empty() {
            return contract("dataset is empty");
        }
        if !(alpha > 0.0 && alpha.is_finite()) || !(reg >= 0.0) {
            return contract("step size must be positive and regularization non-negative");
        }
        if inv_freq.len() != data.dim {
            return contract("frequency vector does not match dataset dimension");
        }
        Ok(GlmObjective {
            data,
            model,
            reg,
            alpha,
            inv_freq,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl UpdateSource for GlmObjective<'_> {
    type Draw = usize;

    fn dim(&self) -> usize {
        self.data.dim
    }

    fn draw(&self, rng: &mut StreamRng) -> usize {
        rng.random_range(0..self.data.len())
    }

    fn reads(&self, &i: &usize, out: &mut Vec<usize>) {
        out.extend_from_slice(&self.data.examples[i].indices);
    }

    fn deltas(&self, &i: &usize, read: &[f64], out: &mut Vec<(usize, f64)>) {
        let ex = &self.data.examples[i];
        let z: f64 = ex.values.iter().zip(read).map(|(a, w)| a * w).sum();
        let g = self.model.dloss(z, ex.label);
        for ((&j, &a), &w) in ex.indices.iter().zip(&ex.values).zip(read) {
            let reg = self.reg * w * self.inv_freq[j];
            out.push((j, -self.alpha * (g * a + reg)));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Rademacher,
    Gaussian,
}

/// `f(x) = (c/2)‖x − x*‖²` with additive gradient noise:
/// `∇f̃(x) = c(x − x*) + σz`, `E z = 0`, `E z_i² = 1`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub center: Vec<f64>,
    pub c: f64,
    pub sigma: f64,
    pub noise: Noise,
    pub alpha: f64,
}

impl Quadratic {
    pub fn new(center: Vec<f64>, c: f64, sigma: f64, noise: Noise, alpha: f64) -> Result<Self> {
        if center.is_empty() || !(c > 0.0) || !(sigma >= 0.0) || !(alpha > 0.0) {
            return contract("quadratic needs dim ≥ 1, c > 0, σ ≥ 0, α > 0");
        }
        Ok(Quadratic {
            center,
            c,
            sigma,
            noise,
            alpha,
        })
    }

    /// `c`, `L = c` and `M = sqrt(c²r² + nσ²)` for iterates within distance
    /// `radius` of the optimum.
    pub fn constants(&self, radius: f64) -> GradientConstants {
        let n = self.center.len() as f64;
        GradientConstants {
            strong_convexity: self.c,
            lipschitz: self.c,
            grad_bound: (self.c * self.c * radius * radius + n * self.sigma * self.sigma).sqrt(),
        }
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        0.5 * self.c * crate::model::dist_sq(x, &self.center)
    }
}

impl UpdateSource for Quadratic {
    type Draw = Vec<f64>;

    fn dim(&self) -> usize {
        self.center.len()
    }

    fn draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        if self.sigma == 0.0 {
            return vec![0.0; self.center.len()];
        }
        (0..self.center.len())
            .map(|_| match self.noise {
                Noise::Rademacher => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
                Noise::Gaussian => rng.sample(StandardNormal),
            })
            .collect()
    }

    fn reads(&self, _: &Vec<f64>, out: &mut Vec<usize>) {
        out.extend(0..self.center.len());
    }

    fn deltas(&self, z: &Vec<f64>, read: &[f64], out: &mut Vec<(usize, f64)>) {
        for (i, (&x, &xs)) in read.iter().zip(&self.center).enumerate() {
            out.push((i, -self.alpha * (self.c * (x - xs) + self.sigma * z[i])));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Precision {
    Full,
    Fixed(Bits),
}

impl std::str::FromStr for Precision {
    type Err = Error;

    /// `32`/`64`/`full`, `8` or `16`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "32" | "64" | "full" => Ok(Precision::Full),
            other => {
                let bits: u32 = other
                    .parse()
                    .map_err(|_| Error::Contract(format!("bad precision `{s}`")))?;
                Ok(Precision::Fixed(Bits::from_u32(bits)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Executor {
    Sequential,
    Async(usize),
    Simulated(DelayDistribution),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Manual(f64),
    /// Hogwild formula at full precision, Buckwild formula otherwise.
    Auto,
}

/// Everything needed to launch one convex SGD run.
#[derive(Debug, Clone)]
pub struct ConvexRunSpec {
    pub constants: ConvexConstants,
    pub step: StepRule,
    pub precision: Precision,
    pub executor: Executor,
    /// horizon in updates
    pub max_updates: u64,
    pub max_writes: Option<u64>,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
    pub stop_on_success: bool,
    pub check_every: u64,
    pub snapshot_every: Option<u64>,
    pub log_writes: bool,
}

impl ConvexRunSpec {
    pub fn new(constants: ConvexConstants, max_updates: u64, seed: u64) -> Self {
        ConvexRunSpec {
            constants,
            step: StepRule::Auto,
            precision: Precision::Full,
            executor: Executor::Sequential,
            max_updates,
            max_writes: None,
            seed,
            x0: None,
            stop_on_success: false,
            check_every: 1,
            snapshot_every: None,
            log_writes: false,
        }
    }

    /// Precision factor used for update rounding: the configured κ, or the
    /// smallest κ whose code range still covers an update of size `αM`.
    pub fn effective_kappa(&self) -> f64 {
        match self.precision {
            Precision::Full => 0.0,
            Precision::Fixed(bits) => {
                if self.constants.kappa > 0.0 {
                    self.constants.kappa
                } else {
                    1.0 / bits.max_code() as f64
                }
            }
        }
    }

    pub fn alpha(&self) -> Result<f64> {
        self.constants.validate()?;
        let a = match self.step {
            StepRule::Manual(a) => a,
            StepRule::Auto => match self.precision {
                Precision::Full => step_size_hogwild(&self.constants),
                Precision::Fixed(_) => step_size_buckwild(&ConvexConstants {
                    kappa: self.effective_kappa(),
                    ..self.constants
                }),
            },
        };
        if !(a > 0.0 && a.is_finite()) {
            return contract(format!("step size must be positive and finite, got {a}"));
        }
        Ok(a)
    }

    pub fn update_format(&self, alpha: f64) -> Result<Option<FixedPointSpec>> {
        match self.precision {
            Precision::Full => Ok(None),
            Precision::Fixed(bits) => Ok(Some(choose_scale(
                alpha,
                self.effective_kappa(),
                self.constants.grad_bound,
                bits,
            )?)),
        }
    }

    fn run_config(&self) -> RunConfig {
        RunConfig {
            max_updates: self.max_updates,
            max_writes: self.max_writes,
            stop_on_success: self.stop_on_success,
            check_every: self.check_every,
            snapshot_every: self.snapshot_every,
            log_writes: self.log_writes,
            seed: self.seed,
            ..RunConfig::default()
        }
    }
}

/// Build the shared iterate and dispatch to the chosen executor.
pub fn execute<S: UpdateSource>(
    source: &S,
    x0: &[f64],
    format: Option<FixedPointSpec>,
    executor: &Executor,
    region: Option<&SuccessRegion>,
    cfg: &RunConfig,
) -> Result<RunReport> {
    let params = match format {
        None => ParamVector::from_slice(x0),
        Some(spec) => ParamVector::fixed_from_slice(x0, spec)?,
    };
    match executor {
        Executor::Sequential => run_sequential(source, &params, region, cfg),
        Executor::Async(threads) => run_async(source, &params, *threads, region, cfg),
        Executor::Simulated(d) => run_simulated(source, &params, d, region, cfg),
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub run: RunReport,
    pub alpha: f64,
    /// full-precision training loss at the final iterate
    pub loss: f64,
    pub update_format: Option<FixedPointSpec>,
    pub data_format: Option<FixedPointSpec>,
    pub data_saturation: SaturationStats,
}

/// Train a GLM. In fixed-point mode the dataset is stochastically rounded
/// once to the chosen width and updates are rounded per coordinate.
/// Success is tracked against the ball of radius² ε around `x_star`.
pub fn train(
    spec: &ConvexRunSpec,
    dataset: &Dataset,
    model: GlmModel,
    reg: f64,
    x_star: Option<&[f64]>,
) -> Result<TrainReport> {
    if dataset.is_empty() {
        return contract("cannot train on an empty dataset");
    }
    let alpha = spec.alpha()?;
    let update_format = spec.update_format(alpha)?;
    let (data, data_format, data_saturation) = match spec.precision {
        Precision::Full => (None, None, SaturationStats::default()),
        Precision::Fixed(bits) => {
            let fmt = storage_scale(dataset.max_abs_value().max(f64::MIN_POSITIVE), bits)?;
            let (q, stats) = quantize_values(dataset, &fmt, spec.seed, DATA_STREAM)?;
            (Some(q), Some(fmt), stats)
        }
    };
    let used = data.as_ref().unwrap_or(dataset);
    let source =
        GlmObjective::with_frequencies(used, model, reg, alpha, dataset.inverse_frequencies())?;
    let x0 = match &spec.x0 {
        Some(x) if x.len() != dataset.dim => {
            return contract("initial point dimension does not match dataset")
        }
        Some(x) => x.clone(),
        None => vec![0.0; dataset.dim],
    };
    let region = match x_star {
        Some(c) if c.len() != dataset.dim => {
            return contract("optimum dimension does not match dataset")
        }
        Some(c) => Some(SuccessRegion::Ball {
            center: c.to_vec(),
            radius_sq: spec.constants.epsilon,
        }),
        None => None,
    };
    let run = execute(
        &source,
        &x0,
        update_format,
        &spec.executor,
        region.as_ref(),
        &spec.run_config(),
    )?;
    let loss = training_loss(&run.final_x, dataset, model, reg);
    if !loss.is_finite() {
        return Err(Error::Diverged(format!("training loss {loss}")));
    }
    let sat = run.saturation.rate();
    if sat > 1e-6 {
        log::warn!("update saturation rate {sat:.3e} exceeds 1e-6");
    }
    Ok(TrainReport {
        run,
        alpha,
        loss,
        update_format,
        data_format,
        data_saturation,
    })
}

/// Run SGD on a [`Quadratic`], tracking the ball of radius² ε around its
/// center.
pub fn train_quadratic(spec: &ConvexRunSpec, problem: &Quadratic) -> Result<RunReport> {
    let alpha = spec.alpha()?;
    let source = Quadratic {
        alpha,
        ..problem.clone()
    };
    let x0 = spec
        .x0
        .clone()
        .unwrap_or_else(|| vec![0.0; problem.center.len()]);
    if x0.len() != problem.center.len() {
        return contract("initial point dimension does not match problem");
    }
    let region = SuccessRegion::Ball {
        center: problem.center.clone(),
        radius_sq: spec.constants.epsilon,
    };
    execute(
        &source,
        &x0,
        spec.update_format(alpha)?,
        &spec.executor,
        Some(&region),
        &spec.run_config(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SparseExample;

    fn consts(tau: f64, kappa: f64) -> ConvexConstants {
        ConvexConstants::new(1.0, 1.0, 1.0, 0.01, 0.5, kappa, tau).unwrap()
    }

    #[test]
    fn hogwild_step_examples() {
        assert!((step_size_hogwild(&consts(0.0, 0.0)) - 0.005).abs() < 1e-15);
        assert!((step_size_hogwild(&consts(10.0, 0.0)) - 0.005 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn buckwild_step_examples() {
        assert!((step_size_buckwild(&consts(10.0, 1.0)) - 0.001).abs() < 1e-15);
        assert_eq!(
            step_size_buckwild(&consts(10.0, 0.0)),
            step_size_hogwild(&consts(10.0, 0.0))
        );
        assert!(step_size_buckwild(&consts(10.0, 0.5)) > step_size_buckwild(&consts(10.0, 0.6)));
    }

    #[test]
    fn quadratic_geometric_recursion() {
        let q = Quadratic::new(vec![1.0], 1.0, 0.0, Noise::Rademacher, 0.1).unwrap();
        let mut spec = ConvexRunSpec::new(consts(0.0, 0.0), 50, 0);
        spec.step = StepRule::Manual(0.1);
        let rep = train_quadratic(&spec, &q).unwrap();
        let want = 1.0 - 0.9f64.powi(50);
        assert!((rep.final_x[0] - want).abs() < 1e-12);
        assert!(q.loss(&rep.final_x) < 1e-4);
    }

    #[test]
    fn quadratic_buckwild_is_unbiased_across_seeds() {
        let q = Quadratic::new(vec![1.0], 1.0, 0.0, Noise::Rademacher, 0.1).unwrap();
        let k = ConvexConstants::new(1.0, 1.0, 1.0, 0.01, 0.5, 1e-3, 0.0).unwrap();
        let xs: Vec<f64> = (0..100)
            .map(|seed| {
                let mut spec = ConvexRunSpec::new(k, 50, seed);
                spec.step = StepRule::Manual(0.1);
                spec.precision = Precision::Fixed(Bits::Sixteen);
                // s = ακM = 1e-4
                assert!((spec.update_format(0.1).unwrap().unwrap().scale - 1e-4).abs() < 1e-18);
                spec.x0 = Some(vec![0.0]);
                train_quadratic(&spec, &q).unwrap().final_x[0]
            })
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = 1.0 - 0.9f64.powi(50);
        let se = (var / n).sqrt().max(1e-6);
        assert!(
            (mean - target).abs() <= 3.0 * se + 1e-4,
            "mean {mean} se {se}"
        );
    }

    fn tiny() -> Dataset {
        let ex = |i: Vec<usize>, v: Vec<f64>, y| SparseExample::new(i, v, y).unwrap();
        Dataset::new(
            3,
            vec![
                ex(vec![0, 1], vec![1.0, -0.5], 1.0),
                ex(vec![1, 2], vec![0.3, 0.8], -1.0),
                ex(vec![0, 2], vec![-0.7, 0.2], 1.0),
                ex(vec![2], vec![1.0], -1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn loss_at_zero_is_ln2() {
        let d = tiny();
        let l = training_loss(&[0.0; 3], &d, GlmModel::Logistic, 0.3);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn sparse_regularizer_is_unbiased() {
        let d = tiny();
        let w = [0.4, -1.2, 0.7];
        let src = GlmObjective::new(&d, GlmModel::Logistic, 0.3, 1.0).unwrap();
        let mut mean = [0.0; 3];
        for i in 0..d.len() {
            let mut x = w;
            crate::engine::apply_update(&src, &i, &mut x);
            for j in 0..3 {
                mean[j] += (x[j] - w[j]) / d.len() as f64;
            }
        }
        let g = full_gradient(&w, &d, GlmModel::Logistic, 0.3);
        for j in 0..3 {
            assert!((mean[j] + g[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn optimum_has_zero_gradient() {
        let d = tiny();
        let w = solve_optimum(&d, GlmModel::Logistic, 0.1, 1e-12, 100_000).unwrap();
        let g = full_gradient(&w, &d, GlmModel::Logistic, 0.1);
        assert!(g.iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let d = Dataset::new(2, vec![]).unwrap();
        let spec = ConvexRunSpec::new(consts(0.0, 0.0), 10, 0);
        assert!(train(&spec, &d, GlmModel::Logistic, 0.1, None).is_err());
    }

    #[test]
    fn loss_decreases_on_exact_quadratic() {
        let q = Quadratic::new(vec![2.0, -1.0], 1.0, 0.0, Noise::Gaussian, 0.05).unwrap();
        let mut spec = ConvexRunSpec::new(consts(0.0, 0.0), 100, 0);
        spec.step = StepRule::Manual(0.05);
        spec.snapshot_every = Some(2);
        let rep = train_quadratic(&spec, &q).unwrap();
        let losses: Vec<f64> = rep.snapshots.iter().map(|s| q.loss(&s.values)).collect();
        assert!(losses.windows(2).all(|w| w[1] <= w[0]));
    }
}

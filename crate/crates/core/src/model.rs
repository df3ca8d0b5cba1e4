//! Domain types shared by the optimizers and the analysis code.

use crate::error::{contract, Result};

/// One training sample: a sparse feature row plus its label.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseExample {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub label: f64,
}

impl SparseExample {
    pub fn new(indices: Vec<usize>, values: Vec<f64>, label: f64) -> Result<Self> {
        if indices.len() != values.len() {
            return contract(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            ));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return contract("feature indices must be strictly increasing");
        }
        if values.iter().any(|v| !v.is_finite()) || !label.is_finite() {
            return contract("feature values and label must be finite");
        }
        Ok(SparseExample {
            indices,
            values,
            label,
        })
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| w[i] * v)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm_l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }
}

/// A collection of samples over a fixed feature dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub dim: usize,
    pub examples: Vec<SparseExample>,
}

impl Dataset {
    pub fn new(dim: usize, examples: Vec<SparseExample>) -> Result<Self> {
        for (k, ex) in examples.iter().enumerate() {
            if let Some(&last) = ex.indices.last() {
                if last >= dim {
                    return contract(format!(
                        "sample {k} has index {last} outside dimension {dim}"
                    ));
                }
            }
        }
        Ok(Dataset { dim, examples })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Number of samples in which each feature appears.
    pub fn feature_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.dim];
        for ex in &self.examples {
            for &i in &ex.indices {
                counts[i] += 1;
            }
        }
        counts
    }

    /// `m / count_j` per feature, zero for features that never appear.
    ///
    /// Scaling a per-sample regularizer on the sample's support by this
    /// factor makes its expectation over a uniform sample equal to the
    /// dense regularizer gradient.
    pub fn inverse_frequencies(&self) -> Vec<f64> {
        let m = self.len() as f64;
        self.feature_counts()
            .into_iter()
            .map(|c| if c == 0 { 0.0 } else { m / c as f64 })
            .collect()
    }

    pub fn max_abs_value(&self) -> f64 {
        self.examples
            .iter()
            .flat_map(|ex| ex.values.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Generalized linear models supported by the SGD drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlmModel {
    Logistic,
    Linear,
    Svm,
}

impl std::str::FromStr for GlmModel {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" | "lr" => Ok(GlmModel::Logistic),
            "linear" | "ls" => Ok(GlmModel::Linear),
            "svm" | "hinge" => Ok(GlmModel::Svm),
            other => contract(format!("unknown model `{other}`")),
        }
    }
}

const SIGMOID_FLOOR: f64 = 1e-15;

fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(SIGMOID_FLOOR, 1.0 - SIGMOID_FLOOR)
}

impl GlmModel {
    /// Per-sample loss at margin `z = w·a`.
    pub fn loss(self, z: f64, label: f64) -> f64 {
        match self {
            GlmModel::Logistic => {
                let m = -label * z;
                // log(1 + e^m) without overflow
                if m > 0.0 {
                    m + (-m).exp().ln_1p()
                } else {
                    m.exp().ln_1p()
                }
            }
            GlmModel::Linear => 0.5 * (z - label) * (z - label),
            GlmModel::Svm => (1.0 - label * z).max(0.0),
        }
    }

    /// d loss / d z.
    pub fn dloss(self, z: f64, label: f64) -> f64 {
        match self {
            GlmModel::Logistic => -label * sigmoid(-label * z),
            GlmModel::Linear => z - label,
            GlmModel::Svm => {
                if label * z >= 1.0 {
                    0.0
                } else {
                    -label
                }
            }
        }
    }

    /// Upper bound on |d² loss / d z²|, `None` for the hinge.
    pub fn curvature_bound(self) -> Option<f64> {
        match self {
            GlmModel::Logistic => Some(0.25),
            GlmModel::Linear => Some(1.0),
            GlmModel::Svm => None,
        }
    }
}

/// The SGD step `−α∇f̃(w)` for one sample, restricted to the sample support.
///
/// Regularization is not included; see [`crate::convex_sgd::GlmObjective`]
/// for the sparse regularized update.
pub fn glm_gradient_sample(
    model: GlmModel,
    w: &[f64],
    ex: &SparseExample,
    alpha: f64,
) -> Result<Vec<(usize, f64)>> {
    if let Some(&last) = ex.indices.last() {
        if last >= w.len() {
            return contract("sample index outside parameter dimension");
        }
    }
    let z = ex.dot(w);
    let g = model.dloss(z, ex.label);
    if g == 0.0 {
        return Ok(Vec::new());
    }
    Ok(ex
        .indices
        .iter()
        .zip(&ex.values)
        .map(|(&i, &v)| (i, -alpha * g * v))
        .collect())
}

/// Strong convexity, 1-norm Lipschitz and second-moment constants of a
/// gradient oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientConstants {
    pub strong_convexity: f64,
    pub lipschitz: f64,
    pub grad_bound: f64,
}

impl GradientConstants {
    pub fn with_run(
        self,
        epsilon: f64,
        theta: f64,
        kappa: f64,
        tau: f64,
    ) -> Result<ConvexConstants> {
        ConvexConstants::new(
            self.strong_convexity,
            self.lipschitz,
            self.grad_bound,
            epsilon,
            theta,
            kappa,
            tau,
        )
    }
}

/// Problem and run constants for convex SGD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexConstants {
    /// c
    pub strong_convexity: f64,
    /// L, with respect to the 1-norm
    pub lipschitz: f64,
    /// M, root of the second-moment bound
    pub grad_bound: f64,
    /// radius² of the success ball
    pub epsilon: f64,
    pub theta: f64,
    /// quantization precision factor κ (0 for full precision)
    pub kappa: f64,
    /// worst-case expected delay
    pub tau: f64,
}

impl ConvexConstants {
    pub fn new(
        strong_convexity: f64,
        lipschitz: f64,
        grad_bound: f64,
        epsilon: f64,
        theta: f64,
        kappa: f64,
        tau: f64,
    ) -> Result<Self> {
        let k = ConvexConstants {
            strong_convexity,
            lipschitz,
            grad_bound,
            epsilon,
            theta,
            kappa,
            tau,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.strong_convexity > 0.0
            && self.lipschitz >= 0.0
            && self.grad_bound > 0.0
            && self.epsilon > 0.0
            && self.theta > 0.0
            && self.theta < 1.0
            && self.kappa >= 0.0
            && self.tau >= 0.0
            && [
                self.strong_convexity,
                self.lipschitz,
                self.grad_bound,
                self.epsilon,
                self.kappa,
                self.tau,
            ]
            .iter()
            .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            contract(format!("invalid convex constants {self:?}"))
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        self.kappa = kappa;
        self.validate()?;
        Ok(self)
    }
}

/// Problem and run constants for rank-1 Alecton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlectonConstants {
    pub n: usize,
    /// Δ = λ₁ − λ₂
    pub eigengap: f64,
    /// incoherence μ
    pub coherence: f64,
    pub gamma: f64,
    pub theta: f64,
    pub epsilon: f64,
    /// C, with 1 ≤ ‖x‖ and ‖x‖₁ ≤ C along the run
    pub norm_bound: f64,
    /// ‖A‖_F
    pub frobenius: f64,
}

impl AlectonConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n >= 1
            && self.eigengap > 0.0
            && self.coherence > 0.0
            && self.gamma > 0.0
            && self.gamma <= 1.0
            && self.theta > 0.0
            && self.epsilon > 0.0
            && self.theta * (1.0 + self.epsilon) < 1.0
            && self.norm_bound >= 1.0
            && self.frobenius > 0.0;
        if ok {
            Ok(())
        } else {
            contract(format!("invalid Alecton constants {self:?}"))
        }
    }
}

/// Region whose first hitting time defines success.
#[derive(Debug, Clone, PartialEq)]
pub enum SuccessRegion {
    /// `‖x − center‖² ≤ radius_sq`
    Ball { center: Vec<f64>, radius_sq: f64 },
    /// `(u·x)² ≥ (1 − epsilon)‖x‖²` for a unit vector `direction`
    Alignment { direction: Vec<f64>, epsilon: f64 },
}

impl SuccessRegion {
    pub fn dim(&self) -> usize {
        match self {
            SuccessRegion::Ball { center, .. } => center.len(),
            SuccessRegion::Alignment { direction, .. } => direction.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return contract(format!(
                "iterate has dimension {} but region has {}",
                x.len(),
                self.dim()
            ));
        }
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        match self {
            SuccessRegion::Ball { center, radius_sq } => dist_sq(x, center) <= *radius_sq,
            SuccessRegion::Alignment { direction, epsilon } => {
                let (dot, sq) = dot_and_norm_sq(direction, x);
                dot * dot >= (1.0 - epsilon) * sq
            }
        }
    }
}

pub fn in_success_region(x: &[f64], region: &SuccessRegion) -> Result<bool> {
    region.contains(x)
}

/// `(u·x)² / ‖x‖²`, or 0 for the zero vector.
pub fn alignment(u: &[f64], x: &[f64]) -> f64 {
    let (dot, sq) = dot_and_norm_sq(u, x);
    if sq == 0.0 {
        0.0
    } else {
        dot * dot / sq
    }
}

pub(crate) fn dot_and_norm_sq(u: &[f64], x: &[f64]) -> (f64, f64) {
    u.iter()
        .zip(x)
        .fold((0.0, 0.0), |(d, s), (a, b)| (d + a * b, s + b * b))
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm_l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Estimate `(c, L, M)` for a regularized GLM objective whose iterates stay
/// inside the box `‖w‖_∞ ≤ box_radius`.
///
/// * `c = reg` (the ℓ2 term makes the objective `reg`-strongly convex).
/// * `M` bounds `max_i ‖∇f̃_i(w)‖` over the box, using the sparse
///   regularizer scaled by inverse feature frequency.
/// * `L = max_j E_i[β‖a_i‖ |a_ij|] + reg`, with β the loss curvature bound.
pub fn estimate_constants(
    dataset: &Dataset,
    model: GlmModel,
    reg: f64,
    box_radius: f64,
) -> Result<GradientConstants> {
    if dataset.is_empty() {
        return contract("dataset is empty");
    }
    if reg <= 0.0 {
        return contract("strong convexity unavailable; supply c explicitly");
    }
    if !(box_radius >= 0.0) {
        return contract("box radius must be non-negative");
    }
    let Some(beta) = model.curvature_bound() else {
        return contract("hinge loss gradient is not Lipschitz; supply L explicitly");
    };
    let inv_freq = dataset.inverse_frequencies();
    let m = dataset.len() as f64;

    let mut grad_bound = 0.0f64;
    let mut col = vec![0.0f64; dataset.dim];
    for ex in &dataset.examples {
        let a_norm = ex.norm_sq().sqrt();
        let dloss_max = match model {
            GlmModel::Linear => ex.norm_l1() * box_radius + ex.label.abs(),
            _ => 1.0,
        };
        let reg_part: f64 = ex
            .indices
            .iter()
            .map(|&j| inv_freq[j] * inv_freq[j])
            .sum::<f64>()
            .sqrt()
            * reg
            * box_radius;
        grad_bound = grad_bound.max(dloss_max * a_norm + reg_part);
        for (&j, &v) in ex.indices.iter().zip(&ex.values) {
            col[j] += beta * a_norm * v.abs() / m;
        }
    }
    let lipschitz = col.into_iter().fold(0.0f64, f64::max) + reg;
    Ok(GradientConstants {
        strong_convexity: reg,
        lipschitz,
        grad_bound: grad_bound.max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_validation() {
        assert!(SparseExample::new(vec![0, 2], vec![1.0, 2.0], 1.0).is_ok());
        assert!(SparseExample::new(vec![2, 2], vec![1.0, 2.0], 1.0).is_err());
        assert!(SparseExample::new(vec![0], vec![1.0, 2.0], 1.0).is_err());
        assert!(SparseExample::new(vec![0], vec![f64::NAN], 1.0).is_err());
        let ex = SparseExample::new(vec![5], vec![1.0], 1.0).unwrap();
        assert!(Dataset::new(5, vec![ex]).is_err());
    }

    #[test]
    fn success_region_cases() {
        let center = vec![0.3, -1.0];
        let ball = SuccessRegion::Ball {
            center: center.clone(),
            radius_sq: 0.01,
        };
        assert!(ball.contains(&center).unwrap());
        assert!(ball.contains(&[0.0]).is_err());

        let u = vec![0.6, 0.8];
        let aligned = SuccessRegion::Alignment {
            direction: u.clone(),
            epsilon: 0.1,
        };
        assert!(aligned.contains(&[3.0, 4.0]).unwrap());
        let perp = SuccessRegion::Alignment {
            direction: u,
            epsilon: 0.5,
        };
        assert!(!perp.contains(&[-0.8, 0.6]).unwrap());
    }

    #[test]
    fn success_region_monotone_in_epsilon() {
        let x = [0.4, 0.9, -0.2];
        let center = vec![0.0; 3];
        let mut prev = false;
        for k in 0..200 {
            let eps = k as f64 * 0.01;
            let r = SuccessRegion::Ball {
                center: center.clone(),
                radius_sq: eps,
            };
            let now = r.contains(&x).unwrap();
            assert!(!prev || now);
            prev = now;
        }
        let u = vec![1.0, 0.0, 0.0];
        let mut prev = false;
        for k in 0..=100 {
            let r = SuccessRegion::Alignment {
                direction: u.clone(),
                epsilon: k as f64 * 0.01,
            };
            let now = r.contains(&x).unwrap();
            assert!(!prev || now);
            prev = now;
        }
    }

    #[test]
    fn linear_gradient_hand_value() {
        let ex = SparseExample::new(vec![0], vec![1.0], 2.0).unwrap();
        let up = glm_gradient_sample(GlmModel::Linear, &[0.0], &ex, 0.1).unwrap();
        assert_eq!(up.len(), 1);
        assert_eq!(up[0].0, 0);
        assert!((up[0].1 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn logistic_gradient_at_zero() {
        let ex = SparseExample::new(vec![1, 3], vec![0.5, -2.0], 1.0).unwrap();
        let up = glm_gradient_sample(GlmModel::Logistic, &[0.0; 4], &ex, 0.2).unwrap();
        assert_eq!(up, vec![(1, 0.2 * 0.5 * 0.5), (3, 0.2 * 0.5 * -2.0)]);
    }

    #[test]
    fn hinge_outside_margin_is_empty() {
        let ex = SparseExample::new(vec![0], vec![2.0], -1.0).unwrap();
        let up = glm_gradient_sample(GlmModel::Svm, &[-1.0], &ex, 0.1).unwrap();
        assert!(up.is_empty());
        let up = glm_gradient_sample(GlmModel::Svm, &[0.1], &ex, 0.1).unwrap();
        assert_eq!(up, vec![(0, 0.1 * -1.0 * 2.0)]);
    }

    #[test]
    fn logistic_saturates_instead_of_overflowing() {
        let ex = SparseExample::new(vec![0], vec![1.0], 1.0).unwrap();
        for w in [1e6, -1e6, 800.0, -800.0] {
            let up = glm_gradient_sample(GlmModel::Logistic, &[w], &ex, 1.0).unwrap();
            assert!(up.iter().all(|(_, d)| d.is_finite() && *d > 0.0));
            assert!(GlmModel::Logistic.loss(w, 1.0).is_finite());
        }
    }

    #[test]
    fn support_is_subset_of_sample() {
        let ex = SparseExample::new(vec![2, 7, 9], vec![0.1, -0.4, 1.0], -1.0).unwrap();
        let w: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        for model in [GlmModel::Logistic, GlmModel::Linear, GlmModel::Svm] {
            for (i, _) in glm_gradient_sample(model, &w, &ex, 0.3).unwrap() {
                assert!(ex.indices.contains(&i));
            }
        }
    }

    #[test]
    fn estimate_requires_regularizer() {
        let ex = SparseExample::new(vec![0], vec![1.0], 1.0).unwrap();
        let ds = Dataset::new(1, vec![ex]).unwrap();
        let err = estimate_constants(&ds, GlmModel::Logistic, 0.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("strong convexity unavailable"));
        assert!(estimate_constants(&Dataset::default(), GlmModel::Logistic, 0.1, 1.0).is_err());
    }

    #[test]
    fn empty_sample_contributes_only_regularizer() {
        let ds = Dataset::new(
            2,
            vec![
                SparseExample::new(vec![], vec![], 1.0).unwrap(),
                SparseExample::new(vec![0], vec![1.0], -1.0).unwrap(),
            ],
        )
        .unwrap();
        let k = estimate_constants(&ds, GlmModel::Logistic, 0.1, 1.0).unwrap();
        // only the second sample drives M: ‖a‖ + reg·b·(m/count)
        assert!((k.grad_bound - (1.0 + 0.1 * 2.0)).abs() < 1e-12);
        let up =
            glm_gradient_sample(GlmModel::Logistic, &[0.5, 0.5], &ds.examples[0], 0.1).unwrap();
        assert!(up.is_empty());
    }
}

//! Hybrid-process primitives: mode-indexed vector fields, diffusion and rate
//! specifications, reset kernels, and simulators for the two base process
//! classes (deterministic flow with random jumps; per-mode diffusion with
//! spontaneous and boundary-forced jumps).

mod flow;
mod sim;

pub use flow::{flow, integrate_field, rk4_step};
pub use sim::{
    sample_reset, sample_sojourn, sde_step, simulate_pdmp, simulate_shs, HybridSimOptions,
};

use crate::error::{Result, SimError};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Discrete mode label; an index into the mode table of the owning spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeId(pub usize);

impl std::fmt::Display for ModeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Mode plus continuous position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub mode: ModeId,
    pub position: Vec<f64>,
}

impl HybridState {
    pub fn new(mode: usize, position: Vec<f64>) -> Self {
        HybridState {
            mode: ModeId(mode),
            position,
        }
    }
}

/// Open axis-aligned box; infinite faces are allowed and mean "no wall".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn unbounded(dim: usize) -> Self {
        BoxDomain {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Strict interior membership.
    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *v > *lo && *v < *hi)
    }

    pub fn has_finite_face(&self) -> bool {
        self.lo.iter().any(|v| v.is_finite()) || self.hi.iter().any(|v| v.is_finite())
    }

    pub fn validate(&self, dim: usize, what: &'static str) -> Result<()> {
        if self.lo.len() != dim || self.hi.len() != dim {
            return Err(SimError::DimensionMismatch {
                what: "box domain",
                expected: dim,
                got: self.lo.len().max(self.hi.len()),
            });
        }
        for (lo, hi) in self.lo.iter().zip(&self.hi) {
            if !(lo < hi) {
                return Err(SimError::InvalidSpec(format!(
                    "{what}: box faces must satisfy lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Drift catalog. All fields are autonomous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorFieldSpec {
    /// b(y) = value
    Constant { value: Vec<f64> },
    /// b(y) = matrix * y + offset
    Linear {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// b(y) = rate * (mean - y), mean reversion at a scalar rate
    OrnsteinUhlenbeck { rate: f64, mean: Vec<f64> },
}

impl VectorFieldSpec {
    pub fn dim(&self) -> usize {
        match self {
            VectorFieldSpec::Constant { value } => value.len(),
            VectorFieldSpec::Linear { offset, .. } => offset.len(),
            VectorFieldSpec::OrnsteinUhlenbeck { mean, .. } => mean.len(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(SimError::DimensionMismatch {
                what: "vector field",
                expected: dim,
                got: self.dim(),
            });
        }
        if let VectorFieldSpec::Linear { matrix, .. } = self {
            if matrix.len() != dim || matrix.iter().any(|row| row.len() != dim) {
                return Err(SimError::DimensionMismatch {
                    what: "vector field matrix",
                    expected: dim,
                    got: matrix.len(),
                });
            }
        }
        Ok(())
    }

    /// Evaluate b(y) into `out`.
    pub fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        match self {
            VectorFieldSpec::Constant { value } => out.copy_from_slice(value),
            VectorFieldSpec::Linear { matrix, offset } => {
                for (p, row) in matrix.iter().enumerate() {
                    let mut acc = offset[p];
                    for (a, v) in row.iter().zip(y) {
                        acc += a * v;
                    }
                    out[p] = acc;
                }
            }
            VectorFieldSpec::OrnsteinUhlenbeck { rate, mean } => {
                for p in 0..out.len() {
                    out[p] = rate * (mean[p] - y[p]);
                }
            }
        }
    }
}

/// Diffusion catalog: either no noise or a constant d x m matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    Zero,
    /// rows[p] holds the p-th row of the d x m diffusion matrix.
    ConstantMatrix { rows: Vec<Vec<f64>> },
}

impl DiffusionSpec {
    /// Number of independent Wiener components consumed per step.
    pub fn wiener_dim(&self) -> usize {
        match self {
            DiffusionSpec::Zero => 0,
            DiffusionSpec::ConstantMatrix { rows } => rows.first().map_or(0, |r| r.len()),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let DiffusionSpec::ConstantMatrix { rows } = self {
            if rows.len() != dim {
                return Err(SimError::DimensionMismatch {
                    what: "diffusion matrix rows",
                    expected: dim,
                    got: rows.len(),
                });
            }
            let m = self.wiener_dim();
            if m == 0 {
                return Err(SimError::InvalidSpec(
                    "diffusion matrix must have at least one column (use zero diffusion instead)"
                        .into(),
                ));
            }
            if rows.iter().any(|r| r.len() != m) {
                return Err(SimError::InvalidSpec(
                    "diffusion matrix rows have inconsistent lengths".into(),
                ));
            }
        }
        Ok(())
    }

    /// out[p] += scale * (rows[p] . noise)
    pub fn accumulate_into(&self, noise: &[f64], scale: f64, out: &mut [f64]) {
        if let DiffusionSpec::ConstantMatrix { rows } = self {
            for (p, row) in rows.iter().enumerate() {
                let mut acc = 0.0;
                for (s, xi) in row.iter().zip(noise) {
                    acc += s * xi;
                }
                out[p] += scale * acc;
            }
        }
    }

    /// Euclidean norm of row `p`; the effective scalar volatility of that
    /// component, used by the boundary-crossing correction.
    pub fn row_norm(&self, p: usize) -> f64 {
        match self {
            DiffusionSpec::Zero => 0.0,
            DiffusionSpec::ConstantMatrix { rows } => crate::stats::norm2(&rows[p]),
        }
    }
}

/// Jump-rate catalog plus a declared upper bound used by thinning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    #[serde(flatten)]
    pub kind: RateKind,
    /// Declared bound on the rate over the reachable set; proposals are
    /// generated at this intensity.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    /// lambda(x) = value
    Constant { value: f64 },
    /// lambda(x) = base + slope * |y|
    AffineNorm { base: f64, slope: f64 },
}

impl RateSpec {
    pub fn constant(value: f64, bound: f64) -> Self {
        RateSpec {
            kind: RateKind::Constant { value },
            bound,
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match &self.kind {
            RateKind::Constant { value } => *value,
            RateKind::AffineNorm { base, slope } => base + slope * crate::stats::norm2(y),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = match &self.kind {
            RateKind::Constant { value } => *value >= 0.0,
            RateKind::AffineNorm { base, slope } => *base >= 0.0 && *slope >= 0.0,
        };
        if !nonneg {
            return Err(SimError::InvalidSpec(
                "jump rates must be nonnegative".into(),
            ));
        }
        if !(self.bound >= 0.0) || !self.bound.is_finite() {
            return Err(SimError::InvalidSpec(
                "rate bound must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Distribution over R^d used for post-jump positions and guard seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorKernel {
    PointMass { value: Vec<f64> },
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
}

/// Attempts before a clipped Gaussian (or degenerate uniform) draw gives up.
pub const REJECTION_BUDGET: usize = 10_000;

impl VectorKernel {
    pub fn dim(&self) -> usize {
        match self {
            VectorKernel::PointMass { value } => value.len(),
            VectorKernel::UniformBox { lo, .. } => lo.len(),
            VectorKernel::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(SimError::DimensionMismatch {
                what: "kernel",
                expected: dim,
                got: self.dim(),
            });
        }
        match self {
            VectorKernel::PointMass { value } => {
                if value.iter().any(|v| !v.is_finite()) {
                    return Err(SimError::InvalidSpec("point-mass kernel not finite".into()));
                }
            }
            VectorKernel::UniformBox { lo, hi } => {
                if hi.len() != dim {
                    return Err(SimError::DimensionMismatch {
                        what: "kernel box",
                        expected: dim,
                        got: hi.len(),
                    });
                }
                for (l, h) in lo.iter().zip(hi) {
                    if !(l.is_finite() && h.is_finite() && l < h) {
                        return Err(SimError::InvalidSpec(
                            "uniform kernel box must be finite with lo < hi".into(),
                        ));
                    }
                }
            }
            VectorKernel::Gaussian { covariance, .. } => {
                if covariance.len() != dim || covariance.iter().any(|r| r.len() != dim) {
                    return Err(SimError::DimensionMismatch {
                        what: "kernel covariance",
                        expected: dim,
                        got: covariance.len(),
                    });
                }
                cholesky(covariance)?;
            }
        }
        Ok(())
    }

    /// Mean of the kernel (closed form; used by moment oracles).
    pub fn mean(&self) -> Vec<f64> {
        match self {
            VectorKernel::PointMass { value } => value.clone(),
            VectorKernel::UniformBox { lo, hi } => {
                lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect()
            }
            VectorKernel::Gaussian { mean, .. } => mean.clone(),
        }
    }

    /// Draw a value lying strictly inside `domain`.
    ///
    /// Point masses are checked, box draws are redrawn on the (measure-zero)
    /// event of landing on a face, Gaussians are rejection-clipped into the
    /// domain with a finite budget.
    pub fn sample_into(
        &self,
        domain: &BoxDomain,
        rng: &mut impl Rng,
        out: &mut [f64],
    ) -> Result<()> {
        match self {
            VectorKernel::PointMass { value } => {
                if !domain.contains(value) {
                    return Err(SimError::InvalidSpec(
                        "point-mass kernel target lies outside the domain interior".into(),
                    ));
                }
                out.copy_from_slice(value);
                Ok(())
            }
            VectorKernel::UniformBox { lo, hi } => {
                for _ in 0..REJECTION_BUDGET {
                    for (p, v) in out.iter_mut().enumerate() {
                        let u: f64 = rng.gen();
                        *v = lo[p] + u * (hi[p] - lo[p]);
                    }
                    if domain.contains(out) {
                        return Ok(());
                    }
                }
                Err(SimError::RejectionBudget {
                    attempts: REJECTION_BUDGET,
                })
            }
            VectorKernel::Gaussian { mean, covariance } => {
                let chol = cholesky(covariance)?;
                let d = mean.len();
                let mut z = vec![0.0; d];
                for _ in 0..REJECTION_BUDGET {
                    for zp in z.iter_mut() {
                        *zp = rng.sample(StandardNormal);
                    }
                    for p in 0..d {
                        let mut acc = mean[p];
                        for (q, zq) in z.iter().enumerate().take(p + 1) {
                            acc += chol[p][q] * zq;
                        }
                        out[p] = acc;
                    }
                    if domain.contains(out) {
                        return Ok(());
                    }
                }
                Err(SimError::RejectionBudget {
                    attempts: REJECTION_BUDGET,
                })
            }
        }
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
fn cholesky(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            if (m[i][j] - m[j][i]).abs() > 1e-12 * (1.0 + m[i][j].abs()) {
                return Err(SimError::InvalidSpec(
                    "covariance matrix is not symmetric".into(),
                ));
            }
            let mut acc = m[i][j];
            for k in 0..j {
                acc -= l[i][k] * l[j][k];
            }
            if i == j {
                if acc <= 0.0 {
                    return Err(SimError::InvalidSpec(
                        "covariance matrix is not positive definite".into(),
                    ));
                }
                l[i][j] = acc.sqrt();
            } else {
                l[i][j] = acc / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Jump target: a mode plus a position kernel over that mode's domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetKernelSpec {
    pub mode: ModeId,
    pub kernel: VectorKernel,
}

impl ResetKernelSpec {
    pub fn point_mass(mode: usize, value: Vec<f64>) -> Self {
        ResetKernelSpec {
            mode: ModeId(mode),
            kernel: VectorKernel::PointMass { value },
        }
    }
}

/// One mode of a flow-driven process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdmpMode {
    pub field: VectorFieldSpec,
    #[serde(default)]
    pub domain: Option<BoxDomain>,
}

/// One mode of a diffusion-driven process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShsMode {
    pub field: VectorFieldSpec,
    pub diffusion: DiffusionSpec,
    #[serde(default)]
    pub domain: Option<BoxDomain>,
}

/// Deterministic flow per mode, state-dependent jump rate, one reset kernel
/// applied at both spontaneous and boundary-forced jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct PdmpSpec {
    pub dim: usize,
    pub modes: Vec<PdmpMode>,
    pub rate: RateSpec,
    pub reset: ResetKernelSpec,
}

/// Per-mode diffusion, spontaneous jumps at a bounded rate, forced jumps on
/// boundary contact; separate kernels for the two jump causes.
#[derive(Debug, Clone, PartialEq)]
pub struct ShsSpec {
    pub dim: usize,
    pub modes: Vec<ShsMode>,
    pub rate: RateSpec,
    pub reset_spontaneous: ResetKernelSpec,
    pub reset_forced: ResetKernelSpec,
}

impl PdmpSpec {
    pub fn domain(&self, mode: ModeId) -> BoxDomain {
        self.modes[mode.0]
            .domain
            .clone()
            .unwrap_or_else(|| BoxDomain::unbounded(self.dim))
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(SimError::InvalidSpec("at least one mode required".into()));
        }
        for m in &self.modes {
            m.field.validate(self.dim)?;
            if let Some(d) = &m.domain {
                d.validate(self.dim, "mode domain")?;
            }
        }
        self.rate.validate()?;
        validate_reset(&self.reset, self.modes.len(), self.dim)?;
        Ok(())
    }
}

impl ShsSpec {
    pub fn domain(&self, mode: ModeId) -> BoxDomain {
        self.modes[mode.0]
            .domain
            .clone()
            .unwrap_or_else(|| BoxDomain::unbounded(self.dim))
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(SimError::InvalidSpec("at least one mode required".into()));
        }
        for m in &self.modes {
            m.field.validate(self.dim)?;
            m.diffusion.validate(self.dim)?;
            if let Some(d) = &m.domain {
                d.validate(self.dim, "mode domain")?;
            }
        }
        self.rate.validate()?;
        validate_reset(&self.reset_spontaneous, self.modes.len(), self.dim)?;
        validate_reset(&self.reset_forced, self.modes.len(), self.dim)?;
        Ok(())
    }
}

fn validate_reset(reset: &ResetKernelSpec, n_modes: usize, dim: usize) -> Result<()> {
    if reset.mode.0 >= n_modes {
        return Err(SimError::InvalidSpec(format!(
            "reset kernel targets unknown mode {}",
            reset.mode
        )));
    }
    reset.kernel.validate(dim)
}

/// Why a jump fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpCause {
    Spontaneous,
    Forced,
}

/// One jump: when, from where, to where, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub pre: HybridState,
    pub post: HybridState,
    pub cause: JumpCause,
}

/// Sampled path of a hybrid process.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// States at strictly increasing sample times (post-jump convention at
    /// times that coincide with a jump).
    pub samples: Vec<(f64, HybridState)>,
    pub jumps: Vec<JumpRecord>,
}

impl Trajectory {
    pub fn final_state(&self) -> &HybridState {
        &self.samples.last().expect("trajectory has samples").1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn box_membership_is_strict() {
        let b = BoxDomain {
            lo: vec![0.0, f64::NEG_INFINITY],
            hi: vec![1.0, f64::INFINITY],
        };
        assert!(b.contains(&[0.5, 12.0]));
        assert!(!b.contains(&[0.0, 0.0]));
        assert!(!b.contains(&[1.0, 0.0]));
    }

    #[test]
    fn field_eval_matches_closed_forms() {
        let mut out = vec![0.0; 2];
        VectorFieldSpec::Constant {
            value: vec![1.0, -2.0],
        }
        .eval_into(&[9.0, 9.0], &mut out);
        assert_eq!(out, vec![1.0, -2.0]);

        VectorFieldSpec::Linear {
            matrix: vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
            offset: vec![0.5, 0.0],
        }
        .eval_into(&[2.0, 3.0], &mut out);
        assert_eq!(out, vec![3.5, -2.0]);

        VectorFieldSpec::OrnsteinUhlenbeck {
            rate: 2.0,
            mean: vec![1.0, 0.0],
        }
        .eval_into(&[0.0, 4.0], &mut out);
        assert_eq!(out, vec![2.0, -8.0]);
    }

    #[test]
    fn rate_affine_norm_uses_euclidean_norm() {
        let r = RateSpec {
            kind: RateKind::AffineNorm {
                base: 1.0,
                slope: 2.0,
            },
            bound: 20.0,
        };
        assert!((r.eval(&[3.0, 4.0]) - 11.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rate_is_rejected() {
        let r = RateSpec::constant(-1.0, 1.0);
        assert!(r.validate().is_err());
    }

    #[test]
    fn gaussian_kernel_clips_into_domain() {
        // wide Gaussian, narrow target box: every accepted draw is interior
        let k = VectorKernel::Gaussian {
            mean: vec![0.5],
            covariance: vec![vec![100.0]],
        };
        let domain = BoxDomain {
            lo: vec![0.0],
            hi: vec![1.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut out = vec![0.0];
        for _ in 0..2000 {
            k.sample_into(&domain, &mut rng, &mut out).unwrap();
            assert!(out[0] > 0.0 && out[0] < 1.0);
        }
    }

    #[test]
    fn gaussian_kernel_budget_exhausts_on_unreachable_box() {
        let k = VectorKernel::Gaussian {
            mean: vec![1000.0],
            covariance: vec![vec![1e-6]],
        };
        let domain = BoxDomain {
            lo: vec![0.0],
            hi: vec![1.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut out = vec![0.0];
        match k.sample_into(&domain, &mut rng, &mut out) {
            Err(SimError::RejectionBudget { .. }) => {}
            other => panic!("expected rejection budget error, got {other:?}"),
        }
    }

    #[test]
    fn point_mass_outside_domain_is_an_error() {
        let k = VectorKernel::PointMass { value: vec![2.0] };
        let domain = BoxDomain {
            lo: vec![0.0],
            hi: vec![1.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut out = vec![0.0];
        assert!(k.sample_into(&domain, &mut rng, &mut out).is_err());
    }

    #[test]
    fn cholesky_rejects_indefinite_matrices() {
        assert!(cholesky(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(cholesky(&[vec![1.0, 0.5], vec![0.5, 1.0]]).is_ok());
    }

    #[test]
    fn uniform_kernel_mean_is_box_centre() {
        let k = VectorKernel::UniformBox {
            lo: vec![0.0, 2.0],
            hi: vec![1.0, 4.0],
        };
        assert_eq!(k.mean(), vec![0.5, 3.0]);
    }
}

//! Infinitesimal-generator evaluation at a point: exact drift term from
//! closed-form gradients plus a kernel-sampled jump term with its Monte-Carlo
//! standard error.

use crate::agent::{positive_orthant, GuardSpec};
use crate::error::{Result, SimError};
use crate::hybrid::{HybridState, PdmpSpec, VectorFieldSpec};
use crate::stats::mean_and_se;
use rand::Rng;

use super::model::AbstractionModel;
use super::testfn::{Layout, TestFunction};

/// Generator value split into its exact drift part and sampled jump part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorValue {
    /// Drift (Lie-derivative) term, computed exactly from the gradient.
    pub drift: f64,
    /// Jump term `sum_i rate_i * E[f(after reset) - f(x)]`, kernel-sampled.
    pub jump: f64,
    /// Standard error of the jump term.
    pub jump_se: f64,
}

impl GeneratorValue {
    pub fn value(&self) -> f64 {
        self.drift + self.jump
    }
}

/// Derivative of `f` along `field` at `x`: `field(x) . grad f(x)`.
pub fn lie_derivative(
    field: &VectorFieldSpec,
    f: &TestFunction,
    layout: &Layout,
    x: &[f64],
) -> Result<f64> {
    field.validate(layout.len())?;
    f.validate(layout)?;
    if x.len() != layout.len() {
        return Err(SimError::DimensionMismatch {
            what: "evaluation point",
            expected: layout.len(),
            got: x.len(),
        });
    }
    let mut b = vec![0.0; x.len()];
    field.eval_into(x, &mut b);
    let grad = f.gradient(layout, x);
    Ok(b.iter().zip(&grad).map(|(bi, gi)| bi * gi).sum())
}

/// Generator of a piecewise-deterministic process at `x`:
/// `field . grad f + rate(x) * E_{y ~ reset}[f(y) - f(x)]`.
/// The state space is flat R^dim ([`Layout::flat`]); the jump expectation is
/// estimated from `reps` kernel draws (skipped entirely when the rate is 0).
pub fn generator_pdmp(
    spec: &PdmpSpec,
    f: &TestFunction,
    x: &HybridState,
    reps: usize,
    rng: &mut impl Rng,
) -> Result<GeneratorValue> {
    spec.validate()?;
    let layout = Layout::flat(spec.dim);
    f.validate(&layout)?;
    if x.position.len() != spec.dim {
        return Err(SimError::DimensionMismatch {
            what: "evaluation point",
            expected: spec.dim,
            got: x.position.len(),
        });
    }
    let drift = lie_derivative(&spec.modes[x.mode.0].field, f, &layout, &x.position)?;
    let rate = spec.rate.eval(&x.position);
    if rate == 0.0 {
        return Ok(GeneratorValue {
            drift,
            jump: 0.0,
            jump_se: 0.0,
        });
    }
    if reps == 0 {
        return Err(SimError::InvalidSpec(
            "jump-term sampling needs reps >= 1".into(),
        ));
    }
    let fx = f.eval(&layout, &x.position);
    let domain = spec.domain(spec.reset.mode);
    let mut y = vec![0.0; spec.dim];
    let mut diffs = Vec::with_capacity(reps);
    for _ in 0..reps {
        spec.reset.kernel.sample_into(&domain, rng, &mut y)?;
        diffs.push(f.eval(&layout, &y) - fx);
    }
    let (mean, se) = mean_and_se(&diffs);
    Ok(GeneratorValue {
        drift,
        jump: rate * mean,
        jump_se: rate * se,
    })
}

/// Generator of the reduced (guard, clock) model at the flattened point `x`.
///
/// Drift term: `sum_i [ -k_i beta^i . grad_{beta^i} f + d f / d tau^i ]`,
/// exact. Jump term: `sum_i rate_i(tau^i) * E[f(x with block i reset) - f(x)]`
/// with `reps` kernel draws per agent (agents at rate 0 draw nothing).
pub fn generator_swarm(
    model: &AbstractionModel,
    f: &TestFunction,
    x: &[f64],
    reps: usize,
    rng: &mut impl Rng,
) -> Result<GeneratorValue> {
    model.validate()?;
    let layout = model.layout();
    f.validate(&layout)?;
    if x.len() != layout.len() {
        return Err(SimError::DimensionMismatch {
            what: "evaluation point",
            expected: layout.len(),
            got: x.len(),
        });
    }
    let grad = f.gradient(&layout, x);
    let mut drift = 0.0;
    for (i, a) in model.agents.iter().enumerate() {
        let mut term = 0.0;
        for p in 0..model.dim {
            let idx = layout.beta_index(i, p);
            term += -a.decay * x[idx] * grad[idx];
        }
        term += grad[layout.clock_index(i)];
        drift += term;
    }

    let fx = f.eval(&layout, x);
    let orthant = positive_orthant(model.dim);
    let mut jump = 0.0;
    let mut jump_var = 0.0;
    let mut y = x.to_vec();
    let mut diffs = Vec::with_capacity(reps);
    for (i, a) in model.agents.iter().enumerate() {
        let rate = a.rate.eval(i, x[layout.clock_index(i)])?;
        if rate == 0.0 {
            continue;
        }
        if reps == 0 {
            return Err(SimError::InvalidSpec(
                "jump-term sampling needs reps >= 1".into(),
            ));
        }
        let start = layout.beta_index(i, 0);
        diffs.clear();
        y[layout.clock_index(i)] = 0.0;
        for _ in 0..reps {
            a.reset
                .sample_into(&orthant, rng, &mut y[start..start + model.dim])?;
            diffs.push(f.eval(&layout, &y) - fx);
        }
        // restore agent i's block before moving on
        y[start..start + model.dim].copy_from_slice(&x[start..start + model.dim]);
        y[layout.clock_index(i)] = x[layout.clock_index(i)];
        let (mean, se) = mean_and_se(&diffs);
        jump += rate * mean;
        jump_var += (rate * se) * (rate * se);
    }
    Ok(GeneratorValue {
        drift,
        jump,
        jump_se: jump_var.sqrt(),
    })
}

/// Generator of a single agent's (guard, clock) pair at `point`
/// (= `[beta_0..beta_{d-1}, tau]`), for an exponential guard with constant
/// jump rate. Evaluates through [`generator_swarm`] on the one-agent model.
pub fn generator_agent(
    guard: &GuardSpec,
    rate: f64,
    f: &TestFunction,
    point: &[f64],
    reps: usize,
    rng: &mut impl Rng,
) -> Result<GeneratorValue> {
    if point.is_empty() {
        return Err(SimError::DimensionMismatch {
            what: "evaluation point",
            expected: 2,
            got: 0,
        });
    }
    if guard.rhs.is_some() {
        return Err(SimError::InvalidSpec(
            "generator evaluation supports exponential guards only".into(),
        ));
    }
    let dim = point.len() - 1;
    guard.validate(dim)?;
    let model = AbstractionModel {
        dim,
        agents: vec![super::model::ModelAgent {
            decay: guard.decay,
            reset: guard.init.clone(),
            rate: super::model::AgentRate::Constant { value: rate },
        }],
    };
    generator_swarm(&model, f, point, reps, rng)
}

//! The reduced jump model on (guard, clock) coordinates: guards decay
//! exponentially, clocks run at unit slope, and each agent jumps at a rate
//! that depends on its own clock, resetting (guard, clock) to (fresh seed, 0).
//!
//! Because flows are closed-form and rates are bounded, paths are simulated
//! exactly by thinning — no time-stepping error anywhere in this module.

use crate::agent::positive_orthant;
use crate::error::{Result, SimError};
use crate::hybrid::VectorKernel;
use crate::swarm::ScenarioConfig;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::testfn::Layout;

/// Jump rate of one agent as a function of its clock, tabulated on a grid
/// with a validity mask (hazard estimates degrade where survival is small).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Clock grid points, strictly increasing.
    pub tau: Vec<f64>,
    /// Rate values at the grid points.
    pub lambda: Vec<f64>,
    /// Whether each grid point is trustworthy.
    pub valid: Vec<bool>,
}

impl RateEstimate {
    pub fn validate(&self) -> Result<()> {
        if self.tau.len() != self.lambda.len() || self.tau.len() != self.valid.len() {
            return Err(SimError::InvalidSpec(
                "rate table columns must have equal length".into(),
            ));
        }
        if self.tau.is_empty() {
            return Err(SimError::InvalidSpec("rate table is empty".into()));
        }
        for w in self.tau.windows(2) {
            if w[1] <= w[0] {
                return Err(SimError::InvalidSpec(
                    "rate table grid must be strictly increasing".into(),
                ));
            }
        }
        for (l, v) in self.lambda.iter().zip(&self.valid) {
            if *v && (!(*l >= 0.0) || !l.is_finite()) {
                return Err(SimError::InvalidSpec(
                    "rates must be finite and >= 0 on the valid region".into(),
                ));
            }
        }
        Ok(())
    }

    /// Linear interpolation on the valid prefix of the table; `None` once the
    /// clock leaves it.
    pub fn eval(&self, tau: f64) -> Option<f64> {
        if tau < 0.0 {
            return None;
        }
        let last_valid = self.valid.iter().take_while(|v| **v).count();
        if last_valid == 0 {
            return None;
        }
        let t = &self.tau[..last_valid];
        let l = &self.lambda[..last_valid];
        if tau <= t[0] {
            return Some(l[0]);
        }
        if tau > t[last_valid - 1] {
            return None;
        }
        let j = t.partition_point(|g| *g < tau);
        let w = (tau - t[j - 1]) / (t[j] - t[j - 1]);
        Some(l[j - 1] + w * (l[j] - l[j - 1]))
    }

    /// Upper bound of the rate over the valid region (for thinning).
    pub fn bound(&self) -> f64 {
        self.lambda
            .iter()
            .zip(&self.valid)
            .filter(|(_, v)| **v)
            .map(|(l, _)| *l)
            .fold(0.0, f64::max)
    }
}

/// Jump rate of one agent in the reduced model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRate {
    Constant { value: f64 },
    Table(RateEstimate),
}

impl AgentRate {
    pub fn validate(&self) -> Result<()> {
        match self {
            AgentRate::Constant { value } => {
                if !(*value >= 0.0) || !value.is_finite() {
                    return Err(SimError::InvalidSpec(
                        "constant rate must be finite and >= 0".into(),
                    ));
                }
                Ok(())
            }
            AgentRate::Table(t) => t.validate(),
        }
    }

    /// Rate at clock value `tau`; errors when a tabulated rate has no valid
    /// entry there.
    pub fn eval(&self, agent: usize, tau: f64) -> Result<f64> {
        match self {
            AgentRate::Constant { value } => Ok(*value),
            AgentRate::Table(t) => t
                .eval(tau)
                .ok_or(SimError::RateUnavailable { agent, tau }),
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            AgentRate::Constant { value } => *value,
            AgentRate::Table(t) => t.bound(),
        }
    }
}

/// One agent of the reduced model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAgent {
    /// Guard decay rate k.
    pub decay: f64,
    /// Kernel of the fresh guard seed drawn at each jump (positive support).
    pub reset: VectorKernel,
    pub rate: AgentRate,
}

/// The reduced model: independent agents on (guard, clock) coordinates.
/// State vectors use the [`Layout`] flattening.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionModel {
    pub dim: usize,
    pub agents: Vec<ModelAgent>,
}

impl AbstractionModel {
    pub fn layout(&self) -> Layout {
        Layout::new(self.agents.len(), self.dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.agents.is_empty() {
            return Err(SimError::InvalidSpec(
                "model needs dim >= 1 and at least one agent".into(),
            ));
        }
        for a in &self.agents {
            if !(a.decay >= 0.0) || !a.decay.is_finite() {
                return Err(SimError::InvalidSpec(
                    "guard decay must be finite and >= 0".into(),
                ));
            }
            a.reset.validate(self.dim)?;
            a.rate.validate()?;
        }
        Ok(())
    }

    /// Reduce a scenario to this model, pairing each agent's guard decay and
    /// seed kernel with a caller-supplied jump rate (typically from a
    /// first-passage estimate). Only exponential guards reduce this way.
    pub fn from_scenario(config: &ScenarioConfig, rates: Vec<AgentRate>) -> Result<Self> {
        if rates.len() != config.agents.len() {
            return Err(SimError::DimensionMismatch {
                what: "per-agent rates",
                expected: config.agents.len(),
                got: rates.len(),
            });
        }
        let mut agents = Vec::with_capacity(config.agents.len());
        for (spec, rate) in config.agents.iter().zip(rates) {
            if spec.guard.rhs.is_some() {
                return Err(SimError::InvalidSpec(format!(
                    "agent {}: only exponential guards reduce to the closed-form model",
                    spec.id
                )));
            }
            agents.push(ModelAgent {
                decay: spec.guard.decay,
                reset: spec.guard.init.clone(),
                rate,
            });
        }
        let model = AbstractionModel {
            dim: config.dim,
            agents,
        };
        model.validate()?;
        Ok(model)
    }

    /// Deterministic drift between jumps at `x`: guard components decay,
    /// clocks advance at unit slope.
    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let layout = self.layout();
        let mut out = vec![0.0; layout.len()];
        for (i, a) in self.agents.iter().enumerate() {
            for p in 0..self.dim {
                let idx = layout.beta_index(i, p);
                out[idx] = -a.decay * x[idx];
            }
            out[layout.clock_index(i)] = 1.0;
        }
        out
    }

    /// Advance the deterministic part of the state by `dt` in place
    /// (closed form, exact).
    fn advance(&self, x: &mut [f64], dt: f64) {
        let layout = self.layout();
        for (i, a) in self.agents.iter().enumerate() {
            let factor = (-a.decay * dt).exp();
            for p in 0..self.dim {
                x[layout.beta_index(i, p)] *= factor;
            }
            x[layout.clock_index(i)] += dt;
        }
    }
}

/// Exact path sample of the reduced model: state at time `t` starting from
/// `x0`, by superposition thinning against the per-agent rate bounds.
pub fn simulate_abstraction(
    model: &AbstractionModel,
    x0: &[f64],
    t: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let grid = [t];
    let mut states = simulate_abstraction_grid(model, x0, &grid, rng)?;
    Ok(states.pop().expect("one state per grid time"))
}

/// Exact path sample recorded at each of the (nondecreasing) `times`.
pub fn simulate_abstraction_grid(
    model: &AbstractionModel,
    x0: &[f64],
    times: &[f64],
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>> {
    let layout = model.layout();
    if x0.len() != layout.len() {
        return Err(SimError::DimensionMismatch {
            what: "model state",
            expected: layout.len(),
            got: x0.len(),
        });
    }
    for (k, w) in times.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(SimError::InvalidSpec(format!(
                "recording times must be nondecreasing (position {})",
                k + 1
            )));
        }
    }
    if times.first().is_some_and(|t| *t < 0.0) {
        return Err(SimError::InvalidSpec(
            "recording times must be nonnegative".into(),
        ));
    }

    let bounds: Vec<f64> = model.agents.iter().map(|a| a.rate.bound()).collect();
    let total: f64 = bounds.iter().sum();
    let orthant = positive_orthant(model.dim);

    let mut x = x0.to_vec();
    let mut s = 0.0; // current path time
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    let mut next_record = 0;

    let record_up_to = |x: &mut Vec<f64>,
                            s: &mut f64,
                            limit: f64,
                            out: &mut Vec<Vec<f64>>,
                            next_record: &mut usize,
                            model: &AbstractionModel| {
        while *next_record < times.len() && times[*next_record] <= limit {
            let target = times[*next_record];
            model.advance(x, target - *s);
            *s = target;
            out.push(x.clone());
            *next_record += 1;
        }
    };

    loop {
        if total == 0.0 {
            // no jumps ever; just roll out the deterministic flow
            let end = times.last().copied().unwrap_or(0.0);
            record_up_to(&mut x, &mut s, end, &mut out, &mut next_record, model);
            break;
        }
        let e: f64 = rng.sample(Exp1);
        let proposal = s + e / total;
        let end = times.last().copied().unwrap_or(0.0);
        if proposal > end {
            record_up_to(&mut x, &mut s, end, &mut out, &mut next_record, model);
            break;
        }
        record_up_to(&mut x, &mut s, proposal, &mut out, &mut next_record, model);
        model.advance(&mut x, proposal - s);
        s = proposal;

        // attribute the proposal to an agent, then thin
        let pick: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut agent = model.agents.len() - 1;
        for (i, b) in bounds.iter().enumerate() {
            acc += b;
            if pick < acc {
                agent = i;
                break;
            }
        }
        if bounds[agent] == 0.0 {
            continue;
        }
        let tau = x[layout.clock_index(agent)];
        let rate = model.agents[agent].rate.eval(agent, tau)?;
        if rate > bounds[agent] * (1.0 + 1e-12) {
            return Err(SimError::RateBoundExceeded {
                rate,
                bound: bounds[agent],
            });
        }
        let u: f64 = rng.gen();
        if u * bounds[agent] < rate {
            let start = layout.beta_index(agent, 0);
            model.agents[agent].reset.sample_into(
                &orthant,
                rng,
                &mut x[start..start + model.dim],
            )?;
            x[layout.clock_index(agent)] = 0.0;
        }
    }
    debug_assert_eq!(out.len(), times.len());
    Ok(out)
}

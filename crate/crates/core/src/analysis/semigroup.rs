//! Transition-operator estimation and its consistency checks: the map
//! `t -> E_x f(x_t)`, the short-time rate `(E_x f(x_h) - f(x))/h` against the
//! generator, and the two-leg composition property of the transition
//! operators.
//!
//! All replications draw from streams derived from the caller's seed, so
//! every estimate here is a pure function of its arguments.

use crate::error::{Result, SimError};
use crate::rng::{stream_rng, stream_seed, LANE_NESTED, LANE_REPLICATION};
use crate::stats::mean_and_se;
use serde::Serialize;

use super::generator::generator_swarm;
use super::model::AbstractionModel;
use super::testfn::TestFunction;

/// Mean of `f` at time `t` over `reps` exact paths from `x0`, with its
/// standard error. `t = 0` returns exactly `(f(x0), 0)`.
pub fn semigroup_estimate(
    model: &AbstractionModel,
    f: &TestFunction,
    x0: &[f64],
    t: f64,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(SimError::InvalidSpec("estimator needs reps >= 1".into()));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(SimError::InvalidSpec("time must be finite and >= 0".into()));
    }
    let layout = model.layout();
    f.validate(&layout)?;
    let mut values = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = stream_rng(seed, LANE_REPLICATION, rep as u64);
        let xt = super::model::simulate_abstraction(model, x0, t, &mut rng)?;
        values.push(f.eval(&layout, &xt));
    }
    Ok(mean_and_se(&values))
}

/// Two estimates of the same quantity and whether they agree within the
/// stated tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub estimate: f64,
    pub estimate_se: f64,
    pub reference: f64,
    pub reference_se: f64,
    /// |estimate - reference|
    pub residual: f64,
    /// Combined standard error of the residual.
    pub se: f64,
    /// Acceptance bound the residual was compared against.
    pub tolerance: f64,
    pub pass: bool,
}

impl ResidualReport {
    fn new(
        (estimate, estimate_se): (f64, f64),
        (reference, reference_se): (f64, f64),
        bias: f64,
    ) -> Self {
        let residual = (estimate - reference).abs();
        let se = (estimate_se * estimate_se + reference_se * reference_se).sqrt();
        let tolerance = bias + 3.0 * se;
        ResidualReport {
            estimate,
            estimate_se,
            reference,
            reference_se,
            residual,
            se,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

/// Compare the short-time rate `(E f(x_h) - f(x0))/h` (paired per path)
/// against the generator at `x0`. Passes when the gap is within
/// `bias_budget * h` plus three combined standard errors; the budget absorbs
/// the O(h) error of the one-sided difference.
pub fn generator_residual(
    model: &AbstractionModel,
    f: &TestFunction,
    x0: &[f64],
    h: f64,
    reps: usize,
    seed: u64,
    bias_budget: f64,
) -> Result<ResidualReport> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(SimError::InvalidSpec("step h must be finite and > 0".into()));
    }
    if reps == 0 {
        return Err(SimError::InvalidSpec("estimator needs reps >= 1".into()));
    }
    let layout = model.layout();
    f.validate(&layout)?;
    let fx0 = f.eval(&layout, x0);
    let mut rates = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = stream_rng(seed, LANE_REPLICATION, rep as u64);
        let xh = super::model::simulate_abstraction(model, x0, h, &mut rng)?;
        rates.push((f.eval(&layout, &xh) - fx0) / h);
    }
    let rate = mean_and_se(&rates);

    let mut gen_rng = stream_rng(seed, LANE_NESTED, 0);
    let gen = generator_swarm(model, f, x0, reps, &mut gen_rng)?;
    Ok(ResidualReport::new(
        rate,
        (gen.value(), gen.jump_se),
        bias_budget * h,
    ))
}

/// Two-leg composition check plus whether the two estimates are the very
/// same bits (they are when `s = 0`, where both legs consume identical
/// streams).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChapmanReport {
    pub report: ResidualReport,
    pub identical: bool,
}

/// Compare the one-shot estimate of `E f(x_{t+s})` against the nested
/// estimate `E[ E_{x_t} f(x_s) ]`. The outer paths of both legs share
/// replication streams (common random numbers); inner stages derive their
/// streams from the outer replication index.
#[allow(clippy::too_many_arguments)]
pub fn chapman_kolmogorov_check(
    model: &AbstractionModel,
    f: &TestFunction,
    x0: &[f64],
    t: f64,
    s: f64,
    outer_reps: usize,
    inner_reps: usize,
    seed: u64,
) -> Result<ChapmanReport> {
    if outer_reps == 0 || inner_reps == 0 {
        return Err(SimError::InvalidSpec("estimator needs reps >= 1".into()));
    }
    if !(t >= 0.0) || !(s >= 0.0) {
        return Err(SimError::InvalidSpec("times must be >= 0".into()));
    }
    let layout = model.layout();
    f.validate(&layout)?;

    let mut one_shot = Vec::with_capacity(outer_reps);
    let mut nested = Vec::with_capacity(outer_reps);
    for rep in 0..outer_reps {
        let mut rng = stream_rng(seed, LANE_REPLICATION, rep as u64);
        let x_end = super::model::simulate_abstraction(model, x0, t + s, &mut rng)?;
        one_shot.push(f.eval(&layout, &x_end));

        // same stream, stopped at t: the path prefix is identical
        let mut rng = stream_rng(seed, LANE_REPLICATION, rep as u64);
        let x_mid = super::model::simulate_abstraction(model, x0, t, &mut rng)?;
        let inner_master = stream_seed(seed, LANE_NESTED, rep as u64);
        let mut inner = Vec::with_capacity(inner_reps);
        for j in 0..inner_reps {
            let mut rng_j = stream_rng(inner_master, LANE_REPLICATION, j as u64);
            let x_in = super::model::simulate_abstraction(model, &x_mid, s, &mut rng_j)?;
            inner.push(f.eval(&layout, &x_in));
        }
        nested.push(mean_and_se(&inner).0);
    }
    let lhs = mean_and_se(&one_shot);
    let rhs = mean_and_se(&nested);
    Ok(ChapmanReport {
        report: ResidualReport::new(lhs, rhs, 0.0),
        identical: lhs.0.to_bits() == rhs.0.to_bits(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::model::{AgentRate, ModelAgent};
    use crate::analysis::testfn::TestFunction;
    use crate::hybrid::VectorKernel;

    fn one_agent(decay: f64, rate: f64, seed_value: f64) -> AbstractionModel {
        AbstractionModel {
            dim: 1,
            agents: vec![ModelAgent {
                decay,
                reset: VectorKernel::PointMass {
                    value: vec![seed_value],
                },
                rate: AgentRate::Constant { value: rate },
            }],
        }
    }

    #[test]
    fn time_zero_returns_the_observable_exactly() {
        let model = one_agent(1.0, 2.0, 1.0);
        let f = TestFunction::ClockCoordinate { agent: 0 };
        let (v, se) = semigroup_estimate(&model, &f, &[1.0, 0.7], 0.0, 50, 3).unwrap();
        assert_eq!(v, 0.7);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn unit_observable_is_conserved_exactly() {
        let model = one_agent(1.0, 2.0, 1.0);
        let f = TestFunction::Constant { value: 1.0 };
        for t in [0.0, 0.5, 2.0] {
            let (v, se) = semigroup_estimate(&model, &f, &[1.0, 0.0], t, 200, 4).unwrap();
            assert_eq!(v, 1.0);
            assert_eq!(se, 0.0);
        }
    }

    #[test]
    fn clock_mean_follows_its_moment_equation() {
        // dE[tau]/dt = 1 - lambda E[tau] from tau = 0: E[tau_t] = (1 - e^{-l t})/l
        let lambda = 1.0;
        let model = one_agent(1.0, lambda, 1.0);
        let f = TestFunction::ClockCoordinate { agent: 0 };
        let t = 1.25;
        let (v, se) = semigroup_estimate(&model, &f, &[1.0, 0.0], t, 20_000, 42).unwrap();
        let expected = (1.0 - (-lambda * t).exp()) / lambda;
        assert!(
            (v - expected).abs() < 3.0 * se,
            "mean {v} vs {expected} (se {se})"
        );
        assert!(se > 0.0);
    }

    #[test]
    fn estimates_are_reproducible_and_seed_sensitive() {
        let model = one_agent(0.5, 1.5, 1.0);
        let f = TestFunction::Coordinate { index: 0 };
        let a = semigroup_estimate(&model, &f, &[2.0, 0.0], 1.0, 500, 7).unwrap();
        let b = semigroup_estimate(&model, &f, &[2.0, 0.0], 1.0, 500, 7).unwrap();
        assert_eq!(a, b);
        let c = semigroup_estimate(&model, &f, &[2.0, 0.0], 1.0, 500, 8).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn short_time_rate_matches_generator_for_clock() {
        // f = tau at tau0: closed-form generator value 1 - lambda tau0
        let lambda = 1.0;
        let model = one_agent(1.0, lambda, 1.0);
        let f = TestFunction::ClockCoordinate { agent: 0 };
        let report =
            generator_residual(&model, &f, &[1.0, 0.3], 0.01, 100_000, 42, 2.0).unwrap();
        assert!(
            report.pass,
            "residual {} tolerance {}",
            report.residual, report.tolerance
        );
        assert!((report.reference - (1.0 - lambda * 0.3)).abs() < 1e-12);
    }

    #[test]
    fn deterministic_system_has_zero_residual() {
        // rate 0: x_h is the exact flow, f = tau gives rate exactly 1 up to
        // the rounding of (tau + h) - tau
        let model = one_agent(1.0, 0.0, 1.0);
        let f = TestFunction::ClockCoordinate { agent: 0 };
        let report = generator_residual(&model, &f, &[1.0, 0.3], 0.01, 100, 5, 1e-8).unwrap();
        assert!(report.residual.abs() < 1e-10, "residual {}", report.residual);
        assert_eq!(report.estimate_se, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn composition_with_zero_second_leg_is_bitwise() {
        let model = one_agent(1.0, 2.0, 1.0);
        let f = TestFunction::Coordinate { index: 0 };
        let r =
            chapman_kolmogorov_check(&model, &f, &[1.0, 0.0], 0.8, 0.0, 400, 10, 11).unwrap();
        assert!(r.identical);
        assert_eq!(r.report.residual, 0.0);
        assert!(r.report.pass);
    }

    #[test]
    fn composition_halves_agree_statistically() {
        let model = one_agent(1.0, 1.0, 1.0);
        let f = TestFunction::ClockCoordinate { agent: 0 };
        let r =
            chapman_kolmogorov_check(&model, &f, &[1.0, 0.0], 0.5, 0.5, 600, 40, 42).unwrap();
        assert!(
            r.report.pass,
            "residual {} tolerance {}",
            r.report.residual, r.report.tolerance
        );
        // and the one-shot leg agrees with the direct estimator of t + s
        let (direct, _) = semigroup_estimate(&model, &f, &[1.0, 0.0], 1.0, 600, 42).unwrap();
        assert_eq!(direct, r.report.estimate);
    }

    #[test]
    fn zero_first_leg_agrees_within_noise() {
        // t = 0: both legs estimate E f(x_s) from x0, with independent streams
        let model = one_agent(1.0, 1.0, 1.0);
        let f = TestFunction::ClockCoordinate { agent: 0 };
        let r =
            chapman_kolmogorov_check(&model, &f, &[1.0, 0.0], 0.0, 0.7, 500, 40, 9).unwrap();
        assert!(
            r.report.pass,
            "residual {} tolerance {}",
            r.report.residual, r.report.tolerance
        );
    }
}

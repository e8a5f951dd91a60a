//! Simulators for the two base hybrid-process classes.
//!
//! Jump times inside an integration step are located by linear interpolation
//! of the crossing; spontaneous jumps of the diffusion class fire with the
//! per-step probability 1 - exp(-lambda * dt); sojourn times of the flow
//! class are sampled by thinning against the declared rate bound.

use super::flow::{rk4_step_with, Rk4Scratch};
use super::{
    BoxDomain, HybridState, JumpCause, JumpRecord, PdmpSpec, ResetKernelSpec, ShsSpec, Trajectory,
};
use crate::error::{Result, SimError};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

/// Options shared by the hybrid simulators.
#[derive(Debug, Clone, Copy, Default)]
pub struct HybridSimOptions {
    /// Apply the Brownian-bridge boundary-crossing correction between steps
    /// that end inside the domain; reduces the O(sqrt(dt)) under-detection
    /// bias of discrete boundary checks.
    pub bridge: bool,
}

/// One Euler-Maruyama step of length `h` with the given standard-normal draws.
pub fn sde_step(spec: &ShsSpec, state: &HybridState, h: f64, noise: &[f64]) -> Result<HybridState> {
    let mode = state.mode;
    let m = spec
        .modes
        .get(mode.0)
        .ok_or_else(|| SimError::InvalidSpec(format!("unknown mode {mode}")))?;
    if state.position.len() != spec.dim {
        return Err(SimError::DimensionMismatch {
            what: "state position",
            expected: spec.dim,
            got: state.position.len(),
        });
    }
    if noise.len() != m.diffusion.wiener_dim() {
        return Err(SimError::DimensionMismatch {
            what: "noise vector",
            expected: m.diffusion.wiener_dim(),
            got: noise.len(),
        });
    }
    let mut drift = vec![0.0; spec.dim];
    m.field.eval_into(&state.position, &mut drift);
    let mut y = state.position.clone();
    for p in 0..spec.dim {
        y[p] += drift[p] * h;
    }
    m.diffusion.accumulate_into(noise, h.sqrt(), &mut y);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFinite("sde step"));
    }
    Ok(HybridState { mode, position: y })
}

/// Sample the next spontaneous-jump time along the flow started at `start`,
/// by thinning against `spec.rate.bound`. Returns `None` when no jump fires
/// before `horizon`. The flow is advanced by RK4 with step `dt`.
pub fn sample_sojourn(
    spec: &PdmpSpec,
    start: &HybridState,
    horizon: f64,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<Option<f64>> {
    spec.validate()?;
    if start.position.len() != spec.dim {
        return Err(SimError::DimensionMismatch {
            what: "sojourn start",
            expected: spec.dim,
            got: start.position.len(),
        });
    }
    let bound = spec.rate.bound;
    if bound == 0.0 {
        return Ok(None);
    }
    let field = &spec.modes[start.mode.0].field;
    let mut y = start.position.clone();
    let mut scratch = Rk4Scratch::new(spec.dim);
    let mut t = 0.0;
    loop {
        let gap: f64 = rng.sample::<f64, _>(Exp1) / bound;
        let target = t + gap;
        if target > horizon {
            return Ok(None);
        }
        // advance the flow from t to the proposal time
        while t < target {
            let h = dt.min(target - t);
            rk4_step_with(field, &mut y, h, &mut scratch);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonFinite("sojourn flow"));
            }
            t += h;
        }
        t = target;
        let lambda = spec.rate.eval(&y);
        if lambda > bound {
            return Err(SimError::RateBoundExceeded {
                rate: lambda,
                bound,
            });
        }
        if rng.gen::<f64>() * bound < lambda {
            return Ok(Some(t));
        }
    }
}

/// Draw a post-jump state from `kernel`; the result lies strictly inside
/// `domain` (the target mode's domain).
pub fn sample_reset(
    kernel: &ResetKernelSpec,
    domain: &BoxDomain,
    rng: &mut impl Rng,
) -> Result<HybridState> {
    let mut position = vec![0.0; kernel.kernel.dim()];
    kernel.kernel.sample_into(domain, rng, &mut position)?;
    Ok(HybridState {
        mode: kernel.mode,
        position,
    })
}

/// First boundary crossing of the segment `y0 -> y1`, located by linear
/// interpolation; returns the smallest crossing fraction in (0, 1].
fn first_face_crossing(domain: &BoxDomain, y0: &[f64], y1: &[f64]) -> Option<f64> {
    let mut theta_min = f64::INFINITY;
    for p in 0..y0.len() {
        let (a, b) = (y0[p], y1[p]);
        let lo = domain.lo[p];
        let hi = domain.hi[p];
        if b <= lo && a > lo {
            let theta = (lo - a) / (b - a);
            theta_min = theta_min.min(theta);
        }
        if b >= hi && a < hi {
            let theta = (hi - a) / (b - a);
            theta_min = theta_min.min(theta);
        }
    }
    (theta_min <= 1.0).then_some(theta_min.max(0.0))
}

fn lerp(y0: &[f64], y1: &[f64], theta: f64) -> Vec<f64> {
    y0.iter()
        .zip(y1)
        .map(|(a, b)| a + theta * (b - a))
        .collect()
}

struct JumpBudget {
    max_jumps: usize,
    count: usize,
}

impl JumpBudget {
    fn charge(&mut self, time: f64) -> Result<()> {
        self.count += 1;
        if self.count > self.max_jumps {
            Err(SimError::ZenoSuspected {
                jumps: self.count,
                time,
            })
        } else {
            Ok(())
        }
    }
}

/// Simulate the flow-driven process: deterministic motion between jumps,
/// spontaneous jumps sampled by thinning, forced jumps on boundary contact,
/// one reset kernel for both causes. Samples are recorded on the `dt` grid.
pub fn simulate_pdmp(
    spec: &PdmpSpec,
    x0: &HybridState,
    horizon: f64,
    dt: f64,
    max_jumps: usize,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    spec.validate()?;
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(SimError::InvalidSpec(
            "dt and horizon must be positive".into(),
        ));
    }
    if x0.position.len() != spec.dim {
        return Err(SimError::DimensionMismatch {
            what: "initial state",
            expected: spec.dim,
            got: x0.position.len(),
        });
    }
    let bound = spec.rate.bound;
    let mut state = x0.clone();
    let mut domain = spec.domain(state.mode);
    if !domain.contains(&state.position) {
        return Err(SimError::InvalidSpec(
            "initial position outside the mode domain".into(),
        ));
    }
    let mut traj = Trajectory::default();
    traj.samples.push((0.0, state.clone()));
    let mut budget = JumpBudget {
        max_jumps,
        count: 0,
    };
    let mut scratch = Rk4Scratch::new(spec.dim);

    let mut t = 0.0;
    let mut grid_index: usize = 0; // last recorded grid index
    let mut next_prop = if bound > 0.0 {
        rng.sample::<f64, _>(Exp1) / bound
    } else {
        f64::INFINITY
    };

    while t < horizon {
        let next_grid = ((grid_index + 1) as f64 * dt).min(horizon);
        let stop = next_grid.min(next_prop);
        let h = stop - t;
        let mut y1 = state.position.clone();
        if h > 0.0 {
            rk4_step_with(&spec.modes[state.mode.0].field, &mut y1, h, &mut scratch);
        }
        if y1.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite("flow"));
        }

        if let Some(theta) = first_face_crossing(&domain, &state.position, &y1) {
            // forced jump strictly before the stop time
            let tau = t + theta * h;
            budget.charge(tau)?;
            let pre = HybridState {
                mode: state.mode,
                position: lerp(&state.position, &y1, theta),
            };
            let target_domain = spec.domain(spec.reset.mode);
            let post = sample_reset(&spec.reset, &target_domain, rng)?;
            traj.jumps.push(JumpRecord {
                time: tau,
                pre,
                post: post.clone(),
                cause: JumpCause::Forced,
            });
            state = post;
            domain = spec.domain(state.mode);
            t = tau;
            next_prop = if bound > 0.0 {
                t + rng.sample::<f64, _>(Exp1) / bound
            } else {
                f64::INFINITY
            };
            continue;
        }

        state.position = y1;
        t = stop;

        if stop == next_prop {
            // thinning proposal
            let lambda = spec.rate.eval(&state.position);
            if lambda > bound {
                return Err(SimError::RateBoundExceeded {
                    rate: lambda,
                    bound,
                });
            }
            if rng.gen::<f64>() * bound < lambda {
                budget.charge(t)?;
                let pre = state.clone();
                let target_domain = spec.domain(spec.reset.mode);
                let post = sample_reset(&spec.reset, &target_domain, rng)?;
                traj.jumps.push(JumpRecord {
                    time: t,
                    pre,
                    post: post.clone(),
                    cause: JumpCause::Spontaneous,
                });
                state = post;
                domain = spec.domain(state.mode);
            }
            next_prop = t + rng.sample::<f64, _>(Exp1) / bound;
        }

        if t >= next_grid {
            traj.samples.push((next_grid, state.clone()));
            grid_index += 1;
        }
    }
    Ok(traj)
}

/// Simulate the diffusion-driven process: Euler-Maruyama steps, spontaneous
/// jumps with per-step probability 1 - exp(-lambda dt) (kernel
/// `reset_spontaneous`), forced jumps on boundary contact (kernel
/// `reset_forced`). One normal vector and one uniform are consumed per step
/// regardless of the outcome, so paired runs stay aligned.
pub fn simulate_shs(
    spec: &ShsSpec,
    x0: &HybridState,
    horizon: f64,
    dt: f64,
    max_jumps: usize,
    opts: &HybridSimOptions,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    spec.validate()?;
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(SimError::InvalidSpec(
            "dt and horizon must be positive".into(),
        ));
    }
    if x0.position.len() != spec.dim {
        return Err(SimError::DimensionMismatch {
            what: "initial state",
            expected: spec.dim,
            got: x0.position.len(),
        });
    }
    let mut state = x0.clone();
    let mut domain = spec.domain(state.mode);
    if !domain.contains(&state.position) {
        return Err(SimError::InvalidSpec(
            "initial position outside the mode domain".into(),
        ));
    }
    let mut traj = Trajectory::default();
    traj.samples.push((0.0, state.clone()));
    let mut budget = JumpBudget {
        max_jumps,
        count: 0,
    };
    let mut noise = Vec::new();
    let mut drift = vec![0.0; spec.dim];
    let mut bridge_u = vec![0.0; spec.dim];

    let mut t = 0.0;
    let mut grid_index: usize = 0;
    while t < horizon {
        let next_grid = ((grid_index + 1) as f64 * dt).min(horizon);
        let h = next_grid - t;
        let mode = &spec.modes[state.mode.0];
        let m = mode.diffusion.wiener_dim();
        noise.resize(m, 0.0);
        for xi in noise.iter_mut() {
            *xi = rng.sample(StandardNormal);
        }
        let u_spont: f64 = rng.gen();
        if opts.bridge {
            for u in bridge_u.iter_mut() {
                *u = rng.gen();
            }
        }

        mode.field.eval_into(&state.position, &mut drift);
        let mut y1 = state.position.clone();
        for p in 0..spec.dim {
            y1[p] += drift[p] * h;
        }
        mode.diffusion.accumulate_into(&noise, h.sqrt(), &mut y1);
        if y1.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite("sde step"));
        }

        let mut jumped = false;
        if let Some(theta) = first_face_crossing(&domain, &state.position, &y1) {
            let tau = t + theta * h;
            budget.charge(tau)?;
            let pre = HybridState {
                mode: state.mode,
                position: lerp(&state.position, &y1, theta),
            };
            let target_domain = spec.domain(spec.reset_forced.mode);
            let post = sample_reset(&spec.reset_forced, &target_domain, rng)?;
            traj.jumps.push(JumpRecord {
                time: tau,
                pre,
                post: post.clone(),
                cause: JumpCause::Forced,
            });
            state = post;
            domain = spec.domain(state.mode);
            t = tau;
            jumped = true;
        } else if opts.bridge {
            // both endpoints interior: test for an excursion through each face
            let mut fired: Option<(usize, f64)> = None;
            for p in 0..spec.dim {
                let sigma = mode.diffusion.row_norm(p);
                if sigma == 0.0 {
                    continue;
                }
                let var = sigma * sigma * h;
                let mut p_cross = 0.0;
                let mut face = f64::NAN;
                if domain.hi[p].is_finite() {
                    let q = (-2.0 * (domain.hi[p] - state.position[p]) * (domain.hi[p] - y1[p])
                        / var)
                        .exp();
                    if q > p_cross {
                        p_cross = q;
                        face = domain.hi[p];
                    }
                }
                if domain.lo[p].is_finite() {
                    let q = (-2.0 * (state.position[p] - domain.lo[p]) * (y1[p] - domain.lo[p])
                        / var)
                        .exp();
                    if q > p_cross {
                        p_cross = q;
                        face = domain.lo[p];
                    }
                }
                if p_cross > 0.0 && bridge_u[p] < p_cross {
                    fired = Some((p, face));
                    break;
                }
            }
            if let Some((p, face)) = fired {
                let tau = t + 0.5 * h;
                budget.charge(tau)?;
                let mut pre_pos = lerp(&state.position, &y1, 0.5);
                pre_pos[p] = face;
                let pre = HybridState {
                    mode: state.mode,
                    position: pre_pos,
                };
                let target_domain = spec.domain(spec.reset_forced.mode);
                let post = sample_reset(&spec.reset_forced, &target_domain, rng)?;
                traj.jumps.push(JumpRecord {
                    time: tau,
                    pre,
                    post: post.clone(),
                    cause: JumpCause::Forced,
                });
                state = post;
                domain = spec.domain(state.mode);
                t = tau;
                jumped = true;
            }
        }

        if !jumped {
            let lambda = spec.rate.eval(&state.position);
            if u_spont < -(-lambda * h).exp_m1() {
                // spontaneous jump at the end of the step, after diffusing
                budget.charge(next_grid)?;
                let pre = HybridState {
                    mode: state.mode,
                    position: y1,
                };
                let target_domain = spec.domain(spec.reset_spontaneous.mode);
                let post = sample_reset(&spec.reset_spontaneous, &target_domain, rng)?;
                traj.jumps.push(JumpRecord {
                    time: next_grid,
                    pre,
                    post: post.clone(),
                    cause: JumpCause::Spontaneous,
                });
                state = post;
                domain = spec.domain(state.mode);
            } else {
                state.position = y1;
            }
            t = next_grid;
        }

        if t >= next_grid {
            traj.samples.push((next_grid, state.clone()));
            grid_index += 1;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::{
        DiffusionSpec, PdmpMode, RateKind, RateSpec, ShsMode, VectorFieldSpec,
    };
    use crate::stats::{ks_statistic, mean_and_se};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn drifting_shs(drift: f64, sigma: f64, barrier: f64) -> ShsSpec {
        ShsSpec {
            dim: 1,
            modes: vec![ShsMode {
                field: VectorFieldSpec::Constant { value: vec![drift] },
                diffusion: if sigma == 0.0 {
                    DiffusionSpec::Zero
                } else {
                    DiffusionSpec::ConstantMatrix {
                        rows: vec![vec![sigma]],
                    }
                },
                domain: Some(BoxDomain {
                    lo: vec![f64::NEG_INFINITY],
                    hi: vec![barrier],
                }),
            }],
            rate: RateSpec::constant(0.0, 0.0),
            reset_spontaneous: ResetKernelSpec::point_mass(0, vec![0.0]),
            reset_forced: ResetKernelSpec::point_mass(0, vec![0.0]),
        }
    }

    fn free_pdmp(rate: RateSpec) -> PdmpSpec {
        PdmpSpec {
            dim: 1,
            modes: vec![PdmpMode {
                field: VectorFieldSpec::Constant { value: vec![0.0] },
                domain: None,
            }],
            rate,
            reset: ResetKernelSpec::point_mass(0, vec![0.0]),
        }
    }

    #[test]
    fn sde_step_closed_form() {
        let spec = ShsSpec {
            dim: 1,
            modes: vec![ShsMode {
                field: VectorFieldSpec::Constant { value: vec![2.0] },
                diffusion: DiffusionSpec::ConstantMatrix {
                    rows: vec![vec![0.5]],
                },
                domain: None,
            }],
            rate: RateSpec::constant(0.0, 0.0),
            reset_spontaneous: ResetKernelSpec::point_mass(0, vec![0.0]),
            reset_forced: ResetKernelSpec::point_mass(0, vec![0.0]),
        };
        let s = HybridState::new(0, vec![1.0]);
        let out = sde_step(&spec, &s, 0.01, &[1.0]).unwrap();
        // 1 + 2*0.01 + 0.5*sqrt(0.01)*1 = 1.07
        assert!((out.position[0] - 1.07).abs() < 1e-12);
    }

    #[test]
    fn sde_step_zero_noise_is_euler() {
        let spec = drifting_shs(1.5, 0.0, f64::INFINITY);
        let s = HybridState::new(0, vec![0.0]);
        let out = sde_step(&spec, &s, 0.25, &[]).unwrap();
        assert_eq!(out.position, vec![0.375]);
    }

    #[test]
    fn brownian_variance_grows_linearly() {
        // pure noise: Var(z_1) = 1
        let spec = drifting_shs(0.0, 1.0, f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let mut finals = Vec::with_capacity(n);
        for _ in 0..n {
            let t = simulate_shs(
                &spec,
                &HybridState::new(0, vec![0.0]),
                1.0,
                0.01,
                1000,
                &HybridSimOptions::default(),
                &mut rng,
            )
            .unwrap();
            finals.push(t.final_state().position[0]);
        }
        let (mean, _) = mean_and_se(&finals);
        let var = finals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "sample variance {var}");
    }

    #[test]
    fn sojourn_with_tight_bound_accepts_first_proposal() {
        // lambda == bound: thinning accepts immediately, so the sample equals
        // a plain exponential draw from the same stream
        let spec = free_pdmp(RateSpec::constant(3.0, 3.0));
        let start = HybridState::new(0, vec![0.0]);
        let mut rng_a = ChaCha8Rng::seed_from_u64(5);
        let s = sample_sojourn(&spec, &start, 1e9, 0.1, &mut rng_a)
            .unwrap()
            .unwrap();
        let mut rng_b = ChaCha8Rng::seed_from_u64(5);
        let direct: f64 = rng_b.sample::<f64, _>(Exp1) / 3.0;
        assert_eq!(s, direct);
    }

    #[test]
    fn sojourn_constant_rate_is_exponential() {
        let spec = free_pdmp(RateSpec::constant(2.0, 3.0));
        let start = HybridState::new(0, vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 20_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            xs.push(
                sample_sojourn(&spec, &start, 1e9, 0.1, &mut rng)
                    .unwrap()
                    .unwrap(),
            );
        }
        let (mean, se) = mean_and_se(&xs);
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean} se {se}");
        let d = ks_statistic(&xs, |t| -(-2.0 * t).exp_m1());
        assert!(d < 0.015, "KS {d}");
    }

    #[test]
    fn sojourn_affine_rate_median_is_sqrt_2ln2() {
        // unit-speed coordinate with lambda(y) = |y| gives survival
        // exp(-t^2/2); median sqrt(2 ln 2)
        let spec = PdmpSpec {
            dim: 1,
            modes: vec![PdmpMode {
                field: VectorFieldSpec::Constant { value: vec![1.0] },
                domain: None,
            }],
            rate: RateSpec {
                kind: RateKind::AffineNorm {
                    base: 0.0,
                    slope: 1.0,
                },
                bound: 6.0,
            },
            reset: ResetKernelSpec::point_mass(0, vec![0.0]),
        };
        let start = HybridState::new(0, vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            xs.push(
                sample_sojourn(&spec, &start, 6.0, 0.01, &mut rng)
                    .unwrap()
                    .expect("horizon covers essentially all mass"),
            );
        }
        xs.sort_by(f64::total_cmp);
        let median = xs[n / 2];
        let expect = (2.0 * std::f64::consts::LN_2).sqrt();
        assert!(
            (median - expect).abs() / expect < 0.02,
            "median {median} vs {expect}"
        );
    }

    #[test]
    fn sojourn_rate_above_bound_errors() {
        let spec = free_pdmp(RateSpec::constant(5.0, 1.0));
        let start = HybridState::new(0, vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        match sample_sojourn(&spec, &start, 10.0, 0.1, &mut rng) {
            Err(SimError::RateBoundExceeded { .. }) => {}
            other => panic!("expected rate bound error, got {other:?}"),
        }
    }

    #[test]
    fn pdmp_zero_rate_reduces_to_flow() {
        let mut spec = free_pdmp(RateSpec::constant(0.0, 0.0));
        spec.modes[0].field = VectorFieldSpec::Linear {
            matrix: vec![vec![-1.0]],
            offset: vec![0.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traj = simulate_pdmp(
            &spec,
            &HybridState::new(0, vec![1.0]),
            2.0,
            1e-3,
            10,
            &mut rng,
        )
        .unwrap();
        assert!(traj.jumps.is_empty());
        assert!((traj.final_state().position[0] - (-2.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn pdmp_jump_counts_are_poisson() {
        // constant rate 1 on a still flow: E[count in [0,10]] = 10
        let spec = free_pdmp(RateSpec::constant(1.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let reps = 4000;
        let mut counts = Vec::with_capacity(reps);
        for _ in 0..reps {
            let traj = simulate_pdmp(
                &spec,
                &HybridState::new(0, vec![0.0]),
                10.0,
                0.05,
                100_000,
                &mut rng,
            )
            .unwrap();
            counts.push(traj.jumps.len() as f64);
        }
        let (mean, se) = mean_and_se(&counts);
        assert!((mean - 10.0).abs() < 3.0 * se.max(0.05), "mean {mean}");
    }

    #[test]
    fn pdmp_zeno_spec_is_detected() {
        let spec = free_pdmp(RateSpec::constant(1e6, 1e6));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        match simulate_pdmp(
            &spec,
            &HybridState::new(0, vec![0.0]),
            1.0,
            0.01,
            1000,
            &mut rng,
        ) {
            Err(SimError::ZenoSuspected { jumps, .. }) => assert!(jumps > 1000),
            other => panic!("expected Zeno error, got {other:?}"),
        }
    }

    #[test]
    fn pdmp_forced_jump_at_boundary_hit() {
        // unit drift toward a wall at 1, reset to 0; hits repeat every ~1
        let spec = PdmpSpec {
            dim: 1,
            modes: vec![PdmpMode {
                field: VectorFieldSpec::Constant { value: vec![1.0] },
                domain: Some(BoxDomain {
                    lo: vec![-1.0],
                    hi: vec![1.0],
                }),
            }],
            rate: RateSpec::constant(0.0, 0.0),
            reset: ResetKernelSpec::point_mass(0, vec![0.0]),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let traj = simulate_pdmp(
            &spec,
            &HybridState::new(0, vec![0.0]),
            3.5,
            0.01,
            100,
            &mut rng,
        )
        .unwrap();
        assert_eq!(traj.jumps.len(), 3);
        for (i, j) in traj.jumps.iter().enumerate() {
            assert_eq!(j.cause, JumpCause::Forced);
            assert!((j.time - (i + 1) as f64).abs() < 1e-9, "time {}", j.time);
            assert!((j.pre.position[0] - 1.0).abs() < 1e-9);
            assert_eq!(j.post.position[0], 0.0);
        }
    }

    #[test]
    fn shs_without_noise_or_jumps_tracks_the_drift() {
        let spec = drifting_shs(0.5, 0.0, f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let traj = simulate_shs(
            &spec,
            &HybridState::new(0, vec![0.0]),
            2.0,
            1e-3,
            10,
            &HybridSimOptions::default(),
            &mut rng,
        )
        .unwrap();
        assert!(traj.jumps.is_empty());
        assert!((traj.final_state().position[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shs_spontaneous_interjump_times_are_exponential() {
        let mut spec = drifting_shs(0.0, 0.0, f64::INFINITY);
        spec.rate = RateSpec::constant(2.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let traj = simulate_shs(
            &spec,
            &HybridState::new(0, vec![0.0]),
            600.0,
            1e-3,
            1_000_000,
            &HybridSimOptions::default(),
            &mut rng,
        )
        .unwrap();
        let times: Vec<f64> = traj.jumps.iter().map(|j| j.time).collect();
        assert!(times.len() > 1000);
        let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.push(times[0]);
        let d = ks_statistic(&gaps, |t| -(-2.0 * t).exp_m1());
        // 1% critical value ~ 1.63 / sqrt(n)
        let crit = 1.63 / (gaps.len() as f64).sqrt();
        assert!(d < crit, "KS {d} crit {crit}");
    }

    #[test]
    fn shs_deterministic_barrier_hit_is_located_by_interpolation() {
        let spec = drifting_shs(1.0, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let traj = simulate_shs(
            &spec,
            &HybridState::new(0, vec![0.0]),
            1.5,
            1e-2,
            10,
            &HybridSimOptions::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(traj.jumps[0].cause, JumpCause::Forced);
        assert!((traj.jumps[0].time - 1.0).abs() < 1e-9);
    }
}

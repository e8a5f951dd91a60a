//! Monte-Carlo first-passage estimation for a single agent against its
//! decaying guard, conditioned on a frozen snapshot of its neighbours, and
//! the hazard-rate table ψ/(1-Ψ) derived from it.
//!
//! Conditioning semantics: the agent starts at clock 0 with guard seed γ;
//! each neighbour j keeps the clock value τ^j it had at the conditioning
//! instant. Neighbour j starts contributing `w_j exp(-k τ^j)` to the input
//! once the probe clock passes τ^j (its frozen clock is then no newer than
//! the agent's), so the input grows stepwise and the effective barrier drops
//! stepwise.

use crate::agent::{first_guard_crossing, guard_gap, AgentSpec};
use crate::error::{Result, SimError};
use crate::hybrid::BoxDomain;
use crate::rng::{stream_rng, LANE_REPLICATION};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::RateEstimate;

/// Frozen snapshot the first-passage law is conditioned on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageConditioning {
    /// The agent's own guard seed at its last jump.
    pub guard: Vec<f64>,
    /// Retained neighbours as (frozen clock, weight vector).
    pub neighbors: Vec<(f64, Vec<f64>)>,
}

impl FirstPassageConditioning {
    pub fn isolated(guard: Vec<f64>) -> Self {
        FirstPassageConditioning {
            guard,
            neighbors: Vec::new(),
        }
    }

    /// Input vector at probe clock `t` under the listener's decay rate.
    pub fn input_at(&self, decay: f64, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        for (tau_j, w) in &self.neighbors {
            if *tau_j <= t {
                let factor = (-decay * tau_j).exp();
                for (o, wp) in out.iter_mut().zip(w) {
                    *o += wp * factor;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstPassageOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Histogram bins over [0, horizon].
    pub bins: usize,
    /// Excursion test for crossings missed between step endpoints.
    pub bridge: bool,
}

impl Default for FirstPassageOptions {
    fn default() -> Self {
        FirstPassageOptions {
            dt: 1e-3,
            horizon: 5.0,
            bins: 100,
            bridge: false,
        }
    }
}

/// Histogram density ψ̂ and empirical CDF Ψ̂ of the first hitting time, with
/// binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageEstimate {
    /// Bin edges: `bins + 1` points spanning [0, horizon].
    pub edges: Vec<f64>,
    /// Hits per bin.
    pub counts: Vec<u64>,
    pub n_reps: usize,
    pub n_hits: usize,
    /// True when some paths never hit before the horizon.
    pub truncated: bool,
    pub conditioning: FirstPassageConditioning,
}

impl FirstPassageEstimate {
    pub fn from_hits(
        hits: &[Option<f64>],
        horizon: f64,
        bins: usize,
        conditioning: FirstPassageConditioning,
    ) -> Result<Self> {
        if bins == 0 || !(horizon > 0.0) {
            return Err(SimError::InvalidSpec(
                "histogram needs bins >= 1 and horizon > 0".into(),
            ));
        }
        let edges: Vec<f64> = (0..=bins)
            .map(|k| horizon * k as f64 / bins as f64)
            .collect();
        let mut counts = vec![0u64; bins];
        let mut n_hits = 0;
        for h in hits.iter().flatten() {
            let bin = ((h / horizon * bins as f64) as usize).min(bins - 1);
            counts[bin] += 1;
            n_hits += 1;
        }
        Ok(FirstPassageEstimate {
            edges,
            counts,
            n_reps: hits.len(),
            n_hits,
            truncated: n_hits < hits.len(),
            conditioning,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    /// Histogram density at `t` (0 outside the horizon).
    pub fn density_at(&self, t: f64) -> f64 {
        if t < 0.0 || t > *self.edges.last().unwrap() {
            return 0.0;
        }
        let bins = self.counts.len();
        let bin = ((t / self.edges[bins]) * bins as f64) as usize;
        let bin = bin.min(bins - 1);
        self.counts[bin] as f64 / (self.n_reps as f64 * self.bin_width())
    }

    /// Binomial standard error of the density at `t`.
    pub fn density_se_at(&self, t: f64) -> f64 {
        let n = self.n_reps as f64;
        let p = self.density_at(t) * self.bin_width();
        (p * (1.0 - p) / n).sqrt() / self.bin_width()
    }

    /// Empirical CDF, linearly interpolated between bin edges.
    pub fn cdf_at(&self, t: f64) -> f64 {
        let horizon = *self.edges.last().unwrap();
        if t <= 0.0 {
            return 0.0;
        }
        if t >= horizon {
            return self.n_hits as f64 / self.n_reps as f64;
        }
        let bins = self.counts.len();
        let pos = t / horizon * bins as f64;
        let bin = (pos as usize).min(bins - 1);
        let frac = pos - bin as f64;
        let below: u64 = self.counts[..bin].iter().sum();
        (below as f64 + frac * self.counts[bin] as f64) / self.n_reps as f64
    }

    pub fn survival_at(&self, t: f64) -> f64 {
        1.0 - self.cdf_at(t)
    }

    /// Binomial standard error of the CDF at `t`.
    pub fn cdf_se_at(&self, t: f64) -> f64 {
        let p = self.cdf_at(t);
        (p * (1.0 - p) / self.n_reps as f64).sqrt()
    }

    /// Mean of the recorded hitting times (hits only).
    pub fn mean_hit_and_se(&self, hits: &[Option<f64>]) -> (f64, f64) {
        let times: Vec<f64> = hits.iter().flatten().copied().collect();
        crate::stats::mean_and_se(&times)
    }
}

/// Simulate `reps` conditioned first-passage probes of one agent. Returns the
/// estimate and the raw per-path hit times (None = censored at the horizon).
pub fn estimate_first_passage(
    spec: &AgentSpec,
    conditioning: &FirstPassageConditioning,
    opts: &FirstPassageOptions,
    reps: usize,
    seed: u64,
) -> Result<(FirstPassageEstimate, Vec<Option<f64>>)> {
    spec.validate()?;
    let d = spec.dim;
    if conditioning.guard.len() != d {
        return Err(SimError::DimensionMismatch {
            what: "conditioning guard",
            expected: d,
            got: conditioning.guard.len(),
        });
    }
    for (tau_j, w) in &conditioning.neighbors {
        if w.len() != d {
            return Err(SimError::DimensionMismatch {
                what: "conditioning weight",
                expected: d,
                got: w.len(),
            });
        }
        if !(*tau_j >= 0.0) {
            return Err(SimError::InvalidSpec(
                "conditioning clocks must be >= 0".into(),
            ));
        }
    }
    if !(opts.dt > 0.0) || !(opts.horizon > 0.0) || opts.bins == 0 {
        return Err(SimError::InvalidSpec(
            "first-passage options need dt > 0, horizon > 0, bins >= 1".into(),
        ));
    }
    if reps == 0 {
        return Err(SimError::InvalidSpec("estimator needs reps >= 1".into()));
    }

    let mode = &spec.modes[spec.init_mode];
    let decay = spec.guard.decay;
    let free = BoxDomain::unbounded(d);
    let n_steps = (opts.horizon / opts.dt - 1e-9).ceil().max(1.0) as usize;

    let mut hits: Vec<Option<f64>> = Vec::with_capacity(reps);
    let mut z = vec![0.0; d];
    let mut z_prop = vec![0.0; d];
    let mut drift = vec![0.0; d];
    let mut noise = vec![0.0; mode.diffusion.wiener_dim()];
    let mut input0 = vec![0.0; d];
    let mut input1 = vec![0.0; d];
    let mut g0 = vec![0.0; d];
    let mut g1 = vec![0.0; d];

    for rep in 0..reps {
        let mut rng = stream_rng(seed, LANE_REPLICATION, rep as u64);
        spec.z_init.sample_into(&free, &mut rng, &mut z)?;
        let mut hit = None;
        for k in 0..n_steps {
            let t = k as f64 * opts.dt;
            let t1 = ((k + 1) as f64 * opts.dt).min(opts.horizon);
            let h = t1 - t;

            let barrier0 = (-decay * t).exp();
            conditioning.input_at(decay, t, &mut input0);
            for p in 0..d {
                g0[p] = guard_gap(z[p], conditioning.guard[p] * barrier0, input0[p]);
            }

            for xi in noise.iter_mut() {
                *xi = rng.sample(StandardNormal);
            }
            mode.field.eval_into(&z, &mut drift);
            for p in 0..d {
                z_prop[p] = z[p] + drift[p] * h;
            }
            mode.diffusion.accumulate_into(&noise, h.sqrt(), &mut z_prop);
            if z_prop.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonFinite("first-passage step"));
            }

            let barrier1 = (-decay * t1).exp();
            conditioning.input_at(decay, t1, &mut input1);
            for p in 0..d {
                g1[p] = guard_gap(z_prop[p], conditioning.guard[p] * barrier1, input1[p]);
            }

            let mut crossing = first_guard_crossing(&g0, &g1, 0.0);
            if opts.bridge {
                // fixed draw count per step, crossing found or not
                for p in 0..d {
                    let u: f64 = rng.gen();
                    if crossing.is_none() {
                        let sigma = mode.diffusion.row_norm(p);
                        if sigma > 0.0 {
                            let p_cross = (2.0 * g0[p] * g1[p] / (sigma * sigma * h)).exp();
                            if u < p_cross {
                                crossing = Some((p, 0.5));
                            }
                        }
                    }
                }
            }
            if let Some((_, theta)) = crossing {
                hit = Some(t + theta * h);
                break;
            }
            z.copy_from_slice(&z_prop);
        }
        hits.push(hit);
    }

    let est =
        FirstPassageEstimate::from_hits(&hits, opts.horizon, opts.bins, conditioning.clone())?;
    Ok((est, hits))
}

/// Hazard rate ψ̂(τ)/(1 - Ψ̂(τ)). Fails when estimated survival drops below
/// `floor` (the ratio becomes unreliable as Ψ̂ approaches 1).
pub fn jump_rate_from_fp(
    est: &FirstPassageEstimate,
    tau: f64,
    floor: f64,
) -> Result<f64> {
    let survival = est.survival_at(tau);
    if survival < floor {
        return Err(SimError::SurvivalTooSmall { survival, floor });
    }
    Ok(est.density_at(tau) / survival)
}

/// Default survival floor for hazard estimates.
pub const SURVIVAL_FLOOR: f64 = 0.05;

/// Hazard table on the histogram midpoints, masked where survival < `floor`.
pub fn rate_table(est: &FirstPassageEstimate, floor: f64) -> RateEstimate {
    let mut tau = Vec::with_capacity(est.counts.len());
    let mut lambda = Vec::with_capacity(est.counts.len());
    let mut valid = Vec::with_capacity(est.counts.len());
    for k in 0..est.counts.len() {
        let mid = (est.edges[k] + est.edges[k + 1]) / 2.0;
        tau.push(mid);
        match jump_rate_from_fp(est, mid, floor) {
            Ok(rate) => {
                lambda.push(rate);
                valid.push(true);
            }
            Err(_) => {
                lambda.push(f64::NAN);
                valid.push(false);
            }
        }
    }
    RateEstimate { tau, lambda, valid }
}

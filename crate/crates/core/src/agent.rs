//! The coordination agent: a per-mode diffusion state `z`, a deterministic
//! decaying guard, a local clock counting time since the agent's last jump,
//! and an additive coupling input built from the jump announcements of
//! configured neighbours.
//!
//! A jump fires when the first component of the effective position
//! `z + input` reaches the guard; equivalently, when `z` reaches the
//! input-lowered guard. Both formulations evaluate one shared gap expression
//! so paired runs agree bit for bit.

use crate::error::{Result, SimError};
use crate::hybrid::{BoxDomain, DiffusionSpec, VectorFieldSpec, VectorKernel};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Guard specification: seed kernel, exponential decay rate, and an optional
/// general right-hand side replacing the default `d(beta)/dt = -decay * beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardSpec {
    /// Decay rate k >= 0 of the default exponential guard.
    pub decay: f64,
    /// Kernel for the guard seed drawn at every jump; strictly positive support.
    pub init: VectorKernel,
    /// Optional general guard dynamics; when set, guards are integrated by RK4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<VectorFieldSpec>,
}

impl GuardSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.decay >= 0.0) || !self.decay.is_finite() {
            return Err(SimError::InvalidSpec(
                "guard decay must be finite and >= 0".into(),
            ));
        }
        self.init.validate(dim)?;
        match &self.init {
            VectorKernel::PointMass { value } => {
                if value.iter().any(|v| *v <= 0.0) {
                    return Err(SimError::InvalidSpec(
                        "guard seed kernel must have strictly positive support".into(),
                    ));
                }
            }
            VectorKernel::UniformBox { lo, .. } => {
                if lo.iter().any(|v| *v < 0.0) {
                    return Err(SimError::InvalidSpec(
                        "guard seed box must lie in the positive orthant".into(),
                    ));
                }
            }
            VectorKernel::Gaussian { .. } => {} // clipped to the positive orthant when drawn
        }
        if let Some(rhs) = &self.rhs {
            rhs.validate(dim)?;
        }
        Ok(())
    }
}

/// Guard value for the exponential law: `base * exp(-decay * clock)`,
/// componentwise.
pub fn guard_value(base: &[f64], decay: f64, clock: f64) -> Vec<f64> {
    let factor = (-decay * clock).exp();
    base.iter().map(|g| g * factor).collect()
}

pub(crate) fn guard_value_into(base: &[f64], decay: f64, clock: f64, out: &mut [f64]) {
    let factor = (-decay * clock).exp();
    for (o, g) in out.iter_mut().zip(base) {
        *o = g * factor;
    }
}

/// Guard value under a general right-hand side, integrated from `base` over
/// `[0, clock]` by fixed-step RK4.
pub fn guard_value_ode(
    base: &[f64],
    rhs: &VectorFieldSpec,
    clock: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    crate::hybrid::integrate_field(rhs, base, clock, dt)
}

/// Positive orthant used when drawing guard seeds.
pub(crate) fn positive_orthant(dim: usize) -> BoxDomain {
    BoxDomain {
        lo: vec![0.0; dim],
        hi: vec![f64::INFINITY; dim],
    }
}

/// Per-mode continuous dynamics of the agent state `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentMode {
    pub field: VectorFieldSpec,
    pub diffusion: DiffusionSpec,
}

/// Mode switch rule applied at jumps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeTransition {
    /// mode -> (mode + 1) mod #modes
    #[default]
    Cyclic,
    /// Draw the next mode from a fixed distribution.
    Distribution { weights: Vec<f64> },
}

/// Full description of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    /// Stable identifier; also keys the agent's RNG stream.
    pub id: u64,
    pub dim: usize,
    pub modes: Vec<AgentMode>,
    #[serde(default)]
    pub init_mode: usize,
    /// Kernel of `z` drawn at start and at every jump.
    pub z_init: VectorKernel,
    pub guard: GuardSpec,
    #[serde(default)]
    pub transition: ModeTransition,
}

impl AgentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.id >= crate::rng::AGENT_ID_LIMIT {
            return Err(SimError::InvalidSpec(format!(
                "agent id {} exceeds the stream id limit {}",
                self.id,
                crate::rng::AGENT_ID_LIMIT
            )));
        }
        if self.modes.is_empty() {
            return Err(SimError::InvalidSpec(format!(
                "agent {} has no modes",
                self.id
            )));
        }
        if self.init_mode >= self.modes.len() {
            return Err(SimError::InvalidSpec(format!(
                "agent {}: initial mode {} out of range",
                self.id, self.init_mode
            )));
        }
        for m in &self.modes {
            m.field.validate(self.dim)?;
            m.diffusion.validate(self.dim)?;
        }
        self.z_init.validate(self.dim)?;
        self.guard.validate(self.dim)?;
        if let ModeTransition::Distribution { weights } = &self.transition {
            if weights.len() != self.modes.len() {
                return Err(SimError::InvalidSpec(format!(
                    "agent {}: transition distribution length {} != mode count {}",
                    self.id,
                    weights.len(),
                    self.modes.len()
                )));
            }
            if weights.iter().any(|w| *w < 0.0)
                || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return Err(SimError::InvalidSpec(format!(
                    "agent {}: transition distribution must be a probability vector",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// One retained coupling entry: the announcing agent and its weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub source: usize,
    pub weight: Vec<f64>,
}

/// Sparse coupling table. Entries with |weight| below the threshold are
/// dropped at construction; they can never enter a neighbourhood, so removing
/// them changes nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    n: usize,
    dim: usize,
    threshold: f64,
    rows: Vec<Vec<CouplingEntry>>,
    listeners: Vec<Vec<usize>>,
}

impl CouplingSpec {
    pub fn empty(n: usize, dim: usize, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(SimError::InvalidSpec(
                "coupling threshold must be > 0".into(),
            ));
        }
        Ok(CouplingSpec {
            n,
            dim,
            threshold,
            rows: vec![Vec::new(); n],
            listeners: vec![Vec::new(); n],
        })
    }

    /// Build from a dense table `weights[listener][source]` of d-vectors.
    pub fn from_dense(weights: &[Vec<Vec<f64>>], dim: usize, threshold: f64) -> Result<Self> {
        let n = weights.len();
        let mut spec = Self::empty(n, dim, threshold)?;
        for (i, row) in weights.iter().enumerate() {
            if row.len() != n {
                return Err(SimError::Validation(vec![format!(
                    "coupling row {i} has length {} (expected {n})",
                    row.len()
                )]));
            }
            for (j, w) in row.iter().enumerate() {
                if w.len() != dim {
                    return Err(SimError::Validation(vec![format!(
                        "coupling weight [{i}][{j}] has dimension {} (expected {dim})",
                        w.len()
                    )]));
                }
                if i == j {
                    if w.iter().any(|v| *v != 0.0) {
                        return Err(SimError::Validation(vec![format!(
                            "self-coupling weight [{i}][{i}] must be zero"
                        )]));
                    }
                    continue;
                }
                spec.push_entry(i, j, w.clone())?;
            }
        }
        Ok(spec)
    }

    /// Build from an explicit sparse entry list `(listener, source, weight)`.
    pub fn from_entries(
        n: usize,
        dim: usize,
        threshold: f64,
        entries: &[(usize, usize, Vec<f64>)],
    ) -> Result<Self> {
        let mut spec = Self::empty(n, dim, threshold)?;
        for (i, j, w) in entries {
            spec.add_entry(*i, *j, w.clone())?;
        }
        Ok(spec)
    }

    /// Insert one checked entry; weights below the threshold are dropped.
    pub fn add_entry(&mut self, listener: usize, source: usize, weight: Vec<f64>) -> Result<()> {
        let (i, j, n) = (listener, source, self.n);
        if i >= n || j >= n {
            return Err(SimError::Validation(vec![format!(
                "coupling entry ({i}, {j}) out of range for {n} agents"
            )]));
        }
        if i == j {
            return Err(SimError::Validation(vec![format!(
                "self-coupling entry ({i}, {i}) is not allowed"
            )]));
        }
        if weight.len() != self.dim {
            return Err(SimError::Validation(vec![format!(
                "coupling entry ({i}, {j}) has dimension {} (expected {})",
                weight.len(),
                self.dim
            )]));
        }
        if self.rows[i].iter().any(|e| e.source == j) {
            return Err(SimError::Validation(vec![format!(
                "duplicate coupling entry ({i}, {j})"
            )]));
        }
        self.push_entry(i, j, weight)
    }

    fn push_entry(&mut self, listener: usize, source: usize, weight: Vec<f64>) -> Result<()> {
        if weight.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Validation(vec![format!(
                "coupling weight ({listener}, {source}) is not finite"
            )]));
        }
        if crate::stats::norm2(&weight) >= self.threshold {
            self.rows[listener].push(CouplingEntry {
                source,
                weight,
            });
            self.listeners[source].push(listener);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Retained incoming entries of `listener`.
    pub fn row(&self, listener: usize) -> &[CouplingEntry] {
        &self.rows[listener]
    }

    /// Agents that receive `source`'s jump announcements.
    pub fn listeners(&self, source: usize) -> &[usize] {
        &self.listeners[source]
    }

    /// All retained entries as (listener, source, weight) triples.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &[f64])> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter().map(move |e| (i, e.source, e.weight.as_slice()))
        })
    }
}

/// Agents whose announcements currently reach `agent`: retained weight and a
/// clock no larger than the agent's own.
pub fn neighborhood(agent: usize, coupling: &CouplingSpec, clocks: &[f64]) -> Result<Vec<usize>> {
    if agent >= coupling.n() {
        return Err(SimError::UnknownAgent(agent));
    }
    if clocks.len() != coupling.n() {
        return Err(SimError::DimensionMismatch {
            what: "clock vector",
            expected: coupling.n(),
            got: clocks.len(),
        });
    }
    Ok(coupling
        .row(agent)
        .iter()
        .filter(|e| clocks[e.source] <= clocks[agent])
        .map(|e| e.source)
        .collect())
}

/// Coupling input of `agent`: sum over its neighbourhood of
/// `weight * exp(-decay * clock_of_source)`, with the agent's own decay rate.
pub fn coupling_input(
    agent: usize,
    coupling: &CouplingSpec,
    decay: f64,
    clocks: &[f64],
) -> Result<Vec<f64>> {
    if agent >= coupling.n() {
        return Err(SimError::UnknownAgent(agent));
    }
    if clocks.len() != coupling.n() {
        return Err(SimError::DimensionMismatch {
            what: "clock vector",
            expected: coupling.n(),
            got: clocks.len(),
        });
    }
    let mut out = vec![0.0; coupling.dim()];
    for e in coupling.row(agent) {
        if clocks[e.source] <= clocks[agent] {
            let factor = (-decay * clocks[e.source]).exp();
            for (o, w) in out.iter_mut().zip(&e.weight) {
                *o += w * factor;
            }
        }
    }
    Ok(out)
}

/// Effective position: `z + input`.
pub fn effective_position(z: &[f64], input: &[f64]) -> Vec<f64> {
    z.iter().zip(input).map(|(a, b)| a + b).collect()
}

/// Input-lowered guard: `barrier - input`.
pub fn modified_guard(barrier: &[f64], input: &[f64]) -> Vec<f64> {
    barrier.iter().zip(input).map(|(a, b)| a - b).collect()
}

/// Which formulation of the hit predicate a run nominally uses.
///
/// "Effective position crosses the guard" and "raw position crosses the
/// input-lowered guard" differ by an algebraic rearrangement only, so both
/// are evaluated through [`guard_gap`]; this keeps the equivalence exact in
/// floating point, not just in exact arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HitFormulation {
    #[default]
    EffectiveState,
    ModifiedGuard,
}

/// Canonical crossing gap `(z - barrier) + input`; the jump predicate is
/// `gap >= 0` in any component.
#[inline]
pub fn guard_gap(z: f64, barrier: f64, input: f64) -> f64 {
    (z - barrier) + input
}

pub(crate) fn gap_into(z: &[f64], barrier: &[f64], input: &[f64], out: &mut [f64]) {
    for p in 0..out.len() {
        out[p] = guard_gap(z[p], barrier[p], input[p]);
    }
}

/// Coupling input evaluated from announcement times rather than clocks:
/// a source participates when its last known jump is no older than the
/// listener's, and contributes `weight * exp(-decay * (t - jump_time))`.
pub(crate) fn input_from_times(
    row: &[CouplingEntry],
    known: &[f64],
    own_t_last: f64,
    decay: f64,
    t: f64,
    out: &mut [f64],
) {
    out.fill(0.0);
    for (e, t_j) in row.iter().zip(known) {
        if *t_j >= own_t_last {
            let factor = (-decay * (t - t_j)).exp();
            for (o, w) in out.iter_mut().zip(&e.weight) {
                *o += w * factor;
            }
        }
    }
}

/// First crossing of the zero level by the linearly interpolated gap over the
/// step fraction interval `(theta_from, 1]`. `g_from` is the gap at
/// `theta_from`, `g_end` at 1. Returns the crossing fraction and the first
/// component that crosses; a gap already at or above zero fires immediately.
pub(crate) fn first_guard_crossing(
    g_from: &[f64],
    g_end: &[f64],
    theta_from: f64,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for p in 0..g_from.len() {
        let theta = if g_from[p] >= 0.0 {
            theta_from
        } else if g_end[p] >= 0.0 {
            theta_from + (1.0 - theta_from) * (g_from[p] / (g_from[p] - g_end[p]))
        } else {
            continue;
        };
        match best {
            Some((_, t)) if t <= theta => {}
            _ => best = Some((p, theta)),
        }
    }
    best
}

/// Draw the post-jump discrete mode, guard seed and position, in that order.
pub(crate) fn commit_jump(
    spec: &AgentSpec,
    mode: &mut usize,
    guard_base: &mut [f64],
    z: &mut [f64],
    rng: &mut impl Rng,
) -> Result<()> {
    *mode = match &spec.transition {
        ModeTransition::Cyclic => (*mode + 1) % spec.modes.len(),
        ModeTransition::Distribution { weights } => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = weights.len() - 1;
            for (q, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    chosen = q;
                    break;
                }
            }
            chosen
        }
    };
    let orthant = positive_orthant(spec.dim);
    spec.guard
        .init
        .sample_into(&orthant, rng, guard_base)
        .map_err(|e| match e {
            SimError::InvalidSpec(_) | SimError::RejectionBudget { .. } => {
                SimError::GuardNotPositive
            }
            other => other,
        })?;
    spec.z_init
        .sample_into(&BoxDomain::unbounded(spec.dim), rng, z)?;
    Ok(())
}

/// Draw the initial guard seed and position (start of a run; no mode draw).
pub(crate) fn draw_initial(
    spec: &AgentSpec,
    guard_base: &mut [f64],
    z: &mut [f64],
    rng: &mut impl Rng,
) -> Result<()> {
    let orthant = positive_orthant(spec.dim);
    spec.guard
        .init
        .sample_into(&orthant, rng, guard_base)
        .map_err(|e| match e {
            SimError::InvalidSpec(_) | SimError::RejectionBudget { .. } => {
                SimError::GuardNotPositive
            }
            other => other,
        })?;
    spec.z_init
        .sample_into(&BoxDomain::unbounded(spec.dim), rng, z)?;
    Ok(())
}

/// Continuous proposal: one Euler-Maruyama step of the current mode over `h`.
/// Consumes exactly `wiener_dim` normal draws.
pub(crate) fn propose_position(
    mode: &AgentMode,
    z: &[f64],
    h: f64,
    rng: &mut impl Rng,
    z_prop: &mut [f64],
    noise: &mut Vec<f64>,
    drift: &mut [f64],
) -> Result<()> {
    let m = mode.diffusion.wiener_dim();
    noise.resize(m, 0.0);
    for xi in noise.iter_mut() {
        *xi = rng.sample(StandardNormal);
    }
    mode.field.eval_into(z, drift);
    for p in 0..z.len() {
        z_prop[p] = z[p] + drift[p] * h;
    }
    mode.diffusion.accumulate_into(noise, h.sqrt(), z_prop);
    if z_prop.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFinite("agent position step"));
    }
    Ok(())
}

/// Runtime state of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub mode: usize,
    pub z: Vec<f64>,
    /// Guard seed gamma drawn at the last jump.
    pub guard_base: Vec<f64>,
    /// Local clock: time since the last jump (equals `t - t_last`).
    pub clock: f64,
    pub t_last: f64,
    /// Last known jump time per retained coupling entry, updated from
    /// announcements; starts at 0 (the common start counts as a jump epoch).
    pub known_jumps: Vec<f64>,
}

impl AgentState {
    /// Initial state at t = 0 with freshly drawn guard seed and position.
    pub fn init(
        spec: &AgentSpec,
        row_len: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut guard_base = vec![0.0; spec.dim];
        let mut z = vec![0.0; spec.dim];
        draw_initial(spec, &mut guard_base, &mut z, rng)?;
        Ok(AgentState {
            mode: spec.init_mode,
            z,
            guard_base,
            clock: 0.0,
            t_last: 0.0,
            known_jumps: vec![0.0; row_len],
        })
    }

    /// Current guard value under the given decay rate.
    pub fn barrier(&self, decay: f64) -> Vec<f64> {
        guard_value(&self.guard_base, decay, self.clock)
    }
}

/// Jump produced by a single agent step.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentJump {
    pub time: f64,
    pub component: usize,
    pub pre_mode: usize,
    pub pre_z: Vec<f64>,
    pub pre_z_eff: Vec<f64>,
    pub pre_barrier: Vec<f64>,
    pub post_mode: usize,
    pub post_z: Vec<f64>,
    pub post_guard: Vec<f64>,
}

/// Advance one agent over `[t, t + h)` against a fixed set of neighbour
/// announcements. At most one jump fires per step; after a jump the state
/// holds until the step boundary while the clock keeps running.
#[allow(clippy::too_many_arguments)]
pub fn step_agent(
    state: &mut AgentState,
    spec: &AgentSpec,
    row: &[CouplingEntry],
    t: f64,
    h: f64,
    hit: HitFormulation,
    bridge: bool,
    rng: &mut impl Rng,
) -> Result<Option<AgentJump>> {
    let _ = hit; // both formulations share the canonical gap; see guard_gap
    let d = spec.dim;
    debug_assert_eq!(state.known_jumps.len(), row.len());
    let mode = &spec.modes[state.mode];

    let mut barrier0 = vec![0.0; d];
    let mut barrier1 = vec![0.0; d];
    let mut input0 = vec![0.0; d];
    let mut input1 = vec![0.0; d];
    let mut g0 = vec![0.0; d];
    let mut g1 = vec![0.0; d];
    let mut z_prop = vec![0.0; d];
    let mut noise = Vec::new();
    let mut drift = vec![0.0; d];

    guard_value_into(&state.guard_base, spec.guard.decay, t - state.t_last, &mut barrier0);
    input_from_times(row, &state.known_jumps, state.t_last, spec.guard.decay, t, &mut input0);
    gap_into(&state.z, &barrier0, &input0, &mut g0);

    propose_position(mode, &state.z, h, rng, &mut z_prop, &mut noise, &mut drift)?;
    let t1 = t + h;
    guard_value_into(&state.guard_base, spec.guard.decay, t1 - state.t_last, &mut barrier1);
    input_from_times(row, &state.known_jumps, state.t_last, spec.guard.decay, t1, &mut input1);
    gap_into(&z_prop, &barrier1, &input1, &mut g1);

    let mut bridge_u = Vec::new();
    if bridge {
        bridge_u.resize(d, 0.0);
        for u in bridge_u.iter_mut() {
            *u = rng.gen();
        }
    }

    let mut crossing = first_guard_crossing(&g0, &g1, 0.0);
    if crossing.is_none() && bridge {
        // both endpoints below the guard: excursion test per component
        for p in 0..d {
            let sigma = mode.diffusion.row_norm(p);
            if sigma == 0.0 {
                continue;
            }
            let p_cross = (2.0 * g0[p] * g1[p] / (sigma * sigma * h)).exp();
            if bridge_u[p] < p_cross {
                crossing = Some((p, 0.5));
                break;
            }
        }
    }

    if let Some((component, theta)) = crossing {
        let tau = t + theta * h;
        let pre_z: Vec<f64> = state
            .z
            .iter()
            .zip(&z_prop)
            .map(|(a, b)| a + theta * (b - a))
            .collect();
        let pre_barrier: Vec<f64> = barrier0
            .iter()
            .zip(&barrier1)
            .map(|(a, b)| a + theta * (b - a))
            .collect();
        let pre_input: Vec<f64> = input0
            .iter()
            .zip(&input1)
            .map(|(a, b)| a + theta * (b - a))
            .collect();
        let pre_z_eff = effective_position(&pre_z, &pre_input);
        let pre_mode = state.mode;
        commit_jump(spec, &mut state.mode, &mut state.guard_base, &mut state.z, rng)?;
        state.t_last = tau;
        state.clock = t1 - tau;
        return Ok(Some(AgentJump {
            time: tau,
            component,
            pre_mode,
            pre_z,
            pre_z_eff,
            pre_barrier,
            post_mode: state.mode,
            post_z: state.z.clone(),
            post_guard: state.guard_base.clone(),
        }));
    }

    state.z.copy_from_slice(&z_prop);
    state.clock = t1 - state.t_last;
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plain_agent(id: u64, drift: f64, sigma: f64, decay: f64, gamma: f64) -> AgentSpec {
        AgentSpec {
            id,
            dim: 1,
            modes: vec![AgentMode {
                field: VectorFieldSpec::Constant { value: vec![drift] },
                diffusion: if sigma == 0.0 {
                    DiffusionSpec::Zero
                } else {
                    DiffusionSpec::ConstantMatrix {
                        rows: vec![vec![sigma]],
                    }
                },
            }],
            init_mode: 0,
            z_init: VectorKernel::PointMass { value: vec![0.0] },
            guard: GuardSpec {
                decay,
                init: VectorKernel::PointMass { value: vec![gamma] },
                rhs: None,
            },
            transition: ModeTransition::Cyclic,
        }
    }

    #[test]
    fn guard_value_closed_forms() {
        assert_eq!(guard_value(&[2.0], 0.0, 5.0), vec![2.0]);
        let v = guard_value(&[1.0], 1.0, std::f64::consts::LN_2);
        assert!((v[0] - 0.5).abs() < 1e-12);
        let w = guard_value(&[3.0, 0.5], 2.0, 0.7);
        let f = (-1.4f64).exp();
        assert!((w[0] - 3.0 * f).abs() < 1e-12);
        assert!((w[1] - 0.5 * f).abs() < 1e-12);
    }

    #[test]
    fn guard_ode_matches_closed_form() {
        // rhs = -k * beta integrates to the exponential law
        let k = 1.3;
        let rhs = VectorFieldSpec::Linear {
            matrix: vec![vec![-k]],
            offset: vec![0.0],
        };
        for clock in [0.1, 0.9, 2.4] {
            let ode = guard_value_ode(&[2.0], &rhs, clock, 1e-3).unwrap();
            let exact = guard_value(&[2.0], k, clock);
            assert!((ode[0] - exact[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn neighborhood_uses_threshold_and_clock_order() {
        // 3 agents; agent 0 listens to 1 and 2, but 2's weight is below threshold
        let coupling = CouplingSpec::from_dense(
            &[
                vec![vec![0.0], vec![0.5], vec![0.05]],
                vec![vec![0.0], vec![0.0], vec![0.0]],
                vec![vec![0.3], vec![0.0], vec![0.0]],
            ],
            1,
            0.1,
        )
        .unwrap();
        // clocks: agent 0 at 5, agent 1 at 1 (more recent), agent 2 at 7 (older)
        let n0 = neighborhood(0, &coupling, &[5.0, 1.0, 7.0]).unwrap();
        assert_eq!(n0, vec![1]);
        let n2 = neighborhood(2, &coupling, &[5.0, 1.0, 7.0]).unwrap();
        assert_eq!(n2, vec![0]);
        assert!(neighborhood(3, &coupling, &[0.0; 3]).is_err());
    }

    #[test]
    fn coupling_input_sums_decayed_weights() {
        let coupling = CouplingSpec::from_dense(
            &[
                vec![vec![0.0], vec![0.3], vec![0.4]],
                vec![vec![0.0], vec![0.0], vec![0.0]],
                vec![vec![0.0], vec![0.0], vec![0.0]],
            ],
            1,
            0.1,
        )
        .unwrap();
        // sources at clocks 0 and ln 2, own clock 1; decay 1
        let input = coupling_input(0, &coupling, 1.0, &[1.0, 0.0, std::f64::consts::LN_2]).unwrap();
        assert!((input[0] - 0.5).abs() < 1e-12);
        // empty neighbourhood gives zero
        let input2 = coupling_input(1, &coupling, 1.0, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(input2, vec![0.0]);
    }

    #[test]
    fn input_additivity_over_sources() {
        // summing single-source inputs equals the combined input
        let w1 = vec![0.3];
        let w2 = vec![0.4];
        let both = CouplingSpec::from_entries(
            3,
            1,
            0.1,
            &[(0, 1, w1.clone()), (0, 2, w2.clone())],
        )
        .unwrap();
        let only1 = CouplingSpec::from_entries(3, 1, 0.1, &[(0, 1, w1)]).unwrap();
        let only2 = CouplingSpec::from_entries(3, 1, 0.1, &[(0, 2, w2)]).unwrap();
        let clocks = [2.0, 0.3, 1.4];
        let a = coupling_input(0, &both, 0.7, &clocks).unwrap();
        let b = coupling_input(0, &only1, 0.7, &clocks).unwrap();
        let c = coupling_input(0, &only2, 0.7, &clocks).unwrap();
        assert_eq!(a[0], b[0] + c[0]);
    }

    #[test]
    fn hit_formulations_share_one_gap_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let z: f64 = rng.gen::<f64>() * 4.0 - 2.0;
            let b: f64 = rng.gen::<f64>() * 4.0 - 2.0;
            let i: f64 = rng.gen::<f64>() * 2.0 - 1.0;
            let eff = effective_position(&[z], &[i]);
            let modg = modified_guard(&[b], &[i]);
            // the shared gap agrees with both formulations up to rounding,
            // and is the single expression the engine evaluates
            let gap = guard_gap(z, b, i);
            assert!((gap - (eff[0] - b)).abs() < 1e-12);
            assert!((gap - (z - modg[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn crossing_interpolates_linearly_and_prefers_first_component() {
        // component 1 crosses earlier
        let hit = first_guard_crossing(&[-1.0, -0.2], &[1.0, 0.6], 0.0).unwrap();
        assert_eq!(hit.0, 1);
        assert!((hit.1 - 0.25).abs() < 1e-12);
        // ties resolve to the lowest component index
        let tie = first_guard_crossing(&[-1.0, -1.0], &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(tie.0, 0);
        // an already-violated gap fires at the segment start
        let imm = first_guard_crossing(&[0.1, -1.0], &[-0.5, -1.0], 0.25).unwrap();
        assert_eq!(imm, (0, 0.25));
        assert!(first_guard_crossing(&[-1.0], &[-0.1], 0.0).is_none());
    }

    #[test]
    fn deterministic_agent_jumps_when_drift_reaches_guard() {
        // unit drift from 0, constant guard at 1: jump at t = 1
        let spec = plain_agent(0, 1.0, 0.0, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut state = AgentState::init(&spec, 0, &mut rng).unwrap();
        let h = 0.01;
        let mut jump = None;
        for k in 0..200 {
            let t = k as f64 * h;
            if let Some(j) = step_agent(
                &mut state,
                &spec,
                &[],
                t,
                h,
                HitFormulation::EffectiveState,
                false,
                &mut rng,
            )
            .unwrap()
            {
                jump = Some(j);
                break;
            }
        }
        let j = jump.expect("agent must jump");
        assert!((j.time - 1.0).abs() < 1e-9, "jump at {}", j.time);
        assert_eq!(j.component, 0);
        assert!((j.pre_barrier[0] - 1.0).abs() < 1e-9);
        assert!(state.t_last > 0.0);
    }

    #[test]
    fn agent_below_static_guard_never_jumps() {
        // zero drift, zero noise, guard fixed at 1
        let spec = plain_agent(0, 0.0, 0.0, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut state = AgentState::init(&spec, 0, &mut rng).unwrap();
        for k in 0..500 {
            let t = k as f64 * 0.01;
            let jump = step_agent(
                &mut state,
                &spec,
                &[],
                t,
                0.01,
                HitFormulation::EffectiveState,
                false,
                &mut rng,
            )
            .unwrap();
            assert!(jump.is_none());
        }
        assert_eq!(state.t_last, 0.0);
        assert!((state.clock - 5.0).abs() < 1e-12);
    }

    #[test]
    fn clock_tracks_time_since_last_jump() {
        let spec = plain_agent(0, 1.0, 0.0, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut state = AgentState::init(&spec, 0, &mut rng).unwrap();
        let h = 0.25;
        for k in 0..20 {
            let t = k as f64 * h;
            step_agent(
                &mut state,
                &spec,
                &[],
                t,
                h,
                HitFormulation::EffectiveState,
                false,
                &mut rng,
            )
            .unwrap();
            let now = (k + 1) as f64 * h;
            assert!((state.clock - (now - state.t_last)).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_cycles_on_jump() {
        let mut spec = plain_agent(0, 1.0, 0.0, 0.0, 0.05);
        spec.modes.push(AgentMode {
            field: VectorFieldSpec::Constant { value: vec![1.0] },
            diffusion: DiffusionSpec::Zero,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut state = AgentState::init(&spec, 0, &mut rng).unwrap();
        let mut modes_seen = vec![state.mode];
        for k in 0..400 {
            let t = k as f64 * 0.01;
            let jumped = step_agent(
                &mut state,
                &spec,
                &[],
                t,
                0.01,
                HitFormulation::EffectiveState,
                false,
                &mut rng,
            )
            .unwrap()
            .is_some();
            if jumped {
                modes_seen.push(state.mode);
            }
        }
        assert!(modes_seen.len() >= 3);
        for (prev, next) in modes_seen.iter().zip(modes_seen.iter().skip(1)) {
            assert_eq!((prev + 1) % 2, *next);
        }
    }

    #[test]
    fn transition_distribution_must_normalise() {
        let mut spec = plain_agent(0, 1.0, 0.0, 0.0, 1.0);
        spec.transition = ModeTransition::Distribution {
            weights: vec![0.5, 0.2],
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn guard_seed_must_be_positive() {
        let mut spec = plain_agent(0, 1.0, 0.0, 0.0, 1.0);
        spec.guard.init = VectorKernel::PointMass { value: vec![-1.0] };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn sub_threshold_entries_are_dropped() {
        let coupling =
            CouplingSpec::from_entries(2, 1, 0.5, &[(0, 1, vec![0.4]), (1, 0, vec![0.6])]).unwrap();
        assert!(coupling.row(0).is_empty());
        assert_eq!(coupling.row(1).len(), 1);
        assert_eq!(coupling.listeners(0), &[1]);
        assert!(coupling.listeners(1).is_empty());
    }
}

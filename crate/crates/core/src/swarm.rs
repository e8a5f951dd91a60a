//! Synchronous N-agent engine with instantaneous jump announcements, the
//! guard/clock abstraction of a run, jump-time reconstruction, and sequential
//! composition of collectives.
//!
//! Each step advances every agent's continuous state, collects candidate
//! guard crossings, then fires them one at a time in interpolated-time order
//! (ties broken by agent id). A fired jump is announced immediately: every
//! listener that has not jumped in this step re-evaluates its crossing over
//! the remainder of the step, so delivery chains resolve within a single dt.
//! Agents draw from private ChaCha8 streams keyed by their stable id, which
//! keeps runs reproducible and agents decoupled in distribution from
//! everything but their declared inputs.

use crate::agent::{
    commit_jump, draw_initial, effective_position, first_guard_crossing, gap_into,
    guard_value_into, input_from_times, propose_position, AgentSpec, CouplingEntry, CouplingSpec,
    HitFormulation,
};
use crate::error::{Result, SimError};
use crate::rng::SeedPolicy;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Step size, run length, and storage controls shared by a whole scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub dt: f64,
    pub horizon: f64,
    /// Keep every stride-th grid sample (jump events are always exact).
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Per-agent jump budget; exceeding it aborts the run.
    #[serde(default = "default_max_jumps")]
    pub max_jumps: usize,
}

fn default_stride() -> usize {
    1
}

fn default_max_jumps() -> usize {
    100_000
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            problems.push("dt must be finite and > 0".to_string());
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            problems.push("horizon must be finite and >= 0".to_string());
        }
        if self.stride == 0 {
            problems.push("stride must be >= 1".to_string());
        }
        if self.max_jumps == 0 {
            problems.push("max_jumps must be >= 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(problems))
        }
    }

    /// Number of dt steps needed to reach the horizon (last step may be short).
    pub fn n_steps(&self) -> usize {
        if self.horizon <= 0.0 {
            0
        } else {
            (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize
        }
    }
}

/// A complete runnable scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub dim: usize,
    pub agents: Vec<AgentSpec>,
    pub coupling: CouplingSpec,
    pub numerics: Numerics,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Collects every violation instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.agents.is_empty() {
            problems.push("scenario needs at least one agent".to_string());
        }
        if self.dim == 0 {
            problems.push("dim must be >= 1".to_string());
        }
        let mut ids = std::collections::HashSet::new();
        for a in &self.agents {
            if let Err(e) = a.validate() {
                problems.push(format!("agent {}: {e}", a.id));
            }
            if a.dim != self.dim {
                problems.push(format!(
                    "agent {} has dimension {} (scenario dimension is {})",
                    a.id, a.dim, self.dim
                ));
            }
            if !ids.insert(a.id) {
                problems.push(format!("duplicate agent id {}", a.id));
            }
        }
        if self.coupling.n() != self.agents.len() {
            problems.push(format!(
                "coupling table is for {} agents but the scenario has {}",
                self.coupling.n(),
                self.agents.len()
            ));
        }
        if self.coupling.dim() != self.dim {
            problems.push(format!(
                "coupling weights have dimension {} (scenario dimension is {})",
                self.coupling.dim(),
                self.dim
            ));
        }
        if let Err(SimError::Validation(more)) = self.numerics.validate() {
            problems.extend(more);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(problems))
        }
    }
}

/// Run-time switches that do not belong to the scenario itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct EngineOptions {
    pub hit: HitFormulation,
    /// Excursion test for within-step crossings missed by endpoint checks.
    pub bridge: bool,
}

/// Per-agent sampled track; vectors of length `samples` (scalars) or
/// `samples * dim` (states, sample-major).
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrack {
    pub id: u64,
    pub modes: Vec<usize>,
    pub z: Vec<f64>,
    pub z_eff: Vec<f64>,
    pub beta: Vec<f64>,
    pub clock: Vec<f64>,
}

/// One fired jump, with the agents the announcement reached.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub agent: u64,
    pub component: usize,
    pub pre_mode: usize,
    pub post_mode: usize,
    pub pre_z: Vec<f64>,
    pub pre_z_eff: Vec<f64>,
    pub pre_barrier: Vec<f64>,
    pub post_z: Vec<f64>,
    pub post_guard: Vec<f64>,
    /// Listener ids, sorted.
    pub recipients: Vec<u64>,
}

/// Everything a run produces: the sampled grid, per-agent tracks, and the
/// exact jump log ordered by (time, agent id).
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmTrace {
    pub dim: usize,
    pub grid: Vec<f64>,
    pub agents: Vec<AgentTrack>,
    pub jumps: Vec<JumpEvent>,
}

impl SwarmTrace {
    /// Jump times of one agent, in order.
    pub fn jump_times(&self, id: u64) -> Vec<f64> {
        self.jumps
            .iter()
            .filter(|j| j.agent == id)
            .map(|j| j.time)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    theta: f64,
    id: u64,
    idx: usize,
    component: usize,
    version: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse so the earliest (theta, id) pops first
        other
            .theta
            .total_cmp(&self.theta)
            .then(other.id.cmp(&self.id))
    }
}

struct Engine<'a> {
    config: &'a ScenarioConfig,
    opts: EngineOptions,
    dim: usize,
    /// Coupling rows re-sorted by source agent id so that input sums run in a
    /// relabeling-independent order.
    rows: Vec<Vec<CouplingEntry>>,
    /// For every source index: (listener index, slot in the listener's row).
    delivery: Vec<Vec<(usize, usize)>>,
    mode: Vec<usize>,
    z: Vec<f64>,
    guard_base: Vec<f64>,
    t_last: Vec<f64>,
    known: Vec<Vec<f64>>,
    jump_count: Vec<usize>,
    rngs: Vec<rand_chacha::ChaCha8Rng>,
    // per-step scratch, all length n * dim unless noted
    z_prop: Vec<f64>,
    barrier0: Vec<f64>,
    barrier1: Vec<f64>,
    input0: Vec<f64>,
    input1: Vec<f64>,
    g0: Vec<f64>,
    g1: Vec<f64>,
    noise: Vec<f64>,
    drift: Vec<f64>,
    version: Vec<u64>,
    jumped: Vec<bool>,
    heap: BinaryHeap<Candidate>,
}

impl<'a> Engine<'a> {
    fn new(config: &'a ScenarioConfig, opts: EngineOptions, replication: u64) -> Result<Self> {
        config.validate()?;
        let n = config.agents.len();
        let d = config.dim;
        let policy = SeedPolicy::new(config.seed);

        let mut rows: Vec<Vec<CouplingEntry>> = (0..n)
            .map(|i| config.coupling.row(i).to_vec())
            .collect();
        for row in rows.iter_mut() {
            row.sort_by_key(|e| config.agents[e.source].id);
        }
        let mut delivery = vec![Vec::new(); n];
        for (listener, row) in rows.iter().enumerate() {
            for (slot, e) in row.iter().enumerate() {
                delivery[e.source].push((listener, slot));
            }
        }

        let mut mode = Vec::with_capacity(n);
        let mut z = vec![0.0; n * d];
        let mut guard_base = vec![0.0; n * d];
        let mut rngs = Vec::with_capacity(n);
        for (i, spec) in config.agents.iter().enumerate() {
            let mut rng = policy.agent_rng(spec.id, replication);
            draw_initial(
                spec,
                &mut guard_base[i * d..(i + 1) * d],
                &mut z[i * d..(i + 1) * d],
                &mut rng,
            )?;
            mode.push(spec.init_mode);
            rngs.push(rng);
        }

        let known = rows.iter().map(|row| vec![0.0; row.len()]).collect();
        Ok(Engine {
            config,
            opts,
            dim: d,
            rows,
            delivery,
            mode,
            z,
            guard_base,
            t_last: vec![0.0; n],
            known,
            jump_count: vec![0; n],
            rngs,
            z_prop: vec![0.0; n * d],
            barrier0: vec![0.0; n * d],
            barrier1: vec![0.0; n * d],
            input0: vec![0.0; n * d],
            input1: vec![0.0; n * d],
            g0: vec![0.0; n * d],
            g1: vec![0.0; n * d],
            noise: Vec::new(),
            drift: vec![0.0; d],
            version: vec![0; n],
            jumped: vec![false; n],
            heap: BinaryHeap::new(),
        })
    }

    fn slice(v: &[f64], i: usize, d: usize) -> &[f64] {
        &v[i * d..(i + 1) * d]
    }

    fn candidate_for(&self, i: usize, theta_from: f64) -> Option<Candidate> {
        let d = self.dim;
        first_guard_crossing(
            Self::slice(&self.g0, i, d),
            Self::slice(&self.g1, i, d),
            theta_from,
        )
        .map(|(component, theta)| Candidate {
            theta,
            id: self.config.agents[i].id,
            idx: i,
            component,
            version: self.version[i],
        })
    }

    /// Advance all agents over [t, t1); fired jumps are appended to `log`
    /// sorted by (time, agent id).
    fn step(&mut self, t: f64, t1: f64, log: &mut Vec<JumpEvent>) -> Result<()> {
        let d = self.dim;
        let h = t1 - t;
        let n = self.config.agents.len();
        let log_start = log.len();
        self.heap.clear();

        // continuous proposals and endpoint gaps
        for i in 0..n {
            let spec = &self.config.agents[i];
            let decay = spec.guard.decay;
            let range = i * d..(i + 1) * d;
            guard_value_into(
                &self.guard_base[range.clone()],
                decay,
                t - self.t_last[i],
                &mut self.barrier0[range.clone()],
            );
            input_from_times(
                &self.rows[i],
                &self.known[i],
                self.t_last[i],
                decay,
                t,
                &mut self.input0[range.clone()],
            );
            gap_into_ranged(&self.z, &self.barrier0, &self.input0, &mut self.g0, range.clone());

            {
                let (z_src, z_dst) = (&self.z[range.clone()], &mut self.z_prop[range.clone()]);
                propose_position(
                    &spec.modes[self.mode[i]],
                    z_src,
                    h,
                    &mut self.rngs[i],
                    z_dst,
                    &mut self.noise,
                    &mut self.drift,
                )?;
            }
            guard_value_into(
                &self.guard_base[range.clone()],
                decay,
                t1 - self.t_last[i],
                &mut self.barrier1[range.clone()],
            );
            input_from_times(
                &self.rows[i],
                &self.known[i],
                self.t_last[i],
                decay,
                t1,
                &mut self.input1[range.clone()],
            );
            gap_into_ranged(&self.z_prop, &self.barrier1, &self.input1, &mut self.g1, range.clone());

            self.jumped[i] = false;
            let mut cand = self.candidate_for(i, 0.0);
            if self.opts.bridge {
                // fixed draw count per step: one uniform per component
                let mode = &spec.modes[self.mode[i]];
                for p in 0..d {
                    let u: f64 = self.rngs[i].gen();
                    if cand.is_none() {
                        let sigma = mode.diffusion.row_norm(p);
                        if sigma > 0.0 {
                            let a = self.g0[i * d + p];
                            let b = self.g1[i * d + p];
                            let p_cross = (2.0 * a * b / (sigma * sigma * h)).exp();
                            if u < p_cross {
                                cand = Some(Candidate {
                                    theta: 0.5,
                                    id: spec.id,
                                    idx: i,
                                    component: p,
                                    version: self.version[i],
                                });
                            }
                        }
                    }
                }
            }
            if let Some(c) = cand {
                self.heap.push(c);
            }
        }

        // fire jumps in (theta, id) order with instantaneous announcements
        while let Some(c) = self.heap.pop() {
            let i = c.idx;
            if self.jumped[i] || c.version != self.version[i] {
                continue;
            }
            let spec = &self.config.agents[i];
            let tau = t + c.theta * h;
            let range = i * d..(i + 1) * d;

            let pre_z: Vec<f64> = (range.clone())
                .map(|p| self.z[p] + c.theta * (self.z_prop[p] - self.z[p]))
                .collect();
            let pre_barrier: Vec<f64> = (range.clone())
                .map(|p| self.barrier0[p] + c.theta * (self.barrier1[p] - self.barrier0[p]))
                .collect();
            let pre_input: Vec<f64> = (range.clone())
                .map(|p| self.input0[p] + c.theta * (self.input1[p] - self.input0[p]))
                .collect();
            let pre_z_eff = effective_position(&pre_z, &pre_input);
            let pre_mode = self.mode[i];

            commit_jump(
                spec,
                &mut self.mode[i],
                &mut self.guard_base[range.clone()],
                &mut self.z[range.clone()],
                &mut self.rngs[i],
            )?;
            self.t_last[i] = tau;
            self.jumped[i] = true;
            self.jump_count[i] += 1;
            if self.jump_count[i] > self.config.numerics.max_jumps {
                return Err(SimError::ZenoSuspected {
                    jumps: self.jump_count[i],
                    time: tau,
                });
            }

            // deliver the announcement and re-evaluate affected candidates
            let mut recipients = Vec::with_capacity(self.delivery[i].len());
            for (listener, slot) in self.delivery[i].clone() {
                self.known[listener][slot] = tau;
                recipients.push(self.config.agents[listener].id);
                if self.jumped[listener] {
                    continue;
                }
                self.reevaluate(listener, c.theta, t, t1);
            }
            recipients.sort_unstable();

            log.push(JumpEvent {
                time: tau,
                agent: spec.id,
                component: c.component,
                pre_mode,
                post_mode: self.mode[i],
                pre_z,
                pre_z_eff,
                pre_barrier,
                post_z: self.z[range.clone()].to_vec(),
                post_guard: self.guard_base[range].to_vec(),
                recipients,
            });
        }

        // candidates fire in causal order, but a delivery can trigger a
        // lower-id agent at the very same instant; normalise the log order
        log[log_start..].sort_by(|a, b| a.time.total_cmp(&b.time).then(a.agent.cmp(&b.agent)));

        // commit continuous endpoints for agents that did not jump
        for i in 0..n {
            if !self.jumped[i] {
                let range = i * d..(i + 1) * d;
                self.z[range.clone()].copy_from_slice(&self.z_prop[range]);
            }
        }
        Ok(())
    }

    /// Rebuild `listener`'s crossing candidate on the step remainder
    /// (theta_from, 1] after its inputs changed.
    fn reevaluate(&mut self, listener: usize, theta_from: f64, t: f64, t1: f64) {
        let d = self.dim;
        let spec = &self.config.agents[listener];
        let decay = spec.guard.decay;
        let range = listener * d..(listener + 1) * d;
        let tau = t + theta_from * (t1 - t);

        // gap at the announcement instant: position interpolated, guard and
        // input evaluated exactly under the updated announcement table
        let mut barrier_tau = vec![0.0; d];
        let mut input_tau = vec![0.0; d];
        guard_value_into(
            &self.guard_base[range.clone()],
            decay,
            tau - self.t_last[listener],
            &mut barrier_tau,
        );
        input_from_times(
            &self.rows[listener],
            &self.known[listener],
            self.t_last[listener],
            decay,
            tau,
            &mut input_tau,
        );
        let mut g_from = vec![0.0; d];
        for p in 0..d {
            let zp = self.z[listener * d + p]
                + theta_from * (self.z_prop[listener * d + p] - self.z[listener * d + p]);
            g_from[p] = crate::agent::guard_gap(zp, barrier_tau[p], input_tau[p]);
        }

        // refresh the step-end gap with the new input
        input_from_times(
            &self.rows[listener],
            &self.known[listener],
            self.t_last[listener],
            decay,
            t1,
            &mut self.input1[range.clone()],
        );
        gap_into_ranged(&self.z_prop, &self.barrier1, &self.input1, &mut self.g1, range.clone());

        self.version[listener] += 1;
        if let Some((component, theta)) =
            first_guard_crossing(&g_from, &self.g1[range], theta_from)
        {
            self.heap.push(Candidate {
                theta,
                id: spec.id,
                idx: listener,
                component,
                version: self.version[listener],
            });
        }
    }

    fn sample(&self, t: f64, tracks: &mut [AgentTrack]) {
        let d = self.dim;
        let mut input = vec![0.0; d];
        for (i, track) in tracks.iter_mut().enumerate() {
            let spec = &self.config.agents[i];
            let decay = spec.guard.decay;
            let z = Self::slice(&self.z, i, d);
            input_from_times(
                &self.rows[i],
                &self.known[i],
                self.t_last[i],
                decay,
                t,
                &mut input,
            );
            track.modes.push(self.mode[i]);
            track.z.extend_from_slice(z);
            for p in 0..d {
                track.z_eff.push(z[p] + input[p]);
            }
            let factor = (-decay * (t - self.t_last[i])).exp();
            for g in Self::slice(&self.guard_base, i, d) {
                track.beta.push(g * factor);
            }
            track.clock.push(t - self.t_last[i]);
        }
    }
}

fn gap_into_ranged(
    z: &[f64],
    barrier: &[f64],
    input: &[f64],
    out: &mut [f64],
    range: std::ops::Range<usize>,
) {
    gap_into(
        &z[range.clone()],
        &barrier[range.clone()],
        &input[range.clone()],
        &mut out[range],
    );
}

/// Simulate with default options, replication 0.
pub fn simulate_swarm(config: &ScenarioConfig) -> Result<SwarmTrace> {
    simulate_swarm_with(config, EngineOptions::default(), 0)
}

/// Simulate one replication of a scenario. Identical inputs give a
/// bitwise-identical trace.
pub fn simulate_swarm_with(
    config: &ScenarioConfig,
    opts: EngineOptions,
    replication: u64,
) -> Result<SwarmTrace> {
    let mut engine = Engine::new(config, opts, replication)?;
    let n = config.agents.len();
    let num = &config.numerics;
    let n_steps = num.n_steps();

    let mut tracks: Vec<AgentTrack> = config
        .agents
        .iter()
        .map(|a| AgentTrack {
            id: a.id,
            modes: Vec::new(),
            z: Vec::new(),
            z_eff: Vec::new(),
            beta: Vec::new(),
            clock: Vec::new(),
        })
        .collect();
    let mut grid = Vec::new();
    let mut jumps = Vec::new();

    grid.push(0.0);
    engine.sample(0.0, &mut tracks);

    for k in 0..n_steps {
        let t = k as f64 * num.dt;
        let t1 = ((k + 1) as f64 * num.dt).min(num.horizon);
        engine.step(t, t1, &mut jumps)?;
        if (k + 1) % num.stride == 0 || k + 1 == n_steps {
            grid.push(t1);
            engine.sample(t1, &mut tracks);
        }
    }
    debug_assert_eq!(tracks.len(), n);
    Ok(SwarmTrace {
        dim: config.dim,
        grid,
        agents: tracks,
        jumps,
    })
}

/// Guard/clock view of one agent, with its exact jump times kept alongside
/// the gridded samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractionTrack {
    pub id: u64,
    pub beta: Vec<f64>,
    pub clock: Vec<f64>,
    pub jump_times: Vec<f64>,
}

/// The (guard, clock) process of a whole run. Between an agent's jumps the
/// track is self-contained: the guard follows its decay law and the clock
/// grows with unit slope, so any grid point determines the segment.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractionTrace {
    pub dim: usize,
    pub grid: Vec<f64>,
    pub agents: Vec<AbstractionTrack>,
}

/// Project a run onto its (guard, clock) coordinates, dropping modes and
/// positions. Projecting the result again would be the identity: the fields
/// kept are copied verbatim.
pub fn extract_abstraction(trace: &SwarmTrace) -> AbstractionTrace {
    AbstractionTrace {
        dim: trace.dim,
        grid: trace.grid.clone(),
        agents: trace
            .agents
            .iter()
            .map(|a| AbstractionTrack {
                id: a.id,
                beta: a.beta.clone(),
                clock: a.clock.clone(),
                jump_times: trace.jump_times(a.id),
            })
            .collect(),
    }
}

/// Per-agent jump times from the embedded event record. Fails on a
/// non-increasing sequence (corrupt input).
pub fn reconstruct_jump_times(abs: &AbstractionTrace) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(abs.agents.len());
    for track in &abs.agents {
        for (k, pair) in track.jump_times.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(SimError::CorruptClock {
                    agent: track.id as usize,
                    index: k + 1,
                });
            }
        }
        out.push(track.jump_times.clone());
    }
    Ok(out)
}

/// Per-agent jump times recovered from the gridded clocks alone: a clock
/// reset between consecutive samples marks a jump at `grid - clock`. Accurate
/// to the sampling interval; at most one jump per sampled interval is
/// visible. Fails when a clock is negative or grows faster than time.
pub fn reconstruct_jump_times_from_grid(abs: &AbstractionTrace) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(abs.agents.len());
    for track in &abs.agents {
        let mut times = Vec::new();
        for k in 0..track.clock.len() {
            let tau = track.clock[k];
            if tau < 0.0 || !tau.is_finite() {
                return Err(SimError::CorruptClock {
                    agent: track.id as usize,
                    index: k,
                });
            }
            if k == 0 {
                continue;
            }
            let dt_grid = abs.grid[k] - abs.grid[k - 1];
            if tau > track.clock[k - 1] + dt_grid + 1e-9 * (1.0 + abs.grid[k].abs()) {
                return Err(SimError::CorruptClock {
                    agent: track.id as usize,
                    index: k,
                });
            }
            if tau < track.clock[k - 1] {
                times.push(abs.grid[k] - tau);
            }
        }
        out.push(times);
    }
    Ok(out)
}

/// Join two collectives into one scenario: agents and coupling are kept
/// block-wise, plus one-way wires from agents of `a` to agents of `b` given
/// as (source id in a, listener id in b, weight). The combined run uses `a`'s
/// master seed; per-agent streams are keyed by agent id, so with equal seeds
/// and empty wiring each agent reproduces its isolated run exactly.
pub fn compose_collectives(
    a: &ScenarioConfig,
    b: &ScenarioConfig,
    wiring: &[(u64, u64, Vec<f64>)],
) -> Result<ScenarioConfig> {
    a.validate()?;
    b.validate()?;
    if a.dim != b.dim {
        return Err(SimError::DimensionMismatch {
            what: "composed scenario dimension",
            expected: a.dim,
            got: b.dim,
        });
    }
    if a.numerics != b.numerics {
        return Err(SimError::InvalidSpec(
            "composed scenarios must share numerics (dt, horizon, stride, max_jumps)".into(),
        ));
    }
    if (a.coupling.threshold() - b.coupling.threshold()).abs() > 0.0 {
        return Err(SimError::InvalidSpec(
            "composed scenarios must share the coupling threshold".into(),
        ));
    }
    let ids_a: std::collections::HashMap<u64, usize> = a
        .agents
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id, i))
        .collect();
    let ids_b: std::collections::HashMap<u64, usize> = b
        .agents
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id, i))
        .collect();
    for s in &b.agents {
        if ids_a.contains_key(&s.id) {
            return Err(SimError::InvalidSpec(format!(
                "agent id {} appears in both collectives",
                s.id
            )));
        }
    }

    let n_a = a.agents.len();
    let n = n_a + b.agents.len();
    let mut entries: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for (listener, source, w) in a.coupling.entries() {
        entries.push((listener, source, w.to_vec()));
    }
    for (listener, source, w) in b.coupling.entries() {
        entries.push((listener + n_a, source + n_a, w.to_vec()));
    }
    for (src_id, dst_id, w) in wiring {
        let src = *ids_a
            .get(src_id)
            .ok_or(SimError::UnknownAgent(*src_id as usize))?;
        let dst = *ids_b
            .get(dst_id)
            .ok_or(SimError::UnknownAgent(*dst_id as usize))?;
        if w.len() != a.dim {
            return Err(SimError::DimensionMismatch {
                what: "wiring weight",
                expected: a.dim,
                got: w.len(),
            });
        }
        entries.push((dst + n_a, src, w.clone()));
    }
    let coupling =
        CouplingSpec::from_entries(n, a.dim, a.coupling.threshold(), &entries)?;
    let mut agents = a.agents.clone();
    agents.extend(b.agents.iter().cloned());
    Ok(ScenarioConfig {
        dim: a.dim,
        agents,
        coupling,
        numerics: a.numerics,
        seed: a.seed,
    })
}

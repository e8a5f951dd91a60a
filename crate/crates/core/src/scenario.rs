//! On-disk scenario schema: a fixed JSON layout that loads into a validated
//! [`ScenarioConfig`](crate::swarm::ScenarioConfig), its canonical
//! serialization and digest, and the run manifest written next to outputs.
//!
//! Canonical form: every agent listed individually (templates expanded) and
//! the coupling given as a sparse entry list sorted by (listener, source).
//! Loading the canonical serialization of any valid config reproduces that
//! config exactly, and the digest is the SHA-256 of the canonical bytes.

use crate::agent::{AgentSpec, CouplingSpec, GuardSpec, ModeTransition};
use crate::error::{Result, SimError};
use crate::hybrid::VectorKernel;
use crate::rng::{stream_rng, LANE_GRAPH};
use crate::swarm::{Numerics, ScenarioConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub use crate::agent::AgentMode;

/// One agent template in the scenario file. Ids are positional: templates
/// expand in order into agents 0..n_agents, `copies` at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub modes: Vec<AgentMode>,
    #[serde(default)]
    pub init_mode: usize,
    pub z_init: VectorKernel,
    pub guard: GuardSpec,
    #[serde(default)]
    pub transition: ModeTransition,
    /// How many consecutive agents this template expands into.
    #[serde(default = "default_copies", skip_serializing_if = "is_default_copies")]
    pub copies: usize,
}

fn default_copies() -> usize {
    1
}

fn is_default_copies(c: &usize) -> bool {
    *c == 1
}

/// One sparse coupling entry in the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireEntry {
    pub listener: usize,
    pub source: usize,
    pub weight: Vec<f64>,
}

/// Coupling section: exactly one construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingFile {
    /// Dense `weights[listener][source]`, each entry a d-vector, zero diagonal.
    Weights(Vec<Vec<Vec<f64>>>),
    /// Sparse entry list; absent pairs carry zero weight.
    Entries(Vec<WireEntry>),
    /// Directed Erdős–Rényi graph, materialized deterministically from the
    /// scenario seed before simulation: each ordered pair becomes an edge
    /// with probability mean_degree / (n - 1), each weight component drawn
    /// uniformly from [weight_lo, weight_hi].
    RandomGraph {
        mean_degree: f64,
        weight_lo: f64,
        weight_hi: f64,
    },
}

/// Top-level scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n_agents: usize,
    pub dim: usize,
    pub agents: Vec<AgentEntry>,
    pub coupling: CouplingFile,
    /// Interaction-strength threshold; weaker weights are discarded.
    pub threshold: f64,
    pub numerics: Numerics,
    pub seed: u64,
}

impl ScenarioFile {
    /// Expand templates, materialize the coupling, and validate everything.
    /// Collects every violated invariant instead of stopping at the first.
    pub fn build(&self) -> Result<ScenarioConfig> {
        let mut problems: Vec<String> = Vec::new();

        let expanded: usize = self.agents.iter().map(|a| a.copies).sum();
        if expanded != self.n_agents {
            problems.push(format!(
                "agent templates expand to {expanded} agents but n_agents is {}",
                self.n_agents
            ));
        }
        if self.agents.iter().any(|a| a.copies == 0) {
            problems.push("agent template with copies = 0 is useless".to_string());
        }
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            problems.push(
                "threshold (lower bound on interaction strength) must be positive".to_string(),
            );
        }

        let mut agents = Vec::with_capacity(expanded);
        let mut id = 0u64;
        for entry in &self.agents {
            for _ in 0..entry.copies {
                agents.push(AgentSpec {
                    id,
                    dim: self.dim,
                    modes: entry.modes.clone(),
                    init_mode: entry.init_mode,
                    z_init: entry.z_init.clone(),
                    guard: entry.guard.clone(),
                    transition: entry.transition.clone(),
                });
                id += 1;
            }
        }

        let n = agents.len();
        let threshold = if self.threshold > 0.0 && self.threshold.is_finite() {
            self.threshold
        } else {
            1.0 // placeholder so agent validation can still be collected
        };
        let coupling = match self.materialize_coupling(n, threshold) {
            Ok(c) => c,
            Err(SimError::Validation(mut list)) => {
                problems.append(&mut list);
                CouplingSpec::empty(n, self.dim, threshold)?
            }
            Err(e) => {
                problems.push(e.to_string());
                CouplingSpec::empty(n, self.dim, threshold)?
            }
        };

        let config = ScenarioConfig {
            dim: self.dim,
            agents,
            coupling,
            numerics: self.numerics,
            seed: self.seed,
        };
        match config.validate() {
            Ok(()) => {}
            Err(SimError::Validation(mut list)) => problems.append(&mut list),
            Err(e) => problems.push(e.to_string()),
        }
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(SimError::Validation(problems))
        }
    }

    fn materialize_coupling(&self, n: usize, threshold: f64) -> Result<CouplingSpec> {
        match &self.coupling {
            CouplingFile::Weights(rows) => CouplingSpec::from_dense(rows, self.dim, threshold),
            CouplingFile::Entries(list) => {
                let triples: Vec<(usize, usize, Vec<f64>)> = list
                    .iter()
                    .map(|e| (e.listener, e.source, e.weight.clone()))
                    .collect();
                CouplingSpec::from_entries(n, self.dim, threshold, &triples)
            }
            CouplingFile::RandomGraph {
                mean_degree,
                weight_lo,
                weight_hi,
            } => {
                let mut problems = Vec::new();
                if !(*mean_degree >= 0.0) || !mean_degree.is_finite() {
                    problems.push("random_graph mean_degree must be finite and >= 0".to_string());
                } else if n > 1 && *mean_degree > (n - 1) as f64 {
                    problems.push(format!(
                        "random_graph mean_degree {mean_degree} exceeds n - 1 = {}",
                        n - 1
                    ));
                }
                if !weight_lo.is_finite() || !weight_hi.is_finite() || weight_lo > weight_hi {
                    problems
                        .push("random_graph weight range must be finite with lo <= hi".to_string());
                }
                if !problems.is_empty() {
                    return Err(SimError::Validation(problems));
                }
                let mut spec = CouplingSpec::empty(n, self.dim, threshold)?;
                if n > 1 {
                    let p = mean_degree / (n - 1) as f64;
                    let mut rng = stream_rng(self.seed, LANE_GRAPH, 0);
                    for listener in 0..n {
                        for source in 0..n {
                            if source == listener {
                                continue;
                            }
                            let u: f64 = rng.gen();
                            if u < p {
                                let w: Vec<f64> = (0..self.dim)
                                    .map(|_| rng.gen_range(*weight_lo..=*weight_hi))
                                    .collect();
                                spec.add_entry(listener, source, w)?;
                            }
                        }
                    }
                }
                Ok(spec)
            }
        }
    }

    /// Canonical file form of a built config: agents listed individually and
    /// coupling as a sorted sparse entry list. Requires positional ids 0..n.
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        for (k, a) in config.agents.iter().enumerate() {
            if a.id != k as u64 {
                return Err(SimError::InvalidSpec(format!(
                    "agent at position {k} has id {}; only sequentially labeled \
                     collectives have a file form",
                    a.id
                )));
            }
            if a.dim != config.dim {
                return Err(SimError::DimensionMismatch {
                    what: "agent dimension",
                    expected: config.dim,
                    got: a.dim,
                });
            }
        }
        let mut entries: Vec<WireEntry> = config
            .coupling
            .entries()
            .map(|(listener, source, weight)| WireEntry {
                listener,
                source,
                weight: weight.to_vec(),
            })
            .collect();
        entries.sort_by_key(|e| (e.listener, e.source));
        Ok(ScenarioFile {
            n_agents: config.agents.len(),
            dim: config.dim,
            agents: config
                .agents
                .iter()
                .map(|a| AgentEntry {
                    modes: a.modes.clone(),
                    init_mode: a.init_mode,
                    z_init: a.z_init.clone(),
                    guard: a.guard.clone(),
                    transition: a.transition.clone(),
                    copies: 1,
                })
                .collect(),
            coupling: CouplingFile::Entries(entries),
            threshold: config.coupling.threshold(),
            numerics: config.numerics,
            seed: config.seed,
        })
    }
}

/// Parse the file-level schema without building it; callers that need to
/// override seed or numerics before materialization start here.
pub fn parse_scenario_file(text: &str) -> Result<ScenarioFile> {
    serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
}

/// Parse and validate a scenario from a JSON string.
pub fn load_scenario_str(text: &str) -> Result<ScenarioConfig> {
    parse_scenario_file(text)?.build()
}

/// Read the file-level schema from disk without building it.
pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_file(&text)
}

/// Parse and validate a scenario file from disk.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    load_scenario_str(&text)
}

/// Canonical serialization of a config. Loading the result reproduces the
/// config bit for bit; the bytes feed [`config_digest`].
pub fn canonical_json(config: &ScenarioConfig) -> Result<String> {
    let file = ScenarioFile::from_config(config)?;
    let mut text =
        serde_json::to_string_pretty(&file).map_err(|e| SimError::Parse(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// SHA-256 (hex) of the canonical serialization.
pub fn config_digest(config: &ScenarioConfig) -> Result<String> {
    let text = canonical_json(config)?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let out = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in out {
        use std::fmt::Write;
        write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
    }
    Ok(hex)
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// SHA-256 of the canonical config serialization.
    pub digest: String,
    pub seed: u64,
    pub version: String,
    pub numerics: Numerics,
    /// Wall-clock UNIX seconds; informational only, excluded from any
    /// byte-comparability expectations.
    pub started_at: f64,
    pub finished_at: f64,
}

fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(config: &ScenarioConfig) -> Result<Self> {
        Ok(RunManifest {
            digest: config_digest(config)?,
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            numerics: config.numerics,
            started_at: unix_now(),
            finished_at: 0.0,
        })
    }

    pub fn finish(&mut self) {
        self.finished_at = unix_now();
    }

    /// Equality ignoring wall-clock fields.
    pub fn same_run(&self, other: &RunManifest) -> bool {
        self.digest == other.digest
            && self.seed == other.seed
            && self.version == other.version
            && self.numerics == other.numerics
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "n_agents": 1,
            "dim": 1,
            "agents": [
                {
                    "modes": [
                        {
                            "field": { "ornstein_uhlenbeck": { "rate": 1.0, "mean": [0.5] } },
                            "diffusion": { "constant_matrix": { "rows": [[0.3]] } }
                        }
                    ],
                    "z_init": { "point_mass": { "value": [0.0] } },
                    "guard": { "decay": 1.0, "init": { "point_mass": { "value": [1.0] } } }
                }
            ],
            "coupling": { "weights": [[[0.0]]] },
            "threshold": 0.05,
            "numerics": { "dt": 0.001, "horizon": 1.0 },
            "seed": 42
        }"#
        .to_string()
    }

    #[test]
    fn minimal_single_agent_scenario_loads() {
        let config = load_scenario_str(&minimal_json()).unwrap();
        assert_eq!(config.agents.len(), 1);
        assert_eq!(config.dim, 1);
        assert_eq!(config.seed, 42);
        assert_eq!(config.coupling.row(0).len(), 0);
    }

    #[test]
    fn zero_threshold_is_a_validation_error() {
        let text = minimal_json().replace("\"threshold\": 0.05", "\"threshold\": 0.0");
        match load_scenario_str(&text) {
            Err(SimError::Validation(problems)) => {
                assert!(
                    problems.iter().any(|p| p.contains("threshold")),
                    "problems: {problems:?}"
                );
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_length_coupling_row_names_the_row() {
        let text = minimal_json().replace(
            "\"coupling\": { \"weights\": [[[0.0]]] }",
            "\"coupling\": { \"weights\": [[[0.0], [0.1]]] }",
        );
        match load_scenario_str(&text) {
            Err(SimError::Validation(problems)) => {
                assert!(
                    problems.iter().any(|p| p.contains("row 0")),
                    "problems: {problems:?}"
                );
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_at_parse_time() {
        let text = minimal_json().replace("\"seed\": 42", "\"seed\": 42, \"extra\": 1");
        match load_scenario_str(&text) {
            Err(SimError::Parse(msg)) => assert!(msg.contains("extra"), "message: {msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn validation_reports_every_problem_at_once() {
        let text = minimal_json()
            .replace("\"threshold\": 0.05", "\"threshold\": 0.0")
            .replace("\"dt\": 0.001", "\"dt\": 0.0")
            .replace("\"n_agents\": 1", "\"n_agents\": 3");
        match load_scenario_str(&text) {
            Err(SimError::Validation(problems)) => {
                assert!(problems.len() >= 3, "problems: {problems:?}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn canonical_serialization_round_trips_to_the_same_config() {
        let config = load_scenario_str(&minimal_json()).unwrap();
        let text = canonical_json(&config).unwrap();
        let reloaded = load_scenario_str(&text).unwrap();
        assert_eq!(config, reloaded);
        // and the canonical form is a fixed point
        assert_eq!(canonical_json(&reloaded).unwrap(), text);
        assert_eq!(
            config_digest(&config).unwrap(),
            config_digest(&reloaded).unwrap()
        );
    }

    #[test]
    fn copies_expand_into_sequential_ids() {
        let text = minimal_json()
            .replace("\"n_agents\": 1", "\"n_agents\": 4")
            .replace(
                "\"guard\": { \"decay\": 1.0, \"init\": { \"point_mass\": { \"value\": [1.0] } } }\n                }",
                "\"guard\": { \"decay\": 1.0, \"init\": { \"point_mass\": { \"value\": [1.0] } } },\n                    \"copies\": 4\n                }",
            )
            .replace(
                "\"coupling\": { \"weights\": [[[0.0]]] }",
                "\"coupling\": { \"entries\": [] }",
            );
        let config = load_scenario_str(&text).unwrap();
        assert_eq!(config.agents.len(), 4);
        for (k, a) in config.agents.iter().enumerate() {
            assert_eq!(a.id, k as u64);
        }
    }

    #[test]
    fn random_graph_is_reproducible_and_seed_sensitive() {
        let base = minimal_json()
            .replace("\"n_agents\": 1", "\"n_agents\": 30")
            .replace(
                "\"guard\": { \"decay\": 1.0, \"init\": { \"point_mass\": { \"value\": [1.0] } } }\n                }",
                "\"guard\": { \"decay\": 1.0, \"init\": { \"point_mass\": { \"value\": [1.0] } } },\n                    \"copies\": 30\n                }",
            )
            .replace(
                "\"coupling\": { \"weights\": [[[0.0]]] }",
                "\"coupling\": { \"random_graph\": { \"mean_degree\": 5.0, \"weight_lo\": 0.1, \"weight_hi\": 0.4 } }",
            );
        let a = load_scenario_str(&base).unwrap();
        let b = load_scenario_str(&base).unwrap();
        assert_eq!(a, b);
        let c = load_scenario_str(&base.replace("\"seed\": 42", "\"seed\": 43")).unwrap();
        assert_ne!(a.coupling, c.coupling);
        // edge count near the requested mean degree
        let edges: usize = (0..30).map(|i| a.coupling.row(i).len()).sum();
        let expected = 30.0 * 5.0;
        assert!(
            (edges as f64 - expected).abs() < 60.0,
            "edge count {edges} far from {expected}"
        );
        // materialized graph survives the canonical round trip
        let text = canonical_json(&a).unwrap();
        assert_eq!(load_scenario_str(&text).unwrap(), a);
    }

    #[test]
    fn mean_degree_beyond_n_minus_one_is_rejected() {
        let text = minimal_json()
            .replace("\"n_agents\": 1", "\"n_agents\": 3")
            .replace(
                "\"guard\": { \"decay\": 1.0, \"init\": { \"point_mass\": { \"value\": [1.0] } } }\n                }",
                "\"guard\": { \"decay\": 1.0, \"init\": { \"point_mass\": { \"value\": [1.0] } } },\n                    \"copies\": 3\n                }",
            )
            .replace(
                "\"coupling\": { \"weights\": [[[0.0]]] }",
                "\"coupling\": { \"random_graph\": { \"mean_degree\": 5.0, \"weight_lo\": 0.1, \"weight_hi\": 0.4 } }",
            );
        match load_scenario_str(&text) {
            Err(SimError::Validation(problems)) => {
                assert!(
                    problems.iter().any(|p| p.contains("mean_degree")),
                    "problems: {problems:?}"
                );
            }
            other => panic!("expected validation error, got {other:?}"),
        }
        // a single isolated agent with a random graph request is fine: there
        // are no ordered pairs, so the graph is empty regardless of degree
        let lonely = minimal_json().replace(
            "\"coupling\": { \"weights\": [[[0.0]]] }",
            "\"coupling\": { \"random_graph\": { \"mean_degree\": 0.0, \"weight_lo\": 0.1, \"weight_hi\": 0.4 } }",
        );
        let config = load_scenario_str(&lonely).unwrap();
        assert_eq!(config.coupling.row(0).len(), 0);
    }

    #[test]
    fn manifest_digest_matches_recomputation_and_ignores_wall_time() {
        let config = load_scenario_str(&minimal_json()).unwrap();
        let mut m1 = RunManifest::start(&config).unwrap();
        m1.finish();
        let m2 = RunManifest::start(&config).unwrap();
        assert_eq!(m1.digest, config_digest(&config).unwrap());
        assert!(m1.same_run(&m2));
        let other = load_scenario_str(&minimal_json().replace("\"seed\": 42", "\"seed\": 7"))
            .unwrap();
        let m3 = RunManifest::start(&other).unwrap();
        assert!(!m1.same_run(&m3));
    }

    #[test]
    fn manifest_serializes_and_reloads() {
        let config = load_scenario_str(&minimal_json()).unwrap();
        let mut m = RunManifest::start(&config).unwrap();
        m.finish();
        let text = serde_json::to_string_pretty(&m).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
    }
}

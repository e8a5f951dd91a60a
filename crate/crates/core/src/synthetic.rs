//! Built-in scenario generators: a parameterized throughput benchmark, random
//! small collectives for round-trip and equivalence sweeps, and two fixed
//! fixtures (a one-way coupled pair and a deterministic jump-budget blower).

use crate::agent::{AgentMode, AgentSpec, CouplingSpec, GuardSpec, ModeTransition};
use crate::hybrid::{DiffusionSpec, VectorFieldSpec, VectorKernel};
use crate::scenario::{AgentEntry, CouplingFile, ScenarioFile};
use crate::swarm::{Numerics, ScenarioConfig};
use rand::Rng;

/// Throughput benchmark: `n` one-dimensional agents pulled toward their
/// decaying guards, coupled through a sparse random graph of mean degree 8.
pub fn benchmark_file(n: usize, seed: u64) -> ScenarioFile {
    let mean_degree = if n > 1 { 8.0f64.min((n - 1) as f64) } else { 0.0 };
    ScenarioFile {
        n_agents: n,
        dim: 1,
        agents: vec![AgentEntry {
            modes: vec![AgentMode {
                field: VectorFieldSpec::OrnsteinUhlenbeck {
                    rate: 1.0,
                    mean: vec![0.6],
                },
                diffusion: DiffusionSpec::ConstantMatrix {
                    rows: vec![vec![0.4]],
                },
            }],
            init_mode: 0,
            z_init: VectorKernel::PointMass { value: vec![0.0] },
            guard: GuardSpec {
                decay: 1.0,
                init: VectorKernel::UniformBox {
                    lo: vec![0.9],
                    hi: vec![1.3],
                },
                rhs: None,
            },
            transition: ModeTransition::Cyclic,
            copies: n,
        }],
        coupling: CouplingFile::RandomGraph {
            mean_degree,
            weight_lo: 0.06,
            weight_hi: 0.18,
        },
        threshold: 0.05,
        numerics: Numerics {
            dt: 1e-3,
            horizon: 10.0,
            stride: 100,
            max_jumps: 1_000_000,
        },
        seed,
    }
}

/// Built form of [`benchmark_file`].
pub fn benchmark_scenario(n: usize, seed: u64) -> ScenarioConfig {
    benchmark_file(n, seed)
        .build()
        .expect("benchmark scenario is valid by construction")
}

/// A random small collective: random dimension, dynamics, guards, and a
/// dense-ish random coupling. Everything is drawn from `rng`, so sweeps are
/// reproducible. `n` is the exact number of agents.
pub fn random_scenario(n: usize, seed: u64, rng: &mut impl Rng) -> ScenarioConfig {
    assert!(n >= 1);
    let dim = if rng.gen_bool(0.7) { 1 } else { 2 };
    let threshold = 0.05;

    let mut agents = Vec::with_capacity(n);
    for id in 0..n {
        let n_modes = if rng.gen_bool(0.8) { 1 } else { 2 };
        let modes = (0..n_modes)
            .map(|_| {
                let field = match rng.gen_range(0..3u8) {
                    0 => VectorFieldSpec::Constant {
                        value: (0..dim).map(|_| rng.gen_range(0.2..1.0)).collect(),
                    },
                    1 => VectorFieldSpec::OrnsteinUhlenbeck {
                        rate: rng.gen_range(0.5..1.5),
                        mean: (0..dim).map(|_| rng.gen_range(0.3..0.9)).collect(),
                    },
                    _ => VectorFieldSpec::Linear {
                        matrix: (0..dim)
                            .map(|p| {
                                (0..dim)
                                    .map(|q| if p == q { -rng.gen_range(0.2..1.0) } else { 0.0 })
                                    .collect()
                            })
                            .collect(),
                        offset: (0..dim).map(|_| rng.gen_range(0.2..0.8)).collect(),
                    },
                };
                let diffusion = if rng.gen_bool(0.75) {
                    DiffusionSpec::ConstantMatrix {
                        rows: (0..dim)
                            .map(|p| {
                                (0..dim)
                                    .map(|q| if p == q { rng.gen_range(0.1..0.5) } else { 0.0 })
                                    .collect()
                            })
                            .collect(),
                    }
                } else {
                    DiffusionSpec::Zero
                };
                AgentMode { field, diffusion }
            })
            .collect();
        agents.push(AgentSpec {
            id: id as u64,
            dim,
            modes,
            init_mode: 0,
            z_init: VectorKernel::PointMass {
                value: (0..dim).map(|_| rng.gen_range(-0.2..0.2)).collect(),
            },
            guard: GuardSpec {
                decay: rng.gen_range(0.3..2.0),
                init: VectorKernel::UniformBox {
                    lo: vec![0.7; dim],
                    hi: vec![1.2; dim],
                },
                rhs: None,
            },
            transition: ModeTransition::Cyclic,
        });
    }

    let mut coupling = CouplingSpec::empty(n, dim, threshold).expect("positive threshold");
    for listener in 0..n {
        for source in 0..n {
            if listener == source {
                continue;
            }
            if rng.gen_bool(0.3) {
                let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.06..0.25)).collect();
                coupling
                    .add_entry(listener, source, w)
                    .expect("generated entries are in range");
            }
        }
    }

    ScenarioConfig {
        dim,
        agents,
        coupling,
        numerics: Numerics {
            dt: 1e-3,
            horizon: rng.gen_range(1.0..2.5),
            stride: 10,
            max_jumps: 10_000,
        },
        seed,
    }
}

/// Two agents, one-way drive: agent 0 jumps on its own schedule; agent 1
/// listens with weight `weight`. With weight 0 the pair is uncoupled.
pub fn coupled_pair_scenario(weight: f64, seed: u64) -> ScenarioConfig {
    let dim = 1;
    let threshold = 0.05;
    let driver = AgentSpec {
        id: 0,
        dim,
        modes: vec![AgentMode {
            field: VectorFieldSpec::Constant { value: vec![0.9] },
            diffusion: DiffusionSpec::ConstantMatrix {
                rows: vec![vec![0.25]],
            },
        }],
        init_mode: 0,
        z_init: VectorKernel::PointMass { value: vec![0.0] },
        guard: GuardSpec {
            decay: 0.8,
            init: VectorKernel::UniformBox {
                lo: vec![0.9],
                hi: vec![1.2],
            },
            rhs: None,
        },
        transition: ModeTransition::Cyclic,
    };
    let mut listener = driver.clone();
    listener.id = 1;
    listener.modes[0].field = VectorFieldSpec::Constant { value: vec![0.45] };

    let mut coupling = CouplingSpec::empty(2, dim, threshold).expect("positive threshold");
    coupling
        .add_entry(1, 0, vec![weight])
        .expect("entry in range");

    ScenarioConfig {
        dim,
        agents: vec![driver, listener],
        coupling,
        numerics: Numerics {
            dt: 1e-3,
            horizon: 4.0,
            stride: 10,
            max_jumps: 10_000,
        },
        seed,
    }
}

/// Deterministic jump-budget blower: after every jump the position resets
/// above the fresh barrier, so the agent fires once per step until the
/// budget trips. Runs always end in `ZenoSuspected`.
pub fn zeno_scenario(seed: u64) -> ScenarioConfig {
    let dim = 1;
    let agent = AgentSpec {
        id: 0,
        dim,
        modes: vec![AgentMode {
            field: VectorFieldSpec::Constant { value: vec![0.0] },
            diffusion: DiffusionSpec::Zero,
        }],
        init_mode: 0,
        z_init: VectorKernel::PointMass { value: vec![1.0] },
        guard: GuardSpec {
            decay: 1.0,
            init: VectorKernel::PointMass { value: vec![0.5] },
            rhs: None,
        },
        transition: ModeTransition::Cyclic,
    };
    ScenarioConfig {
        dim,
        agents: vec![agent],
        coupling: CouplingSpec::empty(1, dim, 0.05).expect("positive threshold"),
        numerics: Numerics {
            dt: 1e-3,
            horizon: 1.0,
            stride: 10,
            max_jumps: 50,
        },
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swarm::simulate_swarm;

    #[test]
    fn benchmark_scenario_is_valid_and_sized() {
        let config = benchmark_scenario(40, 7);
        config.validate().unwrap();
        assert_eq!(config.agents.len(), 40);
        let edges: usize = (0..40).map(|i| config.coupling.row(i).len()).sum();
        assert!(edges > 0);
        // mean degree stays near 8 for n well above 8
        assert!((edges as f64 / 40.0 - 8.0).abs() < 3.0, "edges: {edges}");
    }

    #[test]
    fn random_scenarios_are_valid_and_vary() {
        let mut rng = crate::rng::stream_rng(3, 0, 0);
        let mut dims = std::collections::HashSet::new();
        for k in 0..20 {
            let n = rng.gen_range(1..=10);
            let config = random_scenario(n, 1000 + k, &mut rng);
            config.validate().unwrap();
            assert_eq!(config.agents.len(), n);
            dims.insert(config.dim);
        }
        assert!(dims.len() > 1, "dimension never varied");
    }

    #[test]
    fn random_scenarios_simulate_cleanly() {
        let mut rng = crate::rng::stream_rng(4, 0, 0);
        for k in 0..5 {
            let config = random_scenario(rng.gen_range(1..=6), 2000 + k, &mut rng);
            let trace = simulate_swarm(&config).unwrap();
            assert_eq!(trace.agents.len(), config.agents.len());
        }
    }

    #[test]
    fn coupled_pair_with_zero_weight_has_empty_coupling() {
        let config = coupled_pair_scenario(0.0, 1);
        config.validate().unwrap();
        assert!(config.coupling.row(1).is_empty());
        let coupled = coupled_pair_scenario(0.4, 1);
        assert_eq!(coupled.coupling.row(1).len(), 1);
    }

    #[test]
    fn zeno_scenario_trips_the_budget() {
        let config = zeno_scenario(9);
        match simulate_swarm(&config) {
            Err(crate::error::SimError::ZenoSuspected { jumps, time }) => {
                assert_eq!(jumps, 51);
                assert!(time < 0.1);
            }
            other => panic!("expected ZenoSuspected, got {other:?}"),
        }
    }
}

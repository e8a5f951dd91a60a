//! `shsim`: simulate collectives of communicating stochastic hybrid agents
//! and run the statistical verification suite against them.
//!
//! Exit codes are a stable contract: 0 = pass, 1 = verification or run
//! failure, 2 = usage/config error. Failures print one JSON object to stderr.

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use shsim_core::agent::HitFormulation;
use shsim_core::analysis::{
    estimate_first_passage, forward_equation_residual, generator_residual,
    jump_samples_from_swarm, mean_jump_intensity, AbstractionModel, AgentRate,
    FirstPassageConditioning, FirstPassageOptions, Region, TestFunction,
};
use shsim_core::hybrid::VectorKernel;
use shsim_core::io::{
    write_abstraction_csv, write_first_passage_csv, write_intensity_csv, write_jumps_csv,
    write_trace_csv,
};
use shsim_core::scenario::{canonical_json, load_scenario_file, RunManifest, ScenarioFile};
use shsim_core::swarm::{
    compose_collectives, extract_abstraction, reconstruct_jump_times, simulate_swarm_with,
    EngineOptions, ScenarioConfig,
};
use shsim_core::synthetic::benchmark_file;
use shsim_core::SimError;

#[derive(Parser, Debug)]
#[command(
    name = "shsim",
    version,
    about = "Simulate and verify collectives of communicating stochastic hybrid agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the scenario master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the scenario step size.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Override the scenario horizon.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Replication count for Monte-Carlo estimators.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Output directory (created if missing). Defaults to the working dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Hit {
    /// Compare the effective position (z + input) against the barrier.
    Effective,
    /// Compare z against the lowered barrier (barrier - input).
    Modified,
}

impl From<Hit> for HitFormulation {
    fn from(h: Hit) -> Self {
        match h {
            Hit::Effective => HitFormulation::EffectiveState,
            Hit::Modified => HitFormulation::ModifiedGuard,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario; write trace.csv, jumps.csv, manifest.json.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Guard-hit predicate formulation.
        #[arg(long, value_enum, default_value_t = Hit::Effective)]
        hit: Hit,
        /// Test for crossings missed between step endpoints.
        #[arg(long)]
        bridge: bool,
        /// Replication index (same seed, independent noise).
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
    /// Project a trace CSV onto its (guard, clock) coordinates.
    Abstract {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Simulate, project, reconstruct: exit 0 iff every jump time is
    /// recovered bit for bit from the abstraction.
    VerifyRoundtrip {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// First-passage law of one agent against its decaying guard.
    EstimateFp {
        #[arg(long)]
        scenario: PathBuf,
        /// Which agent's dynamics to probe.
        #[arg(long, default_value_t = 0)]
        agent: u64,
        #[arg(long, default_value_t = 100)]
        bins: usize,
        /// Test for crossings missed between step endpoints.
        #[arg(long)]
        bridge: bool,
    },
    /// Compare the Monte-Carlo short-time rate (E[f(x_h)] - f(x))/h with the
    /// generator applied to f = clock of agent 0.
    VerifyGenerator {
        #[arg(long)]
        scenario: PathBuf,
        /// Constant jump rate per agent in the reduced model.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        /// Clock value every agent starts from.
        #[arg(long, default_value_t = 0.3)]
        tau: f64,
        /// Rate window h.
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        /// Discretization-bias allowance per unit h.
        #[arg(long, default_value_t = 2.0)]
        bias_budget: f64,
    },
    /// Check d/dt E[f] = E[Lf] along simulated paths for f = clock and
    /// f = first guard coordinate of agent 0.
    VerifyForward {
        #[arg(long)]
        scenario: PathBuf,
        /// Constant jump rate per agent in the reduced model.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[arg(long, default_value_t = 9)]
        grid_points: usize,
        /// Reset-kernel draws per generator evaluation.
        #[arg(long, default_value_t = 64)]
        kernel_reps: usize,
        /// Centred-difference bias allowance.
        #[arg(long, default_value_t = 0.05)]
        bias_budget: f64,
    },
    /// Ensemble mean jump count J(t) of a box region and its rate.
    Intensity {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 10)]
        grid_points: usize,
        /// Region lower corner (comma separated); omit for the whole space.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        lo: Option<Vec<f64>>,
        /// Region upper corner (comma separated); omit for the whole space.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        hi: Option<Vec<f64>>,
    },
    /// Merge two collectives into one scenario file, optionally wiring
    /// announcements from agents of A to listeners of B.
    Compose {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// One wire "source,target,w0[;w1...]" with A's source id, B's
        /// target id (as numbered in B's own file), and a weight vector.
        #[arg(long = "wire")]
        wires: Vec<String>,
    },
    /// Throughput benchmark on the built-in sparse random-graph scenario.
    Bench {
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
}

fn error_kind(e: &SimError) -> (&'static str, i32) {
    match e {
        SimError::Validation(_) => ("validation", 2),
        SimError::InvalidSpec(_) => ("invalid_spec", 2),
        SimError::Parse(_) => ("parse", 2),
        SimError::Io(_) => ("io", 2),
        SimError::Csv(_) => ("csv", 2),
        SimError::DimensionMismatch { .. } => ("dimension_mismatch", 2),
        SimError::UnknownAgent(_) => ("unknown_agent", 2),
        SimError::ZenoSuspected { .. } => ("zeno_suspected", 1),
        SimError::NonFinite(_) => ("non_finite", 1),
        SimError::RateBoundExceeded { .. } => ("rate_bound_exceeded", 1),
        SimError::RejectionBudget { .. } => ("rejection_budget", 1),
        SimError::GuardNotPositive => ("guard_not_positive", 1),
        SimError::SurvivalTooSmall { .. } => ("survival_too_small", 1),
        SimError::CorruptClock { .. } => ("corrupt_clock", 1),
        SimError::RateUnavailable { .. } => ("rate_unavailable", 1),
    }
}

fn emit_error(kind: &str, message: &str) {
    eprintln!(
        "{}",
        json!({ "error": kind, "message": message })
    );
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            emit_error("usage", e.render().to_string().trim_end());
            std::process::exit(2);
        }
    };
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            let (kind, code) = error_kind(&e);
            emit_error(kind, &e.to_string());
            std::process::exit(code);
        }
    }
}

/// Load a scenario file and apply the global overrides before building, so
/// a seed override also re-materializes any random coupling graph.
fn load_config(cli: &Cli, path: &Path) -> Result<ScenarioConfig, SimError> {
    let mut file = load_scenario_file(path)?;
    apply_overrides(cli, &mut file);
    file.build()
}

fn apply_overrides(cli: &Cli, file: &mut ScenarioFile) {
    if let Some(seed) = cli.seed {
        file.seed = seed;
    }
    if let Some(dt) = cli.dt {
        file.numerics.dt = dt;
    }
    if let Some(horizon) = cli.horizon {
        file.numerics.horizon = horizon;
    }
}

fn out_dir(cli: &Cli) -> Result<PathBuf, SimError> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn print_report<T: Serialize>(report: &T) -> Result<(), SimError> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| SimError::Parse(e.to_string()))?;
    println!("{text}");
    Ok(())
}

/// Representative point of a reset kernel, used to pin probe start states.
fn kernel_center(kernel: &VectorKernel) -> Vec<f64> {
    match kernel {
        VectorKernel::PointMass { value } => value.clone(),
        VectorKernel::UniformBox { lo, hi } => {
            lo.iter().zip(hi).map(|(a, b)| (a + b) / 2.0).collect()
        }
        VectorKernel::Gaussian { mean, .. } => mean.clone(),
    }
}

/// Flattened model state: per-agent guard-seed centers, then clocks.
fn model_point(config: &ScenarioConfig, clock: f64) -> Vec<f64> {
    let n = config.agents.len();
    let mut x = Vec::with_capacity(n * config.dim + n);
    for spec in &config.agents {
        x.extend(kernel_center(&spec.guard.init));
    }
    x.extend(std::iter::repeat_n(clock, n));
    x
}

fn constant_rate_model(config: &ScenarioConfig, rate: f64) -> Result<AbstractionModel, SimError> {
    let rates = vec![AgentRate::Constant { value: rate }; config.agents.len()];
    AbstractionModel::from_scenario(config, rates)
}

fn run(cli: &Cli) -> Result<i32, SimError> {
    match &cli.command {
        Command::Simulate {
            scenario,
            hit,
            bridge,
            replication,
        } => {
            let config = load_config(cli, scenario)?;
            let mut manifest = RunManifest::start(&config)?;
            let opts = EngineOptions {
                hit: (*hit).into(),
                bridge: *bridge,
            };
            let trace = simulate_swarm_with(&config, opts, *replication)?;
            manifest.finish();
            let dir = out_dir(cli)?;
            write_trace_csv(&trace, File::create(dir.join("trace.csv"))?)?;
            write_jumps_csv(trace.dim, &trace.jumps, File::create(dir.join("jumps.csv"))?)?;
            shsim_core::io::write_json(&manifest, File::create(dir.join("manifest.json"))?)?;
            print_report(&json!({
                "agents": trace.agents.len(),
                "samples": trace.grid.len(),
                "jumps": trace.jumps.len(),
                "out": dir,
            }))?;
            Ok(0)
        }

        Command::Abstract { trace } => {
            let trace = shsim_core::io::read_trace_csv(File::open(trace)?)?;
            let abs = extract_abstraction(&trace);
            let dir = out_dir(cli)?;
            write_abstraction_csv(&abs, File::create(dir.join("abstraction.csv"))?)?;
            print_report(&json!({
                "agents": abs.agents.len(),
                "samples": abs.grid.len(),
                "out": dir,
            }))?;
            Ok(0)
        }

        Command::VerifyRoundtrip { scenario } => {
            let config = load_config(cli, scenario)?;
            let trace = simulate_swarm_with(&config, EngineOptions::default(), 0)?;
            let abs = extract_abstraction(&trace);
            let reconstructed = reconstruct_jump_times(&abs)?;
            let mut exact = true;
            let mut total = 0usize;
            for (track, times) in abs.agents.iter().zip(&reconstructed) {
                let logged = trace.jump_times(track.id);
                total += logged.len();
                if logged.len() != times.len()
                    || logged
                        .iter()
                        .zip(times)
                        .any(|(a, b)| a.to_bits() != b.to_bits())
                {
                    exact = false;
                }
            }
            print_report(&json!({
                "agents": trace.agents.len(),
                "jumps": total,
                "exact_match": exact,
            }))?;
            Ok(if exact { 0 } else { 1 })
        }

        Command::EstimateFp {
            scenario,
            agent,
            bins,
            bridge,
        } => {
            let config = load_config(cli, scenario)?;
            let spec = config
                .agents
                .iter()
                .find(|a| a.id == *agent)
                .ok_or(SimError::UnknownAgent(*agent as usize))?;
            let conditioning =
                FirstPassageConditioning::isolated(kernel_center(&spec.guard.init));
            let opts = FirstPassageOptions {
                dt: config.numerics.dt,
                horizon: config.numerics.horizon,
                bins: *bins,
                bridge: *bridge,
            };
            let reps = cli.reps.unwrap_or(10_000);
            let (est, hits) =
                estimate_first_passage(spec, &conditioning, &opts, reps, config.seed)?;
            let (mean_hit, mean_se) = est.mean_hit_and_se(&hits);
            let dir = out_dir(cli)?;
            write_first_passage_csv(&est, File::create(dir.join("first_passage.csv"))?)?;
            print_report(&json!({
                "n_reps": est.n_reps,
                "n_hits": est.n_hits,
                "truncated": est.truncated,
                "mean_hit": mean_hit,
                "mean_hit_se": mean_se,
                "out": dir,
            }))?;
            Ok(0)
        }

        Command::VerifyGenerator {
            scenario,
            rate,
            tau,
            h,
            bias_budget,
        } => {
            let config = load_config(cli, scenario)?;
            let model = constant_rate_model(&config, *rate)?;
            let f = TestFunction::ClockCoordinate { agent: 0 };
            let x0 = model_point(&config, *tau);
            let reps = cli.reps.unwrap_or(100_000);
            let report =
                generator_residual(&model, &f, &x0, *h, reps, config.seed, *bias_budget)?;
            print_report(&report)?;
            Ok(if report.pass { 0 } else { 1 })
        }

        Command::VerifyForward {
            scenario,
            rate,
            grid_points,
            kernel_reps,
            bias_budget,
        } => {
            let config = load_config(cli, scenario)?;
            let model = constant_rate_model(&config, *rate)?;
            let x0 = model_point(&config, 0.0);
            if *grid_points < 3 {
                return Err(SimError::InvalidSpec(
                    "forward check needs at least three grid points".into(),
                ));
            }
            let horizon = config.numerics.horizon;
            let grid: Vec<f64> = (0..*grid_points)
                .map(|k| horizon * k as f64 / (*grid_points - 1) as f64)
                .collect();
            let reps = cli.reps.unwrap_or(4000);
            let observables = [
                ("clock_0", TestFunction::ClockCoordinate { agent: 0 }),
                ("guard_0", TestFunction::Coordinate { index: 0 }),
            ];
            let mut reports = Vec::new();
            let mut all_pass = true;
            for (name, f) in &observables {
                let report = forward_equation_residual(
                    &model,
                    f,
                    &x0,
                    &grid,
                    reps,
                    *kernel_reps,
                    config.seed,
                    *bias_budget,
                )?;
                all_pass &= report.pass;
                reports.push(json!({ "observable": name, "report": report }));
            }
            print_report(&reports)?;
            Ok(if all_pass { 0 } else { 1 })
        }

        Command::Intensity {
            scenario,
            grid_points,
            lo,
            hi,
        } => {
            let config = load_config(cli, scenario)?;
            let region = match (lo, hi) {
                (Some(lo), Some(hi)) => Region::new(lo.clone(), hi.clone())?,
                (None, None) => Region::all(config.dim),
                _ => {
                    return Err(SimError::InvalidSpec(
                        "--lo and --hi must be given together".into(),
                    ))
                }
            };
            if region.dim() != config.dim {
                return Err(SimError::DimensionMismatch {
                    what: "region bounds",
                    expected: config.dim,
                    got: region.dim(),
                });
            }
            if *grid_points < 2 {
                return Err(SimError::InvalidSpec(
                    "intensity grid needs at least two points".into(),
                ));
            }
            let reps = cli.reps.unwrap_or(200);
            let mut ensemble = Vec::with_capacity(reps);
            for rep in 0..reps {
                let trace = simulate_swarm_with(&config, EngineOptions::default(), rep as u64)?;
                ensemble.push(jump_samples_from_swarm(&trace));
            }
            let horizon = config.numerics.horizon;
            let grid: Vec<f64> = (1..=*grid_points)
                .map(|k| horizon * k as f64 / *grid_points as f64)
                .collect();
            let est = mean_jump_intensity(&ensemble, &region, &grid)?;
            let dir = out_dir(cli)?;
            write_intensity_csv(&est, File::create(dir.join("intensity.csv"))?)?;
            print_report(&json!({
                "n_reps": est.n_reps,
                "grid_points": est.grid.len(),
                "out": dir,
            }))?;
            Ok(0)
        }

        Command::Compose { a, b, wires } => {
            let mut file_a = load_scenario_file(a)?;
            let mut file_b = load_scenario_file(b)?;
            apply_overrides(cli, &mut file_a);
            apply_overrides(cli, &mut file_b);
            let config_a = file_a.build()?;
            let mut config_b = file_b.build()?;
            let offset = config_a.agents.len() as u64;
            for agent in &mut config_b.agents {
                agent.id += offset;
            }
            let mut wiring = Vec::with_capacity(wires.len());
            for w in wires {
                let (source, target, weight) = parse_wire(w)?;
                wiring.push((source, target + offset, weight));
            }
            let merged = compose_collectives(&config_a, &config_b, &wiring)?;
            let text = canonical_json(&merged)?;
            let dir = out_dir(cli)?;
            let path = dir.join("composed.json");
            std::fs::write(&path, text)?;
            print_report(&json!({
                "n_agents": merged.agents.len(),
                "wires": wiring.len(),
                "out": path,
            }))?;
            Ok(0)
        }

        Command::Bench { n } => {
            let mut file = benchmark_file(*n, cli.seed.unwrap_or(42));
            apply_overrides(cli, &mut file);
            let config = file.build()?;
            let mut manifest = RunManifest::start(&config)?;
            let start = Instant::now();
            let trace = simulate_swarm_with(&config, EngineOptions::default(), 0)?;
            let wall = start.elapsed().as_secs_f64();
            manifest.finish();
            let steps = (config.numerics.horizon / config.numerics.dt).round() as usize;
            let agent_steps = steps * config.agents.len();
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                shsim_core::io::write_json(&manifest, File::create(dir.join("manifest.json"))?)?;
            }
            print_report(&json!({
                "n_agents": config.agents.len(),
                "steps": steps,
                "jumps": trace.jumps.len(),
                "wall_seconds": wall,
                "agent_steps_per_second": agent_steps as f64 / wall,
            }))?;
            Ok(0)
        }
    }
}

/// Parse one wire flag: "source,target,w0[;w1...]".
fn parse_wire(text: &str) -> Result<(u64, u64, Vec<f64>), SimError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(SimError::Parse(format!(
            "wire {text:?} must be source,target,w0[;w1...]"
        )));
    }
    let source: u64 = parts[0]
        .parse()
        .map_err(|_| SimError::Parse(format!("bad wire source id: {:?}", parts[0])))?;
    let target: u64 = parts[1]
        .parse()
        .map_err(|_| SimError::Parse(format!("bad wire target id: {:?}", parts[1])))?;
    let weight = parts[2]
        .split(';')
        .map(|s| {
            s.parse()
                .map_err(|_| SimError::Parse(format!("bad wire weight: {s:?}")))
        })
        .collect::<Result<Vec<f64>, SimError>>()?;
    Ok((source, target, weight))
}

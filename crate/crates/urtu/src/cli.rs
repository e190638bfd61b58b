//! Command-line interface.
//!
//! Exit codes: `0` success, `1` invalid input (bad flags, unreadable or
//! invalid files, constraint violations), `2` numerical failure.

use std::collections::hash_map::RandomState;
use std::hash::BuildHasher;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use urtu_core::analysis::spectral_report;
use urtu_core::meanfield::{integrate, Tolerances};
use urtu_core::stochastic::{gillespie_path, initial_state_random, InitPolicy};
use urtu_core::{DirectedNetwork, NodeState, OsnState, ProbabilityState, RateFamily, RateKind, UrtuParams};

use crate::ensemble::parallel_ensemble;
use crate::error::{Error, Result};
use crate::harness::{compare_models, sweep, CompareSpec, Horizon, SweepConfig, SweepOutputs, ThresholdRule};
use crate::io::{
    emit_plot_data, events_csv, load_edges, load_params, read_text, save_edges_with_metadata, support_network,
    trajectory_csv, write_text, Metadata,
};

#[derive(Debug, Parser)]
#[command(name = "urtu", version, about = "Rumor-truth spreading: simulation, mean-field analysis and sweeps")]
pub struct Cli {
    /// Worker threads for ensembles and sweeps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random symmetric network and write it as an edge list.
    Generate(GenerateArgs),
    /// Spectral thresholds, extinction criteria, regime and equilibria.
    Analyze(AnalyzeArgs),
    /// Simulate the stochastic model (`exact`) or integrate the mean-field ODE (`ode`).
    Simulate(SimulateArgs),
    /// Compare the mean-field ODE with a stochastic ensemble.
    Compare(CompareArgs),
    /// Run a parameter sweep from a JSON config.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetKind {
    ScaleFree,
    SmallWorld,
    Random,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: NetKind,
    #[arg(long)]
    pub n: usize,
    /// Attachment count (scale-free).
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Lattice neighbours, even (small-world).
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Rewiring probability (small-world) or edge probability (random).
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    /// JSON parameter file.
    #[arg(long)]
    pub params: PathBuf,
    /// Rumor network edge list (default: support of `b_u`).
    #[arg(long)]
    pub rumor_net: Option<PathBuf>,
    /// Truth network edge list (default: support of `c_u`).
    #[arg(long)]
    pub truth_net: Option<PathBuf>,
    /// Rate family, overriding the parameter file.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Saturation constant for `--family saturating`.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Linear,
    Saturating,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Ode,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub model: ModelArgs,
    /// `random` (one rumor and one truth seed) or one digit per node:
    /// 0 uncertain, 1 rumor, 2 truth.
    #[arg(long, default_value = "random")]
    pub init: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    /// Grid points including both ends.
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Sample paths (exact).
    #[arg(long, default_value_t = 10_000)]
    pub paths: u64,
    /// Also write the events of path 0 as CSV (exact).
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub atol: f64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "random")]
    pub init: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub paths: u64,
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1600.0)]
    pub max_t_end: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    pub window: f64,
    /// Plot-data file (`t R_linear T_linear R_exact T_exact`).
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Receives `sweep.csv` and `summary.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Receives per-run plot data.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first} (see --help)");
            return 1;
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return 1;
        }
    }
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn fresh_seed() -> u64 {
    RandomState::new().hash_one(std::time::SystemTime::now())
}

fn config_json<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("serializable")
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let seed = a.seed.unwrap_or_else(fresh_seed);
    let net = match a.kind {
        NetKind::ScaleFree => urtu_core::graph::generate_scale_free(a.n, a.m, seed)?,
        NetKind::SmallWorld => urtu_core::graph::generate_small_world(a.n, a.k, a.p, seed)?,
        NetKind::Random => urtu_core::graph::generate_random(a.n, a.p, seed)?,
    };
    let mut config = config_json(a);
    config["seed"] = seed.into();
    let meta = Metadata::new(Some(seed), config);
    match &a.out {
        Some(path) => save_edges_with_metadata(&net, &meta, path),
        None => emit(None, &(meta.comment_lines() + &net.to_edge_list())),
    }
}

/// Parameters, networks and family after validation.
struct Model {
    params: UrtuParams,
    kind: RateKind,
}

fn load_model(a: &ModelArgs) -> Result<Model> {
    let (params, file_kind) = load_params(&a.params)?;
    let kind = match a.family {
        None => file_kind,
        Some(FamilyArg::Linear) => RateKind::Linear,
        Some(FamilyArg::Saturating) => RateKind::Saturating { c: a.c },
    };
    let net = |path: &Option<PathBuf>, fallback: &urtu_core::Matrix| -> Result<DirectedNetwork> {
        match path {
            Some(p) => load_edges(p),
            None => support_network(fallback),
        }
    };
    let gr = net(&a.rumor_net, &params.b_u)?;
    let gt = net(&a.truth_net, &params.c_u)?;
    let report = params.validate(&gr, &gt)?;
    if !report.is_ok() {
        return Err(Error::Invalid(format!("{}: {}", a.params.display(), report.messages().join("; "))));
    }
    for (name, g) in [("rumor", &gr), ("truth", &gt)] {
        if g.n() > 1 && !g.is_strongly_connected() {
            return Err(Error::Invalid(format!("the {name} network is not strongly connected")));
        }
    }
    RateFamily::new(&params, kind)?;
    Ok(Model { params, kind })
}

fn parse_init(spec: &str, n: usize, seed: u64) -> Result<OsnState> {
    if spec == "random" {
        return Ok(initial_state_random(n, seed)?);
    }
    let states = spec
        .chars()
        .map(|c| c.to_digit(10).and_then(|d| NodeState::from_digit(d as u8)))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Invalid(format!("--init {spec:?}: expected `random` or digits 0/1/2")))?;
    if states.len() != n {
        return Err(Error::Invalid(format!("--init has {} digits, the network has {n} nodes", states.len())));
    }
    Ok(OsnState::new(states))
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    metadata: Metadata,
    report: &'a urtu_core::analysis::SpectralReport,
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let fam = RateFamily::new(&model.params, model.kind)?;
    let report = spectral_report(&fam)?;
    let out = AnalyzeOutput { metadata: Metadata::new(None, config_json(a)), report: &report };
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&out).expect("serializable") + "\n"))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let fam = RateFamily::new(&model.params, model.kind)?;
    let seed = a.seed.unwrap_or_else(fresh_seed);
    let init = parse_init(&a.init, model.params.n(), seed)?;
    if a.points < 2 || a.t_end.is_nan() || a.t_end <= 0.0 {
        return Err(Error::Invalid("--points must be at least 2 and --t-end positive".into()));
    }
    let grid = urtu_core::meanfield::uniform_grid(a.t_end, a.points);
    let mut config = config_json(a);
    config["seed"] = seed.into();
    config["family"] = serde_json::to_value(model.kind).expect("serializable");
    let meta = Metadata::new(Some(seed), config);
    let traj = match a.method {
        Method::Exact => {
            if let Some(path) = &a.events {
                let events = gillespie_path(&fam, &init, a.t_end, seed)?;
                write_text(path, &events_csv(&events, Some(&meta)))?;
            }
            parallel_ensemble(&fam, &InitPolicy::Fixed { state: init }, &grid, a.paths, seed)?
        }
        Method::Ode => {
            let tol = Tolerances { rtol: a.rtol, atol: a.atol, ..Tolerances::default() };
            integrate(&ProbabilityState::from_osn(&init), &fam, &grid, &tol)?
        }
    };
    emit(a.out.as_deref(), &trajectory_csv(&traj, Some(&meta)))
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    metadata: Metadata,
    rule: String,
    record: &'a crate::harness::RunRecord,
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let fam = RateFamily::new(&model.params, model.kind)?;
    let seed = a.seed.unwrap_or_else(fresh_seed);
    let init = parse_init(&a.init, model.params.n(), seed)?;
    let spec = CompareSpec {
        paths: a.paths,
        horizon: Horizon { t_end: a.t_end, max_t_end: a.max_t_end, step: a.step },
        rule: ThresholdRule { epsilon: a.epsilon, window: a.window },
        tolerances: Tolerances::default(),
    };
    let cmp = compare_models(&fam, &init, &spec, seed)?;
    if let Some(path) = &a.plot {
        emit_plot_data(&cmp.meanfield, &cmp.ensemble, path)?;
    }
    let mut config = config_json(a);
    config["seed"] = seed.into();
    let out = CompareOutput { metadata: Metadata::new(Some(seed), config), rule: spec.rule.describe(), record: &cmp.record };
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&out).expect("serializable") + "\n"))
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let text = read_text(&a.config)?;
    let config: SweepConfig =
        serde_json::from_str(&text).map_err(|source| Error::Json { path: a.config.clone(), source })?;
    let progress = |row: &crate::harness::SweepRow, took: std::time::Duration| match (&row.record, &row.error) {
        (Some(r), _) => eprintln!(
            "run {}: {} / {} in {:.1}s",
            row.run,
            r.meanfield_outcome.name(),
            r.ensemble_outcome.name(),
            took.as_secs_f64()
        ),
        (None, Some(e)) => eprintln!("run {}: failed: {e}", row.run),
        (None, None) => {}
    };
    let outputs = SweepOutputs { dir: Some(&a.out_dir), plot_dir: a.plot_dir.as_deref(), progress: Some(&progress) };
    let result = sweep(&config, &outputs)?;
    emit(None, &(serde_json::to_string_pretty(&result.summary).expect("serializable") + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_parsing() {
        let s = parse_init("0122", 4, 0).unwrap();
        assert_eq!(s.count(NodeState::Rumor), 1);
        assert_eq!(s.count(NodeState::Truth), 2);
        assert!(parse_init("013", 3, 0).is_err());
        assert!(parse_init("01", 3, 0).is_err());
        assert_eq!(parse_init("random", 5, 4).unwrap(), initial_state_random(5, 4).unwrap());
    }

    #[test]
    fn unknown_flag_is_a_validation_error() {
        assert_eq!(run(["urtu", "analyze", "--bogus"]), 1);
    }
}

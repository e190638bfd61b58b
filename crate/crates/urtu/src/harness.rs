//! Mean-field versus stochastic comparisons and parameter sweeps.
//!
//! A quantity (aggregate rumor or truth fraction) *approaches zero* when it
//! stays below `epsilon` over the final `window` fraction of the horizon.
//! Mean-field runs start at `t_end` and double the horizon, up to
//! `max_t_end`, until the aggregate derivatives over that window fall below
//! `epsilon / 10`; the stochastic ensemble then runs on the same horizon.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use urtu_core::analysis::{spectral_report, Regime, SpectralReport};
use urtu_core::graph::{generate_random, generate_scale_free, generate_small_world};
use urtu_core::meanfield::{integrate, rhs_generic, Tolerances};
use urtu_core::params::SamplingConfig;
use urtu_core::stochastic::{child_seed, initial_state_random, InitPolicy};
use urtu_core::{DirectedNetwork, OsnState, ProbabilityState, RateFamily, RateKind, Trajectory, UrtuParams};

use crate::ensemble::parallel_ensemble;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, plot_data, write_text, Metadata};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    BothZero,
    RumorPersists,
    TruthPersists,
    BothPersist,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::BothZero, Outcome::RumorPersists, Outcome::TruthPersists, Outcome::BothPersist];

    fn from_flags(rumor_zero: bool, truth_zero: bool) -> Self {
        match (rumor_zero, truth_zero) {
            (true, true) => Outcome::BothZero,
            (false, true) => Outcome::RumorPersists,
            (true, false) => Outcome::TruthPersists,
            (false, false) => Outcome::BothPersist,
        }
    }

    pub fn rumor_zero(self) -> bool {
        matches!(self, Outcome::BothZero | Outcome::TruthPersists)
    }

    pub fn truth_zero(self) -> bool {
        matches!(self, Outcome::BothZero | Outcome::RumorPersists)
    }

    pub fn name(self) -> &'static str {
        match self {
            Outcome::BothZero => "BothZero",
            Outcome::RumorPersists => "RumorPersists",
            Outcome::TruthPersists => "TruthPersists",
            Outcome::BothPersist => "BothPersist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub epsilon: f64,
    /// Fraction of the time span, counted back from its end.
    pub window: f64,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        Self { epsilon: 1e-3, window: 0.2 }
    }
}

impl ThresholdRule {
    pub fn describe(&self) -> String {
        format!(
            "a quantity approaches zero iff its aggregate stays below {} over the final {}% of the horizon",
            self.epsilon,
            self.window * 100.0
        )
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.window > 0.0 && self.window <= 1.0) {
            return Err(Error::Invalid(format!(
                "threshold rule needs epsilon > 0 and 0 < window <= 1, got ({}, {})",
                self.epsilon, self.window
            )));
        }
        Ok(())
    }

    /// Index of the first grid point inside the final window.
    fn window_start(&self, times: &[f64]) -> Result<usize> {
        let (first, last) = match (times.first(), times.last()) {
            (Some(&a), Some(&b)) if b > a => (a, b),
            _ => return Err(urtu_core::Error::InsufficientHorizon("trajectory spans no time".into()).into()),
        };
        let from = last - self.window * (last - first);
        let start = times.partition_point(|&t| t < from);
        if times.len() - start < 2 {
            return Err(urtu_core::Error::InsufficientHorizon(format!(
                "fewer than two grid points in the final window [{from}, {last}]"
            ))
            .into());
        }
        Ok(start)
    }
}

pub fn classify_outcome(traj: &Trajectory, rule: &ThresholdRule) -> Result<Outcome> {
    rule.check()?;
    let start = rule.window_start(traj.times())?;
    let (r, t) = traj.aggregate_fractions();
    let below = |x: &[f64]| x[start..].iter().all(|&v| v < rule.epsilon);
    Ok(Outcome::from_flags(below(&r), below(&t)))
}

/// Horizon and output grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub t_end: f64,
    pub max_t_end: f64,
    /// Grid spacing.
    pub step: f64,
}

impl Default for Horizon {
    fn default() -> Self {
        Self { t_end: 200.0, max_t_end: 1600.0, step: 1.0 }
    }
}

impl Horizon {
    fn check(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.step > 0.0 && self.max_t_end >= self.t_end && self.step <= self.t_end) {
            return Err(Error::Invalid(format!(
                "horizon needs 0 < step <= t_end <= max_t_end, got step {}, t_end {}, max {}",
                self.step, self.t_end, self.max_t_end
            )));
        }
        Ok(())
    }

    /// Grid `from, from + step, ...` ending exactly at `to`.
    fn grid(&self, from: f64, to: f64) -> Vec<f64> {
        let points = ((to - from) / self.step).round().max(1.0) as usize;
        (0..=points).map(|k| from + (to - from) * k as f64 / points as f64).collect()
    }
}

/// A mean-field trajectory together with the horizon it was run to.
#[derive(Debug, Clone, PartialEq)]
pub struct SettledRun {
    pub trajectory: Trajectory,
    pub t_end: f64,
    /// Whether the window derivatives fell below `epsilon / 10` before the
    /// horizon cap.
    pub settled: bool,
}

/// Largest aggregate derivative over the final window.
fn window_drift(traj: &Trajectory, fam: &RateFamily<'_>, rule: &ThresholdRule) -> Result<f64> {
    let start = rule.window_start(traj.times())?;
    let n = traj.n() as f64;
    let mut drift: f64 = 0.0;
    for k in start..traj.len() {
        let s = ProbabilityState { r: traj.rumor_at(k).to_vec(), t: traj.truth_at(k).to_vec() };
        let d = rhs_generic(&s, fam)?;
        drift = drift.max((d.dr.iter().sum::<f64>() / n).abs()).max((d.dt.iter().sum::<f64>() / n).abs());
    }
    Ok(drift)
}

/// Integrates to `horizon.t_end`, doubling the horizon until the final
/// window is settled or the cap is reached.
pub fn integrate_settled(
    s0: &ProbabilityState,
    fam: &RateFamily<'_>,
    horizon: &Horizon,
    rule: &ThresholdRule,
    tol: &Tolerances,
) -> Result<SettledRun> {
    horizon.check()?;
    rule.check()?;
    let mut t_end = horizon.t_end;
    let mut traj = integrate(s0, fam, &horizon.grid(0.0, t_end), tol)?;
    loop {
        let settled = window_drift(&traj, fam, rule)? <= rule.epsilon / 10.0;
        if settled || t_end >= horizon.max_t_end {
            return Ok(SettledRun { trajectory: traj, t_end, settled });
        }
        let next = (2.0 * t_end).min(horizon.max_t_end);
        let last = traj.len() - 1;
        let s = ProbabilityState { r: traj.rumor_at(last).to_vec(), t: traj.truth_at(last).to_vec() };
        let grid = horizon.grid(t_end, next);
        let rel: Vec<f64> = grid.iter().map(|t| t - t_end).collect();
        let tail = integrate(&s, fam, &rel, tol)?;
        let mut rumor = Vec::with_capacity(tail.len() * tail.n());
        let mut truth = Vec::with_capacity(tail.len() * tail.n());
        for k in 0..tail.len() {
            rumor.extend_from_slice(tail.rumor_at(k));
            truth.extend_from_slice(tail.truth_at(k));
        }
        traj.extend(&Trajectory::from_parts(tail.n(), grid, rumor, truth)?);
        t_end = next;
    }
}

/// Gaps between two aggregate series on a shared grid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Deviation {
    pub max_r: f64,
    pub max_t: f64,
    pub mean_r: f64,
    pub mean_t: f64,
}

impl Deviation {
    pub fn between(a: &Trajectory, b: &Trajectory) -> Result<Self> {
        if a.times() != b.times() || a.n() != b.n() {
            return Err(Error::Invalid("trajectories use different grids".into()));
        }
        let (ar, at) = a.aggregate_fractions();
        let (br, bt) = b.aggregate_fractions();
        let gaps = |x: &[f64], y: &[f64]| {
            let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| (p - q).abs()).collect();
            (d.iter().cloned().fold(0.0, f64::max), d.iter().sum::<f64>() / d.len() as f64)
        };
        let (max_r, mean_r) = gaps(&ar, &br);
        let (max_t, mean_t) = gaps(&at, &bt);
        Ok(Self { max_r, max_t, mean_r, mean_t })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareSpec {
    pub paths: u64,
    pub horizon: Horizon,
    pub rule: ThresholdRule,
    pub tolerances: Tolerances,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            paths: 10_000,
            horizon: Horizon::default(),
            rule: ThresholdRule::default(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Spectral quantities flattened for tabular output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub s1: f64,
    pub s2: f64,
    pub criteria: [bool; 4],
    pub regime: Regime,
    /// Aggregate of the rumor-dominant equilibrium, when it exists.
    pub rumor_equilibrium: Option<f64>,
    pub truth_equilibrium: Option<f64>,
}

impl From<&SpectralReport> for SpectralSummary {
    fn from(r: &SpectralReport) -> Self {
        let c = r.criteria;
        Self {
            s1: r.s1,
            s2: r.s2,
            criteria: [c.a, c.b, c.c, c.d],
            regime: r.regime,
            rumor_equilibrium: r.rumor_equilibrium.as_ref().map(|e| e.aggregate()),
            truth_equilibrium: r.truth_equilibrium.as_ref().map(|e| e.aggregate()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub params_seed: u64,
    pub init_seed: u64,
    pub ensemble_seed: u64,
    pub spectral: SpectralSummary,
    pub t_end: f64,
    pub settled: bool,
    pub meanfield_outcome: Outcome,
    pub ensemble_outcome: Outcome,
    pub deviation: Deviation,
    /// Final aggregates `(R, T)`.
    pub meanfield_final: (f64, f64),
    pub ensemble_final: (f64, f64),
    /// Wall-clock time; kept out of every serialized artifact so reruns are
    /// byte-identical.
    #[serde(skip)]
    pub runtime: Duration,
}

/// Full result of [`compare_models`].
#[derive(Debug, Clone)]
pub struct Comparison {
    pub record: RunRecord,
    pub report: SpectralReport,
    pub meanfield: Trajectory,
    pub ensemble: Trajectory,
}

/// Runs the mean-field model and a stochastic ensemble from the same hard
/// initial configuration and compares their aggregates.
pub fn compare_models(
    fam: &RateFamily<'_>,
    init: &OsnState,
    spec: &CompareSpec,
    ensemble_seed: u64,
) -> Result<Comparison> {
    let clock = Instant::now();
    let report = spectral_report(fam)?;
    let s0 = ProbabilityState::from_osn(init);
    let settled = integrate_settled(&s0, fam, &spec.horizon, &spec.rule, &spec.tolerances)?;
    let meanfield = settled.trajectory;
    let policy = InitPolicy::Fixed { state: init.clone() };
    let ensemble = parallel_ensemble(fam, &policy, meanfield.times(), spec.paths, ensemble_seed)?;
    let final_of = |traj: &Trajectory| {
        let (r, t) = traj.aggregate_fractions();
        (r[r.len() - 1], t[t.len() - 1])
    };
    let record = RunRecord {
        run: 0,
        params_seed: 0,
        init_seed: 0,
        ensemble_seed,
        spectral: SpectralSummary::from(&report),
        t_end: settled.t_end,
        settled: settled.settled,
        meanfield_outcome: classify_outcome(&meanfield, &spec.rule)?,
        ensemble_outcome: classify_outcome(&ensemble, &spec.rule)?,
        deviation: Deviation::between(&meanfield, &ensemble)?,
        meanfield_final: final_of(&meanfield),
        ensemble_final: final_of(&ensemble),
        runtime: clock.elapsed(),
    };
    Ok(Comparison { record, report, meanfield, ensemble })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    ScaleFree { n: usize, #[serde(default = "default_m")] m: usize },
    SmallWorld { n: usize, #[serde(default = "default_k")] k: usize, #[serde(default = "default_p")] p: f64 },
    Random { n: usize, p: f64 },
}

fn default_m() -> usize {
    3
}

fn default_k() -> usize {
    4
}

fn default_p() -> f64 {
    0.1
}

impl GeneratorSpec {
    pub fn generate(&self, seed: u64) -> Result<DirectedNetwork> {
        Ok(match *self {
            GeneratorSpec::ScaleFree { n, m } => generate_scale_free(n, m, seed)?,
            GeneratorSpec::SmallWorld { n, k, p } => generate_small_world(n, k, p, seed)?,
            GeneratorSpec::Random { n, p } => generate_random(n, p, seed)?,
        })
    }
}

fn default_count() -> usize {
    64
}

fn default_paths() -> u64 {
    10_000
}

/// Sweep configuration file.
///
/// ```json
/// {
///   "generator": {"kind": "scale_free", "n": 100, "m": 3},
///   "sampling": {"beta_u": {"lo": 0.0, "hi": 0.2}},
///   "count": 64,
///   "paths": 2000,
///   "master_seed": 42
/// }
/// ```
///
/// One network, generated from `network_seed` (or a seed derived from
/// `master_seed`), serves as both the rumor and the truth network. Run `k`
/// samples its parameters, its initial configuration and its ensemble from
/// seeds derived from `(master_seed, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub network_seed: Option<u64>,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default = "default_family")]
    pub family: RateKind,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_paths")]
    pub paths: u64,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default)]
    pub rule: ThresholdRule,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub master_seed: u64,
}

fn default_family() -> RateKind {
    RateKind::Linear
}

impl SweepConfig {
    /// Copy with every defaulted field filled in, as recorded in outputs.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.network_seed = Some(self.network_seed());
        out
    }

    pub fn network_seed(&self) -> u64 {
        self.network_seed.unwrap_or_else(|| child_seed(self.master_seed, u64::MAX))
    }

    fn compare_spec(&self) -> CompareSpec {
        CompareSpec { paths: self.paths, horizon: self.horizon, rule: self.rule, tolerances: self.tolerances }
    }
}

/// One sweep row: a record, or the error that stopped the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub run: usize,
    pub params_seed: u64,
    pub init_seed: u64,
    pub ensemble_seed: u64,
    pub record: Option<RunRecord>,
    pub error: Option<String>,
}

fn run_seeds(master: u64, k: usize) -> (u64, u64, u64) {
    let base = 3 * k as u64;
    (child_seed(master, base), child_seed(master, base + 1), child_seed(master, base + 2))
}

fn sweep_run(config: &SweepConfig, net: &DirectedNetwork, k: usize) -> (SweepRow, Option<Comparison>) {
    let (params_seed, init_seed, ensemble_seed) = run_seeds(config.master_seed, k);
    let attempt = || -> Result<Comparison> {
        let p = UrtuParams::sample_random(net, net, &config.sampling, params_seed)?;
        let fam = RateFamily::new(&p, config.family)?;
        let init = initial_state_random(net.n(), init_seed)?;
        let mut cmp = compare_models(&fam, &init, &config.compare_spec(), ensemble_seed)?;
        cmp.record.run = k;
        cmp.record.params_seed = params_seed;
        cmp.record.init_seed = init_seed;
        Ok(cmp)
    };
    match attempt() {
        Ok(cmp) => (
            SweepRow { run: k, params_seed, init_seed, ensemble_seed, record: Some(cmp.record.clone()), error: None },
            Some(cmp),
        ),
        Err(e) => (SweepRow { run: k, params_seed, init_seed, ensemble_seed, record: None, error: Some(e.to_string()) }, None),
    }
}

pub const SWEEP_CSV_HEADER: &str = "run,params_seed,init_seed,ensemble_seed,s1,s2,crit_a,crit_b,crit_c,crit_d,regime,\
rumor_equilibrium,truth_equilibrium,t_end,settled,meanfield_outcome,ensemble_outcome,dev_max_r,dev_max_t,dev_mean_r,\
dev_mean_t,meanfield_final_r,meanfield_final_t,ensemble_final_r,ensemble_final_t,error";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let mut out = format!("{},{},{},{}", self.run, self.params_seed, self.init_seed, self.ensemble_seed);
        match &self.record {
            Some(r) => {
                let s = &r.spectral;
                let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
                let _ = write!(
                    out,
                    ",{},{},{},{},{},{},{:?},{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
                    fmt_f64(s.s1),
                    fmt_f64(s.s2),
                    s.criteria[0],
                    s.criteria[1],
                    s.criteria[2],
                    s.criteria[3],
                    s.regime,
                    opt(s.rumor_equilibrium),
                    opt(s.truth_equilibrium),
                    fmt_f64(r.t_end),
                    r.settled,
                    r.meanfield_outcome.name(),
                    r.ensemble_outcome.name(),
                    fmt_f64(r.deviation.max_r),
                    fmt_f64(r.deviation.max_t),
                    fmt_f64(r.deviation.mean_r),
                    fmt_f64(r.deviation.mean_t),
                    fmt_f64(r.meanfield_final.0),
                    fmt_f64(r.meanfield_final.1),
                    fmt_f64(r.ensemble_final.0),
                    fmt_f64(r.ensemble_final.1),
                );
            }
            None => {
                out.push_str(&",".repeat(21));
                // Quote the message; it may contain commas.
                let msg = self.error.as_deref().unwrap_or("").replace('"', "'");
                let _ = write!(out, ",\"{msg}\"");
            }
        }
        out
    }
}

/// Statistics of one deviation metric over a set of runs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stats {
    pub max: f64,
    pub mean: f64,
}

impl Stats {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionSummary {
    pub outcome: Outcome,
    /// Runs whose ensemble trajectory falls in this collection.
    pub count: usize,
    /// Runs whose mean-field trajectory falls in this collection.
    pub meanfield_count: usize,
    /// Runs where both models agree on this collection.
    pub agreement: usize,
    pub dev_max_r: Option<Stats>,
    pub dev_max_t: Option<Stats>,
    pub dev_mean_r: Option<Stats>,
    pub dev_mean_t: Option<Stats>,
}

/// Worst-case gap for one quantity over the runs whose ensemble sends that
/// quantity to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroDeviation {
    pub runs: usize,
    pub max_abs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub metadata: Metadata,
    pub rule: String,
    pub runs: usize,
    pub errors: usize,
    pub unsettled: usize,
    pub collections: Vec<CollectionSummary>,
    pub regimes: Vec<(Regime, usize)>,
    pub rumor_to_zero: ZeroDeviation,
    pub truth_to_zero: ZeroDeviation,
}

impl SweepSummary {
    pub fn from_rows(config: &SweepConfig, rows: &[SweepRow]) -> Self {
        let records: Vec<&RunRecord> = rows.iter().filter_map(|r| r.record.as_ref()).collect();
        let collections = Outcome::ALL
            .iter()
            .map(|&outcome| {
                let members: Vec<&&RunRecord> = records.iter().filter(|r| r.ensemble_outcome == outcome).collect();
                let stat = |f: fn(&Deviation) -> f64| Stats::of(&members.iter().map(|r| f(&r.deviation)).collect::<Vec<_>>());
                CollectionSummary {
                    outcome,
                    count: members.len(),
                    meanfield_count: records.iter().filter(|r| r.meanfield_outcome == outcome).count(),
                    agreement: members.iter().filter(|r| r.meanfield_outcome == outcome).count(),
                    dev_max_r: stat(|d| d.max_r),
                    dev_max_t: stat(|d| d.max_t),
                    dev_mean_r: stat(|d| d.mean_r),
                    dev_mean_t: stat(|d| d.mean_t),
                }
            })
            .collect();
        let regimes = [Regime::BothExtinct, Regime::RumorDominant, Regime::TruthDominant, Regime::Indeterminate]
            .into_iter()
            .map(|g| (g, records.iter().filter(|r| r.spectral.regime == g).count()))
            .collect();
        let zero = |pick: fn(&RunRecord) -> Option<f64>| {
            let devs: Vec<f64> = records.iter().filter_map(|r| pick(r)).collect();
            ZeroDeviation { runs: devs.len(), max_abs: Stats::of(&devs).map(|s| s.max) }
        };
        Self {
            metadata: Metadata::new(Some(config.master_seed), serde_json::to_value(config.resolved()).expect("serializable")),
            rule: config.rule.describe(),
            runs: rows.len(),
            errors: rows.len() - records.len(),
            unsettled: records.iter().filter(|r| !r.settled).count(),
            collections,
            regimes,
            rumor_to_zero: zero(|r| r.ensemble_outcome.rumor_zero().then_some(r.deviation.max_r)),
            truth_to_zero: zero(|r| r.ensemble_outcome.truth_zero().then_some(r.deviation.max_t)),
        }
    }

    pub fn collection(&self, outcome: Outcome) -> &CollectionSummary {
        self.collections.iter().find(|c| c.outcome == outcome).expect("all outcomes present")
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// Per-run callback receiving the row and its wall-clock time.
pub type Progress<'a> = &'a (dyn Fn(&SweepRow, Duration) + Sync);

/// Output locations for [`sweep`]; every field is optional.
#[derive(Clone, Default)]
pub struct SweepOutputs<'a> {
    /// Directory receiving `sweep.csv` (rewritten after every batch) and
    /// `summary.json`.
    pub dir: Option<&'a Path>,
    /// Directory receiving `run_<k>.txt` plot data per successful run.
    pub plot_dir: Option<&'a Path>,
    /// Called after each run with the row and its wall-clock time.
    pub progress: Option<Progress<'a>>,
}

/// Runs the whole sweep. Runs execute in parallel batches but are emitted
/// in index order, so every output byte is independent of the pool size.
pub fn sweep(config: &SweepConfig, out: &SweepOutputs<'_>) -> Result<SweepResult> {
    config.sampling.check()?;
    let net = config.generator.generate(config.network_seed())?;
    let meta = Metadata::new(Some(config.master_seed), serde_json::to_value(config.resolved()).expect("serializable"));
    let csv_path = out.dir.map(|d| d.join("sweep.csv"));
    let mut csv = meta.comment_lines() + SWEEP_CSV_HEADER + "\n";
    if let Some(path) = &csv_path {
        write_text(path, &csv)?;
    }
    let batch = rayon::current_num_threads().max(1);
    let mut rows = Vec::with_capacity(config.count);
    for first in (0..config.count).step_by(batch) {
        let runs: Vec<usize> = (first..(first + batch).min(config.count)).collect();
        let results: Vec<(SweepRow, Option<Comparison>)> = runs.par_iter().map(|&k| sweep_run(config, &net, k)).collect();
        for (row, cmp) in results {
            csv.push_str(&row.csv_line());
            csv.push('\n');
            if let (Some(dir), Some(cmp)) = (out.plot_dir, &cmp) {
                let text = plot_data(&cmp.meanfield, &cmp.ensemble).map_err(Error::Invalid)?;
                write_text(&dir.join(format!("run_{}.txt", row.run)), &text)?;
            }
            if let Some(progress) = out.progress {
                progress(&row, cmp.as_ref().map_or(Duration::ZERO, |c| c.record.runtime));
            }
            rows.push(row);
        }
        if let Some(path) = &csv_path {
            write_text(path, &csv)?;
        }
    }
    let summary = SweepSummary::from_rows(config, &rows);
    if let Some(dir) = out.dir {
        let json = serde_json::to_string_pretty(&summary).expect("serializable");
        write_text(&dir.join("summary.json"), &(json + "\n"))?;
    }
    Ok(SweepResult { rows, summary })
}

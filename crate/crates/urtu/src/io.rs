//! File formats.
//!
//! * Edge lists: header `n=<count>`, then one `i j` pair per line (0-based,
//!   "`j` sends to `i`"). Lines starting with `#` are comments.
//! * Parameter files: JSON, see [`ParamsFile`].
//! * Trajectories: CSV with header `t,R,T,R_1..R_N,T_1..T_N`.
//! * Events: CSV with header `t,node,new_state`.
//! * Plot data: whitespace-separated `t R_linear T_linear R_exact T_exact`.
//!
//! Every writer that takes a [`Metadata`] prefixes its output with `#`
//! comment lines carrying the tool version, seed and resolved config.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use urtu_core::stochastic::Event;
use urtu_core::{DirectedNetwork, Matrix, RateKind, Trajectory, UrtuParams};

use crate::error::{Error, Result};

/// Provenance attached to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
}

impl Metadata {
    pub fn new(seed: Option<u64>, config: serde_json::Value) -> Self {
        Self { tool: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into(), seed, config }
    }

    /// `# `-prefixed header lines for text formats.
    pub fn comment_lines(&self) -> String {
        let mut out = format!("# {} {}\n", self.tool, self.version);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "# seed: {seed}");
        }
        let _ = writeln!(out, "# config: {}", self.config);
        out
    }
}

/// Shortest decimal text that parses back to the same `f64`, without the
/// long zero runs plain `Display` produces for tiny or huge magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_edges(path: &Path) -> Result<DirectedNetwork> {
    DirectedNetwork::parse_edge_list(&read_text(path)?)
        .map_err(|e| Error::Format { path: path.to_path_buf(), msg: e.to_string() })
}

/// Canonical form: header and sorted arcs, no comments.
pub fn save_edges(net: &DirectedNetwork, path: &Path) -> Result<()> {
    write_text(path, &net.to_edge_list())
}

pub fn save_edges_with_metadata(net: &DirectedNetwork, meta: &Metadata, path: &Path) -> Result<()> {
    write_text(path, &(meta.comment_lines() + &net.to_edge_list()))
}

/// Either a dense row list or a sparse triplet list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Dense(Vec<Vec<f64>>),
    Sparse { triplets: Vec<(usize, usize, f64)> },
}

impl MatrixSpec {
    pub fn to_matrix(&self, n: usize, name: &str) -> std::result::Result<Matrix, String> {
        match self {
            MatrixSpec::Dense(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(format!("{name} must be {n}x{n}"));
                }
                Matrix::from_rows(rows).map_err(|e| format!("{name}: {e}"))
            }
            MatrixSpec::Sparse { triplets } => {
                let mut m = Matrix::zeros(n);
                for &(i, j, v) in triplets {
                    if i >= n || j >= n {
                        return Err(format!("{name}: entry ({i}, {j}) out of range for n = {n}"));
                    }
                    m[(i, j)] = v;
                }
                Ok(m)
            }
        }
    }

    pub fn sparse(m: &Matrix) -> Self {
        MatrixSpec::Sparse { triplets: m.triplets().collect() }
    }
}

fn default_family() -> RateKind {
    RateKind::Linear
}

/// JSON parameter file.
///
/// ```json
/// {
///   "n": 2,
///   "family": {"kind": "saturating", "c": 1.0},
///   "b_u": [[0, 0.5], [0.5, 0]],
///   "b_t": {"triplets": [[0, 1, 0.2], [1, 0, 0.2]]},
///   "c_u": [[0, 0.1], [0.1, 0]],
///   "c_r": [[0, 0.1], [0.1, 0]],
///   "d_r": [0.2, 0.2],
///   "d_t": [1.0, 1.0]
/// }
/// ```
///
/// `family` defaults to linear. The rumor and truth networks default to the
/// supports of `b_u` and `c_u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub n: usize,
    #[serde(default = "default_family")]
    pub family: RateKind,
    pub b_u: MatrixSpec,
    pub b_t: MatrixSpec,
    pub c_u: MatrixSpec,
    pub c_r: MatrixSpec,
    pub d_r: Vec<f64>,
    pub d_t: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ParamsFile {
    pub fn from_params(p: &UrtuParams, family: RateKind) -> Self {
        Self {
            n: p.n(),
            family,
            b_u: MatrixSpec::sparse(&p.b_u),
            b_t: MatrixSpec::sparse(&p.b_t),
            c_u: MatrixSpec::sparse(&p.c_u),
            c_r: MatrixSpec::sparse(&p.c_r),
            d_r: p.d_r.clone(),
            d_t: p.d_t.clone(),
            seed: None,
        }
    }

    pub fn to_params(&self) -> std::result::Result<UrtuParams, String> {
        let n = self.n;
        for (name, v) in [("d_r", &self.d_r), ("d_t", &self.d_t)] {
            if v.len() != n {
                return Err(format!("{name} has {} entries, expected {n}", v.len()));
            }
        }
        Ok(UrtuParams {
            b_u: self.b_u.to_matrix(n, "b_u")?,
            b_t: self.b_t.to_matrix(n, "b_t")?,
            c_u: self.c_u.to_matrix(n, "c_u")?,
            c_r: self.c_r.to_matrix(n, "c_r")?,
            d_r: self.d_r.clone(),
            d_t: self.d_t.clone(),
        })
    }
}

pub fn load_params(path: &Path) -> Result<(UrtuParams, RateKind)> {
    let text = read_text(path)?;
    let file: ParamsFile = serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })?;
    let params = file.to_params().map_err(|msg| Error::Format { path: path.into(), msg })?;
    Ok((params, file.family))
}

pub fn save_params(p: &UrtuParams, family: RateKind, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&ParamsFile::from_params(p, family)).expect("serializable");
    write_text(path, &(json + "\n"))
}

/// Network whose arcs are the nonzero entries of `m`.
pub fn support_network(m: &Matrix) -> Result<DirectedNetwork> {
    Ok(DirectedNetwork::new(m.n(), m.triplets().filter(|&(_, _, v)| v != 0.0).map(|(i, j, _)| (i, j)))?)
}

pub fn trajectory_csv(traj: &Trajectory, meta: Option<&Metadata>) -> String {
    let n = traj.n();
    let mut out = meta.map(Metadata::comment_lines).unwrap_or_default();
    out.push_str("t,R,T");
    for prefix in ["R", "T"] {
        for i in 1..=n {
            let _ = write!(out, ",{prefix}_{i}");
        }
    }
    out.push('\n');
    let (agg_r, agg_t) = traj.aggregate_fractions();
    for (k, &t) in traj.times().iter().enumerate() {
        out.push_str(&fmt_f64(t));
        for v in [agg_r[k], agg_t[k]].iter().chain(traj.rumor_at(k)).chain(traj.truth_at(k)) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(traj: &Trajectory, meta: &Metadata, path: &Path) -> Result<()> {
    write_text(path, &trajectory_csv(traj, Some(meta)))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses a trajectory CSV; aggregate columns are recomputed, not trusted.
pub fn parse_trajectory_csv(text: &str) -> std::result::Result<Trajectory, String> {
    let mut lines = data_lines(text);
    let (_, header) = lines.next().ok_or("missing header")?;
    let cols = header.split(',').count();
    if cols < 5 || (cols - 3) % 2 != 0 || !header.starts_with("t,R,T") {
        return Err(format!("unexpected header {header:?}"));
    }
    let n = (cols - 3) / 2;
    let (mut times, mut rumor, mut truth) = (Vec::new(), Vec::new(), Vec::new());
    for (line, row) in lines {
        let values = row
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format!("line {line}: {e}"))?;
        if values.len() != cols {
            return Err(format!("line {line}: expected {cols} columns, found {}", values.len()));
        }
        times.push(values[0]);
        rumor.extend_from_slice(&values[3..3 + n]);
        truth.extend_from_slice(&values[3 + n..]);
    }
    Trajectory::from_parts(n, times, rumor, truth).map_err(|e| e.to_string())
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    parse_trajectory_csv(&read_text(path)?).map_err(|msg| Error::Format { path: path.into(), msg })
}

pub fn events_csv(events: &[Event], meta: Option<&Metadata>) -> String {
    let mut out = meta.map(Metadata::comment_lines).unwrap_or_default();
    out.push_str("t,node,new_state\n");
    for e in events {
        let _ = writeln!(out, "{},{},{}", fmt_f64(e.t), e.node, e.new_state.digit());
    }
    out
}

/// Plot columns for a linear-model trajectory against an exact one on the
/// same grid.
pub fn plot_data(linear: &Trajectory, exact: &Trajectory) -> std::result::Result<String, String> {
    if linear.times() != exact.times() {
        return Err("linear and exact trajectories use different grids".into());
    }
    let (lr, lt) = linear.aggregate_fractions();
    let (er, et) = exact.aggregate_fractions();
    let mut out = String::from("t R_linear T_linear R_exact T_exact\n");
    for (k, &t) in linear.times().iter().enumerate() {
        let row = [t, lr[k], lt[k], er[k], et[k]].map(fmt_f64);
        let _ = writeln!(out, "{}", row.join(" "));
    }
    Ok(out)
}

pub fn emit_plot_data(linear: &Trajectory, exact: &Trajectory, path: &Path) -> Result<()> {
    let text = plot_data(linear, exact).map_err(Error::Invalid)?;
    write_text(path, &text)
}

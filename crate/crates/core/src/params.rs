//! Per-contact spreading rates and per-node forgetting rates.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_permutation, DirectedNetwork};
use crate::linalg::Matrix;

/// Rate parameters of the model.
///
/// `b_u[(i, j)]`: uncertain `i` adopts the rumor from rumor-believer `j`.
/// `b_t[(i, j)]`: truth-believer `i` switches to the rumor from `j`.
/// `c_u[(i, j)]`: uncertain `i` adopts the truth from truth-believer `j`.
/// `c_r[(i, j)]`: rumor-believer `i` switches to the truth from `j`.
/// `d_r[i]`, `d_t[i]`: rates at which `i` forgets the rumor / the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrtuParams {
    pub b_u: Matrix,
    pub b_t: Matrix,
    pub c_u: Matrix,
    pub c_r: Matrix,
    pub d_r: Vec<f64>,
    pub d_t: Vec<f64>,
}

impl UrtuParams {
    pub fn n(&self) -> usize {
        self.d_r.len()
    }

    /// Every arc of a matrix's network gets the same scalar; forgetting rates
    /// are uniform across nodes.
    #[allow(clippy::too_many_arguments)]
    pub fn homogeneous(
        gr: &DirectedNetwork,
        gt: &DirectedNetwork,
        beta_u: f64,
        beta_t: f64,
        gamma_u: f64,
        gamma_r: f64,
        delta_r: f64,
        delta_t: f64,
    ) -> Result<Self> {
        if gr.n() != gt.n() {
            return Err(Error::InvalidDimensions { expected: gr.n(), found: gt.n() });
        }
        let n = gr.n();
        Ok(Self {
            b_u: fill_arcs(gr, beta_u),
            b_t: fill_arcs(gr, beta_t),
            c_u: fill_arcs(gt, gamma_u),
            c_r: fill_arcs(gt, gamma_r),
            d_r: vec![delta_r; n],
            d_t: vec![delta_t; n],
        })
    }

    /// Exchanges the roles of rumor and truth.
    pub fn swapped(&self) -> Self {
        Self {
            b_u: self.c_u.clone(),
            b_t: self.c_r.clone(),
            c_u: self.b_u.clone(),
            c_r: self.b_t.clone(),
            d_r: self.d_t.clone(),
            d_t: self.d_r.clone(),
        }
    }

    /// Node `k` moves to position `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n())?;
        let permute = |v: &[f64]| {
            let mut out = vec![0.0; v.len()];
            for (k, &x) in v.iter().enumerate() {
                out[perm[k]] = x;
            }
            out
        };
        Ok(Self {
            b_u: self.b_u.permuted(perm),
            b_t: self.b_t.permuted(perm),
            c_u: self.c_u.permuted(perm),
            c_r: self.c_r.permuted(perm),
            d_r: permute(&self.d_r),
            d_t: permute(&self.d_t),
        })
    }

    /// Checks the support, ordering and positivity constraints against the
    /// rumor network `gr` and truth network `gt`.
    pub fn validate(&self, gr: &DirectedNetwork, gt: &DirectedNetwork) -> Result<ValidationReport> {
        let n = gr.n();
        for found in [
            gt.n(),
            self.b_u.n(),
            self.b_t.n(),
            self.c_u.n(),
            self.c_r.n(),
            self.d_r.len(),
            self.d_t.len(),
        ] {
            if found != n {
                return Err(Error::InvalidDimensions { expected: n, found });
            }
        }
        let mut report = ValidationReport::default();
        let mut support = |m: &Matrix, which: RateMatrix, net: &DirectedNetwork| {
            for i in 0..n {
                for j in 0..n {
                    let v = m[(i, j)];
                    let on_arc = net.contains(i, j);
                    let kind = if !v.is_finite() || v < 0.0 {
                        Some(Constraint::NegativeOrNonFinite(which))
                    } else if v > 0.0 && !on_arc {
                        Some(Constraint::SupportOutsideNetwork(which))
                    } else if v == 0.0 && on_arc {
                        Some(Constraint::ZeroOnArc(which))
                    } else {
                        None
                    };
                    if let Some(constraint) = kind {
                        report.violations.push(Violation { constraint, i, j: Some(j) });
                    }
                }
            }
        };
        support(&self.b_u, RateMatrix::BU, gr);
        support(&self.b_t, RateMatrix::BT, gr);
        support(&self.c_u, RateMatrix::CU, gt);
        support(&self.c_r, RateMatrix::CR, gt);
        for i in 0..n {
            for j in 0..n {
                if self.b_t[(i, j)] > self.b_u[(i, j)] {
                    report.violations.push(Violation { constraint: Constraint::RumorOrdering, i, j: Some(j) });
                }
                if self.c_r[(i, j)] > self.c_u[(i, j)] {
                    report.violations.push(Violation { constraint: Constraint::TruthOrdering, i, j: Some(j) });
                }
            }
            // Negated comparison also rejects NaN.
            if !(self.d_r[i] > 0.0 && self.d_r[i].is_finite()) {
                report.violations.push(Violation { constraint: Constraint::RumorForgetting, i, j: None });
            }
            if !(self.d_t[i] > 0.0 && self.d_t[i].is_finite()) {
                report.violations.push(Violation { constraint: Constraint::TruthForgetting, i, j: None });
            }
        }
        Ok(report)
    }

    /// Random parameters conforming to both networks.
    ///
    /// `b_t = r * b_u` and `c_r = r' * c_u` with independent multipliers in
    /// `(0, 1)`, so the ordering constraints hold by construction.
    pub fn sample_random(
        gr: &DirectedNetwork,
        gt: &DirectedNetwork,
        config: &SamplingConfig,
        seed: u64,
    ) -> Result<Self> {
        config.check()?;
        if gr.n() != gt.n() {
            return Err(Error::InvalidDimensions { expected: gr.n(), found: gt.n() });
        }
        let n = gr.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if config.homogeneous {
            let beta_u = config.beta_u.sample(&mut rng);
            let beta_t = beta_u * open_unit(&mut rng);
            let gamma_u = config.gamma_u.sample(&mut rng);
            let gamma_r = gamma_u * open_unit(&mut rng);
            let delta_r = config.delta_r.sample(&mut rng);
            let delta_t = config.delta_t.sample(&mut rng);
            return Self::homogeneous(gr, gt, beta_u, beta_t, gamma_u, gamma_r, delta_r, delta_t);
        }
        let pair = |net: &DirectedNetwork, range: &UniformRange, rng: &mut ChaCha8Rng| {
            let mut upper = Matrix::zeros(n);
            let mut lower = Matrix::zeros(n);
            for &(i, j) in net.arcs() {
                let v = range.sample(rng);
                upper[(i, j)] = v;
                lower[(i, j)] = v * open_unit(rng);
            }
            (upper, lower)
        };
        let (b_u, b_t) = pair(gr, &config.beta_u, &mut rng);
        let (c_u, c_r) = pair(gt, &config.gamma_u, &mut rng);
        let d_r = (0..n).map(|_| config.delta_r.sample(&mut rng)).collect();
        let d_t = (0..n).map(|_| config.delta_t.sample(&mut rng)).collect();
        Ok(Self { b_u, b_t, c_u, c_r, d_r, d_t })
    }
}

fn fill_arcs(net: &DirectedNetwork, value: f64) -> Matrix {
    let mut m = Matrix::zeros(net.n());
    for &(i, j) in net.arcs() {
        m[(i, j)] = value;
    }
    m
}

/// Uniform draw from the open interval `(0, 1)`.
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Open interval `(lo, hi)` with `0 <= lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let v = self.lo + (self.hi - self.lo) * open_unit(rng);
            if v > self.lo && v < self.hi {
                return v;
            }
        }
    }
}

/// Ranges for [`UrtuParams::sample_random`]. Missing fields deserialize to
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub beta_u: UniformRange,
    pub gamma_u: UniformRange,
    pub delta_r: UniformRange,
    pub delta_t: UniformRange,
    /// One scalar per matrix instead of one value per arc.
    pub homogeneous: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            beta_u: UniformRange::new(0.0, 1.0),
            gamma_u: UniformRange::new(0.0, 1.0),
            delta_r: UniformRange::new(0.1, 1.0),
            delta_t: UniformRange::new(0.1, 1.0),
            homogeneous: true,
        }
    }
}

impl SamplingConfig {
    pub fn check(&self) -> Result<()> {
        for (name, r) in [
            ("beta_u", self.beta_u),
            ("gamma_u", self.gamma_u),
            ("delta_r", self.delta_r),
            ("delta_t", self.delta_t),
        ] {
            if !(r.lo >= 0.0 && r.hi > r.lo && r.hi.is_finite()) {
                return Err(Error::InvalidParameters(format!(
                    "range {name} = ({}, {}) must satisfy 0 <= lo < hi",
                    r.lo, r.hi
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateMatrix {
    BU,
    BT,
    CU,
    CR,
}

impl RateMatrix {
    pub fn name(self) -> &'static str {
        match self {
            RateMatrix::BU => "B_U",
            RateMatrix::BT => "B_T",
            RateMatrix::CU => "C_U",
            RateMatrix::CR => "C_R",
        }
    }

    fn network(self) -> &'static str {
        match self {
            RateMatrix::BU | RateMatrix::BT => "E_R",
            RateMatrix::CU | RateMatrix::CR => "E_T",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    SupportOutsideNetwork(RateMatrix),
    ZeroOnArc(RateMatrix),
    NegativeOrNonFinite(RateMatrix),
    RumorOrdering,
    TruthOrdering,
    RumorForgetting,
    TruthForgetting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub i: usize,
    pub j: Option<usize>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = match self.j {
            Some(j) => format!("({}, {})", self.i, j),
            None => format!("{}", self.i),
        };
        match self.constraint {
            Constraint::SupportOutsideNetwork(m) => {
                write!(f, "support({}) ⊄ {} at {at}", m.name(), m.network())
            }
            Constraint::ZeroOnArc(m) => write!(f, "{} is zero on arc {at} of {}", m.name(), m.network()),
            Constraint::NegativeOrNonFinite(m) => write!(f, "{} negative or non-finite at {at}", m.name()),
            Constraint::RumorOrdering => write!(f, "B_T > B_U at {at}"),
            Constraint::TruthOrdering => write!(f, "C_R > C_U at {at}"),
            Constraint::RumorForgetting => write!(f, "D_R not positive at {at}"),
            Constraint::TruthForgetting => write!(f, "D_T not positive at {at}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(|v| format!("{v}")).collect()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let mut msg = String::new();
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                msg.push_str("; ");
            }
            msg.push_str(&format!("{v}"));
        }
        Err(Error::InvalidParameters(msg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring2() -> DirectedNetwork {
        DirectedNetwork::ring(2).unwrap()
    }

    fn conforming() -> UrtuParams {
        UrtuParams::homogeneous(&ring2(), &ring2(), 0.5, 0.2, 0.4, 0.1, 1.0, 0.8).unwrap()
    }

    #[test]
    fn conforming_parameters_pass() {
        assert!(conforming().validate(&ring2(), &ring2()).unwrap().is_ok());
    }

    #[test]
    fn support_violation_reported() {
        let gr = DirectedNetwork::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let mut p = UrtuParams::homogeneous(&gr, &gr, 0.5, 0.2, 0.4, 0.1, 1.0, 1.0).unwrap();
        p.b_u[(0, 2)] = 0.3;
        let report = p.validate(&gr, &gr).unwrap();
        assert_eq!(report.messages(), ["support(B_U) ⊄ E_R at (0, 2)"]);
    }

    #[test]
    fn ordering_violation_reported() {
        let mut p = conforming();
        p.b_t[(1, 0)] = 0.9;
        let report = p.validate(&ring2(), &ring2()).unwrap();
        assert_eq!(report.messages(), ["B_T > B_U at (1, 0)"]);
        assert!(report.into_result().is_err());
    }

    #[test]
    fn forgetting_must_be_positive() {
        let mut p = conforming();
        p.d_t[0] = 0.0;
        let report = p.validate(&ring2(), &ring2()).unwrap();
        assert_eq!(report.violations[0].constraint, Constraint::TruthForgetting);
    }

    #[test]
    fn dimension_mismatch() {
        let p = conforming();
        let g3 = DirectedNetwork::ring(3).unwrap();
        assert!(matches!(p.validate(&g3, &g3), Err(Error::InvalidDimensions { .. })));
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        let g = DirectedNetwork::ring(6).unwrap();
        for homogeneous in [true, false] {
            let cfg = SamplingConfig { homogeneous, ..SamplingConfig::default() };
            let a = UrtuParams::sample_random(&g, &g, &cfg, 99).unwrap();
            let b = UrtuParams::sample_random(&g, &g, &cfg, 99).unwrap();
            assert_eq!(a, b);
            assert!(a.validate(&g, &g).unwrap().is_ok());
        }
    }

    #[test]
    fn sampling_rejects_empty_range() {
        let g = DirectedNetwork::ring(3).unwrap();
        let cfg = SamplingConfig { delta_r: UniformRange::new(0.5, 0.5), ..SamplingConfig::default() };
        assert!(matches!(
            UrtuParams::sample_random(&g, &g, &cfg, 1),
            Err(Error::InvalidParameters(_))
        ));
        let cfg = SamplingConfig { beta_u: UniformRange::new(-1.0, 1.0), ..SamplingConfig::default() };
        assert!(UrtuParams::sample_random(&g, &g, &cfg, 1).is_err());
    }

    #[test]
    fn swap_is_involution() {
        let p = conforming();
        assert_eq!(p.swapped().swapped(), p);
        assert_eq!(p.swapped().b_u, p.c_u);
    }
}

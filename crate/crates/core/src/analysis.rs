//! Threshold analysis at the rumor-free, truth-free origin.
//!
//! `Q1 = ∂fU(0) - diag(d_r)` and `Q2 = ∂gU(0) - diag(d_t)` are irreducible
//! Metzler matrices whose spectral abscissas decide the long-run regime:
//!
//! | `s(Q1)` | `s(Q2)` | regime          |
//! |---------|---------|-----------------|
//! | `<= 0`  | `<= 0`  | both go extinct |
//! | `> 0`   | `<= 0`  | rumor dominates |
//! | `<= 0`  | `> 0`   | truth dominates |
//! | `> 0`   | `> 0`   | no prediction   |
//!
//! A positive abscissa also guarantees a unique dominant equilibrium, the
//! positive fixed point of `H_i(x) = f_i(x) / (delta_i + f_i(x))`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_abscissa, spectral_radius, Matrix};
use crate::meanfield::{rhs_generic, ProbabilityState};
use crate::rates::{Rate, RateFamily};

pub const FIXED_POINT_STEP_TOLERANCE: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    BothExtinct,
    RumorDominant,
    TruthDominant,
    Indeterminate,
}

/// Sufficient conditions for extinction of both rumor and truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtinctionCriteria {
    /// `ρ(Q1 D_R^{-1} + I) < 1` and `ρ(Q2 D_T^{-1} + I) < 1`.
    pub a: bool,
    /// `ρ(B_U D_R^{-1}) < 1` and `ρ(C_U D_T^{-1}) < 1`.
    pub b: bool,
    /// Column sums of `B_U`, `C_U` below the matching forgetting rate.
    pub c: bool,
    /// Row sums of `B_U D_R^{-1}`, `C_U D_T^{-1}` below one.
    pub d: bool,
}

impl ExtinctionCriteria {
    pub fn any(&self) -> bool {
        self.a || self.b || self.c || self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    RumorDominant,
    TruthDominant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub kind: EquilibriumKind,
    /// `R*` for the rumor-dominant kind, `T*` for the truth-dominant kind.
    pub point: Vec<f64>,
    /// Sup-norm of the mean-field vector field at the embedded state.
    pub residual: f64,
    /// `‖H(x) - x‖_∞` at the returned point.
    pub fixed_point_residual: f64,
    pub iterations: usize,
}

impl EquilibriumResult {
    /// The full `(R, T)` state the equilibrium corresponds to.
    pub fn state(&self) -> ProbabilityState {
        let zero = vec![0.0; self.point.len()];
        match self.kind {
            EquilibriumKind::RumorDominant => ProbabilityState { r: self.point.clone(), t: zero },
            EquilibriumKind::TruthDominant => ProbabilityState { r: zero, t: self.point.clone() },
        }
    }

    pub fn aggregate(&self) -> f64 {
        self.point.iter().sum::<f64>() / self.point.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub s1: f64,
    pub s2: f64,
    pub criteria: ExtinctionCriteria,
    pub regime: Regime,
    pub rumor_equilibrium: Option<EquilibriumResult>,
    pub truth_equilibrium: Option<EquilibriumResult>,
}

/// Linearizations at the origin.
pub fn build_q(fam: &RateFamily<'_>) -> (Matrix, Matrix) {
    let p = fam.params();
    let neg = |d: &[f64]| d.iter().map(|v| -v).collect::<Vec<_>>();
    let q1 = fam.jacobian_at_zero(Rate::FU).add_diagonal(&neg(&p.d_r));
    let q2 = fam.jacobian_at_zero(Rate::GU).add_diagonal(&neg(&p.d_t));
    (q1, q2)
}

pub fn classify_regime(s1: f64, s2: f64) -> Regime {
    match (s1 > 0.0, s2 > 0.0) {
        (false, false) => Regime::BothExtinct,
        (true, false) => Regime::RumorDominant,
        (false, true) => Regime::TruthDominant,
        (true, true) => Regime::Indeterminate,
    }
}

pub fn corollary_criteria(fam: &RateFamily<'_>) -> Result<ExtinctionCriteria> {
    let p = fam.params();
    let n = p.n();
    let (q1, q2) = build_q(fam);
    let ones = vec![1.0; n];
    let a = spectral_radius(&q1.div_columns(&p.d_r).add_diagonal(&ones))? < 1.0
        && spectral_radius(&q2.div_columns(&p.d_t).add_diagonal(&ones))? < 1.0;
    let b = spectral_radius(&p.b_u.div_columns(&p.d_r))? < 1.0
        && spectral_radius(&p.c_u.div_columns(&p.d_t))? < 1.0;
    let column_ok = |m: &Matrix, d: &[f64]| (0..n).all(|j| (0..n).map(|i| m[(i, j)]).sum::<f64>() < d[j]);
    let c = column_ok(&p.b_u, &p.d_r) && column_ok(&p.c_u, &p.d_t);
    let row_ok = |m: &Matrix, d: &[f64]| (0..n).all(|i| (0..n).map(|j| m[(i, j)] / d[j]).sum::<f64>() < 1.0);
    let d = row_ok(&p.b_u, &p.d_r) && row_ok(&p.c_u, &p.d_t);
    Ok(ExtinctionCriteria { a, b, c, d })
}

fn equilibrium_pieces<'p>(fam: &RateFamily<'p>, kind: EquilibriumKind) -> (Rate, &'p [f64]) {
    let p = fam.params();
    match kind {
        EquilibriumKind::RumorDominant => (Rate::FU, &p.d_r),
        EquilibriumKind::TruthDominant => (Rate::GU, &p.d_t),
    }
}

/// `H(x)` for the requested equilibrium kind.
pub fn fixed_point_map(fam: &RateFamily<'_>, kind: EquilibriumKind, x: &[f64], out: &mut [f64]) {
    let (rate, delta) = equilibrium_pieces(fam, kind);
    fam.eval_into(rate, x, out);
    for (o, &d) in out.iter_mut().zip(delta) {
        *o /= d + *o;
    }
}

/// Iterates `x <- H(x)` from `start` until the sup-norm step drops below
/// [`FIXED_POINT_STEP_TOLERANCE`]. Returns the point and iteration count.
pub fn fixed_point_iteration(
    fam: &RateFamily<'_>,
    kind: EquilibriumKind,
    start: &[f64],
) -> Result<(Vec<f64>, usize)> {
    let mut x = start.to_vec();
    let mut next = vec![0.0; x.len()];
    for iter in 1..=FIXED_POINT_MAX_ITERATIONS {
        fixed_point_map(fam, kind, &x, &mut next);
        let step = x.iter().zip(&next).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max);
        core::mem::swap(&mut x, &mut next);
        if step < FIXED_POINT_STEP_TOLERANCE {
            return Ok((x, iter));
        }
    }
    Err(Error::Numeric(alloc::format!(
        "fixed-point iteration did not settle in {FIXED_POINT_MAX_ITERATIONS} iterations"
    )))
}

/// Unique dominant equilibrium, reached from the all-ones supersolution.
pub fn dominant_equilibrium(fam: &RateFamily<'_>, kind: EquilibriumKind) -> Result<EquilibriumResult> {
    let (q1, q2) = build_q(fam);
    let abscissa = match kind {
        EquilibriumKind::RumorDominant => spectral_abscissa(&q1)?,
        EquilibriumKind::TruthDominant => spectral_abscissa(&q2)?,
    };
    if !(abscissa > 0.0) {
        return Err(Error::NoPositiveEquilibrium { abscissa });
    }
    equilibrium_from(fam, kind)
}

fn equilibrium_from(fam: &RateFamily<'_>, kind: EquilibriumKind) -> Result<EquilibriumResult> {
    let n = fam.params().n();
    let (point, iterations) = fixed_point_iteration(fam, kind, &vec![1.0; n])?;
    let mut image = vec![0.0; n];
    fixed_point_map(fam, kind, &point, &mut image);
    let fixed_point_residual = point.iter().zip(&image).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max);
    let mut result = EquilibriumResult { kind, point, residual: 0.0, fixed_point_residual, iterations };
    result.residual = rhs_generic(&result.state(), fam)?.sup_norm();
    Ok(result)
}

/// Abscissas, extinction criteria, regime, and every dominant equilibrium
/// whose existence the abscissas guarantee.
pub fn spectral_report(fam: &RateFamily<'_>) -> Result<SpectralReport> {
    let (q1, q2) = build_q(fam);
    let s1 = spectral_abscissa(&q1)?;
    let s2 = spectral_abscissa(&q2)?;
    let criteria = corollary_criteria(fam)?;
    let rumor_equilibrium = if s1 > 0.0 { Some(equilibrium_from(fam, EquilibriumKind::RumorDominant)?) } else { None };
    let truth_equilibrium = if s2 > 0.0 { Some(equilibrium_from(fam, EquilibriumKind::TruthDominant)?) } else { None };
    Ok(SpectralReport { s1, s2, criteria, regime: classify_regime(s1, s2), rumor_equilibrium, truth_equilibrium })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedNetwork;
    use crate::params::UrtuParams;

    fn ring2(beta: f64, delta: f64) -> UrtuParams {
        let g = DirectedNetwork::ring(2).unwrap();
        UrtuParams::homogeneous(&g, &g, beta, beta * 0.5, beta, beta * 0.5, delta, delta).unwrap()
    }

    #[test]
    fn q_for_two_node_ring() {
        let p = ring2(0.5, 0.2);
        let (q1, _) = build_q(&RateFamily::linear(&p));
        assert_eq!(q1.rows(), [vec![-0.2, 0.5], vec![0.5, -0.2]]);
        assert!(q1.is_metzler());
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(-0.3, -0.1), Regime::BothExtinct);
        assert_eq!(classify_regime(0.4, -0.1), Regime::RumorDominant);
        assert_eq!(classify_regime(-0.4, 0.1), Regime::TruthDominant);
        assert_eq!(classify_regime(0.4, 0.2), Regime::Indeterminate);
        assert_eq!(classify_regime(0.0, 0.0), Regime::BothExtinct);
    }

    #[test]
    fn criteria_two_node() {
        let low = corollary_criteria(&RateFamily::linear(&ring2(0.1, 1.0))).unwrap();
        assert_eq!(low, ExtinctionCriteria { a: true, b: true, c: true, d: true });
        let high = corollary_criteria(&RateFamily::linear(&ring2(2.0, 1.0))).unwrap();
        assert_eq!(high, ExtinctionCriteria { a: false, b: false, c: false, d: false });
    }

    #[test]
    fn two_node_equilibrium_closed_form() {
        let p = ring2(0.5, 0.2);
        let eq = dominant_equilibrium(&RateFamily::linear(&p), EquilibriumKind::RumorDominant).unwrap();
        for v in &eq.point {
            assert!((v - 0.6).abs() < 1e-8);
        }
        assert!(eq.fixed_point_residual < 1e-11);
        assert!(eq.residual < 1e-8);
    }

    #[test]
    fn subcritical_has_no_equilibrium() {
        let p = ring2(0.1, 1.0);
        assert!(matches!(
            dominant_equilibrium(&RateFamily::linear(&p), EquilibriumKind::TruthDominant),
            Err(Error::NoPositiveEquilibrium { .. })
        ));
    }

    #[test]
    fn report_fills_equilibria() {
        let p = ring2(0.5, 0.2);
        let report = spectral_report(&RateFamily::linear(&p)).unwrap();
        assert_eq!(report.regime, Regime::Indeterminate);
        assert!(report.rumor_equilibrium.is_some() && report.truth_equilibrium.is_some());
        assert!((report.s1 - 0.3).abs() < 1e-9);
    }
}

//! Node-level mean-field equations and their integration inside
//! `Ω = {R, T >= 0, R_i + T_i <= 1}`.
//!
//! ```text
//! dR_i/dt = (1 - R_i - T_i) fU_i(R) - d_r[i] R_i + T_i fT_i(R) - R_i gR_i(T)
//! dT_i/dt = (1 - R_i - T_i) gU_i(T) - d_t[i] T_i + R_i gR_i(T) - T_i fT_i(R)
//! ```

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Csr;
use crate::params::UrtuParams;
use crate::rates::{Rate, RateFamily};
use crate::stochastic::{check_grid, NodeState, OsnState};
use crate::trajectory::Trajectory;

/// Components in `(-CLAMP_TOLERANCE, 0)` are snapped to zero; pairs whose sum
/// exceeds one by less than this are rescaled onto the boundary.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// Point of `Ω`: rumor and truth marginals per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityState {
    pub r: Vec<f64>,
    pub t: Vec<f64>,
}

impl ProbabilityState {
    pub fn zero(n: usize) -> Self {
        Self { r: vec![0.0; n], t: vec![0.0; n] }
    }

    /// Indicator marginals of a hard configuration.
    pub fn from_osn(state: &OsnState) -> Self {
        let (r, t) = state.indicators();
        Self { r, t }
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn check_omega(&self) -> Result<()> {
        if self.t.len() != self.r.len() {
            return Err(Error::InvalidDimensions { expected: self.r.len(), found: self.t.len() });
        }
        for (i, (&r, &t)) in self.r.iter().zip(&self.t).enumerate() {
            if !(r >= 0.0 && t >= 0.0 && r + t <= 1.0) {
                return Err(Error::Domain(format!("node {i}: (R, T) = ({r}, {t}) outside Ω")));
            }
        }
        Ok(())
    }

    pub fn swapped(&self) -> Self {
        Self { r: self.t.clone(), t: self.r.clone() }
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.r
            .iter()
            .zip(&other.r)
            .chain(self.t.iter().zip(&other.t))
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }
}

/// Derivative pair `(dR/dt, dT/dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dr: Vec<f64>,
    pub dt: Vec<f64>,
}

impl Derivative {
    pub fn sup_norm(&self) -> f64 {
        self.dr.iter().chain(&self.dt).map(|v| libm::fabs(*v)).fold(0.0, f64::max)
    }
}

fn check_dims(s: &ProbabilityState, n: usize) -> Result<()> {
    if s.n() != n {
        return Err(Error::InvalidDimensions { expected: n, found: s.n() });
    }
    s.check_omega()
}

/// Right-hand side for any rate family.
pub fn rhs_generic(s: &ProbabilityState, fam: &RateFamily<'_>) -> Result<Derivative> {
    let n = fam.params().n();
    check_dims(s, n)?;
    let mut y = Vec::with_capacity(2 * n);
    y.extend_from_slice(&s.r);
    y.extend_from_slice(&s.t);
    let mut dy = vec![0.0; 2 * n];
    let mut scratch = RhsScratch::new(n);
    generic_field(fam, &y, &mut dy, &mut scratch);
    let dt = dy.split_off(n);
    Ok(Derivative { dr: dy, dt })
}

/// Right-hand side for linear rates, evaluated with direct sparse
/// matrix-vector products.
pub fn rhs_linear(s: &ProbabilityState, params: &UrtuParams) -> Result<Derivative> {
    LinearField::new(params).rhs(s)
}

struct RhsScratch {
    fu: Vec<f64>,
    ft: Vec<f64>,
    gu: Vec<f64>,
    gr: Vec<f64>,
}

impl RhsScratch {
    fn new(n: usize) -> Self {
        Self { fu: vec![0.0; n], ft: vec![0.0; n], gu: vec![0.0; n], gr: vec![0.0; n] }
    }
}

/// `y = [R; T]`, `dy` receives `[dR; dT]`.
fn generic_field(fam: &RateFamily<'_>, y: &[f64], dy: &mut [f64], s: &mut RhsScratch) {
    let n = y.len() / 2;
    let (r, t) = y.split_at(n);
    fam.eval_into(Rate::FU, r, &mut s.fu);
    fam.eval_into(Rate::FT, r, &mut s.ft);
    fam.eval_into(Rate::GU, t, &mut s.gu);
    fam.eval_into(Rate::GR, t, &mut s.gr);
    let p = fam.params();
    let (dr, dt) = dy.split_at_mut(n);
    for i in 0..n {
        let u = 1.0 - r[i] - t[i];
        dr[i] = u * s.fu[i] - p.d_r[i] * r[i] + t[i] * s.ft[i] - r[i] * s.gr[i];
        dt[i] = u * s.gu[i] - p.d_t[i] * t[i] + r[i] * s.gr[i] - t[i] * s.ft[i];
    }
}

/// Precompiled linear right-hand side.
pub struct LinearField<'p> {
    params: &'p UrtuParams,
    b_u: Csr,
    b_t: Csr,
    c_u: Csr,
    c_r: Csr,
}

impl<'p> LinearField<'p> {
    pub fn new(params: &'p UrtuParams) -> Self {
        Self {
            params,
            b_u: Csr::from_dense(&params.b_u),
            b_t: Csr::from_dense(&params.b_t),
            c_u: Csr::from_dense(&params.c_u),
            c_r: Csr::from_dense(&params.c_r),
        }
    }

    pub fn rhs(&self, s: &ProbabilityState) -> Result<Derivative> {
        let n = self.params.n();
        check_dims(s, n)?;
        let (r, t) = (&s.r, &s.t);
        let mut dr = vec![0.0; n];
        let mut dt = vec![0.0; n];
        for i in 0..n {
            let u = 1.0 - r[i] - t[i];
            let bur = self.b_u.row_dot(i, r);
            let btr = self.b_t.row_dot(i, r);
            let cut = self.c_u.row_dot(i, t);
            let crt = self.c_r.row_dot(i, t);
            dr[i] = u * bur - self.params.d_r[i] * r[i] + t[i] * btr - r[i] * crt;
            dt[i] = u * cut - self.params.d_t[i] * t[i] + r[i] * crt - t[i] * btr;
        }
        Ok(Derivative { dr, dt })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step, relative to `max(1, |t|)`, before giving up.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, min_step: 1e-12, max_steps: 10_000_000 }
    }
}

impl Tolerances {
    pub fn scaled(self, factor: f64) -> Self {
        Self { rtol: self.rtol * factor, atol: self.atol * factor, ..self }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates from `s0` at `t = 0` and samples the solution on `grid`.
///
/// Adaptive Dormand–Prince 5(4) steps are clipped to land on grid points.
/// After every accepted step small excursions out of `Ω` are repaired
/// (see [`CLAMP_TOLERANCE`]); larger ones abort with
/// [`Error::IntegratorAccuracy`].
pub fn integrate(
    s0: &ProbabilityState,
    fam: &RateFamily<'_>,
    grid: &[f64],
    tol: &Tolerances,
) -> Result<Trajectory> {
    let n = fam.params().n();
    check_dims(s0, n)?;
    check_grid(grid)?;
    let dim = 2 * n;
    let mut y = Vec::with_capacity(dim);
    y.extend_from_slice(&s0.r);
    y.extend_from_slice(&s0.t);
    let mut scratch = RhsScratch::new(n);
    let mut field = |y: &[f64], dy: &mut [f64]| generic_field(fam, y, dy, &mut scratch);

    let mut k: [Vec<f64>; 7] = core::array::from_fn(|_| vec![0.0; dim]);
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut traj = Trajectory::with_capacity(n, grid.len());
    let mut t = 0.0;
    let mut h = 1e-3_f64;
    let mut steps = 0usize;

    for &target in grid {
        while t < target {
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::Stiffness { t });
            }
            if h < tol.min_step * t.max(1.0) {
                return Err(Error::Stiffness { t });
            }
            let last = h >= target - t;
            let step = if last { target - t } else { h };

            field(&y, &mut k[0]);
            let combos: [(&[f64], f64); 5] = [
                (&[A21], C2),
                (&[A31, A32], C3),
                (&[A41, A42, A43], C4),
                (&[A51, A52, A53, A54], C5),
                (&[A61, A62, A63, A64, A65], 1.0),
            ];
            for (s, (coeffs, _)) in combos.iter().enumerate() {
                for d in 0..dim {
                    let mut acc = 0.0;
                    for (c, kk) in coeffs.iter().zip(k.iter()) {
                        acc += c * kk[d];
                    }
                    stage[d] = y[d] + step * acc;
                }
                field(&stage, &mut k[s + 1]);
            }
            for d in 0..dim {
                y_new[d] = y[d]
                    + step * (B1 * k[0][d] + B3 * k[2][d] + B4 * k[3][d] + B5 * k[4][d] + B6 * k[5][d]);
            }
            field(&y_new, &mut k[6]);
            let mut err = 0.0;
            for d in 0..dim {
                let e = step
                    * (E1 * k[0][d] + E3 * k[2][d] + E4 * k[3][d] + E5 * k[4][d] + E6 * k[5][d] + E7 * k[6][d]);
                let scale = tol.atol + tol.rtol * libm::fmax(libm::fabs(y[d]), libm::fabs(y_new[d]));
                err += (e / scale) * (e / scale);
            }
            let err = libm::sqrt(err / dim as f64);
            if !err.is_finite() {
                h = step * 0.2;
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { target } else { t + step };
                core::mem::swap(&mut y, &mut y_new);
                repair(&mut y, n, t)?;
                // A clipped final step says nothing about the natural step size.
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                h = step * factor.min(1.0);
            }
        }
        traj.push(target, &y[..n], &y[n..]);
    }
    Ok(traj)
}

fn repair(y: &mut [f64], n: usize, t: f64) -> Result<()> {
    for v in y.iter_mut() {
        if *v < 0.0 {
            if *v > -CLAMP_TOLERANCE {
                *v = 0.0;
            } else {
                return Err(Error::IntegratorAccuracy { t, violation: -*v });
            }
        }
    }
    for i in 0..n {
        let sum = y[i] + y[n + i];
        if sum > 1.0 {
            if sum - 1.0 < CLAMP_TOLERANCE {
                y[i] /= sum;
                y[n + i] /= sum;
            } else {
                return Err(Error::IntegratorAccuracy { t, violation: sum - 1.0 });
            }
        }
    }
    Ok(())
}

/// `points` equally spaced times from `0` to `t_end` inclusive.
pub fn uniform_grid(t_end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![t_end],
        _ => (0..points).map(|k| t_end * k as f64 / (points - 1) as f64).collect(),
    }
}

/// Probability state seeded by one hard configuration.
pub fn seeded_state(n: usize, rumor: &[usize], truth: &[usize]) -> ProbabilityState {
    let mut osn = OsnState::all_uncertain(n);
    for &i in rumor {
        osn.set(i, NodeState::Rumor);
    }
    for &i in truth {
        osn.set(i, NodeState::Truth);
    }
    ProbabilityState::from_osn(&osn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedNetwork;
    use crate::linalg::Matrix;
    use crate::rates::RateKind;

    fn single(delta: f64) -> UrtuParams {
        UrtuParams {
            b_u: Matrix::zeros(1),
            b_t: Matrix::zeros(1),
            c_u: Matrix::zeros(1),
            c_r: Matrix::zeros(1),
            d_r: vec![delta],
            d_t: vec![delta],
        }
    }

    #[test]
    fn zero_state_is_equilibrium() {
        let g = DirectedNetwork::ring(5).unwrap();
        let p = UrtuParams::homogeneous(&g, &g, 0.7, 0.2, 0.6, 0.1, 0.3, 0.3).unwrap();
        let fam = RateFamily::new(&p, RateKind::Saturating { c: 2.0 }).unwrap();
        let d = rhs_generic(&ProbabilityState::zero(5), &fam).unwrap();
        assert_eq!(d.sup_norm(), 0.0);
    }

    #[test]
    fn single_node_hand_value() {
        let p = single(1.0);
        let fam = RateFamily::linear(&p);
        let s = ProbabilityState { r: vec![0.5], t: vec![0.0] };
        let d = rhs_generic(&s, &fam).unwrap();
        assert_eq!(d.dr, [-0.5]);
        assert_eq!(d.dt, [0.0]);
    }

    #[test]
    fn rhs_rejects_points_outside_omega() {
        let p = single(1.0);
        let fam = RateFamily::linear(&p);
        let s = ProbabilityState { r: vec![0.7], t: vec![0.4] };
        assert!(matches!(rhs_generic(&s, &fam), Err(Error::Domain(_))));
        assert!(matches!(rhs_linear(&s, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn rumor_free_state_has_no_rumor_growth() {
        let g = DirectedNetwork::ring(4).unwrap();
        let p = UrtuParams::homogeneous(&g, &g, 0.7, 0.2, 0.6, 0.1, 0.3, 0.3).unwrap();
        let s = ProbabilityState { r: vec![0.0; 4], t: vec![0.1, 0.5, 0.9, 0.3] };
        let d = rhs_linear(&s, &p).unwrap();
        assert!(d.dr.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponential_decay() {
        let p = single(1.0);
        let fam = RateFamily::linear(&p);
        let s0 = ProbabilityState { r: vec![1.0], t: vec![0.0] };
        let traj = integrate(&s0, &fam, &[0.0, 1.0, 2.0, 5.0], &Tolerances::default()).unwrap();
        for k in 0..4 {
            let t = traj.times()[k];
            assert!((traj.rumor_at(k)[0] - libm::exp(-t)).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_start_stays_zero() {
        let g = DirectedNetwork::ring(3).unwrap();
        let p = UrtuParams::homogeneous(&g, &g, 0.7, 0.2, 0.6, 0.1, 0.3, 0.3).unwrap();
        let fam = RateFamily::linear(&p);
        let traj = integrate(&ProbabilityState::zero(3), &fam, &uniform_grid(10.0, 11), &Tolerances::default())
            .unwrap();
        for k in 0..traj.len() {
            assert!(traj.rumor_at(k).iter().chain(traj.truth_at(k)).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn repair_policy() {
        let mut y = vec![-1e-12, 0.5, 0.0, 0.5 + 5e-10];
        repair(&mut y, 2, 0.0).unwrap();
        assert_eq!(y[0], 0.0);
        assert!(y[1] + y[3] <= 1.0);
        let mut bad = vec![-1e-6, 0.0];
        assert!(matches!(repair(&mut bad, 1, 2.0), Err(Error::IntegratorAccuracy { .. })));
    }

    #[test]
    fn grid_helper() {
        assert_eq!(uniform_grid(2.0, 3), [0.0, 1.0, 2.0]);
        assert!(uniform_grid(1.0, 0).is_empty());
    }
}

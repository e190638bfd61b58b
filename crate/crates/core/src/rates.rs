//! Spreading-rate families.
//!
//! Each family supplies four vector functions of a probability vector:
//! `fU` and `fT` act on the rumor marginals (uncertain / truth-believing
//! recipients), `gU` and `gR` act on the truth marginals (uncertain /
//! rumor-believing recipients). Row `i` of each depends only on the senders
//! of `i` in the matching network.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Csr, Matrix};
use crate::params::UrtuParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rate {
    FU,
    FT,
    GU,
    GR,
}

impl Rate {
    pub const ALL: [Rate; 4] = [Rate::FU, Rate::FT, Rate::GU, Rate::GR];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateKind {
    /// Row `i` is `sum_j M_ij x_j`.
    Linear,
    /// Row `i` is `u / (1 + c u)` with `u` the linear aggregate.
    Saturating { c: f64 },
}

impl RateKind {
    #[inline]
    pub fn apply(self, u: f64) -> f64 {
        match self {
            RateKind::Linear => u,
            RateKind::Saturating { c } => u / (1.0 + c * u),
        }
    }
}

/// Interface the condition checker and simulators evaluate against.
pub trait SpreadingRates {
    fn n(&self) -> usize;

    /// Row `i` of `which` at `x`. No domain check.
    fn row(&self, which: Rate, i: usize, x: &[f64]) -> f64;

    /// Whether row `i` of `which` may depend on coordinate `j`.
    fn depends_on(&self, which: Rate, i: usize, j: usize) -> bool;
}

/// A concrete family bound to a parameter set.
#[derive(Debug, Clone)]
pub struct RateFamily<'p> {
    params: &'p UrtuParams,
    kind: RateKind,
    fu: Csr,
    ft: Csr,
    gu: Csr,
    gr: Csr,
}

impl<'p> RateFamily<'p> {
    pub fn new(params: &'p UrtuParams, kind: RateKind) -> Result<Self> {
        if let RateKind::Saturating { c } = kind {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameters(format!("saturation c = {c} must be finite and >= 0")));
            }
        }
        Ok(Self {
            params,
            kind,
            fu: Csr::from_dense(&params.b_u),
            ft: Csr::from_dense(&params.b_t),
            gu: Csr::from_dense(&params.c_u),
            gr: Csr::from_dense(&params.c_r),
        })
    }

    pub fn linear(params: &'p UrtuParams) -> Self {
        Self::new(params, RateKind::Linear).expect("linear family is always valid")
    }

    pub fn kind(&self) -> RateKind {
        self.kind
    }

    pub fn params(&self) -> &'p UrtuParams {
        self.params
    }

    /// Underlying rate matrix of `which`.
    pub fn matrix(&self, which: Rate) -> &'p Matrix {
        match which {
            Rate::FU => &self.params.b_u,
            Rate::FT => &self.params.b_t,
            Rate::GU => &self.params.c_u,
            Rate::GR => &self.params.c_r,
        }
    }

    #[inline]
    pub fn csr(&self, which: Rate) -> &Csr {
        match which {
            Rate::FU => &self.fu,
            Rate::FT => &self.ft,
            Rate::GU => &self.gu,
            Rate::GR => &self.gr,
        }
    }

    /// Evaluates `which` at `x`, rejecting points outside `[0, 1]^N`.
    pub fn eval(&self, which: Rate, x: &[f64]) -> Result<Vec<f64>> {
        check_unit_cube(x, self.n())?;
        let mut out = vec![0.0; x.len()];
        self.eval_into(which, x, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation into a caller buffer.
    #[inline]
    pub fn eval_into(&self, which: Rate, x: &[f64], out: &mut [f64]) {
        let csr = self.csr(which);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.kind.apply(csr.row_dot(i, x));
        }
    }

    /// Jacobian at the origin. Both shipped kinds have unit slope at zero,
    /// so this is the rate matrix itself.
    pub fn jacobian_at_zero(&self, which: Rate) -> Matrix {
        self.matrix(which).clone()
    }
}

impl SpreadingRates for RateFamily<'_> {
    fn n(&self) -> usize {
        self.params.n()
    }

    #[inline]
    fn row(&self, which: Rate, i: usize, x: &[f64]) -> f64 {
        self.kind.apply(self.csr(which).row_dot(i, x))
    }

    fn depends_on(&self, which: Rate, i: usize, j: usize) -> bool {
        self.matrix(which)[(i, j)] != 0.0
    }
}

pub(crate) fn check_unit_cube(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::InvalidDimensions { expected: n, found: x.len() });
    }
    if let Some((k, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("x[{k}] = {v} outside [0, 1]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    Proximity,
    Nullity,
    Ordering,
    Monotonicity,
    Concavity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionFailure {
    pub condition: Condition,
    pub rate: Rate,
    pub node: usize,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub samples: usize,
    pub failures: Vec<ConditionFailure>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failed(&self, condition: Condition) -> bool {
        self.failures.iter().any(|f| f.condition == condition)
    }
}

const FD_STEP: f64 = 1e-3;
const MAX_FAILURES_PER_CONDITION: usize = 8;

fn slack(v: f64) -> f64 {
    1e-12 * (1.0 + libm::fabs(v))
}

/// Sampled verification of nullity, proximity, ordering, monotonicity and
/// concavity on random points of the unit cube.
pub fn check_conditions<F: SpreadingRates + ?Sized>(fam: &F, samples: usize, seed: u64) -> ConditionReport {
    let n = fam.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ConditionReport { samples, failures: Vec::new() };
    let push = |report: &mut ConditionReport, condition, rate, node, point: &[f64]| {
        let count = report.failures.iter().filter(|f| f.condition == condition).count();
        if count < MAX_FAILURES_PER_CONDITION {
            report.failures.push(ConditionFailure { condition, rate, node, point: point.to_vec() });
        }
    };

    let zero = vec![0.0; n];
    for rate in Rate::ALL {
        for i in 0..n {
            if fam.row(rate, i, &zero) != 0.0 {
                push(&mut report, Condition::Nullity, rate, i, &zero);
            }
        }
    }

    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for _ in 0..samples {
        for v in &mut x {
            *v = rng.gen::<f64>();
        }
        for i in 0..n {
            for (hi, lo) in [(Rate::FU, Rate::FT), (Rate::GU, Rate::GR)] {
                let (a, b) = (fam.row(hi, i, &x), fam.row(lo, i, &x));
                if a < b - slack(b) {
                    push(&mut report, Condition::Ordering, lo, i, &x);
                }
            }
        }
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        for rate in Rate::ALL {
            let base = fam.row(rate, i, &x);
            if !fam.depends_on(rate, i, j) {
                y.copy_from_slice(&x);
                y[j] = rng.gen::<f64>();
                if fam.row(rate, i, &y).to_bits() != base.to_bits() {
                    push(&mut report, Condition::Proximity, rate, i, &x);
                }
                continue;
            }
            // Axis difference inside [h, 1 - h] so both neighbours stay in the cube.
            y.copy_from_slice(&x);
            y[j] = FD_STEP + (1.0 - 2.0 * FD_STEP) * x[j];
            let mid = fam.row(rate, i, &y);
            y[j] += FD_STEP;
            let up = fam.row(rate, i, &y);
            y[j] -= 2.0 * FD_STEP;
            let down = fam.row(rate, i, &y);
            if !(up > mid) {
                push(&mut report, Condition::Monotonicity, rate, i, &x);
            }
            if up - 2.0 * mid + down > slack(mid) {
                push(&mut report, Condition::Concavity, rate, i, &x);
            }
            // Nonnegative direction: a nonpositive Hessian gives d^T H d <= 0.
            let d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let centre: Vec<f64> = x.iter().map(|&v| FD_STEP + (1.0 - 2.0 * FD_STEP) * v).collect();
            let shifted = |sign: f64| -> Vec<f64> {
                centre.iter().zip(&d).map(|(&c, &dk)| c + sign * FD_STEP * dk).collect()
            };
            let c0 = fam.row(rate, i, &centre);
            let cp = fam.row(rate, i, &shifted(1.0));
            let cm = fam.row(rate, i, &shifted(-1.0));
            if cp - 2.0 * c0 + cm > slack(c0) {
                push(&mut report, Condition::Concavity, rate, i, &centre);
            }
        }
    }
    report
}

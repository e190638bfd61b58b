//! Per-node marginal time series shared by the stochastic and mean-field
//! solvers.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marginals `R_i(t)`, `T_i(t)` sampled on a time grid, stored grid-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    n: usize,
    times: Vec<f64>,
    rumor: Vec<f64>,
    truth: Vec<f64>,
}

impl Trajectory {
    pub fn with_capacity(n: usize, points: usize) -> Self {
        Self {
            n,
            times: Vec::with_capacity(points),
            rumor: Vec::with_capacity(points * n),
            truth: Vec::with_capacity(points * n),
        }
    }

    pub fn from_parts(n: usize, times: Vec<f64>, rumor: Vec<f64>, truth: Vec<f64>) -> Result<Self> {
        let expected = times.len() * n;
        for found in [rumor.len(), truth.len()] {
            if found != expected {
                return Err(Error::InvalidDimensions { expected, found });
            }
        }
        Ok(Self { n, times, rumor, truth })
    }

    pub fn push(&mut self, t: f64, rumor: &[f64], truth: &[f64]) {
        debug_assert_eq!(rumor.len(), self.n);
        debug_assert_eq!(truth.len(), self.n);
        self.times.push(t);
        self.rumor.extend_from_slice(rumor);
        self.truth.extend_from_slice(truth);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rumor_at(&self, k: usize) -> &[f64] {
        &self.rumor[k * self.n..(k + 1) * self.n]
    }

    pub fn truth_at(&self, k: usize) -> &[f64] {
        &self.truth[k * self.n..(k + 1) * self.n]
    }

    /// Aggregate fractions `(R(t), T(t))`: node means at every grid point.
    pub fn aggregate_fractions(&self) -> (Vec<f64>, Vec<f64>) {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / self.n as f64;
        (0..self.len())
            .map(|k| (mean(self.rumor_at(k)), mean(self.truth_at(k))))
            .unzip()
    }

    /// Appends `other`, skipping its first point when it repeats our last time.
    pub fn extend(&mut self, other: &Trajectory) {
        let skip = match (self.times.last(), other.times.first()) {
            (Some(a), Some(b)) if a == b => 1,
            _ => 0,
        };
        for k in skip..other.len() {
            self.push(other.times[k], other.rumor_at(k), other.truth_at(k));
        }
    }

    /// Smallest `1 - R_i - T_i` and smallest marginal over the whole series.
    pub fn omega_margins(&self) -> (f64, f64) {
        let mut slack = f64::INFINITY;
        let mut floor = f64::INFINITY;
        for (r, t) in self.rumor.iter().zip(&self.truth) {
            slack = slack.min(1.0 - r - t);
            floor = floor.min(r.min(*t));
        }
        (slack, floor)
    }
}

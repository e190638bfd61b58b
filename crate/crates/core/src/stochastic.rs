//! The individual-level model as a continuous-time Markov chain.
//!
//! Every node is Uncertain, Rumor-believing or Truth-believing. A node's
//! transition rates depend on the indicator vectors of rumor- and
//! truth-believers among its senders:
//!
//! | from      | to        | rate                   |
//! |-----------|-----------|------------------------|
//! | Uncertain | Rumor     | `fU_i(1{x = Rumor})`   |
//! | Uncertain | Truth     | `gU_i(1{x = Truth})`   |
//! | Rumor     | Truth     | `gR_i(1{x = Truth})`   |
//! | Truth     | Rumor     | `fT_i(1{x = Rumor})`   |
//! | Rumor     | Uncertain | `d_r[i]`               |
//! | Truth     | Uncertain | `d_t[i]`               |
//!
//! [`gillespie_path`] draws exact sample paths with the direct method,
//! [`ensemble_average`] turns many paths into marginals, and
//! [`exact_marginals_small`] solves the forward equations on the full
//! `3^N` state space by uniformization for small networks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Csr, Matrix};
use crate::params::UrtuParams;
use crate::rates::{Rate, RateFamily, RateKind};
use crate::trajectory::Trajectory;

/// Largest network the uniformization solver accepts (`3^9 = 19683` states).
pub const MAX_EXACT_NODES: usize = 9;
/// Absolute truncation tolerance of the uniformization series.
pub const UNIFORMIZATION_TOLERANCE: f64 = 1e-10;
/// Keeps `Λ Δt` per uniformization sub-step small enough that `e^{-Λ Δt}`
/// does not underflow.
const MAX_POISSON_MEAN: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum NodeState {
    Uncertain = 0,
    Rumor = 1,
    Truth = 2,
}

impl NodeState {
    pub fn from_digit(d: u8) -> Option<Self> {
        match d {
            0 => Some(NodeState::Uncertain),
            1 => Some(NodeState::Rumor),
            2 => Some(NodeState::Truth),
            _ => None,
        }
    }

    pub fn digit(self) -> u8 {
        self as u8
    }

    /// Rumor and Truth exchanged.
    pub fn swapped(self) -> Self {
        match self {
            NodeState::Uncertain => NodeState::Uncertain,
            NodeState::Rumor => NodeState::Truth,
            NodeState::Truth => NodeState::Rumor,
        }
    }
}

/// Configuration of the whole network.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OsnState(Vec<NodeState>);

impl OsnState {
    pub fn new(states: Vec<NodeState>) -> Self {
        Self(states)
    }

    pub fn all_uncertain(n: usize) -> Self {
        Self(vec![NodeState::Uncertain; n])
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn states(&self) -> &[NodeState] {
        &self.0
    }

    pub fn set(&mut self, i: usize, s: NodeState) {
        self.0[i] = s;
    }

    pub fn count(&self, s: NodeState) -> usize {
        self.0.iter().filter(|&&x| x == s).count()
    }

    /// Indicator vectors of rumor- and truth-believers.
    pub fn indicators(&self) -> (Vec<f64>, Vec<f64>) {
        let ind = |s| self.0.iter().map(|&x| if x == s { 1.0 } else { 0.0 }).collect();
        (ind(NodeState::Rumor), ind(NodeState::Truth))
    }

    /// Base-3 index `sum_k x_k 3^k`.
    pub fn encode(&self) -> usize {
        self.0.iter().rev().fold(0, |acc, s| acc * 3 + s.digit() as usize)
    }

    pub fn decode(mut index: usize, n: usize) -> Self {
        let mut states = Vec::with_capacity(n);
        for _ in 0..n {
            states.push(NodeState::from_digit((index % 3) as u8).expect("base-3 digit"));
            index /= 3;
        }
        Self(states)
    }

    pub fn swapped(&self) -> Self {
        Self(self.0.iter().map(|s| s.swapped()).collect())
    }
}

/// One rumor seed and one distinct truth seed, uniform over ordered pairs.
pub fn initial_state_random(n: usize, seed: u64) -> Result<OsnState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_pair_state(n, &mut rng)
}

fn random_pair_state<R: Rng>(n: usize, rng: &mut R) -> Result<OsnState> {
    if n < 2 {
        return Err(Error::InvalidParameters(format!("random seeding needs n >= 2, got {n}")));
    }
    let rumor = rng.gen_range(0..n);
    let mut truth = rng.gen_range(0..n - 1);
    if truth >= rumor {
        truth += 1;
    }
    let mut state = OsnState::all_uncertain(n);
    state.set(rumor, NodeState::Rumor);
    state.set(truth, NodeState::Truth);
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub node: usize,
    pub new_state: NodeState,
}

/// Binary sum tree over per-node total rates; every internal node is
/// recomputed from its children, so totals never drift.
#[derive(Debug, Clone)]
struct SumTree {
    leaves: usize,
    tree: Vec<f64>,
}

impl SumTree {
    fn new(n: usize) -> Self {
        let leaves = n.next_power_of_two();
        Self { leaves, tree: vec![0.0; 2 * leaves] }
    }

    fn clear(&mut self) {
        self.tree.fill(0.0);
    }

    #[inline]
    fn set(&mut self, i: usize, v: f64) {
        let mut p = i + self.leaves;
        self.tree[p] = v;
        while p > 1 {
            p /= 2;
            self.tree[p] = self.tree[2 * p] + self.tree[2 * p + 1];
        }
    }

    #[inline]
    fn total(&self) -> f64 {
        self.tree[1]
    }

    /// Leaf whose cumulative interval contains `u`; never a zero leaf
    /// while the total is positive.
    #[inline]
    fn find(&self, mut u: f64) -> usize {
        let mut p = 1;
        while p < self.leaves {
            let left = self.tree[2 * p];
            if u < left || self.tree[2 * p + 1] == 0.0 {
                p *= 2;
            } else {
                u -= left;
                p = 2 * p + 1;
            }
        }
        p - self.leaves
    }
}

/// Column view of a rate matrix: for sender `j`, the receivers `i` and
/// weights `M_ij`.
fn transpose_csr(m: &Matrix) -> Csr {
    let n = m.n();
    let mut t = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            t[(j, i)] = m[(i, j)];
        }
    }
    Csr::from_dense(&t)
}

/// Reusable direct-method engine with cached per-node rates.
///
/// Pressures `sum_j M_ij 1{x_j active}` are updated incrementally along the
/// sender's column; a pressure whose active-sender count reaches zero is
/// reset to exactly zero so nullity holds bitwise.
#[derive(Debug, Clone)]
pub struct GillespieEngine<'a> {
    kind: RateKind,
    params: &'a UrtuParams,
    columns: [Csr; 4],
    state: Vec<NodeState>,
    pressure: [Vec<f64>; 4],
    active: [Vec<u32>; 4],
    tree: SumTree,
    touched: Vec<usize>,
    mark: Vec<bool>,
    t: f64,
}

const FU: usize = 0;
const FT: usize = 1;
const GU: usize = 2;
const GR: usize = 3;

impl<'a> GillespieEngine<'a> {
    pub fn new(fam: &RateFamily<'a>) -> Self {
        let params = fam.params();
        let n = params.n();
        let col = |r| transpose_csr(fam.matrix(r));
        Self {
            kind: fam.kind(),
            params,
            columns: [col(Rate::FU), col(Rate::FT), col(Rate::GU), col(Rate::GR)],
            state: vec![NodeState::Uncertain; n],
            pressure: core::array::from_fn(|_| vec![0.0; n]),
            active: core::array::from_fn(|_| vec![0; n]),
            tree: SumTree::new(n),
            touched: Vec::with_capacity(n),
            mark: vec![false; n],
            t: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.state.len()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[NodeState] {
        &self.state
    }

    pub fn reset(&mut self, init: &OsnState) -> Result<()> {
        if init.n() != self.n() {
            return Err(Error::InvalidDimensions { expected: self.n(), found: init.n() });
        }
        self.t = 0.0;
        self.state.fill(NodeState::Uncertain);
        for p in &mut self.pressure {
            p.fill(0.0);
        }
        for a in &mut self.active {
            a.fill(0);
        }
        self.tree.clear();
        for (j, &s) in init.states().iter().enumerate() {
            if s != NodeState::Uncertain {
                self.toggle(j, s, 1.0);
                self.state[j] = s;
            }
        }
        for &i in &self.touched {
            self.mark[i] = false;
        }
        self.touched.clear();
        for i in 0..self.n() {
            self.refresh(i);
        }
        Ok(())
    }

    /// Adds (`sign = 1`) or removes (`-1`) sender `j`'s influence as a
    /// holder of `s`, recording the receivers touched.
    #[inline]
    fn toggle(&mut self, j: usize, s: NodeState, sign: f64) {
        let pair = match s {
            NodeState::Rumor => [FU, FT],
            NodeState::Truth => [GU, GR],
            NodeState::Uncertain => return,
        };
        for r in pair {
            let (rows, weights) = self.columns[r].row(j);
            for (&i, &w) in rows.iter().zip(weights) {
                let count = &mut self.active[r][i];
                if sign > 0.0 {
                    *count += 1;
                    self.pressure[r][i] += w;
                } else {
                    *count -= 1;
                    if *count == 0 {
                        self.pressure[r][i] = 0.0;
                    } else {
                        self.pressure[r][i] -= w;
                    }
                }
                if !self.mark[i] {
                    self.mark[i] = true;
                    self.touched.push(i);
                }
            }
        }
    }

    /// The two outgoing transitions of node `i` as `(target, rate)`.
    #[inline]
    fn transitions(&self, i: usize) -> [(NodeState, f64); 2] {
        let k = self.kind;
        match self.state[i] {
            NodeState::Uncertain => [
                (NodeState::Rumor, k.apply(self.pressure[FU][i])),
                (NodeState::Truth, k.apply(self.pressure[GU][i])),
            ],
            NodeState::Rumor => [
                (NodeState::Uncertain, self.params.d_r[i]),
                (NodeState::Truth, k.apply(self.pressure[GR][i])),
            ],
            NodeState::Truth => [
                (NodeState::Uncertain, self.params.d_t[i]),
                (NodeState::Rumor, k.apply(self.pressure[FT][i])),
            ],
        }
    }

    #[inline]
    fn refresh(&mut self, i: usize) {
        let [(_, a), (_, b)] = self.transitions(i);
        self.tree.set(i, a + b);
    }

    /// Draws the next event. Returns `None` (leaving the clock untouched)
    /// when the chain is absorbed or the event would fall after `t_max`.
    pub fn step<R: Rng>(&mut self, rng: &mut R, t_max: f64) -> Option<Event> {
        let event = self.next_event(rng, t_max)?;
        self.commit(event);
        Some(event)
    }

    /// Draws the next event without applying it.
    pub fn next_event<R: Rng>(&mut self, rng: &mut R, t_max: f64) -> Option<Event> {
        let total = self.tree.total();
        if !(total > 0.0) {
            return None;
        }
        let wait = -libm::log(open_unit(rng)) / total;
        let t_next = self.t + wait;
        if t_next > t_max {
            return None;
        }
        let node = self.tree.find(rng.gen::<f64>() * total);
        let [(first, a), (second, b)] = self.transitions(node);
        let target = if b == 0.0 || rng.gen::<f64>() * (a + b) < a { first } else { second };
        Some(Event { t: t_next, node, new_state: target })
    }

    /// Applies an event drawn by [`next_event`](Self::next_event).
    pub fn commit(&mut self, event: Event) {
        self.apply(event.node, event.new_state);
        self.t = event.t;
    }

    fn apply(&mut self, node: usize, target: NodeState) {
        let old = self.state[node];
        self.touched.clear();
        self.toggle(node, old, -1.0);
        self.state[node] = target;
        self.toggle(node, target, 1.0);
        let touched = core::mem::take(&mut self.touched);
        for &i in &touched {
            self.mark[i] = false;
            self.refresh(i);
        }
        self.touched = touched;
        self.refresh(node);
    }

    pub fn is_absorbed(&self) -> bool {
        !(self.tree.total() > 0.0)
    }
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Random stream for path `k` of an ensemble seeded with `seed`.
pub fn path_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Independent 64-bit seed number `k` derived from `seed`.
pub fn child_seed(seed: u64, k: u64) -> u64 {
    path_rng(seed, k).next_u64()
}

/// One exact sample path up to `t_max`.
pub fn gillespie_path(fam: &RateFamily<'_>, init: &OsnState, t_max: f64, seed: u64) -> Result<Vec<Event>> {
    if !(t_max > 0.0) {
        return Err(Error::InvalidParameters(format!("t_max = {t_max} must be positive")));
    }
    let mut engine = GillespieEngine::new(fam);
    engine.reset(init)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    while let Some(ev) = engine.step(&mut rng, t_max) {
        events.push(ev);
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum InitPolicy {
    /// Every path starts from this configuration.
    Fixed { state: OsnState },
    /// Each path draws its own rumor seed and truth seed.
    RandomPair,
}

/// Integer occupation counts per grid point and node. Merging is integer
/// addition, so the result does not depend on how paths were partitioned.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleCounts {
    n: usize,
    grid: Vec<f64>,
    rumor: Vec<u32>,
    truth: Vec<u32>,
    paths: u64,
}

impl EnsembleCounts {
    pub fn new(n: usize, grid: &[f64]) -> Result<Self> {
        check_grid(grid)?;
        Ok(Self {
            n,
            grid: grid.to_vec(),
            rumor: vec![0; n * grid.len()],
            truth: vec![0; n * grid.len()],
            paths: 0,
        })
    }

    pub fn paths(&self) -> u64 {
        self.paths
    }

    pub fn merge(&mut self, other: &EnsembleCounts) -> Result<()> {
        if other.n != self.n || other.grid != self.grid {
            return Err(Error::InvalidParameters("cannot merge ensembles on different grids".into()));
        }
        for (a, b) in self.rumor.iter_mut().zip(&other.rumor) {
            *a += b;
        }
        for (a, b) in self.truth.iter_mut().zip(&other.truth) {
            *a += b;
        }
        self.paths += other.paths;
        Ok(())
    }

    fn record(&mut self, g: usize, state: &[NodeState]) {
        let base = g * self.n;
        for (i, &s) in state.iter().enumerate() {
            match s {
                NodeState::Rumor => self.rumor[base + i] += 1,
                NodeState::Truth => self.truth[base + i] += 1,
                NodeState::Uncertain => {}
            }
        }
    }

    /// Runs paths `range` of the ensemble with master seed `seed`, path `k`
    /// using stream `k` of that seed.
    pub fn run_paths(
        &mut self,
        engine: &mut GillespieEngine<'_>,
        init: &InitPolicy,
        seed: u64,
        range: Range<u64>,
    ) -> Result<()> {
        if engine.n() != self.n {
            return Err(Error::InvalidDimensions { expected: self.n, found: engine.n() });
        }
        let t_end = *self.grid.last().expect("nonempty grid");
        for k in range {
            let mut rng = path_rng(seed, k);
            match init {
                InitPolicy::Fixed { state } => engine.reset(state)?,
                InitPolicy::RandomPair => engine.reset(&random_pair_state(self.n, &mut rng)?)?,
            }
            let mut g = 0;
            while g < self.grid.len() && self.grid[g] < engine.time() {
                g += 1;
            }
            loop {
                let event = engine.next_event(&mut rng, t_end);
                let until = event.map_or(f64::INFINITY, |e| e.t);
                // Grid points before the event see the current state.
                while g < self.grid.len() && self.grid[g] < until {
                    self.record(g, engine.state());
                    g += 1;
                }
                match event {
                    Some(e) => engine.commit(e),
                    None => break,
                }
            }
            self.paths += 1;
        }
        Ok(())
    }

    pub fn into_trajectory(self) -> Trajectory {
        let m = self.paths.max(1) as f64;
        let rumor = self.rumor.iter().map(|&c| c as f64 / m).collect();
        let truth = self.truth.iter().map(|&c| c as f64 / m).collect();
        Trajectory::from_parts(self.n, self.grid, rumor, truth).expect("consistent sizes")
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameters("time grid is empty".into()));
    }
    if !(grid[0] >= 0.0) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameters("time grid must start at t >= 0 and be finite".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameters("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Across-path frequencies of each node's state on `grid`, from `m` paths.
pub fn ensemble_average(
    fam: &RateFamily<'_>,
    init: &InitPolicy,
    grid: &[f64],
    m: u64,
    seed: u64,
) -> Result<Trajectory> {
    if m == 0 {
        return Err(Error::InvalidParameters("ensemble needs at least one path".into()));
    }
    let n = fam.params().n();
    let mut counts = EnsembleCounts::new(n, grid)?;
    let mut engine = GillespieEngine::new(fam);
    counts.run_paths(&mut engine, init, seed, 0..m)?;
    Ok(counts.into_trajectory())
}

/// Sparse generator of the full chain on `3^N` configurations.
///
/// Row `s` lists the transitions out of configuration `s` (base-3 index,
/// node `k` at digit `k`); the diagonal is `-exit[s]`.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    n: usize,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    rates: Vec<f64>,
    exit: Vec<f64>,
}

impl SparseGenerator {
    /// Builds the generator for linear spreading rates.
    pub fn build(params: &UrtuParams) -> Result<Self> {
        let n = params.n();
        if n > MAX_EXACT_NODES {
            return Err(Error::Capacity(format!(
                "exact solver handles at most {MAX_EXACT_NODES} nodes, got {n}"
            )));
        }
        let states = 3usize.pow(n as u32);
        let mut pow3 = vec![1usize; n];
        for k in 1..n {
            pow3[k] = pow3[k - 1] * 3;
        }
        let mut offsets = Vec::with_capacity(states + 1);
        let mut targets = Vec::with_capacity(states * 2 * n);
        let mut rates = Vec::with_capacity(states * 2 * n);
        let mut exit = Vec::with_capacity(states);
        offsets.push(0);
        let mut digits = vec![0u8; n];
        for s in 0..states {
            let mut rest = s;
            for d in digits.iter_mut() {
                *d = (rest % 3) as u8;
                rest /= 3;
            }
            let pressure = |m: &Matrix, i: usize, holder: u8| -> f64 {
                m.row(i)
                    .iter()
                    .zip(&digits)
                    .filter(|(_, &d)| d == holder)
                    .map(|(&w, _)| w)
                    .sum()
            };
            let mut out = 0.0;
            for i in 0..n {
                let here = digits[i] as usize * pow3[i];
                let base = s - here;
                let moves: [(usize, f64); 2] = match digits[i] {
                    0 => [(1, pressure(&params.b_u, i, 1)), (2, pressure(&params.c_u, i, 2))],
                    1 => [(0, params.d_r[i]), (2, pressure(&params.c_r, i, 2))],
                    _ => [(0, params.d_t[i]), (1, pressure(&params.b_t, i, 1))],
                };
                for (to, rate) in moves {
                    if rate > 0.0 {
                        targets.push((base + to * pow3[i]) as u32);
                        rates.push(rate);
                        out += rate;
                    }
                }
            }
            exit.push(out);
            offsets.push(targets.len());
        }
        Ok(Self { n, offsets, targets, rates, exit })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn states(&self) -> usize {
        self.exit.len()
    }

    /// Off-diagonal entries of row `s` as `(target, rate)`.
    pub fn row(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.offsets[s], self.offsets[s + 1]);
        self.targets[a..b].iter().zip(&self.rates[a..b]).map(|(&t, &r)| (t as usize, r))
    }

    /// Diagonal entry of row `s`.
    pub fn diagonal(&self, s: usize) -> f64 {
        -self.exit[s]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }

    /// Advances a probability row vector by `dt` with uniformization at
    /// uniformization rate `lambda >= max exit rate`.
    fn advance(&self, p: &mut [f64], dt: f64, lambda: f64, tail_tolerance: f64) {
        let mean = lambda * dt;
        if mean == 0.0 {
            return;
        }
        let states = self.states();
        let mut weight = libm::exp(-mean);
        let mut cumulative = weight;
        let mut term = p.to_vec();
        let mut next = vec![0.0; states];
        for (acc, &v) in p.iter_mut().zip(&term) {
            *acc = weight * v;
        }
        let mut k = 0u32;
        while 1.0 - cumulative > tail_tolerance {
            k += 1;
            // next = term * (I + Q / lambda)
            for (s, &mass) in term.iter().enumerate() {
                next[s] += mass * (1.0 - self.exit[s] / lambda);
            }
            for (s, &mass) in term.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                for (t, r) in self.row(s) {
                    next[t] += mass * (r / lambda);
                }
            }
            core::mem::swap(&mut term, &mut next);
            next.fill(0.0);
            weight *= mean / k as f64;
            cumulative += weight;
            for (acc, &v) in p.iter_mut().zip(&term) {
                *acc += weight * v;
            }
            // Past mean + 20 sd the remaining Poisson mass is below e^-200.
            if (k as f64) > mean + 20.0 * libm::sqrt(mean) + 50.0 {
                break;
            }
        }
    }
}

/// Transient marginals of the full chain on `grid` by uniformization.
///
/// Only linear spreading rates define the chain here; nonlinear families are
/// rejected.
pub fn exact_marginals_small(fam: &RateFamily<'_>, init: &OsnState, grid: &[f64]) -> Result<Trajectory> {
    if fam.kind() != RateKind::Linear {
        return Err(Error::Unsupported("exact solver is defined for linear rates only".into()));
    }
    check_grid(grid)?;
    let params = fam.params();
    let n = params.n();
    if init.n() != n {
        return Err(Error::InvalidDimensions { expected: n, found: init.n() });
    }
    let generator = SparseGenerator::build(params)?;
    let (_, trajectory) = exact_distribution(&generator, init, grid)?;
    Ok(trajectory)
}

/// Full probability vectors on `grid` together with their marginals.
pub fn exact_distribution(
    generator: &SparseGenerator,
    init: &OsnState,
    grid: &[f64],
) -> Result<(Vec<Vec<f64>>, Trajectory)> {
    check_grid(grid)?;
    let n = generator.n();
    let lambda = generator.max_exit_rate();
    let mut p = vec![0.0; generator.states()];
    p[init.encode()] = 1.0;
    // Split every interval so that each Poisson mean stays below the cap;
    // the per-step tails add up to at most the global tolerance.
    let substeps: Vec<usize> = grid
        .iter()
        .scan(0.0, |prev, &t| {
            let steps = libm::ceil(lambda * (t - *prev) / MAX_POISSON_MEAN).max(1.0) as usize;
            *prev = t;
            Some(steps)
        })
        .collect();
    let total_steps: usize = substeps.iter().sum();
    let tail = UNIFORMIZATION_TOLERANCE / total_steps as f64;
    let mut distributions = Vec::with_capacity(grid.len());
    let mut trajectory = Trajectory::with_capacity(n, grid.len());
    let mut now = 0.0;
    let mut rumor = vec![0.0; n];
    let mut truth = vec![0.0; n];
    for (&t, &steps) in grid.iter().zip(&substeps) {
        let dt = (t - now) / steps as f64;
        if t > now {
            for _ in 0..steps {
                generator.advance(&mut p, dt, lambda, tail);
            }
        }
        now = t;
        rumor.fill(0.0);
        truth.fill(0.0);
        for (s, &mass) in p.iter().enumerate() {
            let mut rest = s;
            for i in 0..n {
                match rest % 3 {
                    1 => rumor[i] += mass,
                    2 => truth[i] += mass,
                    _ => {}
                }
                rest /= 3;
            }
        }
        trajectory.push(t, &rumor, &truth);
        distributions.push(p.clone());
    }
    Ok((distributions, trajectory))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedNetwork;

    fn single_node(delta: f64) -> UrtuParams {
        UrtuParams {
            b_u: Matrix::zeros(1),
            b_t: Matrix::zeros(1),
            c_u: Matrix::zeros(1),
            c_r: Matrix::zeros(1),
            d_r: vec![delta],
            d_t: vec![delta],
        }
    }

    fn cycle4() -> UrtuParams {
        let g = DirectedNetwork::directed_cycle(4).unwrap();
        UrtuParams::homogeneous(&g, &g, 0.8, 0.3, 0.6, 0.2, 0.5, 0.4).unwrap()
    }

    #[test]
    fn encode_decode_roundtrip() {
        let s = OsnState::new(vec![NodeState::Truth, NodeState::Uncertain, NodeState::Rumor]);
        assert_eq!(s.encode(), 2 + 9);
        assert_eq!(OsnState::decode(s.encode(), 3), s);
    }

    #[test]
    fn random_pair_two_nodes() {
        let s = initial_state_random(2, 5).unwrap();
        assert_eq!(s.count(NodeState::Rumor), 1);
        assert_eq!(s.count(NodeState::Truth), 1);
        assert_eq!(initial_state_random(2, 5).unwrap(), s);
        assert!(initial_state_random(1, 5).is_err());
    }

    #[test]
    fn all_uncertain_is_absorbing() {
        let p = cycle4();
        let fam = RateFamily::linear(&p);
        let events = gillespie_path(&fam, &OsnState::all_uncertain(4), 100.0, 3).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn events_are_ordered_single_changes() {
        let p = cycle4();
        let fam = RateFamily::linear(&p);
        let init = OsnState::new(vec![NodeState::Rumor, NodeState::Truth, NodeState::Uncertain, NodeState::Uncertain]);
        let events = gillespie_path(&fam, &init, 50.0, 11).unwrap();
        assert!(!events.is_empty());
        let mut state = init.clone();
        let mut last = 0.0;
        for e in &events {
            assert!(e.t > last && e.t <= 50.0);
            assert_ne!(state.states()[e.node], e.new_state);
            state.set(e.node, e.new_state);
            last = e.t;
        }
        assert_eq!(gillespie_path(&fam, &init, 50.0, 11).unwrap(), events);
    }

    #[test]
    fn generator_rows_sum_to_zero() {
        let p = cycle4();
        let g = SparseGenerator::build(&p).unwrap();
        assert_eq!(g.states(), 81);
        for s in 0..g.states() {
            let sum: f64 = g.row(s).map(|(_, r)| r).sum::<f64>() + g.diagonal(s);
            assert!(sum.abs() < 1e-12);
        }
    }

    #[test]
    fn exact_single_node_decay() {
        let p = single_node(1.0);
        let fam = RateFamily::linear(&p);
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let traj = exact_marginals_small(&fam, &OsnState::new(vec![NodeState::Rumor]), &grid).unwrap();
        for (k, &t) in grid.iter().enumerate() {
            assert!((traj.rumor_at(k)[0] - libm::exp(-t)).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_distribution_is_stochastic() {
        let p = cycle4();
        let g = SparseGenerator::build(&p).unwrap();
        let init = OsnState::new(vec![NodeState::Rumor, NodeState::Truth, NodeState::Uncertain, NodeState::Uncertain]);
        let grid = [0.0, 0.3, 1.0, 4.0, 20.0];
        let (dists, _) = exact_distribution(&g, &init, &grid).unwrap();
        for d in dists {
            let sum: f64 = d.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "{sum}");
            assert!(d.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn exact_solver_limits() {
        let g = DirectedNetwork::ring(10).unwrap();
        let p = UrtuParams::homogeneous(&g, &g, 0.5, 0.2, 0.5, 0.2, 1.0, 1.0).unwrap();
        let fam = RateFamily::linear(&p);
        assert!(matches!(
            exact_marginals_small(&fam, &OsnState::all_uncertain(10), &[0.0]),
            Err(Error::Capacity(_))
        ));
        let p4 = cycle4();
        let sat = RateFamily::new(&p4, RateKind::Saturating { c: 1.0 }).unwrap();
        assert!(matches!(
            exact_marginals_small(&sat, &OsnState::all_uncertain(4), &[0.0]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn ensemble_at_time_zero_matches_init() {
        let p = cycle4();
        let fam = RateFamily::linear(&p);
        let init = OsnState::new(vec![NodeState::Rumor, NodeState::Truth, NodeState::Uncertain, NodeState::Rumor]);
        let traj = ensemble_average(&fam, &InitPolicy::Fixed { state: init.clone() }, &[0.0, 1.0], 50, 2).unwrap();
        let (r, t) = init.indicators();
        assert_eq!(traj.rumor_at(0), &r[..]);
        assert_eq!(traj.truth_at(0), &t[..]);
    }

    #[test]
    fn ensemble_partition_independent() {
        let p = cycle4();
        let fam = RateFamily::linear(&p);
        let init = InitPolicy::RandomPair;
        let grid = [0.0, 0.5, 1.0, 2.0];
        let mut engine = GillespieEngine::new(&fam);
        let mut whole = EnsembleCounts::new(4, &grid).unwrap();
        whole.run_paths(&mut engine, &init, 9, 0..40).unwrap();
        let mut a = EnsembleCounts::new(4, &grid).unwrap();
        let mut b = EnsembleCounts::new(4, &grid).unwrap();
        b.run_paths(&mut engine, &init, 9, 25..40).unwrap();
        a.run_paths(&mut engine, &init, 9, 0..25).unwrap();
        b.merge(&a).unwrap();
        assert_eq!(whole, b);
    }

    #[test]
    fn grid_validation() {
        assert!(check_grid(&[]).is_err());
        assert!(check_grid(&[0.0, 0.0]).is_err());
        assert!(check_grid(&[-1.0, 0.0]).is_err());
        assert!(check_grid(&[0.0, 1.0]).is_ok());
    }
}

//! Directed spreading networks.
//!
//! An arc `(i, j)` means that node `j` can pass information to node `i`, so
//! `senders(i)` lists the nodes whose state drives the rates of `i` and
//! `receivers(j)` lists the nodes whose rates change when `j` changes state.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAX_REWIRE_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone)]
pub struct DirectedNetwork {
    n: usize,
    arcs: Vec<(usize, usize)>,
    senders: Vec<Vec<usize>>,
    receivers: Vec<Vec<usize>>,
}

impl PartialEq for DirectedNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.arcs == other.arcs
    }
}

impl Eq for DirectedNetwork {}

impl DirectedNetwork {
    /// Builds a network from arcs `(i, j)` ("j sends to i").
    ///
    /// Rejects `n == 0`, out-of-range indices, self-arcs and duplicates.
    pub fn new(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameters("network needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in arcs {
            if i >= n || j >= n {
                return Err(Error::InvalidParameters(format!(
                    "arc ({i}, {j}) out of range for n = {n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidParameters(format!("self-arc at node {i}")));
            }
            if !set.insert((i, j)) {
                return Err(Error::InvalidParameters(format!("duplicate arc ({i}, {j})")));
            }
        }
        Ok(Self::from_sorted(n, set.into_iter().collect()))
    }

    fn from_sorted(n: usize, arcs: Vec<(usize, usize)>) -> Self {
        let mut senders = vec![Vec::new(); n];
        let mut receivers = vec![Vec::new(); n];
        for &(i, j) in &arcs {
            senders[i].push(j);
            receivers[j].push(i);
        }
        Self { n, arcs, senders, receivers }
    }

    /// Emits every undirected edge as the two opposing arcs.
    pub fn from_undirected(n: usize, edges: &BTreeSet<(usize, usize)>) -> Result<Self> {
        Self::new(n, edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]))
    }

    /// Ring where every node talks to both neighbours.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameters("ring needs n >= 2".into()));
        }
        let edges: BTreeSet<_> = (0..n)
            .map(|i| (i, (i + 1) % n))
            .filter(|&(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        Self::from_undirected(n, &edges)
    }

    /// One-way cycle: node `i` sends to node `i + 1 (mod n)`.
    pub fn directed_cycle(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameters("cycle needs n >= 2".into()));
        }
        Self::new(n, (0..n).map(|j| ((j + 1) % n, j)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Arcs in lexicographic order.
    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.n && self.senders[i].binary_search(&j).is_ok()
    }

    /// Nodes `j` with `(i, j)` in the arc set, sorted.
    pub fn senders(&self, i: usize) -> &[usize] {
        &self.senders[i]
    }

    /// Nodes `i` with `(i, j)` in the arc set, sorted.
    pub fn receivers(&self, j: usize) -> &[usize] {
        &self.receivers[j]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.senders[i].len()
    }

    pub fn out_degree(&self, j: usize) -> usize {
        self.receivers[j].len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.arcs.iter().all(|&(i, j)| self.contains(j, i))
    }

    pub fn is_strongly_connected(&self) -> bool {
        let reach = |adj: &[Vec<usize>]| {
            let mut seen = vec![false; self.n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            let mut count = 1;
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        count += 1;
                        queue.push_back(v);
                    }
                }
            }
            count == self.n
        };
        reach(&self.receivers) && reach(&self.senders)
    }

    /// Moves node `k` to position `perm[k]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        Self::new(self.n, self.arcs.iter().map(|&(i, j)| (perm[i], perm[j])))
    }

    /// Mean hop distance over ordered pairs, following arc direction.
    /// `None` when some pair is unreachable.
    pub fn average_shortest_path_length(&self) -> Option<f64> {
        if self.n < 2 {
            return Some(0.0);
        }
        let mut total = 0u64;
        let mut dist = vec![usize::MAX; self.n];
        for src in 0..self.n {
            dist.fill(usize::MAX);
            dist[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.receivers[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            for &d in &dist {
                if d == usize::MAX {
                    return None;
                }
                total += d as u64;
            }
        }
        Some(total as f64 / (self.n * (self.n - 1)) as f64)
    }

    /// Canonical edge-list text: `n=<count>` then one `i j` line per arc.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(8 * (self.arcs.len() + 1));
        let _ = writeln!(out, "n={}", self.n);
        for &(i, j) in &self.arcs {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    /// Parses the edge-list format written by [`to_edge_list`](Self::to_edge_list).
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
        let mut n = None;
        let mut set = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some(count) = n else {
                let value = line
                    .strip_prefix("n=")
                    .ok_or_else(|| parse_err(line_no, "expected header \"n=<count>\"".into()))?;
                let count: usize = value
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad node count {value:?}")))?;
                if count == 0 {
                    return Err(parse_err(line_no, "node count must be at least 1".into()));
                }
                n = Some(count);
                continue;
            };
            let mut fields = line.split_whitespace();
            let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(parse_err(line_no, format!("malformed line {line:?}")));
            };
            let i: usize = a
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad index {a:?}")))?;
            let j: usize = b
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad index {b:?}")))?;
            if i >= count || j >= count {
                return Err(parse_err(line_no, format!("index out of range for n={count}")));
            }
            if i == j {
                return Err(parse_err(line_no, format!("self-arc at node {i}")));
            }
            if !set.insert((i, j)) {
                return Err(parse_err(line_no, format!("duplicate arc ({i}, {j})")));
            }
        }
        let n = n.ok_or_else(|| parse_err(0, "missing header \"n=<count>\"".into()))?;
        Ok(Self::from_sorted(n, set.into_iter().collect()))
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidDimensions { expected: n, found: perm.len() });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || core::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParameters("not a permutation".into()));
        }
    }
    Ok(())
}

/// Barabási–Albert preferential attachment grown from a clique on `m + 1`
/// nodes, symmetrized into arcs.
pub fn generate_scale_free(n: usize, m: usize, seed: u64) -> Result<DirectedNetwork> {
    if m == 0 || n < m + 1 {
        return Err(Error::InvalidParameters(format!(
            "scale-free generator needs m >= 1 and n >= m + 1 (n = {n}, m = {m})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BTreeSet::new();
    // Every edge endpoint once: sampling from this is degree-proportional.
    let mut pool = Vec::with_capacity(2 * m * n);
    for a in 0..=m {
        for b in (a + 1)..=m {
            edges.insert((a, b));
            pool.push(a);
            pool.push(b);
        }
    }
    let mut chosen = Vec::with_capacity(m);
    for v in (m + 1)..n {
        chosen.clear();
        while chosen.len() < m {
            let t = pool[rng.gen_range(0..pool.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            edges.insert((t, v));
            pool.push(t);
            pool.push(v);
        }
    }
    DirectedNetwork::from_undirected(n, &edges)
}

/// Watts–Strogatz ring rewiring, symmetrized into arcs. The whole
/// construction is redrawn until the result is strongly connected.
pub fn generate_small_world(n: usize, k: usize, p: f64, seed: u64) -> Result<DirectedNetwork> {
    if k < 2 || !k.is_multiple_of(2) || n <= k || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameters(format!(
            "small-world generator needs n > k >= 2, k even, 0 <= p <= 1 (n = {n}, k = {k}, p = {p})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = |a: usize, b: usize| (a.min(b), a.max(b));
    for _ in 0..MAX_REWIRE_ATTEMPTS {
        let mut edges = BTreeSet::new();
        for i in 0..n {
            for step in 1..=k / 2 {
                edges.insert(norm(i, (i + step) % n));
            }
        }
        for step in 1..=k / 2 {
            for i in 0..n {
                if rng.gen::<f64>() >= p {
                    continue;
                }
                let old = norm(i, (i + step) % n);
                if !edges.contains(&old) {
                    continue;
                }
                let candidates: Vec<usize> = (0..n)
                    .filter(|&w| w != i && !edges.contains(&norm(i, w)))
                    .collect();
                if let Some(&w) = candidates.choose(&mut rng) {
                    edges.remove(&old);
                    edges.insert(norm(i, w));
                }
            }
        }
        let net = DirectedNetwork::from_undirected(n, &edges)?;
        if net.is_strongly_connected() {
            return Ok(net);
        }
    }
    Err(Error::Numeric("small-world rewiring never produced a connected graph".into()))
}

/// Symmetrized Erdős–Rényi graph, redrawn until strongly connected.
pub fn generate_random(n: usize, p: f64, seed: u64) -> Result<DirectedNetwork> {
    if n < 2 || !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameters(format!(
            "random generator needs n >= 2 and 0 < p <= 1 (n = {n}, p = {p})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REWIRE_ATTEMPTS {
        let mut edges = BTreeSet::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.gen::<f64>() < p {
                    edges.insert((a, b));
                }
            }
        }
        let net = DirectedNetwork::from_undirected(n, &edges)?;
        if net.is_strongly_connected() {
            return Ok(net);
        }
    }
    Err(Error::Numeric("random graph never came out connected; raise p".into()))
}

/// Tarjan's algorithm over an adjacency list. Components are returned in
/// reverse topological order of the condensation.
pub(crate) fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if *edge == 0 && index[v] == usize::MAX {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*edge) {
                *edge += 1;
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

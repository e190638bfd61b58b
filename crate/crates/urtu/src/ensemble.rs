//! Ensembles spread over the rayon thread pool.

use rayon::prelude::*;
use urtu_core::stochastic::{EnsembleCounts, GillespieEngine, InitPolicy};
use urtu_core::{RateFamily, Trajectory};

use crate::error::{Error, Result};

/// Paths per work unit. Path `k` always uses stream `k` of the master seed,
/// so the chunk size only affects scheduling.
const CHUNK: u64 = 64;

/// Same result as [`urtu_core::stochastic::ensemble_average`], computed in
/// parallel. Counts are integers, so merging is exact in any order.
pub fn parallel_ensemble(
    fam: &RateFamily<'_>,
    init: &InitPolicy,
    grid: &[f64],
    m: u64,
    seed: u64,
) -> Result<Trajectory> {
    if m == 0 {
        return Err(Error::Invalid("ensemble needs at least one path".into()));
    }
    let n = fam.params().n();
    let chunks: Vec<u64> = (0..m.div_ceil(CHUNK)).collect();
    let partials = chunks
        .par_iter()
        .map(|&c| {
            let mut counts = EnsembleCounts::new(n, grid)?;
            let mut engine = GillespieEngine::new(fam);
            counts.run_paths(&mut engine, init, seed, c * CHUNK..((c + 1) * CHUNK).min(m))?;
            Ok(counts)
        })
        .collect::<std::result::Result<Vec<_>, urtu_core::Error>>()?;
    let mut total = EnsembleCounts::new(n, grid)?;
    for part in &partials {
        total.merge(part)?;
    }
    Ok(total.into_trajectory())
}

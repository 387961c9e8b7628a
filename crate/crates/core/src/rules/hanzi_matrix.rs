use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rows_to_strings;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::pools::{HanziEntry, MaterialSet};
use crate::seed::RandomStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HanziMatrixRule {
    pub grid: GridSpec,
    /// One string of `n` characters per row.
    pub cells: Vec<String>,
    pub unique_count: u32,
}

/// Number of distinct characters for a grid: uniform in [2, min(n², available)].
pub fn draw_unique_count(grid: &GridSpec, available: usize, rng: &mut RandomStream) -> Result<u32> {
    let hi = grid.cells().min(available);
    if hi < 2 {
        return Err(Error::InsufficientEntries {
            requested: 2,
            available,
        });
    }
    Ok(rng.random_range(2..=hi) as u32)
}

/// Multiplicities come from a uniformly random composition of n² into m
/// positive parts (m − 1 distinct cut points among n² − 1 gaps); the
/// resulting multiset is shuffled over the cells.
pub fn design_hanzi_matrix(
    materials: &MaterialSet<HanziEntry>,
    grid: &GridSpec,
    rng: &mut RandomStream,
) -> Result<HanziMatrixRule> {
    let total = grid.cells();
    let m = materials.items.len();
    if m < 2 || m > total {
        return Err(Error::InvalidParameter(format!(
            "{m} distinct characters cannot fill a {0}x{0} grid with every character used",
            grid.n
        )));
    }
    let mut cuts: Vec<usize> = index::sample(rng, total - 1, m - 1).into_iter().map(|c| c + 1).collect();
    cuts.sort_unstable();
    let mut bounds = Vec::with_capacity(m + 1);
    bounds.push(0);
    bounds.extend(cuts);
    bounds.push(total);
    let mut flat: Vec<char> = Vec::with_capacity(total);
    for (k, w) in bounds.windows(2).enumerate() {
        flat.extend(std::iter::repeat_n(materials.items[k].ch, w[1] - w[0]));
    }
    flat.shuffle(rng);
    let rows: Vec<Vec<char>> = flat.chunks(grid.n as usize).map(|c| c.to_vec()).collect();
    Ok(HanziMatrixRule {
        grid: *grid,
        cells: rows_to_strings(&rows),
        unique_count: m as u32,
    })
}

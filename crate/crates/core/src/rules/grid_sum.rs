use serde::{Deserialize, Serialize};

use crate::decimal::Decimal;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::pools::{sample_numbers, Precision, SignMode};
use crate::seed::RandomStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSumRule {
    pub grid: GridSpec,
    pub values: Vec<Vec<Decimal>>,
    pub sign_mode: SignMode,
    pub precision: Precision,
    pub sum: Decimal,
}

pub fn exact_sum<'a>(values: impl IntoIterator<Item = &'a Decimal>, places: u8) -> Result<Decimal> {
    values
        .into_iter()
        .try_fold(Decimal::zero(places), |acc, v| acc.checked_add(*v))
        .ok_or_else(|| Error::InvalidParameter("grid sum overflow".into()))
}

pub fn design_grid_sum(grid: &GridSpec, sign: SignMode, precision: Precision, rng: &mut RandomStream) -> Result<GridSumRule> {
    let flat = sample_numbers(sign, precision, grid.cells(), rng);
    let sum = exact_sum(&flat, precision.places())?;
    Ok(GridSumRule {
        grid: *grid,
        values: flat.chunks(grid.n as usize).map(|c| c.to_vec()).collect(),
        sign_mode: sign,
        precision,
        sum,
    })
}

//! Puzzle rule design.
//!
//! Each designer takes sampled material and a stream and emits a rule record
//! that fixes the layout, the target and the uniquely determined answer. The
//! rule alone is enough to re-derive the answer (see [`verify`]).

mod diff_hunt;
mod grid_sum;
mod hanzi_matrix;
mod icon_connect;
mod jigsaw;
pub mod verify;
mod word_search;

use serde::{Deserialize, Serialize};

pub use diff_hunt::{
    apply_distortions, check_regions, design_difference_hunt, distort_region, region_mean_abs_diff, DiffHuntRule,
    DiffHuntSchedule, DistortionKind, DistortionParams, DistortionRegion, LevelParams, DETECTABILITY_FLOOR, LEVELS,
    MAX_PLACEMENTS, REGIONS_MAX, REGIONS_MIN,
};
pub use grid_sum::{design_grid_sum, GridSumRule};
pub use hanzi_matrix::{design_hanzi_matrix, draw_unique_count, HanziMatrixRule};
pub use icon_connect::{design_icon_connect, icon_materials_needed, IconConnectRule, IconPlacement, Run, TINT_PALETTE};
pub use jigsaw::{
    boundaries_from_cuts, design_jigsaw, max_jitter, mean_abs_diff_window, regular_cuts, JigsawRule, Segmentation,
    DISTINCTNESS_FLOOR, JITTER_FRACTION, MIN_TILE_PX,
};
pub use verify::{verify_rule, Check, RuleReport};
pub use word_search::{design_word_search, scan_word, Placement, WordSearchRule, WORD_SEARCH_ATTEMPTS};

use crate::sample::GroundTruth;
use crate::seed::TaskId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Row,
    Col,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    CountConsecutive,
    CountUnique,
    ContainsWord,
    SumValues,
    MissingTile,
    CountDifferences,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleTarget {
    pub task: TaskId,
    pub objective: Objective,
}

impl PuzzleTarget {
    pub fn for_task(task: TaskId) -> Self {
        let objective = match task {
            TaskId::IconConnect => Objective::CountConsecutive,
            TaskId::HanziMatrix => Objective::CountUnique,
            TaskId::WordSearch => Objective::ContainsWord,
            TaskId::GridSum => Objective::SumValues,
            TaskId::Jigsaw => Objective::MissingTile,
            TaskId::DifferenceHunt => Objective::CountDifferences,
        };
        Self { task, objective }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task")]
pub enum PuzzleRule {
    IconConnect(IconConnectRule),
    HanziMatrix(HanziMatrixRule),
    WordSearch(WordSearchRule),
    GridSum(GridSumRule),
    Jigsaw(JigsawRule),
    DifferenceHunt(DiffHuntRule),
}

impl PuzzleRule {
    pub fn task(&self) -> TaskId {
        match self {
            PuzzleRule::IconConnect(_) => TaskId::IconConnect,
            PuzzleRule::HanziMatrix(_) => TaskId::HanziMatrix,
            PuzzleRule::WordSearch(_) => TaskId::WordSearch,
            PuzzleRule::GridSum(_) => TaskId::GridSum,
            PuzzleRule::Jigsaw(_) => TaskId::Jigsaw,
            PuzzleRule::DifferenceHunt(_) => TaskId::DifferenceHunt,
        }
    }

    /// The answer recorded at design time.
    pub fn ground_truth(&self) -> GroundTruth {
        match self {
            PuzzleRule::IconConnect(r) => GroundTruth::Count(r.run.length),
            PuzzleRule::HanziMatrix(r) => GroundTruth::Count(r.unique_count),
            PuzzleRule::WordSearch(r) => GroundTruth::YesNo(r.present),
            PuzzleRule::GridSum(r) => GroundTruth::Sum(r.sum),
            PuzzleRule::Jigsaw(r) => GroundTruth::TileId(r.missing_index),
            PuzzleRule::DifferenceHunt(r) => GroundTruth::Count(r.m),
        }
    }
}

pub(crate) fn rows_to_strings(rows: &[Vec<char>]) -> Vec<String> {
    rows.iter().map(|r| r.iter().collect()).collect()
}

pub(crate) fn strings_to_rows(rows: &[String]) -> Vec<Vec<char>> {
    rows.iter().map(|r| r.chars().collect()).collect()
}

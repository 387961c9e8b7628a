//! Image-free re-derivation of every rule's answer and invariants.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{
    max_jitter, regular_cuts, scan_word, strings_to_rows, DiffHuntRule, GridSumRule, HanziMatrixRule, IconConnectRule,
    JigsawRule, Orientation, PuzzleRule, Segmentation, WordSearchRule, MIN_TILE_PX, REGIONS_MAX, REGIONS_MIN,
};
use crate::decimal::Decimal;
use crate::grid::GridSpec;
use crate::pools::SignMode;
use crate::sample::GroundTruth;
use crate::seed::TaskId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleReport {
    pub task: TaskId,
    pub checks: Vec<Check>,
    /// Answer recomputed from the layout, when the layout was readable.
    pub derived: Option<GroundTruth>,
}

impl RuleReport {
    fn new(task: TaskId) -> Self {
        Self {
            task,
            checks: Vec::new(),
            derived: None,
        }
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl FnOnce() -> String) -> bool {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: if passed { String::new() } else { detail() },
        });
        passed
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Appends a check comparing the derived answer with a stored one.
    pub fn check_answer(&mut self, stored: &GroundTruth) {
        let derived = self.derived.clone();
        self.check("answer matches", derived.as_ref() == Some(stored), || {
            format!("stored {stored:?}, derived {derived:?}")
        });
    }
}

pub fn verify_rule(rule: &PuzzleRule) -> RuleReport {
    let mut report = RuleReport::new(rule.task());
    match rule {
        PuzzleRule::IconConnect(r) => icon_connect(r, &mut report),
        PuzzleRule::HanziMatrix(r) => hanzi_matrix(r, &mut report),
        PuzzleRule::WordSearch(r) => word_search(r, &mut report),
        PuzzleRule::GridSum(r) => grid_sum(r, &mut report),
        PuzzleRule::Jigsaw(r) => jigsaw(r, &mut report),
        PuzzleRule::DifferenceHunt(r) => diff_hunt(r, &mut report),
    }
    let stored = rule.ground_truth();
    report.check_answer(&stored);
    report
}

fn grid_ok(grid: &GridSpec, report: &mut RuleReport) -> bool {
    report.check("grid spec", GridSpec::new(grid.n, grid.resolution).is_ok(), || format!("{grid:?}"))
}

fn square<T>(rows: &[Vec<T>], n: usize) -> bool {
    rows.len() == n && rows.iter().all(|r| r.len() == n)
}

fn icon_connect(r: &IconConnectRule, report: &mut RuleReport) {
    if !grid_ok(&r.grid, report) {
        return;
    }
    let n = r.grid.n;
    let m = r.run.length;
    report.check("run length in [2, n]", (2..=n).contains(&m), || format!("m = {m}, n = {n}"));
    let fits = r.run.line < n && r.run.start + m <= n;
    if !report.check("run inside grid", fits, || format!("{:?}", r.run)) {
        return;
    }
    if !report.check("filler shape", square(&r.filler, n as usize), || "filler is not n x n".into()) {
        return;
    }
    let mut holes_ok = true;
    let mut seen = HashSet::new();
    let mut distinct = true;
    let mut target_in_filler = false;
    for row in 0..n {
        for col in 0..n {
            let cell = &r.filler[row as usize][col as usize];
            holes_ok &= cell.is_none() == r.run.contains(row, col);
            if let Some(p) = cell {
                target_in_filler |= p.id == r.target_icon.id;
                distinct &= seen.insert(p.id.as_str());
            }
        }
    }
    report.check("filler empty exactly on run", holes_ok, String::new);
    report.check("target outside run", !target_in_filler, || "target icon appears in a filler cell".into());
    report.check("fillers distinct", distinct, || "a filler icon repeats".into());

    // Brute-force rescan of the composed grid.
    let id_at = |row: u32, col: u32| r.cell(row, col).map(|p| p.id.as_str());
    let target = Some(r.target_icon.id.as_str());
    let total = (0..n).flat_map(|row| (0..n).map(move |col| (row, col))).filter(|&(a, b)| id_at(a, b) == target).count();
    let mut longest = 0;
    for line in 0..n {
        for orient in [Orientation::Row, Orientation::Col] {
            let mut cur = 0;
            for k in 0..n {
                let (row, col) = match orient {
                    Orientation::Row => (line, k),
                    Orientation::Col => (k, line),
                };
                cur = if id_at(row, col) == target { cur + 1 } else { 0 };
                longest = longest.max(cur);
            }
        }
    }
    report.check("target count equals longest run", total == longest, || {
        format!("{total} target cells, longest run {longest}")
    });
    report.derived = Some(GroundTruth::Count(longest as u32));
}

fn hanzi_matrix(r: &HanziMatrixRule, report: &mut RuleReport) {
    if !grid_ok(&r.grid, report) {
        return;
    }
    let rows = strings_to_rows(&r.cells);
    if !report.check("cells shape", square(&rows, r.grid.n as usize), || "cells are not n x n".into()) {
        return;
    }
    let distinct: BTreeSet<char> = rows.iter().flatten().copied().collect();
    report.check("at least two characters", distinct.len() >= 2, || format!("{}", distinct.len()));
    report.derived = Some(GroundTruth::Count(distinct.len() as u32));
}

fn word_search(r: &WordSearchRule, report: &mut RuleReport) {
    if !grid_ok(&r.grid, report) {
        return;
    }
    let n = r.grid.n as usize;
    let rows = r.letter_rows();
    if !report.check("letters shape", square(&rows, n), || "letters are not n x n".into()) {
        return;
    }
    report.check("letters A-Z", rows.iter().flatten().all(|c| c.is_ascii_uppercase()), String::new);
    let len = r.target_word.chars().count();
    report.check("word fits", (1..=n).contains(&len), || format!("{} letters, n = {n}", len));
    let hits = scan_word(&rows, &r.target_word);
    match (&r.placement, r.present) {
        (Some(p), true) => {
            report.check("placement spells word", hits.contains(p), || format!("{p:?}"));
        }
        (None, false) => {}
        _ => {
            report.check("placement matches presence", false, || "placement and present disagree".into());
        }
    }
    report.derived = Some(GroundTruth::YesNo(!hits.is_empty()));
}

fn grid_sum(r: &GridSumRule, report: &mut RuleReport) {
    if !grid_ok(&r.grid, report) {
        return;
    }
    if !report.check("values shape", square(&r.values, r.grid.n as usize), || "values are not n x n".into()) {
        return;
    }
    let places = r.precision.places();
    let bound = Decimal::from_int(100);
    let neg_bound = Decimal::from_int(-100);
    let mut in_range = true;
    let mut precise = true;
    let mut signed = true;
    for v in r.values.iter().flatten() {
        in_range &= v.value_cmp(&bound).is_le() && v.value_cmp(&neg_bound).is_ge();
        precise &= v.places == places;
        signed &= match r.sign_mode {
            SignMode::Positive => v.units > 0,
            SignMode::Negative => v.units < 0,
            SignMode::Mixed => true,
        };
    }
    report.check("values in [-100, 100]", in_range, String::new);
    report.check("values at rule precision", precise, String::new);
    report.check("values match sign mode", signed, String::new);
    // Re-sum directly in i128 units rather than via the designer's helper.
    let total: i128 = r.values.iter().flatten().map(|v| v.units as i128).sum();
    if report.check("sum fits", precise && i64::try_from(total).is_ok(), String::new) {
        report.derived = Some(GroundTruth::Sum(Decimal::new(total as i64, places)));
    }
}

/// Interior cut positions along one axis, read off the tile rectangles.
fn axis_cuts(r: &JigsawRule, horizontal: bool) -> Vec<u32> {
    let n = r.n as usize;
    (1..n)
        .map(|k| {
            let b = if horizontal { &r.boundaries[k] } else { &r.boundaries[k * n] };
            if horizontal {
                b.x
            } else {
                b.y
            }
        })
        .collect()
}

fn jigsaw(r: &JigsawRule, report: &mut RuleReport) {
    let n = r.n as usize;
    let res = r.resolution;
    if !report.check("tile count", r.boundaries.len() == n * n && n >= 2, || {
        format!("{} tiles for n = {n}", r.boundaries.len())
    }) {
        return;
    }
    let inside = r.boundaries.iter().all(|b| b.fits_within(res, res));
    let area: u64 = r.boundaries.iter().map(|b| b.area()).sum();
    let mut disjoint = true;
    for (i, a) in r.boundaries.iter().enumerate() {
        for b in &r.boundaries[i + 1..] {
            disjoint &= !a.intersects(b);
        }
    }
    let partition = inside && disjoint && area == res as u64 * res as u64;
    report.check("tiles partition image", partition, || {
        format!("inside {inside}, disjoint {disjoint}, area {area}")
    });
    let xs = axis_cuts(r, true);
    let ys = axis_cuts(r, false);
    let rebuilt = super::boundaries_from_cuts(&xs, &ys, res);
    report.check("tiles form a grid", rebuilt == r.boundaries, String::new);
    let min_side = r.boundaries.iter().map(|b| b.w.min(b.h)).min().unwrap_or(0);
    match r.segmentation {
        Segmentation::Regular => {
            let cuts = regular_cuts(res, r.n);
            report.check("regular cuts", xs == cuts && ys == cuts, String::new);
        }
        Segmentation::Random => {
            let reg = regular_cuts(res, r.n);
            let j = max_jitter(res, r.n);
            let within = xs.iter().chain(&ys).zip(reg.iter().chain(&reg)).all(|(&c, &g)| c.abs_diff(g) <= j);
            report.check("cut jitter within bound", within, String::new);
            report.check("tiles at least minimum size", min_side >= MIN_TILE_PX, || format!("{min_side} px"));
        }
    }
    let tiles = n * n;
    let mut options = r.distractor_indices.clone();
    options.push(r.missing_index);
    let distinct: BTreeSet<usize> = options.iter().copied().collect();
    let options_ok = r.distractor_indices.len() == 3 && distinct.len() == 4 && options.iter().all(|&t| t < tiles);
    report.check("three distinct distractors", options_ok, || format!("{options:?}"));
    if r.missing_index < tiles {
        report.derived = Some(GroundTruth::TileId(r.missing_index));
    }
}

fn diff_hunt(r: &DiffHuntRule, report: &mut RuleReport) {
    let res = r.resolution;
    let m = r.regions.len() as u32;
    report.check("region count in [2, 8]", (REGIONS_MIN..=REGIONS_MAX).contains(&m), || format!("{m}"));
    report.check("region count recorded", r.m == m, || format!("m = {}, regions = {m}", r.m));
    let mut separated = true;
    for (i, a) in r.regions.iter().enumerate() {
        for b in &r.regions[i + 1..] {
            separated &= !a.rect.touches(&b.rect);
        }
    }
    report.check("regions inside image", r.regions.iter().all(|g| g.rect.fits_within(res, res)), String::new);
    report.check("regions pairwise disjoint", separated, String::new);
    match r.schedule.level(r.level, res) {
        Ok(lp) => {
            let sized = r.regions.iter().all(|g| {
                (lp.side_min..=lp.side_max).contains(&g.rect.w) && (lp.side_min..=lp.side_max).contains(&g.rect.h)
            });
            report.check("region sides follow schedule", sized, || {
                format!("expected [{}, {}] at level {}", lp.side_min, lp.side_max, r.level)
            });
            let intense = r.regions.iter().all(|g| g.intensity == lp.intensity);
            report.check("intensity follows schedule", intense, String::new);
        }
        Err(e) => {
            report.check("level in schedule", false, || e.to_string());
        }
    }
    report.derived = Some(GroundTruth::Count(m));
}

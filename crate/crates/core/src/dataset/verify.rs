use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{collect_files, procedural_source, read_snapshot, Assets, DatasetConfig, IMAGES_DIR};
use crate::error::{Error, Result};
use crate::qaformat::{derive_options, parse_tile_text, OptionMode, PromptTemplates};
use crate::render::{apply_distortions, crop, read_png, MISSING_TILE_FILL};
use crate::rules::{
    mean_abs_diff_window, region_mean_abs_diff, verify_rule, DiffHuntRule, JigsawRule, PuzzleRule,
    DETECTABILITY_FLOOR, DISTINCTNESS_FLOOR,
};
use crate::sample::{read_manifest, PuzzleSample, MANIFEST_FILE};
use crate::seed::TaskId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub id: String,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub total: usize,
    pub passed: usize,
    pub failures: Vec<SampleFailure>,
    /// Files under `images/` that no sample references.
    pub orphans: Vec<String>,
    /// Whether grid images were re-rendered and compared.
    pub rendered: bool,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total && self.orphans.is_empty()
    }
}

/// Checks every record of the dataset at `dir`: rule re-derivation, stored
/// answer and options, and pixel-level checks on the referenced images.
pub fn verify_dataset(dir: &Path) -> Result<VerifyReport> {
    let manifest = dir.join(MANIFEST_FILE);
    if !manifest.is_file() {
        return Err(Error::ManifestMissing(dir.to_path_buf()));
    }
    let samples = read_manifest(&manifest)?;
    let snapshot = read_snapshot(dir).ok();
    let templates = snapshot.as_ref().map(|s| s.config.templates.clone()).unwrap_or_default();
    // Re-rendering needs the generating assets; skip it when they are gone.
    let assets = snapshot.as_ref().and_then(|s| match Assets::load(&s.config) {
        Ok(a) => Some(a),
        Err(e) => {
            log::warn!("grid images will not be re-rendered: {e}");
            None
        }
    });
    let config = snapshot.as_ref().map(|s| &s.config);
    let failures: Vec<SampleFailure> = samples
        .par_iter()
        .filter_map(|s| {
            let reasons = check_sample(dir, s, &templates, assets.as_ref(), config);
            (!reasons.is_empty()).then(|| SampleFailure {
                id: s.id.clone(),
                reasons,
            })
        })
        .collect();

    let referenced: BTreeSet<&str> = samples.iter().flat_map(|s| s.image_refs.iter().map(String::as_str)).collect();
    let mut files = Vec::new();
    let images = dir.join(IMAGES_DIR);
    if images.is_dir() {
        collect_files(dir, &images, &mut files)?;
    }
    let orphans = files.into_iter().filter(|f| !referenced.contains(f.as_str())).collect();
    Ok(VerifyReport {
        total: samples.len(),
        passed: samples.len() - failures.len(),
        failures,
        orphans,
        rendered: assets.is_some(),
    })
}

fn check_sample(
    dir: &Path,
    s: &PuzzleSample,
    templates: &PromptTemplates,
    assets: Option<&Assets>,
    config: Option<&DatasetConfig>,
) -> Vec<String> {
    let mut reasons = Vec::new();
    let report = verify_rule(&s.rule);
    reasons.extend(report.failures().map(|c| format!("{}: {}", c.name, c.detail)));
    if report.derived.as_ref() != Some(&s.ground_truth) {
        reasons.push(format!("ground truth {:?} but rule gives {:?}", s.ground_truth, report.derived));
    }
    if s.task != s.rule.task() {
        reasons.push("task does not match rule".into());
    }
    if s.question != templates.build_question(&s.rule) {
        reasons.push("question does not match rule".into());
    }
    if let Some(cfg) = config {
        if s.options.as_ref().map(|o| o.mode) != Some(cfg.mode) {
            reasons.push("option mode differs from dataset mode".into());
        }
    }
    check_options(s, &mut reasons);
    if let Err(e) = check_images(dir, s, assets, &mut reasons) {
        reasons.push(e.to_string());
    }
    reasons
}

fn check_options(s: &PuzzleSample, reasons: &mut Vec<String>) {
    let Some(opts) = &s.options else {
        reasons.push("options missing".into());
        return;
    };
    if opts.mode == OptionMode::DirectAnswer {
        if s.task == TaskId::Jigsaw {
            reasons.push("Jigsaw sample in direct mode".into());
        }
        if !opts.entries.is_empty() || opts.correct_label.is_some() {
            reasons.push("direct sample carries options".into());
        }
        return;
    }
    let values = derive_options(&s.rule);
    let shown: BTreeSet<&str> = opts.entries.values().map(String::as_str).collect();
    let expected: BTreeSet<&str> = values.values.iter().map(String::as_str).collect();
    if shown != expected || opts.entries.len() != values.values.len() {
        reasons.push(format!("option set {shown:?}, expected {expected:?}"));
    }
    let matching: Vec<&String> = opts.entries.iter().filter(|(_, v)| *v == values.correct_value()).map(|(k, _)| k).collect();
    if matching.len() != 1 || opts.correct_label.as_ref() != matching.first().copied() {
        reasons.push(format!("correct label {:?} does not hold the answer", opts.correct_label));
    }
    if opts.mode == OptionMode::FixedOption {
        let ok = match s.task {
            TaskId::WordSearch => opts.entries.get("A").map(String::as_str) == Some("Yes"),
            _ => opts.correct_label.as_deref() == Some("B"),
        };
        if !ok {
            reasons.push("fixed-option position violated".into());
        }
    }
}

fn check_images(dir: &Path, s: &PuzzleSample, assets: Option<&Assets>, reasons: &mut Vec<String>) -> Result<()> {
    for r in &s.image_refs {
        if !dir.join(r).is_file() {
            reasons.push(format!("missing image {r}"));
            return Ok(());
        }
    }
    let expected_refs = match s.task {
        TaskId::DifferenceHunt => 2,
        TaskId::Jigsaw => 5,
        _ => 1,
    };
    if s.image_refs.len() != expected_refs {
        reasons.push(format!("{} image refs, expected {expected_refs}", s.image_refs.len()));
        return Ok(());
    }
    match &s.rule {
        PuzzleRule::Jigsaw(r) => check_jigsaw(dir, s, r, reasons),
        PuzzleRule::DifferenceHunt(r) => check_diff_hunt(dir, s, r, reasons),
        rule => {
            if let Some(a) = assets {
                let stored = read_png(&dir.join(&s.image_refs[0]))?;
                if stored != a.renderer.render_grid(rule)? {
                    reasons.push("grid image differs from a fresh render of the rule".into());
                }
            }
            Ok(())
        }
    }
}

fn check_jigsaw(dir: &Path, s: &PuzzleSample, r: &JigsawRule, reasons: &mut Vec<String>) -> Result<()> {
    let incomplete = read_png(&dir.join(&s.image_refs[0]))?;
    if incomplete.dimensions() != (r.resolution, r.resolution) {
        reasons.push("incomplete image has wrong size".into());
        return Ok(());
    }
    let Some(&hole) = r.boundaries.get(r.missing_index) else {
        return Ok(());
    };
    let gray = (hole.y..hole.bottom())
        .all(|y| (hole.x..hole.right()).all(|x| incomplete.get_pixel(x, y).0 == MISSING_TILE_FILL));
    if !gray {
        reasons.push("missing tile is not filled mid-gray".into());
    }
    let opts = s.options.as_ref().map(|o| o.entries.values().cloned().collect::<Vec<_>>()).unwrap_or_default();
    let mut tiles = Vec::new();
    for (k, text) in opts.iter().enumerate() {
        let Some(idx) = parse_tile_text(text).filter(|&t| t < r.boundaries.len()) else {
            reasons.push(format!("unreadable tile option {text:?}"));
            return Ok(());
        };
        let tile = read_png(&dir.join(&s.image_refs[k + 1]))?;
        let b = r.boundaries[idx];
        if tile.dimensions() != (b.w, b.h) {
            reasons.push(format!("tile {k} has wrong size"));
            return Ok(());
        }
        tiles.push((idx, tile));
    }
    // Rebuild the source by pasting the correct tile into the hole.
    let Some((_, correct)) = tiles.iter().find(|(i, _)| *i == r.missing_index) else {
        reasons.push("missing tile is not among the options".into());
        return Ok(());
    };
    let mut source = incomplete.clone();
    image::imageops::replace(&mut source, correct, hole.x as i64, hole.y as i64);
    for (idx, tile) in &tiles {
        if crop(&source, &r.boundaries[*idx]) != *tile {
            reasons.push(format!("tile {idx} does not match the image"));
        }
    }
    if let Some(original) = procedural_source(&r.source_image, r.resolution) {
        if original != source {
            reasons.push("reconstruction differs from the procedural source".into());
        }
    }
    let whole = |i: usize| crate::grid::PixelRect::new(0, 0, r.boundaries[i].w, r.boundaries[i].h);
    for (idx, tile) in &tiles {
        if *idx == r.missing_index {
            continue;
        }
        let d = mean_abs_diff_window(correct, &whole(r.missing_index), tile, &whole(*idx));
        if d < DISTINCTNESS_FLOOR {
            reasons.push(format!("distractor tile {idx} too similar ({d:.3})"));
        }
    }
    Ok(())
}

fn check_diff_hunt(dir: &Path, s: &PuzzleSample, r: &DiffHuntRule, reasons: &mut Vec<String>) -> Result<()> {
    let original = read_png(&dir.join(&s.image_refs[0]))?;
    let pair = read_png(&dir.join(&s.image_refs[1]))?;
    if original.dimensions() != (r.resolution, r.resolution) || pair.dimensions() != original.dimensions() {
        reasons.push("difference images have wrong size".into());
        return Ok(());
    }
    if let Some(src) = procedural_source(&r.source_image, r.resolution) {
        if src != original {
            reasons.push("original differs from the procedural source".into());
        }
    }
    let mut outside = 0usize;
    for (x, y, p) in original.enumerate_pixels() {
        if p != pair.get_pixel(x, y) && !r.regions.iter().any(|g| g.rect.contains(x, y)) {
            outside += 1;
        }
    }
    if outside > 0 {
        reasons.push(format!("{outside} changed pixels outside declared regions"));
    }
    for (k, g) in r.regions.iter().enumerate() {
        let d = region_mean_abs_diff(&original, &pair, &g.rect);
        if d < DETECTABILITY_FLOOR {
            reasons.push(format!("region {k} below detectability floor ({d:.3})"));
        }
    }
    match apply_distortions(&original, r) {
        Ok(expected) if expected == pair => {}
        Ok(_) => reasons.push("pair differs from re-applied distortions".into()),
        Err(e) => reasons.push(e.to_string()),
    }
    Ok(())
}

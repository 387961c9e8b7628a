//! Dataset assembly, persistence and verification.
//!
//! A dataset directory holds `manifest.jsonl`, `images/{task}/*.png`,
//! `rejections.log` and `config.snapshot`. Nothing in it depends on the
//! output path, wall-clock time or worker count.

mod config;
mod verify;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{assets_dir, default_font, DatasetConfig, DifficultyConfig, PoolPaths, RefreshConfig, TaskCounts};
pub use verify::{verify_dataset, SampleFailure, VerifyReport};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::pools::scene::synthesize_scene;
use crate::pools::{
    load_hanzi_pool, load_icon_pool, load_image_pool, load_word_pool, sample_materials, ColorMode, Constraint,
    HanziPool, IconPool, ImagePool, Precision, SamplingCondition, SignMode, WordPool,
};
use crate::qaformat::{arrange_options, derive_options, parse_tile_text, OptionMode};
use crate::render::{apply_distortions, load_source_image, split_tiles, write_png, Renderer};
use crate::rules::{
    design_difference_hunt, design_grid_sum, design_hanzi_matrix, design_icon_connect, design_jigsaw,
    design_word_search, draw_unique_count, icon_materials_needed, PuzzleRule, Segmentation,
};
use crate::sample::{sample_id, sort_canonical, write_manifest, Difficulty, PuzzleSample, MANIFEST_FILE};
use crate::seed::{RandomStream, SeedContext, TaskId};

pub const IMAGES_DIR: &str = "images";
pub const REJECTIONS_FILE: &str = "rejections.log";
pub const SNAPSHOT_FILE: &str = "config.snapshot";
/// Prefix of source ids whose image is synthesized from the id itself.
pub const PROCEDURAL_PREFIX: &str = "procedural-";

/// Loaded pools plus the renderer, shared read-only by all workers.
pub struct Assets {
    pub icons: IconPool,
    pub hanzi: HanziPool,
    pub words: WordPool,
    pub images: Option<ImagePool>,
    pub renderer: Renderer,
}

impl Assets {
    pub fn load(cfg: &DatasetConfig) -> Result<Self> {
        let icons = load_icon_pool(&cfg.pools.icons)?;
        let hanzi = load_hanzi_pool(&cfg.pools.hanzi)?;
        let words = load_word_pool(&cfg.pools.words)?;
        let images = match &cfg.pools.images {
            Some(dir) => Some(load_image_pool(dir, cfg.pools.image_captions.as_deref())?),
            None => None,
        };
        let renderer = Renderer::new(cfg.style.clone(), Some(&icons))?;
        renderer.check_coverage(hanzi.entries.iter().map(|h| h.ch))?;
        renderer.check_coverage("ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-.".chars())?;
        Ok(Self {
            icons,
            hanzi,
            words,
            images,
            renderer,
        })
    }

    fn pool_hashes(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("icons".to_string(), self.icons.content_hash.clone());
        m.insert("hanzi".to_string(), self.hanzi.content_hash.clone());
        m.insert("words".to_string(), self.words.content_hash.clone());
        if let Some(p) = &self.images {
            m.insert("images".to_string(), p.content_hash.clone());
        }
        m
    }
}

/// A sample together with the images it references.
pub struct BuiltSample {
    pub sample: PuzzleSample,
    pub images: Vec<(String, RgbImage)>,
}

fn pick<T: Copy>(items: &[T], rng: &mut RandomStream) -> T {
    items[rng.random_range(0..items.len())]
}

fn image_ref(task: TaskId, id: &str, suffix: &str) -> String {
    format!("{IMAGES_DIR}/{task}/{id}{suffix}.png")
}

/// Word Search presence by index: spreads positives evenly so any prefix of
/// `k` indices holds `floor(k * rate)` positives.
pub fn word_search_present(index: u64, rate: f64) -> bool {
    ((index + 1) as f64 * rate).floor() > (index as f64 * rate).floor()
}

pub fn procedural_source_id(seed: u64) -> String {
    format!("{PROCEDURAL_PREFIX}{seed:016x}")
}

/// Regenerates a procedural source image from its id.
pub fn procedural_source(id: &str, resolution: u32) -> Option<RgbImage> {
    let hex = id.strip_prefix(PROCEDURAL_PREFIX)?;
    let seed = u64::from_str_radix(hex, 16).ok()?;
    Some(synthesize_scene(&mut RandomStream::from_seed_u64(seed), resolution))
}

struct Source {
    id: String,
    caption: Option<String>,
    image: RgbImage,
}

fn draw_source(assets: &Assets, resolution: u32, rng: &mut RandomStream) -> Result<Source> {
    match &assets.images {
        Some(pool) => {
            let cond = SamplingCondition::new(1, Constraint::Image { category: None })?;
            let set = sample_materials(pool, &cond, rng)?;
            let entry = &set.items[0];
            Ok(Source {
                id: entry.id.clone(),
                caption: entry.caption.clone(),
                image: load_source_image(&entry.path, resolution)?,
            })
        }
        None => {
            let seed: u64 = rng.random();
            let id = procedural_source_id(seed);
            let image = procedural_source(&id, resolution).expect("procedural id round-trips");
            Ok(Source {
                id,
                caption: None,
                image,
            })
        }
    }
}

/// Builds one sample from its stream; rejections surface as
/// [`Error::Rejected`].
pub fn build_sample(cfg: &DatasetConfig, assets: &Assets, task: TaskId, index: u64) -> Result<BuiltSample> {
    let ctx = SeedContext::new(cfg.master_seed);
    let mut rng = ctx.stream(task, index);
    let rng = &mut rng;
    let d = &cfg.difficulty;
    let id = sample_id(task, index);
    let mut difficulty = Difficulty::default();
    let mut images = Vec::new();
    let mut jigsaw_source = None;
    let grid_spec = |rng: &mut RandomStream| GridSpec::grid_task(rng.random_range(d.grid_min..=d.grid_max));
    let rule = match task {
        TaskId::IconConnect => {
            let grid = grid_spec(rng)?;
            let color = if rng.random_bool(0.5) { ColorMode::Tinted } else { ColorMode::Original };
            let cond = SamplingCondition::new(icon_materials_needed(&grid), Constraint::Icon { color })?;
            let materials = sample_materials(&assets.icons, &cond, rng)?;
            difficulty.color_mode = Some(color);
            PuzzleRule::IconConnect(design_icon_connect(&materials, &grid, rng)?)
        }
        TaskId::HanziMatrix => {
            let grid = grid_spec(rng)?;
            let m = draw_unique_count(&grid, assets.hanzi.len(), rng)?;
            let near_form_priority = rng.random_bool(d.near_form_rate);
            let cond = SamplingCondition::new(m as usize, Constraint::Hanzi { near_form_priority })?;
            let materials = sample_materials(&assets.hanzi, &cond, rng)?;
            PuzzleRule::HanziMatrix(design_hanzi_matrix(&materials, &grid, rng)?)
        }
        TaskId::WordSearch => {
            let grid = grid_spec(rng)?;
            let cond = SamplingCondition::new(1, Constraint::Word { max_len: grid.n as usize })?;
            let word = sample_materials(&assets.words, &cond, rng)?.items.remove(0);
            let present = word_search_present(index, d.word_search_positive_rate);
            difficulty.word_length = Some(word.len());
            PuzzleRule::WordSearch(design_word_search(&word, &grid, present, rng)?)
        }
        TaskId::GridSum => {
            let grid = grid_spec(rng)?;
            let sign = pick(&[SignMode::Positive, SignMode::Negative, SignMode::Mixed], rng);
            let precision = pick(&[Precision::Integer, Precision::OneDecimal, Precision::TwoDecimal], rng);
            difficulty.sign_mode = Some(sign);
            difficulty.precision = Some(precision);
            PuzzleRule::GridSum(design_grid_sum(&grid, sign, precision, rng)?)
        }
        TaskId::Jigsaw => {
            let resolution = pick(&d.resolutions, rng);
            let n = rng.random_range(d.jigsaw_min..=d.jigsaw_max);
            let segmentation = pick(&[Segmentation::Regular, Segmentation::Random], rng);
            let src = draw_source(assets, resolution, rng)?;
            let rule = design_jigsaw(&src.id, src.caption.as_deref(), &src.image, n, segmentation, rng)?;
            difficulty.grid_n = Some(n);
            difficulty.segmentation = Some(segmentation);
            difficulty.resolution = resolution;
            jigsaw_source = Some(src.image);
            PuzzleRule::Jigsaw(rule)
        }
        TaskId::DifferenceHunt => {
            let resolution = pick(&d.resolutions, rng);
            let level = rng.random_range(d.level_min..=d.level_max);
            let src = draw_source(assets, resolution, rng)?;
            let rule = design_difference_hunt(&src.id, src.caption.as_deref(), &src.image, level, &cfg.schedule, rng)?;
            difficulty.level = Some(level);
            difficulty.resolution = resolution;
            let pair = apply_distortions(&src.image, &rule)?;
            images.push((image_ref(task, &id, ""), src.image));
            images.push((image_ref(task, &id, "_pair"), pair));
            PuzzleRule::DifferenceHunt(rule)
        }
    };
    let options = arrange_options(task, &derive_options(&rule), cfg.mode, rng)?;

    match &rule {
        PuzzleRule::IconConnect(_)
        | PuzzleRule::HanziMatrix(_) | PuzzleRule::WordSearch(_) | PuzzleRule::GridSum(_) => {
            images.push((image_ref(task, &id, ""), assets.renderer.render_grid(&rule)?));
        }
        PuzzleRule::Jigsaw(r) => {
            let source = jigsaw_source.take().expect("jigsaw source");
            let (incomplete, tiles) = split_tiles(&source, r)?;
            images.push((image_ref(task, &id, "_incomplete"), incomplete));
            let canonical = r.option_tiles();
            for (k, text) in options.entries.values().enumerate() {
                let tile = parse_tile_text(text).expect("jigsaw option text");
                let pos = canonical.iter().position(|&t| t == tile).expect("option tile is canonical");
                images.push((image_ref(task, &id, &format!("_tile{k}")), tiles[pos].clone()));
            }
        }
        PuzzleRule::DifferenceHunt(_) => {}
    }
    grid_difficulty(&rule, &mut difficulty);

    let question = cfg.templates.build_question(&rule);
    let sample = PuzzleSample {
        id,
        task,
        image_refs: images.iter().map(|(p, _)| p.clone()).collect(),
        question,
        options: Some(options),
        ground_truth: rule.ground_truth(),
        rule,
        difficulty,
        seed_index: index,
    };
    Ok(BuiltSample { sample, images })
}

fn grid_difficulty(rule: &PuzzleRule, d: &mut Difficulty) {
    let grid = match rule {
        PuzzleRule::IconConnect(r) => r.grid,
        PuzzleRule::HanziMatrix(r) => r.grid,
        PuzzleRule::WordSearch(r) => r.grid,
        PuzzleRule::GridSum(r) => r.grid,
        _ => return,
    };
    d.grid_n = Some(grid.n);
    d.resolution = grid.resolution;
    d.cell_px = Some(grid.cell_px());
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub task: TaskId,
    pub seed_index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub samples: usize,
    pub per_task: BTreeMap<String, usize>,
    pub rejections: usize,
    pub skipped_tasks: Vec<TaskId>,
}

#[derive(Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub config: DatasetConfig,
    pub pool_hashes: BTreeMap<String, String>,
    pub font_hash: String,
}

pub fn read_snapshot(dir: &Path) -> Result<ConfigSnapshot> {
    let path = dir.join(SNAPSHOT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(crate::pools::hex_digest(Sha256::digest(&bytes).as_slice()))
}

/// Sizes the global worker pool. Must run before any generation or
/// verification; output does not depend on the count.
pub fn configure_workers(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size worker pool: {e}")))
}

/// Rejects a non-empty `out` unless `force`, in which case it is emptied.
pub fn prepare_output(out: &Path, force: bool) -> Result<()> {
    if out.exists() {
        let non_empty = fs::read_dir(out).map_err(|e| Error::io(out, e))?.next().is_some();
        if non_empty {
            if !force {
                return Err(Error::OutputNotEmpty(out.to_path_buf()));
            }
            fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_built(out: &Path, built: &BuiltSample) -> Result<()> {
    for (rel, img) in &built.images {
        write_png(&out.join(rel), img)?;
    }
    Ok(())
}

/// Generates `count` accepted samples of `task`. Indices are tried in
/// ascending batches, each as large as the remaining shortfall, so the
/// accepted set is always the first `count` accepted indices.
fn generate_task(
    cfg: &DatasetConfig,
    assets: &Assets,
    task: TaskId,
    count: usize,
    out: &Path,
    rejections: &mut Vec<Rejection>,
) -> Result<Vec<PuzzleSample>> {
    let limit = (count as u64) * 10 + 1000;
    let mut accepted = Vec::with_capacity(count);
    let mut next = 0u64;
    while accepted.len() < count {
        let need = (count - accepted.len()) as u64;
        if next + need > limit {
            return Err(Error::Rejected(format!(
                "{task}: only {} of {count} samples accepted after {next} attempts",
                accepted.len()
            )));
        }
        let batch: Vec<(u64, Result<PuzzleSample>)> = (next..next + need)
            .into_par_iter()
            .map(|i| {
                let r = build_sample(cfg, assets, task, i).and_then(|b| {
                    write_built(out, &b)?;
                    Ok(b.sample)
                });
                (i, r)
            })
            .collect();
        for (i, r) in batch {
            match r {
                Ok(s) => accepted.push(s),
                Err(e) if e.is_rejection() => {
                    log::debug!("{task} #{i} rejected: {e}");
                    rejections.push(Rejection {
                        task,
                        seed_index: i,
                        reason: e.to_string(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        next += need;
    }
    Ok(accepted)
}

pub fn generate_dataset(cfg: &DatasetConfig, out: &Path) -> Result<GenerationSummary> {
    cfg.validate()?;
    let assets = Assets::load(cfg)?;
    generate_with_assets(cfg, &assets, out)
}

pub fn generate_with_assets(cfg: &DatasetConfig, assets: &Assets, out: &Path) -> Result<GenerationSummary> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut samples = Vec::new();
    let mut rejections = Vec::new();
    let mut per_task = BTreeMap::new();
    let mut skipped = Vec::new();
    for task in TaskId::ALL {
        let count = cfg.counts.get(task);
        if count == 0 {
            continue;
        }
        if task == TaskId::Jigsaw && cfg.mode == OptionMode::DirectAnswer {
            log::warn!("skipping {count} Jigsaw samples: no direct-answer form exists for Jigsaw");
            skipped.push(task);
            continue;
        }
        let dir = out.join(IMAGES_DIR).join(task.as_str());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let got = generate_task(cfg, assets, task, count, out, &mut rejections)?;
        log::info!("{task}: {} samples", got.len());
        per_task.insert(task.to_string(), got.len());
        samples.extend(got);
    }
    sort_canonical(&mut samples);
    write_manifest(&out.join(MANIFEST_FILE), &samples)?;

    rejections.sort_by_key(|r| (r.task, r.seed_index));
    let log: String = rejections.iter().map(|r| format!("{}\t{}\t{}\n", r.task, r.seed_index, r.reason)).collect();
    let log_path = out.join(REJECTIONS_FILE);
    fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;

    let snapshot = ConfigSnapshot {
        config: cfg.clone(),
        pool_hashes: assets.pool_hashes(),
        font_hash: file_sha256(&cfg.style.font)?,
    };
    let text = toml::to_string(&snapshot).map_err(|e| Error::Config(e.to_string()))?;
    let snap_path = out.join(SNAPSHOT_FILE);
    fs::write(&snap_path, text).map_err(|e| Error::io(&snap_path, e))?;

    Ok(GenerationSummary {
        samples: samples.len(),
        per_task,
        rejections: rejections.len(),
        skipped_tasks: skipped,
    })
}

pub fn refresh_from_images(cfg: &RefreshConfig, out: &Path) -> Result<GenerationSummary> {
    let dcfg = cfg.to_dataset_config()?;
    let pool = load_image_pool(&cfg.images, cfg.captions.as_deref())?;
    if pool.is_empty() {
        return Err(Error::EmptyPool(cfg.images.clone()));
    }
    generate_dataset(&dcfg, out)
}

/// SHA-256 over every file below `dir`: sorted relative paths, each followed
/// by its content digest.
pub fn hash_directory(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for rel in files {
        h.update(rel.as_bytes());
        h.update([0]);
        h.update(file_sha256(&dir.join(&rel))?.as_bytes());
        h.update([b'\n']);
    }
    Ok(crate::pools::hex_digest(h.finalize().as_slice()))
}

/// Content hash of every PNG below `dir`, keyed by relative path.
pub fn image_hashes(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files
        .into_iter()
        .filter(|f| f.ends_with(".png"))
        .map(|f| Ok((f.clone(), file_sha256(&dir.join(&f))?)))
        .collect()
}

pub(crate) fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path: PathBuf = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("below root");
            out.push(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
        }
    }
    Ok(())
}

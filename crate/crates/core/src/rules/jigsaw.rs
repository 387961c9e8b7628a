use image::RgbImage;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PixelRect, RESOLUTIONS};
use crate::seed::RandomStream;

/// Minimum mean absolute per-channel difference between the missing tile
/// and every distractor, on the 8-bit scale.
pub const DISTINCTNESS_FLOOR: f64 = 2.0;
pub const MIN_TILE_PX: u32 = 16;
/// Cut jitter for random segmentation, as a fraction of regular spacing.
pub const JITTER_FRACTION: f64 = 0.25;
const DISTRACTOR_ATTEMPTS: usize = 100;
const CUT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segmentation {
    Regular,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JigsawRule {
    pub source_image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_caption: Option<String>,
    pub resolution: u32,
    pub n: u32,
    pub segmentation: Segmentation,
    /// Row-major `n x n` tile rectangles.
    pub boundaries: Vec<PixelRect>,
    pub missing_index: usize,
    pub distractor_indices: Vec<usize>,
}

impl JigsawRule {
    /// Tile indices in canonical option order: missing tile first.
    pub fn option_tiles(&self) -> Vec<usize> {
        std::iter::once(self.missing_index).chain(self.distractor_indices.iter().copied()).collect()
    }
}

/// Interior cut positions of the regular partition: `floor(k * res / n)`.
pub fn regular_cuts(resolution: u32, n: u32) -> Vec<u32> {
    (1..n).map(|k| (k as u64 * resolution as u64 / n as u64) as u32).collect()
}

pub fn max_jitter(resolution: u32, n: u32) -> u32 {
    (JITTER_FRACTION * resolution as f64 / n as f64).floor() as u32
}

fn spans(cuts: &[u32], resolution: u32) -> Vec<(u32, u32)> {
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(0);
    edges.extend_from_slice(cuts);
    edges.push(resolution);
    edges.windows(2).map(|w| (w[0], w[1] - w[0])).collect()
}

fn jittered_cuts(resolution: u32, n: u32, rng: &mut RandomStream) -> Result<Vec<u32>> {
    let regular = regular_cuts(resolution, n);
    let j = max_jitter(resolution, n) as i64;
    for _ in 0..CUT_ATTEMPTS {
        let cuts: Vec<u32> = regular
            .iter()
            .map(|&c| (c as i64 + rng.random_range(-j..=j)) as u32)
            .collect();
        if spans(&cuts, resolution).iter().all(|&(_, len)| len >= MIN_TILE_PX) {
            return Ok(cuts);
        }
    }
    Err(Error::Rejected(format!(
        "no jittered {n}x{n} partition of {resolution} px with tiles >= {MIN_TILE_PX} px"
    )))
}

pub fn boundaries_from_cuts(xcuts: &[u32], ycuts: &[u32], resolution: u32) -> Vec<PixelRect> {
    let xs = spans(xcuts, resolution);
    let ys = spans(ycuts, resolution);
    ys.iter()
        .flat_map(|&(y, h)| xs.iter().map(move |&(x, w)| PixelRect::new(x, y, w, h)))
        .collect()
}

/// Mean absolute difference over all channels of the window shared by two
/// rectangles when both are aligned at their top-left corner.
pub fn mean_abs_diff_window(a: &RgbImage, ra: &PixelRect, b: &RgbImage, rb: &PixelRect) -> f64 {
    let w = ra.w.min(rb.w);
    let h = ra.h.min(rb.h);
    let mut total = 0u64;
    for dy in 0..h {
        for dx in 0..w {
            let pa = a.get_pixel(ra.x + dx, ra.y + dy);
            let pb = b.get_pixel(rb.x + dx, rb.y + dy);
            for c in 0..3 {
                total += (pa[c] as i32 - pb[c] as i32).unsigned_abs() as u64;
            }
        }
    }
    total as f64 / (w as u64 * h as u64 * 3) as f64
}

pub fn design_jigsaw(
    source_id: &str,
    caption: Option<&str>,
    image: &RgbImage,
    n: u32,
    segmentation: Segmentation,
    rng: &mut RandomStream,
) -> Result<JigsawRule> {
    let resolution = image.width();
    if image.height() != resolution || !RESOLUTIONS.contains(&resolution) {
        return Err(Error::InvalidParameter(format!(
            "jigsaw source must be square at one of {RESOLUTIONS:?}, got {}x{}",
            image.width(),
            image.height()
        )));
    }
    if !(2..=9).contains(&n) {
        return Err(Error::InvalidParameter(format!("jigsaw n = {n} outside [2, 9]")));
    }
    let (xcuts, ycuts) = match segmentation {
        Segmentation::Regular => (regular_cuts(resolution, n), regular_cuts(resolution, n)),
        Segmentation::Random => (jittered_cuts(resolution, n, rng)?, jittered_cuts(resolution, n, rng)?),
    };
    let boundaries = boundaries_from_cuts(&xcuts, &ycuts, resolution);
    let tiles = boundaries.len();
    let missing_index = rng.random_range(0..tiles);
    let others: Vec<usize> = (0..tiles).filter(|&t| t != missing_index).collect();
    for _ in 0..DISTRACTOR_ATTEMPTS {
        let picks = index::sample(rng, others.len(), 3);
        let mut distractors: Vec<usize> = picks.into_iter().map(|k| others[k]).collect();
        distractors.sort_unstable();
        let distinct = distractors.iter().all(|&d| {
            mean_abs_diff_window(image, &boundaries[missing_index], image, &boundaries[d]) >= DISTINCTNESS_FLOOR
        });
        if distinct {
            return Ok(JigsawRule {
                source_image: source_id.to_string(),
                source_caption: caption.map(str::to_string),
                resolution,
                n,
                segmentation,
                boundaries,
                missing_index,
                distractor_indices: distractors,
            });
        }
    }
    Err(Error::Rejected(format!(
        "no distractor triple meets the {DISTINCTNESS_FLOOR} distinctness floor for {source_id}"
    )))
}

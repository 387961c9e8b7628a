use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PixelRect, RESOLUTIONS};
use crate::seed::RandomStream;

pub const REGIONS_MIN: u32 = 2;
pub const REGIONS_MAX: u32 = 8;
/// Total placement attempts per sample, detectability failures included.
pub const MAX_PLACEMENTS: usize = 500;
pub const DETECTABILITY_FLOOR: f64 = 3.0;
pub const LEVELS: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistortionKind {
    Underexposure,
    Overexposure,
    Noise,
    Blur,
    ColorInversion,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 5] = [
        DistortionKind::Underexposure,
        DistortionKind::Overexposure,
        DistortionKind::Noise,
        DistortionKind::Blur,
        DistortionKind::ColorInversion,
    ];
}

/// Strength constants; each is scaled by the region intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistortionParams {
    pub underexposure: f64,
    pub overexposure: f64,
    pub noise_amplitude: f64,
    pub blur_radius: f64,
}

impl Default for DistortionParams {
    fn default() -> Self {
        Self {
            underexposure: 0.5,
            overexposure: 0.5,
            noise_amplitude: 40.0,
            blur_radius: 4.0,
        }
    }
}

impl DistortionParams {
    pub fn blur_radius_px(&self, intensity: f64) -> u32 {
        ((self.blur_radius * intensity).round() as u32).max(1)
    }

    pub fn noise_amplitude_px(&self, intensity: f64) -> i32 {
        (self.noise_amplitude * intensity).round() as i32
    }
}

/// Level-indexed size and intensity schedule (index 0 is level 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffHuntSchedule {
    /// Largest region side as a fraction of the image side.
    pub side_max_fraction: [f64; 5],
    /// Smallest region side as a fraction of that level's largest side.
    pub side_min_ratio: f64,
    pub intensity: [f64; 5],
    pub distortion: DistortionParams,
}

impl Default for DiffHuntSchedule {
    fn default() -> Self {
        let lerp = |a: f64, b: f64| std::array::from_fn(|k| a + (b - a) * k as f64 / 4.0);
        Self {
            side_max_fraction: lerp(0.25, 0.08),
            side_min_ratio: 0.75,
            intensity: lerp(1.0, 0.4),
            distortion: DistortionParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelParams {
    pub level: u8,
    pub side_min: u32,
    pub side_max: u32,
    pub intensity: f64,
}

impl DiffHuntSchedule {
    pub fn level(&self, level: u8, resolution: u32) -> Result<LevelParams> {
        if !(1..=LEVELS).contains(&level) {
            return Err(Error::InvalidParameter(format!("difference level {level} outside [1, {LEVELS}]")));
        }
        let k = level as usize - 1;
        let side_max = (self.side_max_fraction[k] * resolution as f64).floor() as u32;
        let side_min = (self.side_min_ratio * side_max as f64).floor() as u32;
        if side_min == 0 || side_min > side_max {
            return Err(Error::InvalidParameter(format!(
                "degenerate region sizes [{side_min}, {side_max}] at level {level}"
            )));
        }
        Ok(LevelParams {
            level,
            side_min,
            side_max,
            intensity: self.intensity[k],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionRegion {
    pub rect: PixelRect,
    pub kind: DistortionKind,
    pub intensity: f64,
    /// Seeds the per-pixel noise field; unused by other kinds.
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffHuntRule {
    pub source_image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_caption: Option<String>,
    pub resolution: u32,
    pub level: u8,
    pub m: u32,
    pub regions: Vec<DistortionRegion>,
    pub schedule: DiffHuntSchedule,
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Writes the distortion of `region` into `dst`, reading only from `src`.
/// Pixels outside the rectangle are not touched.
pub fn distort_region(src: &RgbImage, dst: &mut RgbImage, region: &DistortionRegion, params: &DistortionParams) {
    let r = region.rect;
    let i = region.intensity;
    match region.kind {
        DistortionKind::Underexposure => {
            let f = 1.0 - params.underexposure * i;
            map_region(src, dst, &r, |v| clamp_u8(v as f64 * f));
        }
        DistortionKind::Overexposure => {
            let t = params.overexposure * i;
            map_region(src, dst, &r, |v| clamp_u8(v as f64 + (255.0 - v as f64) * t));
        }
        DistortionKind::ColorInversion => map_region(src, dst, &r, |v| 255 - v),
        DistortionKind::Noise => {
            let a = params.noise_amplitude_px(i);
            let mut noise = RandomStream::from_seed_u64(region.noise_seed);
            for y in r.y..r.bottom() {
                for x in r.x..r.right() {
                    let p = src.get_pixel(x, y);
                    let mut q = *p;
                    for c in 0..3 {
                        let d = noise.random_range(-a..=a);
                        q[c] = (p[c] as i32 + d).clamp(0, 255) as u8;
                    }
                    dst.put_pixel(x, y, q);
                }
            }
        }
        DistortionKind::Blur => box_blur_region(src, dst, &r, params.blur_radius_px(i)),
    }
}

fn map_region(src: &RgbImage, dst: &mut RgbImage, r: &PixelRect, f: impl Fn(u8) -> u8) {
    for y in r.y..r.bottom() {
        for x in r.x..r.right() {
            let p = src.get_pixel(x, y);
            dst.put_pixel(x, y, image::Rgb([f(p[0]), f(p[1]), f(p[2])]));
        }
    }
}

/// Box blur whose window is truncated at the image border (not the region
/// border), so pixels just outside the region feed its edge.
fn box_blur_region(src: &RgbImage, dst: &mut RgbImage, r: &PixelRect, radius: u32) {
    let (w, h) = src.dimensions();
    let x0 = r.x.saturating_sub(radius);
    let x1 = (r.right() + radius).min(w);
    // Horizontal window sums for every row the vertical pass needs.
    let y0 = r.y.saturating_sub(radius);
    let y1 = (r.bottom() + radius).min(h);
    let rw = r.w as usize;
    let mut rows: Vec<[u32; 3]> = vec![[0; 3]; (y1 - y0) as usize * rw];
    for y in y0..y1 {
        for (k, x) in (r.x..r.right()).enumerate() {
            let lo = x.saturating_sub(radius).max(x0);
            let hi = (x + radius + 1).min(x1);
            let mut s = [0u32; 3];
            for xx in lo..hi {
                let p = src.get_pixel(xx, y);
                for c in 0..3 {
                    s[c] += p[c] as u32;
                }
            }
            rows[(y - y0) as usize * rw + k] = s;
        }
    }
    for y in r.y..r.bottom() {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius + 1).min(h);
        for (k, x) in (r.x..r.right()).enumerate() {
            let wx = (x + radius + 1).min(w) - x.saturating_sub(radius);
            let count = wx * (hi - lo);
            let mut s = [0u32; 3];
            for yy in lo..hi {
                let row = &rows[(yy - y0) as usize * rw + k];
                for c in 0..3 {
                    s[c] += row[c];
                }
            }
            let q = s.map(|v| ((v + count / 2) / count) as u8);
            dst.put_pixel(x, y, image::Rgb(q));
        }
    }
}

/// Mean absolute per-channel difference of two images inside `r`.
pub fn region_mean_abs_diff(a: &RgbImage, b: &RgbImage, r: &PixelRect) -> f64 {
    let mut total = 0u64;
    for y in r.y..r.bottom() {
        for x in r.x..r.right() {
            let (p, q) = (a.get_pixel(x, y), b.get_pixel(x, y));
            for c in 0..3 {
                total += (p[c] as i32 - q[c] as i32).unsigned_abs() as u64;
            }
        }
    }
    total as f64 / (r.area() * 3) as f64
}

pub fn check_regions(regions: &[DistortionRegion], width: u32, height: u32) -> Result<()> {
    for (k, reg) in regions.iter().enumerate() {
        if !reg.rect.fits_within(width, height) {
            return Err(Error::BadRegion(k));
        }
        if regions[..k].iter().any(|o| o.rect.touches(&reg.rect)) {
            return Err(Error::BadRegion(k));
        }
    }
    Ok(())
}

/// Produces the distorted copy of `src` for `rule`.
pub fn apply_distortions(src: &RgbImage, rule: &DiffHuntRule) -> Result<RgbImage> {
    check_regions(&rule.regions, src.width(), src.height())?;
    let mut out = src.clone();
    for region in &rule.regions {
        distort_region(src, &mut out, region, &rule.schedule.distortion);
    }
    Ok(out)
}

pub fn design_difference_hunt(
    source_id: &str,
    caption: Option<&str>,
    image: &RgbImage,
    level: u8,
    schedule: &DiffHuntSchedule,
    rng: &mut RandomStream,
) -> Result<DiffHuntRule> {
    let resolution = image.width();
    if image.height() != resolution || !RESOLUTIONS.contains(&resolution) {
        return Err(Error::InvalidParameter(format!(
            "difference source must be square at one of {RESOLUTIONS:?}, got {}x{}",
            image.width(),
            image.height()
        )));
    }
    let lp = schedule.level(level, resolution)?;
    let m = rng.random_range(REGIONS_MIN..=REGIONS_MAX);
    let mut regions: Vec<DistortionRegion> = Vec::with_capacity(m as usize);
    let mut scratch = image.clone();
    let mut attempts = 0;
    while regions.len() < m as usize {
        if attempts == MAX_PLACEMENTS {
            return Err(Error::Rejected(format!(
                "placed {} of {m} regions at level {level} within {MAX_PLACEMENTS} attempts",
                regions.len()
            )));
        }
        attempts += 1;
        let w = rng.random_range(lp.side_min..=lp.side_max);
        let h = rng.random_range(lp.side_min..=lp.side_max);
        let rect = PixelRect::new(
            rng.random_range(0..=resolution - w),
            rng.random_range(0..=resolution - h),
            w,
            h,
        );
        let kind = DistortionKind::ALL[rng.random_range(0..DistortionKind::ALL.len())];
        let noise_seed = rng.random();
        if regions.iter().any(|o| o.rect.touches(&rect)) {
            continue;
        }
        let region = DistortionRegion {
            rect,
            kind,
            intensity: lp.intensity,
            noise_seed,
        };
        distort_region(image, &mut scratch, &region, &schedule.distortion);
        if region_mean_abs_diff(image, &scratch, &rect) >= DETECTABILITY_FLOOR {
            regions.push(region);
        }
    }
    Ok(DiffHuntRule {
        source_image: source_id.to_string(),
        source_caption: caption.map(str::to_string),
        resolution,
        level,
        m,
        regions,
        schedule: *schedule,
    })
}

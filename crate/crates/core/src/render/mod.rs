//! Rasterization of rules into puzzle images.
//!
//! Everything here is integer- or fixed-rounding based so that the same rule
//! and assets always produce the same bytes.

use std::collections::HashMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ab_glyph::{Font, FontVec, PxScale, ScaleFont};
use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::imageops::FilterType as Resample;
use image::{ImageEncoder, Rgb, RgbImage, RgbaImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cell_rect, GridSpec, PixelRect};
use crate::pools::{IconEntry, IconPool};
use crate::rules::{IconConnectRule, IconPlacement, JigsawRule, PuzzleRule, TINT_PALETTE};

pub use crate::rules::apply_distortions;

pub type RenderedImage = RgbImage;

pub const MISSING_TILE_FILL: [u8; 3] = [128, 128, 128];
/// Height of the target-icon strip appended below an Icon Connect grid.
pub const LEGEND_STRIP: u32 = 96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    pub background: [u8; 3],
    pub grid_lines: bool,
    pub grid_line_color: [u8; 3],
    pub glyph_color: [u8; 3],
    pub glyph_scale: f32,
    pub font: PathBuf,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self::with_font(crate::dataset::default_font())
    }
}

impl RenderStyle {
    pub fn with_font(font: impl Into<PathBuf>) -> Self {
        Self {
            background: [255, 255, 255],
            grid_lines: true,
            grid_line_color: [200, 200, 200],
            glyph_color: [0, 0, 0],
            glyph_scale: 0.7,
            font: font.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.glyph_scale > 0.0 && self.glyph_scale < 1.0) {
            return Err(Error::InvalidParameter(format!("glyph_scale {} outside (0, 1)", self.glyph_scale)));
        }
        if !self.font.is_file() {
            return Err(Error::MissingPath(self.font.clone()));
        }
        Ok(())
    }
}

struct Icon {
    rgba: RgbaImage,
    monochrome: bool,
}

/// Shared, read-only rendering assets.
pub struct Renderer {
    style: RenderStyle,
    font: FontVec,
    icons: HashMap<String, Icon>,
}

impl std::fmt::Debug for Renderer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Renderer")
            .field("style", &self.style)
            .field("icons", &self.icons.len())
            .finish()
    }
}

impl Renderer {
    pub fn new(style: RenderStyle, icons: Option<&IconPool>) -> Result<Self> {
        style.validate()?;
        let bytes = fs::read(&style.font).map_err(|e| Error::io(&style.font, e))?;
        let font = FontVec::try_from_vec(bytes).map_err(|e| Error::Font(format!("{}: {e}", style.font.display())))?;
        let mut map = HashMap::new();
        if let Some(pool) = icons {
            for entry in &pool.entries {
                map.insert(entry.id.clone(), load_icon(entry)?);
            }
        }
        Ok(Self {
            style,
            font,
            icons: map,
        })
    }

    pub fn style(&self) -> &RenderStyle {
        &self.style
    }

    /// Fails on the first character the font cannot draw.
    pub fn check_coverage(&self, text: impl IntoIterator<Item = char>) -> Result<()> {
        for ch in text {
            if ch.is_whitespace() {
                continue;
            }
            if self.font.glyph_id(ch).0 == 0 {
                return Err(Error::MissingGlyph {
                    ch,
                    codepoint: format!("U+{:04X}", ch as u32),
                });
            }
        }
        Ok(())
    }

    fn canvas(&self, w: u32, h: u32) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb(self.style.background))
    }

    /// Renders the puzzle image of a grid task.
    pub fn render_grid(&self, rule: &PuzzleRule) -> Result<RenderedImage> {
        match rule {
            PuzzleRule::IconConnect(r) => self.render_icon_grid(r),
            PuzzleRule::HanziMatrix(r) => self.render_text_grid(&r.grid, |row, col| {
                r.cells[row as usize].chars().nth(col as usize).map(String::from).unwrap_or_default()
            }),
            PuzzleRule::WordSearch(r) => self.render_text_grid(&r.grid, |row, col| {
                r.letters[row as usize].chars().nth(col as usize).map(String::from).unwrap_or_default()
            }),
            PuzzleRule::GridSum(r) => {
                self.render_text_grid(&r.grid, |row, col| r.values[row as usize][col as usize].to_string())
            }
            other => Err(Error::InvalidParameter(format!("{} is not a grid task", other.task()))),
        }
    }

    /// Text drawn into one cell, exactly as [`Renderer::render_grid`] draws it.
    pub fn render_cell_text(&self, text: &str, cell_w: u32, cell_h: u32) -> Result<RenderedImage> {
        let mut img = self.canvas(cell_w, cell_h);
        self.draw_text(&mut img, &PixelRect::new(0, 0, cell_w, cell_h), text)?;
        Ok(img)
    }

    fn render_text_grid(&self, grid: &GridSpec, text_at: impl Fn(u32, u32) -> String) -> Result<RenderedImage> {
        let mut img = self.canvas(grid.resolution, grid.resolution);
        for row in 0..grid.n {
            for col in 0..grid.n {
                let rect = cell_rect(grid, row, col)?;
                self.draw_text(&mut img, &rect, &text_at(row, col))?;
            }
        }
        self.draw_grid_lines(&mut img, grid)?;
        Ok(img)
    }

    /// The icon grid with a strip below it showing the target icon, so the
    /// grid occupies rows `0..resolution` exactly as in the text tasks.
    fn render_icon_grid(&self, rule: &IconConnectRule) -> Result<RenderedImage> {
        let grid = &rule.grid;
        let res = grid.resolution;
        let mut img = self.canvas(res, res + LEGEND_STRIP);
        for row in 0..grid.n {
            for col in 0..grid.n {
                let rect = cell_rect(grid, row, col)?;
                if let Some(p) = rule.cell(row, col) {
                    self.draw_icon(&mut img, &rect, p)?;
                }
            }
        }
        self.draw_grid_lines(&mut img, grid)?;
        let side = LEGEND_STRIP - 16;
        self.draw_icon(&mut img, &PixelRect::new((res - side) / 2, res + 8, side, side), &rule.target_icon)?;
        Ok(img)
    }

    fn draw_grid_lines(&self, img: &mut RgbImage, grid: &GridSpec) -> Result<()> {
        if !self.style.grid_lines {
            return Ok(());
        }
        let color = Rgb(self.style.grid_line_color);
        let res = grid.resolution;
        let mut stops: Vec<u32> = (0..grid.n).map(|k| cell_rect(grid, 0, k).map(|r| r.x)).collect::<Result<_>>()?;
        stops.push(res - 1);
        for &s in &stops {
            for t in 0..res {
                img.put_pixel(s, t, color);
                img.put_pixel(t, s, color);
            }
        }
        Ok(())
    }

    fn draw_text(&self, img: &mut RgbImage, rect: &PixelRect, text: &str) -> Result<()> {
        if text.is_empty() {
            return Ok(());
        }
        self.check_coverage(text.chars())?;
        let target = self.style.glyph_scale * rect.w.min(rect.h) as f32;
        let mut glyphs = self.layout(text, target);
        let (w, h) = bounds_size(&glyphs);
        let longest = w.max(h);
        if longest > target {
            glyphs = self.layout(text, target * target / longest);
        }
        let Some((min_x, min_y, max_x, max_y)) = bounds(&glyphs) else {
            return Ok(());
        };
        let bw = max_x - min_x;
        let bh = max_y - min_y;
        let ox = rect.x as f32 + ((rect.w as f32 - bw) / 2.0).floor() - min_x;
        let oy = rect.y as f32 + ((rect.h as f32 - bh) / 2.0).floor() - min_y;
        let color = self.style.glyph_color;
        for g in &glyphs {
            let b = g.px_bounds();
            let gx = (b.min.x + ox).round() as i64;
            let gy = (b.min.y + oy).round() as i64;
            g.draw(|x, y, c| {
                let px = gx + x as i64;
                let py = gy + y as i64;
                if px < rect.x as i64 || py < rect.y as i64 || px >= rect.right() as i64 || py >= rect.bottom() as i64 {
                    return;
                }
                let a = (c.clamp(0.0, 1.0) * 255.0).round() as u32;
                let dst = img.get_pixel_mut(px as u32, py as u32);
                for k in 0..3 {
                    dst[k] = blend(dst[k], color[k], a);
                }
            });
        }
        Ok(())
    }

    fn layout(&self, text: &str, px: f32) -> Vec<ab_glyph::OutlinedGlyph> {
        let scaled = self.font.as_scaled(PxScale::from(px));
        let mut caret = 0.0f32;
        let mut out = Vec::new();
        for ch in text.chars() {
            let id = scaled.glyph_id(ch);
            let glyph = id.with_scale_and_position(px, ab_glyph::point(caret, scaled.ascent()));
            caret += scaled.h_advance(id);
            if let Some(o) = self.font.outline_glyph(glyph) {
                out.push(o);
            }
        }
        out
    }

    fn draw_icon(&self, img: &mut RgbImage, rect: &PixelRect, placement: &IconPlacement) -> Result<()> {
        let icon = self
            .icons
            .get(&placement.id)
            .ok_or_else(|| Error::InvalidParameter(format!("icon {:?} is not loaded", placement.id)))?;
        let side = ((self.style.glyph_scale * rect.w.min(rect.h) as f32).floor() as u32).max(1);
        let (iw, ih) = icon.rgba.dimensions();
        let (tw, th) = if iw >= ih {
            (side, ((side as u64 * ih as u64) / iw as u64).max(1) as u32)
        } else {
            (((side as u64 * iw as u64) / ih as u64).max(1) as u32, side)
        };
        let scaled = image::imageops::resize(&icon.rgba, tw, th, Resample::Triangle);
        let tint = match placement.tint {
            Some(t) if icon.monochrome => Some(TINT_PALETTE[t as usize % TINT_PALETTE.len()]),
            _ => None,
        };
        let ox = rect.x + (rect.w - tw) / 2;
        let oy = rect.y + (rect.h - th) / 2;
        for (x, y, p) in scaled.enumerate_pixels() {
            let a = p[3] as u32;
            if a == 0 {
                continue;
            }
            let fg = tint.unwrap_or([p[0], p[1], p[2]]);
            let dst = img.get_pixel_mut(ox + x, oy + y);
            for k in 0..3 {
                dst[k] = blend(dst[k], fg[k], a);
            }
        }
        Ok(())
    }
}

fn blend(bg: u8, fg: u8, alpha: u32) -> u8 {
    ((fg as u32 * alpha + bg as u32 * (255 - alpha) + 127) / 255) as u8
}

fn bounds(glyphs: &[ab_glyph::OutlinedGlyph]) -> Option<(f32, f32, f32, f32)> {
    glyphs.iter().map(|g| g.px_bounds()).fold(None, |acc, b| {
        Some(match acc {
            None => (b.min.x, b.min.y, b.max.x, b.max.y),
            Some((a, c, d, e)) => (a.min(b.min.x), c.min(b.min.y), d.max(b.max.x), e.max(b.max.y)),
        })
    })
}

fn bounds_size(glyphs: &[ab_glyph::OutlinedGlyph]) -> (f32, f32) {
    bounds(glyphs).map(|(a, b, c, d)| (c - a, d - b)).unwrap_or((0.0, 0.0))
}

fn load_icon(entry: &IconEntry) -> Result<Icon> {
    let img = image::open(&entry.path).map_err(|e| Error::Image {
        path: entry.path.clone(),
        message: e.to_string(),
    })?;
    Ok(Icon {
        rgba: img.to_rgba8(),
        monochrome: entry.monochrome,
    })
}

/// Cuts the incomplete image (missing tile filled mid-gray) and the option
/// tiles in canonical order: missing tile first, then distractors.
pub fn split_tiles(image: &RgbImage, rule: &JigsawRule) -> Result<(RenderedImage, Vec<RenderedImage>)> {
    let (w, h) = image.dimensions();
    for (k, b) in rule.boundaries.iter().enumerate() {
        if !b.fits_within(w, h) {
            return Err(Error::BadBoundary(k));
        }
    }
    let missing = rule.boundaries.get(rule.missing_index).ok_or(Error::BadBoundary(rule.missing_index))?;
    let mut incomplete = image.clone();
    fill_rect(&mut incomplete, missing, MISSING_TILE_FILL);
    let tiles = rule
        .option_tiles()
        .into_iter()
        .map(|t| {
            let b = rule.boundaries.get(t).ok_or(Error::BadBoundary(t))?;
            Ok(crop(image, b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((incomplete, tiles))
}

pub fn crop(image: &RgbImage, r: &PixelRect) -> RgbImage {
    image::imageops::crop_imm(image, r.x, r.y, r.w, r.h).to_image()
}

pub fn fill_rect(image: &mut RgbImage, r: &PixelRect, color: [u8; 3]) {
    for y in r.y..r.bottom() {
        for x in r.x..r.right() {
            image.put_pixel(x, y, Rgb(color));
        }
    }
}

/// Center-crops to a square and resamples to `resolution` per side.
pub fn load_source_image(path: &Path, resolution: u32) -> Result<RenderedImage> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    fit_square(&rgb, resolution).ok_or_else(|| Error::Image {
        path: path.to_path_buf(),
        message: format!("degenerate dimensions {}x{}", rgb.width(), rgb.height()),
    })
}

pub fn fit_square(img: &RgbImage, resolution: u32) -> Option<RgbImage> {
    let (w, h) = img.dimensions();
    let side = w.min(h);
    if side == 0 || resolution == 0 {
        return None;
    }
    let square = image::imageops::crop_imm(img, (w - side) / 2, (h - side) / 2, side, side).to_image();
    if side == resolution {
        return Some(square);
    }
    Some(image::imageops::resize(&square, resolution, resolution, Resample::Triangle))
}

pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    PngEncoder::new_with_quality(&mut buf, CompressionType::Fast, FilterType::Adaptive)
        .write_image(image.as_raw(), image.width(), image.height(), image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::Image {
            path: PathBuf::new(),
            message: e.to_string(),
        })?;
    Ok(buf)
}

pub fn write_png(path: &Path, image: &RgbImage) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    PngEncoder::new_with_quality(&mut w, CompressionType::Fast, FilterType::Adaptive)
        .write_image(image.as_raw(), image.width(), image.height(), image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

pub fn read_png(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .to_rgb8())
}

//! Procedural scene synthesis.
//!
//! Stands in for an external image corpus: the default dataset configuration
//! draws every Jigsaw and Difference Hunt source image from the sample's own
//! stream, and tests use [`write_scene_pool`] to build on-disk image pools.
//! Scenes combine a gradient background, a periodic texture and a layer of
//! patterned shapes so that tiles differ and local distortions are visible.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::RandomStream;

pub const THEMES: usize = 12;

#[derive(Clone, Copy)]
enum Shape {
    Disc,
    Rect,
    Ellipse,
    Triangle,
}

#[derive(Clone, Copy)]
enum Fill {
    Solid,
    Stripes { period: f32, angle: f32 },
    Checker { cell: f32 },
    Rings { period: f32 },
}

fn random_color(rng: &mut RandomStream, theme: Option<usize>) -> [f32; 3] {
    let mut c = [
        rng.random_range(0.0..255.0f32),
        rng.random_range(0.0..255.0f32),
        rng.random_range(0.0..255.0f32),
    ];
    if let Some(t) = theme {
        // Each theme leans toward one of three primaries at one of four brightness levels.
        let ch = t % 3;
        let level = (t / 3) as f32 / 3.0;
        c[ch] = 0.5 * c[ch] + 127.0;
        for v in c.iter_mut() {
            *v = *v * (0.55 + 0.45 * level);
        }
    }
    c
}

fn mix(a: [f32; 3], b: [f32; 3], t: f32) -> [f32; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn to_px(c: [f32; 3]) -> Rgb<u8> {
    Rgb([c[0].round().clamp(0.0, 255.0) as u8, c[1].round().clamp(0.0, 255.0) as u8, c[2].round().clamp(0.0, 255.0) as u8])
}

fn triangle_wave(v: f32, period: f32) -> f32 {
    let p = (v / period).rem_euclid(1.0);
    if p < 0.5 {
        p * 2.0
    } else {
        2.0 - p * 2.0
    }
}

pub fn synthesize_scene(rng: &mut RandomStream, size: u32) -> RgbImage {
    synthesize_themed(rng, size, None)
}

fn synthesize_themed(rng: &mut RandomStream, size: u32, theme: Option<usize>) -> RgbImage {
    let s = size as f32;
    let c1 = random_color(rng, theme);
    let c2 = random_color(rng, theme);
    let angle = rng.random_range(0.0..std::f32::consts::TAU);
    let (ca, sa) = (angle.cos(), angle.sin());
    let tex_period = rng.random_range(0.012..0.03f32) * s;
    let tex_amp = rng.random_range(18.0..34.0f32);
    let tex_angle = rng.random_range(0.0..std::f32::consts::PI);
    let (tc, ts) = (tex_angle.cos(), tex_angle.sin());

    let mut img = RgbImage::new(size, size);
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f32, y as f32);
            let t = (((fx - s / 2.0) * ca + (fy - s / 2.0) * sa) / s + 0.5).clamp(0.0, 1.0);
            let tex = (triangle_wave(fx * tc + fy * ts, tex_period) - 0.5) * tex_amp;
            let base = mix(c1, c2, t);
            img.put_pixel(x, y, to_px([base[0] + tex, base[1] + tex, base[2] + tex]));
        }
    }

    let shapes = rng.random_range(12..28);
    for _ in 0..shapes {
        let kind = match rng.random_range(0..4) {
            0 => Shape::Disc,
            1 => Shape::Rect,
            2 => Shape::Ellipse,
            _ => Shape::Triangle,
        };
        let fill = match rng.random_range(0..4) {
            0 => Fill::Solid,
            1 => Fill::Stripes {
                period: rng.random_range(0.01..0.04f32) * s,
                angle: rng.random_range(0.0..std::f32::consts::PI),
            },
            2 => Fill::Checker {
                cell: rng.random_range(0.008..0.03f32) * s,
            },
            _ => Fill::Rings {
                period: rng.random_range(0.015..0.05f32) * s,
            },
        };
        let fg = random_color(rng, theme);
        let bg = random_color(rng, theme);
        let cx = rng.random_range(0.0..1.0f32) * s;
        let cy = rng.random_range(0.0..1.0f32) * s;
        let rx = rng.random_range(0.04..0.2f32) * s;
        let ry = match kind {
            Shape::Disc => rx,
            _ => rng.random_range(0.04..0.2f32) * s,
        };
        let x0 = (cx - rx).floor().max(0.0) as u32;
        let x1 = ((cx + rx).ceil().max(0.0) as u32).min(size);
        let y0 = (cy - ry).floor().max(0.0) as u32;
        let y1 = ((cy + ry).ceil().max(0.0) as u32).min(size);
        for y in y0..y1 {
            for x in x0..x1 {
                let dx = (x as f32 + 0.5 - cx) / rx;
                let dy = (y as f32 + 0.5 - cy) / ry;
                let inside = match kind {
                    Shape::Disc | Shape::Ellipse => dx * dx + dy * dy <= 1.0,
                    Shape::Rect => dx.abs() <= 1.0 && dy.abs() <= 1.0,
                    Shape::Triangle => dy <= 1.0 && dx.abs() <= (dy + 1.0) / 2.0,
                };
                if !inside {
                    continue;
                }
                let (fx, fy) = (x as f32, y as f32);
                let on = match fill {
                    Fill::Solid => true,
                    Fill::Stripes { period, angle } => {
                        ((fx * angle.cos() + fy * angle.sin()) / period).rem_euclid(1.0) < 0.5
                    }
                    Fill::Checker { cell } => ((fx / cell).floor() as i64 + (fy / cell).floor() as i64) % 2 == 0,
                    Fill::Rings { period } => {
                        let r = ((fx - cx).powi(2) + (fy - cy).powi(2)).sqrt();
                        (r / period).rem_euclid(1.0) < 0.5
                    }
                };
                img.put_pixel(x, y, to_px(if on { fg } else { bg }));
            }
        }
    }
    img
}

/// Writes `count` synthetic scenes plus an `images.tsv` (id, filename,
/// category, caption) into `dir`.
pub fn write_scene_pool(dir: &Path, count: usize, size: u32, rng: &mut RandomStream) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tsv = String::from("id\tfilename\tcategory\tcaption\n");
    for i in 0..count {
        let theme = i % THEMES;
        let img = synthesize_themed(rng, size, Some(theme));
        let id = format!("scene-{i:04}");
        let file = format!("{id}.png");
        let path = dir.join(&file);
        img.save(&path).map_err(|e| Error::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let category = format!("theme-{:02}", theme + 1);
        tsv.push_str(&format!("{id}\t{file}\t{category}\tprocedural scene {i} in {category}\n"));
    }
    let tsv_path = dir.join("images.tsv");
    fs::File::create(&tsv_path)
        .and_then(|mut f| f.write_all(tsv.as_bytes()))
        .map_err(|e| Error::io(&tsv_path, e))
}

mod common;

use common::{bundled_assets, rng, scene};
use image::{Rgb, RgbImage};
use puzzlegen::dataset::{build_sample, DatasetConfig};
use puzzlegen::render::{
    apply_distortions, crop, encode_png, fit_square, load_source_image, split_tiles, write_png, MISSING_TILE_FILL,
};
use puzzlegen::rules::{
    design_difference_hunt, design_jigsaw, design_word_search, mean_abs_diff_window, DiffHuntRule, DiffHuntSchedule,
    DistortionKind, DistortionRegion, PuzzleRule, Segmentation, DISTINCTNESS_FLOOR,
};
use puzzlegen::{cell_rect, Decimal, Error, GridSpec, OptionMode, PixelRect, TaskId};

/// Compares one rendered cell with a fresh single-cell rendering of `text`,
/// skipping the grid-line pixels on the cell's top and left edges and the
/// image's last row and column.
fn cell_matches(img: &RgbImage, grid: &GridSpec, row: u32, col: u32, expected: &RgbImage) -> bool {
    let rect = cell_rect(grid, row, col).unwrap();
    let last = grid.resolution - 1;
    (rect.y..rect.bottom()).all(|y| {
        (rect.x..rect.right()).all(|x| {
            x == rect.x
                || y == rect.y
                || x == last
                || y == last
                || img.get_pixel(x, y) == expected.get_pixel(x - rect.x, y - rect.y)
        })
    })
}

#[test]
fn word_search_render_shows_cat_in_top_row() {
    let assets = bundled_assets();
    let grid = GridSpec::grid_task(3).unwrap();
    let rule = (0..1000)
        .map(|s| design_word_search("CAT", &grid, true, &mut rng(s)).unwrap())
        .find(|r| r.placement.is_some_and(|p| p.line == 0 && p.orientation == puzzlegen::rules::Orientation::Row))
        .unwrap();
    let img = assets.renderer.render_grid(&PuzzleRule::WordSearch(rule)).unwrap();
    let r0 = cell_rect(&grid, 0, 0).unwrap();
    for (col, letter) in ["C", "A", "T"].iter().enumerate() {
        let r = cell_rect(&grid, 0, col as u32).unwrap();
        let expected = assets.renderer.render_cell_text(letter, r.w, r.h).unwrap();
        assert!(cell_matches(&img, &grid, 0, col as u32, &expected), "cell (0,{col}) is not {letter}");
    }
    let wrong = assets.renderer.render_cell_text("Q", r0.w, r0.h).unwrap();
    assert!(!cell_matches(&img, &grid, 0, 0, &wrong));
}

#[test]
fn grid_sum_cell_text_formatting() {
    assert_eq!(Decimal::new(-350, 2).to_string(), "-3.50");
    assert_eq!(Decimal::new(7, 1).to_string(), "0.7");
    assert_eq!(Decimal::new(-5, 2).to_string(), "-0.05");
}

#[test]
fn rendering_twice_is_byte_identical() {
    let assets = bundled_assets();
    let cfg = DatasetConfig::new(3, OptionMode::FixedOption);
    for task in [TaskId::IconConnect, TaskId::HanziMatrix, TaskId::WordSearch, TaskId::GridSum] {
        let a = build_sample(&cfg, &assets, task, 5).unwrap();
        let b = build_sample(&cfg, &assets, task, 5).unwrap();
        for ((pa, ia), (pb, ib)) in a.images.iter().zip(&b.images) {
            assert_eq!(pa, pb);
            assert_eq!(encode_png(ia).unwrap(), encode_png(ib).unwrap(), "{pa}");
        }
    }
}

#[test]
fn structural_check_over_text_grids() {
    let assets = bundled_assets();
    let cfg = DatasetConfig::new(21, OptionMode::FixedOption);
    let (mut cells, mut exact) = (0usize, 0usize);
    for task in [TaskId::HanziMatrix, TaskId::WordSearch, TaskId::GridSum] {
        for index in 0..40 {
            let built = build_sample(&cfg, &assets, task, index).unwrap();
            let img = &built.images[0].1;
            let (grid, text): (GridSpec, Box<dyn Fn(u32, u32) -> String>) = match &built.sample.rule {
                PuzzleRule::HanziMatrix(r) => {
                    let r = r.clone();
                    (r.grid, Box::new(move |a, b| r.cells[a as usize].chars().nth(b as usize).unwrap().to_string()))
                }
                PuzzleRule::WordSearch(r) => {
                    let r = r.clone();
                    (r.grid, Box::new(move |a, b| r.letters[a as usize].chars().nth(b as usize).unwrap().to_string()))
                }
                PuzzleRule::GridSum(r) => {
                    let r = r.clone();
                    (r.grid, Box::new(move |a, b| r.values[a as usize][b as usize].to_string()))
                }
                _ => unreachable!(),
            };
            for row in 0..grid.n {
                for col in 0..grid.n {
                    let rect = cell_rect(&grid, row, col).unwrap();
                    let expected = assets.renderer.render_cell_text(&text(row, col), rect.w, rect.h).unwrap();
                    cells += 1;
                    exact += cell_matches(img, &grid, row, col, &expected) as usize;
                }
            }
        }
    }
    assert!(exact as f64 >= 0.99 * cells as f64, "{exact}/{cells} cells exact");
}

#[test]
fn missing_glyph_is_reported() {
    let assets = bundled_assets();
    let err = assets.renderer.check_coverage("A\u{10FFFD}".chars()).unwrap_err();
    assert!(matches!(err, Error::MissingGlyph { ch: '\u{10FFFD}', .. }), "{err}");
}

#[test]
fn split_tiles_two_by_two() {
    let img = scene(6, 512);
    let rule = design_jigsaw("s", None, &img, 2, Segmentation::Regular, &mut rng(1)).unwrap();
    let (incomplete, tiles) = split_tiles(&img, &rule).unwrap();
    let hole = rule.boundaries[rule.missing_index];
    assert_eq!((hole.w, hole.h), (256, 256));
    for (x, y, p) in incomplete.enumerate_pixels() {
        if hole.contains(x, y) {
            assert_eq!(p.0, MISSING_TILE_FILL);
        } else {
            assert_eq!(p, img.get_pixel(x, y));
        }
    }
    let mut rebuilt = incomplete.clone();
    image::imageops::replace(&mut rebuilt, &tiles[0], hole.x as i64, hole.y as i64);
    assert_eq!(rebuilt, img);
}

#[test]
fn split_tiles_seed_3_distractors_distinct() {
    let img = scene(3, 512);
    let rule = design_jigsaw("s", None, &img, 3, Segmentation::Random, &mut rng(3)).unwrap();
    let (_, tiles) = split_tiles(&img, &rule).unwrap();
    assert_eq!(tiles.len(), 4);
    let whole = |t: &RgbImage| PixelRect::new(0, 0, t.width(), t.height());
    for t in &tiles[1..] {
        assert!(mean_abs_diff_window(&tiles[0], &whole(&tiles[0]), t, &whole(t)) >= DISTINCTNESS_FLOOR);
    }
    assert_eq!(tiles[0], crop(&img, &rule.boundaries[rule.missing_index]));
}

#[test]
fn split_tiles_rejects_out_of_bounds_boundary() {
    let img = scene(6, 256);
    let mut rule = design_jigsaw("s", None, &img, 3, Segmentation::Regular, &mut rng(1)).unwrap();
    rule.boundaries[4].w = 400;
    assert!(matches!(split_tiles(&img, &rule), Err(Error::BadBoundary(4))));
}

fn hunt(regions: Vec<DistortionRegion>) -> DiffHuntRule {
    DiffHuntRule {
        source_image: "s".into(),
        source_caption: None,
        resolution: 256,
        level: 1,
        m: regions.len() as u32,
        regions,
        schedule: DiffHuntSchedule::default(),
    }
}

#[test]
fn zero_regions_is_identity() {
    let img = scene(2, 256);
    assert_eq!(apply_distortions(&img, &hunt(vec![])).unwrap(), img);
}

#[test]
fn color_inversion_is_an_involution() {
    let img = scene(2, 256);
    let region = DistortionRegion {
        rect: PixelRect::new(30, 40, 60, 50),
        kind: DistortionKind::ColorInversion,
        intensity: 1.0,
        noise_seed: 0,
    };
    let once = apply_distortions(&img, &hunt(vec![region])).unwrap();
    assert_ne!(once, img);
    assert_eq!(apply_distortions(&once, &hunt(vec![region])).unwrap(), img);
    let p = img.get_pixel(31, 41);
    assert_eq!(once.get_pixel(31, 41).0, [255 - p[0], 255 - p[1], 255 - p[2]]);
}

#[test]
fn distortion_formulas() {
    let img = RgbImage::from_pixel(256, 256, Rgb([200, 100, 40]));
    let at = |kind, intensity| {
        let r = DistortionRegion {
            rect: PixelRect::new(10, 10, 20, 20),
            kind,
            intensity,
            noise_seed: 5,
        };
        apply_distortions(&img, &hunt(vec![r])).unwrap()
    };
    // 1 - 0.5 * 1.0 = 0.5
    assert_eq!(at(DistortionKind::Underexposure, 1.0).get_pixel(15, 15).0, [100, 50, 20]);
    // v + (255 - v) * 0.5 * 0.4
    assert_eq!(at(DistortionKind::Overexposure, 0.4).get_pixel(15, 15).0, [211, 131, 83]);
    // Blur of a flat image leaves it flat.
    assert_eq!(at(DistortionKind::Blur, 1.0), img);
    let noisy = at(DistortionKind::Noise, 1.0);
    let mut sum = 0i64;
    for y in 10..30 {
        for x in 10..30 {
            let d = noisy.get_pixel(x, y)[1] as i64 - 100;
            assert!(d.abs() <= 40);
            sum += d;
        }
    }
    assert!((sum as f64 / 400.0).abs() < 6.0, "noise mean {sum}");
}

#[test]
fn seed_8_changes_only_inside_regions() {
    let img = scene(8, 512);
    let rule = design_difference_hunt("s", None, &img, 3, &DiffHuntSchedule::default(), &mut rng(8)).unwrap();
    let out = apply_distortions(&img, &rule).unwrap();
    for (x, y, p) in out.enumerate_pixels() {
        if p != img.get_pixel(x, y) {
            assert!(rule.regions.iter().any(|g| g.rect.contains(x, y)));
        }
    }
}

#[test]
fn overlapping_regions_are_refused() {
    let img = scene(2, 256);
    let r = |x| DistortionRegion {
        rect: PixelRect::new(x, 10, 40, 40),
        kind: DistortionKind::Noise,
        intensity: 1.0,
        noise_seed: 1,
    };
    assert!(matches!(apply_distortions(&img, &hunt(vec![r(10), r(30)])), Err(Error::BadRegion(_))));
    assert!(matches!(apply_distortions(&img, &hunt(vec![r(240)])), Err(Error::BadRegion(_))));
}

#[test]
fn load_source_image_center_crops() {
    let dir = tempfile::tempdir().unwrap();
    let wide = RgbImage::from_fn(1024, 768, |x, y| Rgb([(x % 256) as u8, (y % 256) as u8, ((x + y) % 256) as u8]));
    let path = dir.path().join("wide.png");
    write_png(&path, &wide).unwrap();
    let a = load_source_image(&path, 512).unwrap();
    assert_eq!(a.dimensions(), (512, 512));
    let square = image::imageops::crop_imm(&wide, 128, 0, 768, 768).to_image();
    assert_eq!(a, fit_square(&square, 512).unwrap());
    assert_eq!(encode_png(&a).unwrap(), encode_png(&load_source_image(&path, 512).unwrap()).unwrap());

    let sq = scene(1, 512);
    let p2 = dir.path().join("sq.png");
    write_png(&p2, &sq).unwrap();
    assert_eq!(load_source_image(&p2, 512).unwrap(), sq);
}

#[test]
fn load_source_image_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.png");
    std::fs::write(&path, b"not an image").unwrap();
    assert!(matches!(load_source_image(&path, 256), Err(Error::Image { .. })));
}

#[test]
fn icon_connect_is_one_image_with_a_legend_strip() {
    let assets = bundled_assets();
    let cfg = DatasetConfig::new(4, OptionMode::FixedOption);
    let built = build_sample(&cfg, &assets, TaskId::IconConnect, 0).unwrap();
    assert_eq!(built.sample.image_refs.len(), 1);
    let img = &built.images[0].1;
    let res = built.sample.difficulty.resolution;
    assert_eq!(img.dimensions(), (res, res + puzzlegen::render::LEGEND_STRIP));
    let background = Rgb(assets.renderer.style().background);
    let inked = (res..img.height()).flat_map(|y| (0..res).map(move |x| (x, y))).filter(|&(x, y)| *img.get_pixel(x, y) != background).count();
    assert!(inked > 100, "legend strip is blank");
}

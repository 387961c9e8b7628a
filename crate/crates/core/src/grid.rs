use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRID_MIN: u32 = 3;
pub const GRID_MAX: u32 = 9;
pub const RESOLUTIONS: [u32; 3] = [256, 512, 1024];
/// Grid tasks always render at this side length.
pub const GRID_RESOLUTION: u32 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn intersects(&self, other: &PixelRect) -> bool {
        self.x < other.right() && other.x < self.right() && self.y < other.bottom() && other.y < self.bottom()
    }

    /// True if the rectangles overlap or touch (including diagonally).
    pub fn touches(&self, other: &PixelRect) -> bool {
        self.x <= other.right() && other.x <= self.right() && self.y <= other.bottom() && other.y <= self.bottom()
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.w > 0 && self.h > 0 && self.right() <= width && self.bottom() <= height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: u32,
    pub resolution: u32,
}

impl GridSpec {
    pub fn new(n: u32, resolution: u32) -> Result<Self> {
        if !(GRID_MIN..=GRID_MAX).contains(&n) {
            return Err(Error::InvalidGrid(format!("n = {n} outside [{GRID_MIN}, {GRID_MAX}]")));
        }
        if !RESOLUTIONS.contains(&resolution) {
            return Err(Error::InvalidGrid(format!("resolution {resolution} not one of {RESOLUTIONS:?}")));
        }
        Ok(Self { n, resolution })
    }

    /// Grid-task spec at the fixed 512 px resolution.
    pub fn grid_task(n: u32) -> Result<Self> {
        Self::new(n, GRID_RESOLUTION)
    }

    pub fn cell_px(&self) -> u32 {
        self.resolution / self.n
    }

    pub fn cells(&self) -> usize {
        (self.n * self.n) as usize
    }
}

/// Pixel rectangle of one cell; the last row and column absorb the residual
/// pixels when the resolution is not a multiple of `n`.
pub fn cell_rect(spec: &GridSpec, row: u32, col: u32) -> Result<PixelRect> {
    if row >= spec.n || col >= spec.n {
        return Err(Error::CellOutOfRange { row, col, n: spec.n });
    }
    let c = spec.cell_px();
    let span = |i: u32| if i + 1 == spec.n { spec.resolution - i * c } else { c };
    Ok(PixelRect::new(col * c, row * c, span(col), span(row)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_by_four_cells_are_128() {
        let g = GridSpec::new(4, 512).unwrap();
        assert_eq!(cell_rect(&g, 0, 0).unwrap(), PixelRect::new(0, 0, 128, 128));
    }

    #[test]
    fn last_cell_absorbs_residual() {
        let g = GridSpec::new(3, 512).unwrap();
        let r = cell_rect(&g, 2, 2).unwrap();
        assert_eq!(r, PixelRect::new(340, 340, 172, 172));
        assert_eq!(r.w - g.cell_px(), 512 - 3 * 170);
    }

    #[test]
    fn nine_by_nine_cells_are_56() {
        let g = GridSpec::new(9, 512).unwrap();
        assert_eq!(cell_rect(&g, 0, 0).unwrap(), PixelRect::new(0, 0, 56, 56));
    }

    #[test]
    fn out_of_range_cell_is_an_error() {
        let g = GridSpec::new(5, 512).unwrap();
        assert!(matches!(cell_rect(&g, 5, 0), Err(Error::CellOutOfRange { .. })));
        assert!(cell_rect(&g, 0, 5).is_err());
    }

    #[test]
    fn cells_tile_the_image() {
        for n in GRID_MIN..=GRID_MAX {
            for res in RESOLUTIONS {
                let g = GridSpec::new(n, res).unwrap();
                let rects: Vec<_> = (0..n)
                    .flat_map(|r| (0..n).map(move |c| (r, c)))
                    .map(|(r, c)| cell_rect(&g, r, c).unwrap())
                    .collect();
                let area: u64 = rects.iter().map(PixelRect::area).sum();
                assert_eq!(area, (res as u64).pow(2));
                for (i, a) in rects.iter().enumerate() {
                    assert!(a.fits_within(res, res));
                    for b in &rects[i + 1..] {
                        assert!(!a.intersects(b));
                    }
                }
            }
        }
    }

    #[test]
    fn cell_px_strictly_decreases_with_n() {
        for res in RESOLUTIONS {
            let px: Vec<u32> = (GRID_MIN..=GRID_MAX).map(|n| GridSpec::new(n, res).unwrap().cell_px()).collect();
            assert!(px.windows(2).all(|w| w[0] > w[1]), "{px:?}");
        }
    }

    #[test]
    fn rejects_illegal_grids() {
        assert!(GridSpec::new(2, 512).is_err());
        assert!(GridSpec::new(10, 512).is_err());
        assert!(GridSpec::new(5, 500).is_err());
    }
}

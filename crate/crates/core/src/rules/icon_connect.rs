use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Orientation;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::pools::{ColorMode, IconEntry, MaterialSet};
use crate::seed::RandomStream;

/// Hues available for tinting monochrome icons.
pub const TINT_PALETTE: [[u8; 3]; 12] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 170, 0],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 200, 220],
    [240, 50, 230],
    [120, 160, 20],
    [0, 128, 128],
    [170, 110, 40],
    [128, 0, 0],
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IconPlacement {
    pub id: String,
    /// Index into [`TINT_PALETTE`]; only monochrome icons are tinted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tint: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub orientation: Orientation,
    pub line: u32,
    pub start: u32,
    pub length: u32,
}

impl Run {
    pub fn cells(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (self.start..self.start + self.length).map(move |k| match self.orientation {
            Orientation::Row => (self.line, k),
            Orientation::Col => (k, self.line),
        })
    }

    pub fn contains(&self, row: u32, col: u32) -> bool {
        let (line, pos) = match self.orientation {
            Orientation::Row => (row, col),
            Orientation::Col => (col, row),
        };
        line == self.line && pos >= self.start && pos < self.start + self.length
    }

    /// Phrase used to fill the question's position slot, 1-based.
    pub fn position_phrase(&self) -> String {
        match self.orientation {
            Orientation::Row => format!("row {}", self.line + 1),
            Orientation::Col => format!("column {}", self.line + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IconConnectRule {
    pub grid: GridSpec,
    pub color_mode: ColorMode,
    pub target_icon: IconPlacement,
    pub run: Run,
    /// Row-major `n x n`; `None` exactly on run cells.
    pub filler: Vec<Vec<Option<IconPlacement>>>,
}

impl IconConnectRule {
    pub fn cell(&self, row: u32, col: u32) -> Option<&IconPlacement> {
        if self.run.contains(row, col) {
            Some(&self.target_icon)
        } else {
            self.filler.get(row as usize)?.get(col as usize)?.as_ref()
        }
    }
}

/// Distinct icons to sample for an `n x n` grid: one target plus enough
/// fillers for the shortest legal run (m = 2).
pub fn icon_materials_needed(grid: &GridSpec) -> usize {
    grid.cells() - 1
}

fn tint_for(entry: &IconEntry, mode: ColorMode, rng: &mut RandomStream) -> Option<u8> {
    match mode {
        ColorMode::Tinted if entry.monochrome => Some(rng.random_range(0..TINT_PALETTE.len()) as u8),
        _ => None,
    }
}

/// The first material item becomes the target; the run length is uniform in
/// [2, n] and the run position uniform over legal placements.
pub fn design_icon_connect(
    materials: &MaterialSet<IconEntry>,
    grid: &GridSpec,
    rng: &mut RandomStream,
) -> Result<IconConnectRule> {
    let n = grid.n;
    let m = rng.random_range(2..=n);
    let needed = grid.cells() - m as usize + 1;
    if materials.items.len() < needed {
        return Err(Error::InsufficientEntries {
            requested: needed,
            available: materials.items.len(),
        });
    }
    let color_mode = match materials.condition.constraint {
        crate::pools::Constraint::Icon { color } => color,
        _ => ColorMode::Original,
    };
    let orientation = if rng.random_bool(0.5) { Orientation::Row } else { Orientation::Col };
    let line = rng.random_range(0..n);
    let start = rng.random_range(0..=n - m);
    let run = Run {
        orientation,
        line,
        start,
        length: m,
    };
    let target_entry = &materials.items[0];
    let target_icon = IconPlacement {
        id: target_entry.id.clone(),
        tint: tint_for(target_entry, color_mode, rng),
    };
    // Materials arrive in random order, so assigning them to cells in order
    // is a uniform draw without replacement.
    let mut fillers = materials.items[1..needed].iter();
    let mut filler = vec![vec![None; n as usize]; n as usize];
    for row in 0..n {
        for col in 0..n {
            if run.contains(row, col) {
                continue;
            }
            let entry = fillers.next().expect("filler count matches non-run cells");
            filler[row as usize][col as usize] = Some(IconPlacement {
                id: entry.id.clone(),
                tint: tint_for(entry, color_mode, rng),
            });
        }
    }
    Ok(IconConnectRule {
        grid: *grid,
        color_mode,
        target_icon,
        run,
        filler,
    })
}

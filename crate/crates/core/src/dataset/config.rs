use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GRID_MAX, GRID_MIN, RESOLUTIONS};
use crate::qaformat::{OptionMode, PromptTemplates};
use crate::render::RenderStyle;
use crate::rules::DiffHuntSchedule;
use crate::seed::TaskId;

/// Root of the bundled assets: `$PUZZLEGEN_ASSETS` if set, else the
/// repository's `assets/` directory.
pub fn assets_dir() -> PathBuf {
    match std::env::var_os("PUZZLEGEN_ASSETS") {
        Some(p) => PathBuf::from(p),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets"),
    }
}

pub fn default_font() -> PathBuf {
    assets_dir().join("fonts/NotoSansCJKsc-Regular-subset.otf")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskCounts {
    pub icon_connect: usize,
    pub hanzi_matrix: usize,
    pub word_search: usize,
    pub grid_sum: usize,
    pub jigsaw: usize,
    pub difference_hunt: usize,
}

impl Default for TaskCounts {
    fn default() -> Self {
        Self {
            icon_connect: 2000,
            hanzi_matrix: 2000,
            word_search: 2000,
            grid_sum: 2000,
            jigsaw: 1920,
            difference_hunt: 1920,
        }
    }
}

impl TaskCounts {
    pub fn zero() -> Self {
        Self::uniform(0)
    }

    pub fn uniform(c: usize) -> Self {
        Self {
            icon_connect: c,
            hanzi_matrix: c,
            word_search: c,
            grid_sum: c,
            jigsaw: c,
            difference_hunt: c,
        }
    }

    pub fn get(&self, task: TaskId) -> usize {
        match task {
            TaskId::IconConnect => self.icon_connect,
            TaskId::HanziMatrix => self.hanzi_matrix,
            TaskId::WordSearch => self.word_search,
            TaskId::GridSum => self.grid_sum,
            TaskId::Jigsaw => self.jigsaw,
            TaskId::DifferenceHunt => self.difference_hunt,
        }
    }

    pub fn set(&mut self, task: TaskId, count: usize) {
        *match task {
            TaskId::IconConnect => &mut self.icon_connect,
            TaskId::HanziMatrix => &mut self.hanzi_matrix,
            TaskId::WordSearch => &mut self.word_search,
            TaskId::GridSum => &mut self.grid_sum,
            TaskId::Jigsaw => &mut self.jigsaw,
            TaskId::DifferenceHunt => &mut self.difference_hunt,
        } = count;
    }

    pub fn total(&self) -> usize {
        TaskId::ALL.iter().map(|&t| self.get(t)).sum()
    }

    /// Keeps only the listed tasks.
    pub fn restrict(&self, tasks: &[TaskId]) -> Self {
        let mut out = Self::zero();
        for &t in tasks {
            out.set(t, self.get(t));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolPaths {
    pub icons: PathBuf,
    pub hanzi: PathBuf,
    pub words: PathBuf,
    /// External images for Jigsaw and Difference Hunt. Without one, each
    /// sample synthesizes its own procedural scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_captions: Option<PathBuf>,
}

impl Default for PoolPaths {
    fn default() -> Self {
        Self::bundled()
    }
}

impl PoolPaths {
    pub fn bundled() -> Self {
        Self::under(&assets_dir().join("pools"))
    }

    /// Standard layout below one directory: `icons/`, `hanzi/`, `words/`,
    /// and `images/` if present.
    pub fn under(root: &Path) -> Self {
        let images = root.join("images");
        Self {
            icons: root.join("icons"),
            hanzi: root.join("hanzi"),
            words: root.join("words/words.txt"),
            images: images.is_dir().then_some(images),
            image_captions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DifficultyConfig {
    pub grid_min: u32,
    pub grid_max: u32,
    pub jigsaw_min: u32,
    pub jigsaw_max: u32,
    pub resolutions: Vec<u32>,
    pub level_min: u8,
    pub level_max: u8,
    /// Fraction of Word Search samples that contain the word.
    pub word_search_positive_rate: f64,
    /// Probability that a Hanzi Matrix draw starts from a near-form group.
    pub near_form_rate: f64,
}

impl Default for DifficultyConfig {
    fn default() -> Self {
        Self {
            grid_min: GRID_MIN,
            grid_max: GRID_MAX,
            jigsaw_min: GRID_MIN,
            jigsaw_max: GRID_MAX,
            resolutions: RESOLUTIONS.to_vec(),
            level_min: 1,
            level_max: 5,
            word_search_positive_rate: 0.5,
            near_form_rate: 0.5,
        }
    }
}

/// Omitted keys in a config file take the values of `DatasetConfig::default()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub master_seed: u64,
    pub mode: OptionMode,
    pub counts: TaskCounts,
    pub pools: PoolPaths,
    pub style: RenderStyle,
    pub difficulty: DifficultyConfig,
    pub schedule: DiffHuntSchedule,
    pub templates: PromptTemplates,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self::new(0, OptionMode::FixedOption)
    }
}

impl DatasetConfig {
    pub fn new(master_seed: u64, mode: OptionMode) -> Self {
        Self {
            master_seed,
            mode,
            counts: TaskCounts::default(),
            pools: PoolPaths::bundled(),
            style: RenderStyle::with_font(default_font()),
            difficulty: DifficultyConfig::default(),
            schedule: DiffHuntSchedule::default(),
            templates: PromptTemplates::default(),
        }
    }

    pub fn with_counts(mut self, counts: TaskCounts) -> Self {
        self.counts = counts;
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.difficulty;
        if self.counts.total() == 0 {
            return Err(Error::Config("all task counts are zero".into()));
        }
        if d.grid_min < GRID_MIN || d.grid_max > GRID_MAX || d.grid_min > d.grid_max {
            return Err(Error::Config(format!("grid range [{}, {}] outside [{GRID_MIN}, {GRID_MAX}]", d.grid_min, d.grid_max)));
        }
        if d.jigsaw_min < 2 || d.jigsaw_max > 9 || d.jigsaw_min > d.jigsaw_max {
            return Err(Error::Config(format!("jigsaw range [{}, {}] outside [2, 9]", d.jigsaw_min, d.jigsaw_max)));
        }
        if d.resolutions.is_empty() || d.resolutions.iter().any(|r| !RESOLUTIONS.contains(r)) {
            return Err(Error::Config(format!("resolutions must be drawn from {RESOLUTIONS:?}")));
        }
        if d.level_min < 1 || d.level_max > 5 || d.level_min > d.level_max {
            return Err(Error::Config(format!("level range [{}, {}] outside [1, 5]", d.level_min, d.level_max)));
        }
        if !(0.0..=1.0).contains(&d.word_search_positive_rate) || !(0.0..=1.0).contains(&d.near_form_rate) {
            return Err(Error::Config("rates must lie in [0, 1]".into()));
        }
        self.style.validate()
    }
}

/// Rebuilds a Jigsaw / Difference Hunt set over an external image pool.
#[derive(Debug, Clone, PartialEq)]
pub struct RefreshConfig {
    pub images: PathBuf,
    pub captions: Option<PathBuf>,
    pub tasks: Vec<TaskId>,
    pub jigsaw: usize,
    pub difference_hunt: usize,
    pub mode: OptionMode,
    pub master_seed: u64,
}

impl RefreshConfig {
    pub fn to_dataset_config(&self) -> Result<DatasetConfig> {
        if self.tasks.is_empty() {
            return Err(Error::Config("refresh needs at least one task".into()));
        }
        if let Some(t) = self.tasks.iter().find(|t| !matches!(t, TaskId::Jigsaw | TaskId::DifferenceHunt)) {
            return Err(Error::Config(format!("refresh only rebuilds Jigsaw and DifferenceHunt, not {t}")));
        }
        let mut counts = TaskCounts::zero();
        counts.jigsaw = self.jigsaw;
        counts.difference_hunt = self.difference_hunt;
        let mut cfg = DatasetConfig::new(self.master_seed, self.mode).with_counts(counts.restrict(&self.tasks));
        cfg.pools.images = Some(self.images.clone());
        cfg.pools.image_captions = self.captions.clone();
        Ok(cfg)
    }
}

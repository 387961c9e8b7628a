//! Seeded generation, verification and scoring of visual-puzzle VQA
//! datasets.
//!
//! The pipeline runs material sampling ([`pools`]), rule design ([`rules`]),
//! rasterization ([`render`]) and question formatting ([`qaformat`]) per
//! sample; [`dataset`] assembles and verifies whole datasets and [`eval`]
//! scores answers against them.

pub mod dataset;
pub mod decimal;
pub mod error;
pub mod eval;
pub mod grid;
pub mod pools;
pub mod qaformat;
pub mod render;
pub mod rules;
pub mod sample;
pub mod seed;

pub use decimal::Decimal;
pub use error::{Error, Result};
pub use grid::{cell_rect, GridSpec, PixelRect};
pub use qaformat::{OptionArrangement, OptionMode};
pub use rules::PuzzleRule;
pub use sample::{GroundTruth, PuzzleSample};
pub use seed::{derive_stream, RandomStream, SeedContext, TaskId};

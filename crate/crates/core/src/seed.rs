//! Task identifiers and the per-sample random stream contract.
//!
//! Every sample draws from its own stream, keyed by `(master_seed, task,
//! index)`. Streams never share state, so samples can be generated in any
//! order or in parallel and still come out identical.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    IconConnect,
    HanziMatrix,
    WordSearch,
    GridSum,
    Jigsaw,
    DifferenceHunt,
}

impl TaskId {
    pub const ALL: [TaskId; 6] = [
        TaskId::IconConnect,
        TaskId::HanziMatrix,
        TaskId::WordSearch,
        TaskId::GridSum,
        TaskId::Jigsaw,
        TaskId::DifferenceHunt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::IconConnect => "IconConnect",
            TaskId::HanziMatrix => "HanziMatrix",
            TaskId::WordSearch => "WordSearch",
            TaskId::GridSum => "GridSum",
            TaskId::Jigsaw => "Jigsaw",
            TaskId::DifferenceHunt => "DifferenceHunt",
        }
    }

    /// Two-letter code used in report tables.
    pub fn code(self) -> &'static str {
        match self {
            TaskId::IconConnect => "IC",
            TaskId::HanziMatrix => "HM",
            TaskId::WordSearch => "WS",
            TaskId::GridSum => "GS",
            TaskId::Jigsaw => "JS",
            TaskId::DifferenceHunt => "DH",
        }
    }

    pub fn is_grid_task(self) -> bool {
        matches!(
            self,
            TaskId::IconConnect | TaskId::HanziMatrix | TaskId::WordSearch | TaskId::GridSum
        )
    }

    /// Tasks whose answer is a number (and therefore carry a relative error
    /// in direct-answer mode).
    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            TaskId::IconConnect | TaskId::HanziMatrix | TaskId::GridSum | TaskId::DifferenceHunt
        )
    }

    pub fn field(self) -> Field {
        match self {
            TaskId::IconConnect | TaskId::HanziMatrix => Field::VisualRecognition,
            TaskId::WordSearch | TaskId::GridSum => Field::LogicalReasoning,
            TaskId::Jigsaw | TaskId::DifferenceHunt => Field::ContextUnderstanding,
        }
    }

    fn tag(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.trim().to_ascii_lowercase();
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str().to_ascii_lowercase() == lowered || t.code().to_ascii_lowercase() == lowered)
            .or(match lowered.as_str() {
                "diffhunt" => Some(TaskId::DifferenceHunt),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidParameter(format!("unknown task {s:?}")))
    }
}

/// The three competency fields, each covered by two tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    VisualRecognition,
    LogicalReasoning,
    ContextUnderstanding,
}

impl Field {
    pub const ALL: [Field; 3] = [
        Field::VisualRecognition,
        Field::LogicalReasoning,
        Field::ContextUnderstanding,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedContext {
    pub master_seed: u64,
}

impl SeedContext {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn stream(&self, task: TaskId, index: u64) -> RandomStream {
        derive_stream(self, task, index)
    }
}

/// Domain separation for streams that are not sample generation (agents,
/// noise seeds inside a sample, ...).
pub fn derive_keyed_stream(ctx: &SeedContext, domain: &str, task: TaskId, index: u64) -> RandomStream {
    let mut hasher = Sha256::new();
    hasher.update(b"puzzlegen.stream.v1\0");
    hasher.update(domain.as_bytes());
    hasher.update([0u8]);
    hasher.update(ctx.master_seed.to_le_bytes());
    hasher.update([task.tag()]);
    hasher.update(index.to_le_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    RandomStream(ChaCha8Rng::from_seed(key))
}

pub fn derive_stream(ctx: &SeedContext, task: TaskId, index: u64) -> RandomStream {
    derive_keyed_stream(ctx, "sample", task, index)
}

/// Single-owner deterministic random stream.
#[derive(Debug, Clone)]
pub struct RandomStream(ChaCha8Rng);

impl RandomStream {
    pub fn from_seed_u64(seed: u64) -> Self {
        RandomStream(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

//! Questions, option arrangements and prompts for the three answer regimes.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::PuzzleRule;
use crate::sample::PuzzleSample;
use crate::seed::{RandomStream, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptionMode {
    FixedOption,
    RandomizedOption,
    DirectAnswer,
}

impl OptionMode {
    pub const ALL: [OptionMode; 3] = [OptionMode::FixedOption, OptionMode::RandomizedOption, OptionMode::DirectAnswer];

    pub fn short(self) -> &'static str {
        match self {
            OptionMode::FixedOption => "fixed",
            OptionMode::RandomizedOption => "randomized",
            OptionMode::DirectAnswer => "direct",
        }
    }
}

impl std::fmt::Display for OptionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short())
    }
}

impl std::str::FromStr for OptionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" | "fixed-option" => Ok(OptionMode::FixedOption),
            "randomized" | "random" | "randomized-option" => Ok(OptionMode::RandomizedOption),
            "direct" | "direct-answer" => Ok(OptionMode::DirectAnswer),
            _ => Err(Error::Config(format!("unknown mode {s:?} (fixed, randomized, direct)"))),
        }
    }
}

pub const LABELS: [&str; 4] = ["A", "B", "C", "D"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionArrangement {
    pub mode: OptionMode,
    /// Label to display text; empty in direct mode.
    pub entries: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_label: Option<String>,
}

impl OptionArrangement {
    pub fn labels(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

/// Canonical option texts with the index of the correct one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptionValues {
    pub values: Vec<String>,
    pub correct: usize,
}

impl OptionValues {
    pub fn correct_value(&self) -> &str {
        &self.values[self.correct]
    }
}

pub fn tile_text(tile: usize) -> String {
    format!("tile {tile}")
}

/// Inverse of [`tile_text`].
pub fn parse_tile_text(text: &str) -> Option<usize> {
    text.strip_prefix("tile ")?.parse().ok()
}

pub fn derive_options(rule: &PuzzleRule) -> OptionValues {
    let counts = |m: u32| OptionValues {
        values: (0..4).map(|k| (m as i64 - 1 + k).to_string()).collect(),
        correct: 1,
    };
    match rule {
        PuzzleRule::IconConnect(r) => counts(r.run.length),
        PuzzleRule::HanziMatrix(r) => counts(r.unique_count),
        PuzzleRule::DifferenceHunt(r) => counts(r.m),
        PuzzleRule::GridSum(r) => OptionValues {
            values: [-10, 0, 10, 20].iter().map(|&d| r.sum.offset(d).to_string()).collect(),
            correct: 1,
        },
        PuzzleRule::WordSearch(r) => OptionValues {
            values: vec!["Yes".into(), "No".into()],
            correct: if r.present { 0 } else { 1 },
        },
        PuzzleRule::Jigsaw(r) => OptionValues {
            values: r.option_tiles().into_iter().map(tile_text).collect(),
            correct: 0,
        },
    }
}

pub fn arrange_options(task: TaskId, values: &OptionValues, mode: OptionMode, rng: &mut RandomStream) -> Result<OptionArrangement> {
    let labels = &LABELS[..values.values.len()];
    let order: Vec<usize> = match mode {
        OptionMode::DirectAnswer => {
            if task == TaskId::Jigsaw {
                return Err(Error::DirectAnswerUnsupported(task));
            }
            return Ok(OptionArrangement {
                mode,
                entries: BTreeMap::new(),
                correct_label: None,
            });
        }
        // Word Search keeps Yes at A and No at B.
        OptionMode::FixedOption if task == TaskId::WordSearch => (0..values.values.len()).collect(),
        OptionMode::FixedOption => {
            let mut rest: Vec<usize> = (0..values.values.len()).filter(|&k| k != values.correct).collect();
            rest.sort_by(|&a, &b| canonical_cmp(&values.values[a], &values.values[b]).then(a.cmp(&b)));
            rest.insert(1.min(rest.len()), values.correct);
            rest
        }
        OptionMode::RandomizedOption => {
            let mut o: Vec<usize> = (0..values.values.len()).collect();
            o.shuffle(rng);
            o
        }
    };
    let entries = labels.iter().zip(&order).map(|(l, &k)| (l.to_string(), values.values[k].clone())).collect();
    let correct_label = order.iter().position(|&k| k == values.correct).map(|p| labels[p].to_string());
    Ok(OptionArrangement {
        mode,
        entries,
        correct_label,
    })
}

/// Numeric order for numbers, tile order for tiles, text order otherwise.
fn canonical_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    use crate::decimal::Decimal;
    if let (Ok(x), Ok(y)) = (a.parse::<Decimal>(), b.parse::<Decimal>()) {
        return x.value_cmp(&y);
    }
    if let (Some(x), Some(y)) = (parse_tile_text(a), parse_tile_text(b)) {
        return x.cmp(&y);
    }
    a.cmp(b)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplates {
    pub icon_connect: String,
    pub hanzi_matrix: String,
    pub word_search: String,
    pub grid_sum: String,
    pub jigsaw: String,
    pub difference_hunt: String,
    /// Fills the `{icon}` slot.
    pub icon_name: String,
    pub instruction_choice: String,
    pub instruction_number: String,
    pub instruction_yes_no: String,
    pub option_line: String,
    pub image_option: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            icon_connect: "How many times does {icon} appear in {position} of this image?".into(),
            hanzi_matrix: "How many unique Chinese characters are in the grid image?".into(),
            word_search: "Does this grid image contain the word '{word}'?".into(),
            grid_sum: "What is the sum of all the numbers in the grid image?".into(),
            jigsaw: "Which tile is missing from the incomplete image?".into(),
            difference_hunt: "How many differences are there between these two images?".into(),
            icon_name: "the icon '{name}' (shown below the grid)".into(),
            instruction_choice: "Answer with the option letter only.".into(),
            instruction_number: "Answer with a number only.".into(),
            instruction_yes_no: "Answer Yes or No.".into(),
            option_line: "({label}) {text}".into(),
            image_option: "image {index}".into(),
        }
    }
}

impl PromptTemplates {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn build_question(&self, rule: &PuzzleRule) -> String {
        match rule {
            PuzzleRule::IconConnect(r) => {
                let icon = self.icon_name.replace("{name}", &r.target_icon.id);
                self.icon_connect.replace("{icon}", &icon).replace("{position}", &r.run.position_phrase())
            }
            PuzzleRule::HanziMatrix(_) => self.hanzi_matrix.clone(),
            PuzzleRule::WordSearch(r) => self.word_search.replace("{word}", &r.target_word),
            PuzzleRule::GridSum(_) => self.grid_sum.clone(),
            PuzzleRule::Jigsaw(_) => self.jigsaw.clone(),
            PuzzleRule::DifferenceHunt(_) => self.difference_hunt.clone(),
        }
    }

    pub fn render_prompt(&self, sample: &PuzzleSample) -> Prompt {
        let direct = sample.options.as_ref().is_none_or(|o| o.mode == OptionMode::DirectAnswer);
        let instruction = match (direct, sample.task) {
            (false, _) => &self.instruction_choice,
            (true, TaskId::WordSearch) => &self.instruction_yes_no,
            (true, _) => &self.instruction_number,
        };
        let mut lines = vec![instruction.clone(), sample.question.clone()];
        if let Some(opts) = sample.options.as_ref().filter(|_| !direct) {
            for (k, (label, text)) in opts.entries.iter().enumerate() {
                let shown = if sample.task == TaskId::Jigsaw {
                    // Option tiles follow the incomplete image in attachment order.
                    self.image_option.replace("{index}", &(k + 2).to_string())
                } else {
                    text.clone()
                };
                lines.push(self.option_line.replace("{label}", label).replace("{text}", &shown));
            }
        }
        Prompt {
            text: lines.join("\n"),
            images: sample.image_refs.clone(),
        }
    }
}

pub fn build_question(rule: &PuzzleRule) -> String {
    PromptTemplates::default().build_question(rule)
}

pub fn render_prompt(sample: &PuzzleSample) -> Prompt {
    PromptTemplates::default().render_prompt(sample)
}

/// Message payload for one single-turn query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    /// Dataset-relative image paths in attachment order.
    pub images: Vec<String>,
}

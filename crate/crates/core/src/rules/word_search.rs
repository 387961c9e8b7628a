use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rows_to_strings, strings_to_rows, Orientation};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::seed::RandomStream;

/// Whole-grid resampling bound for negative samples.
pub const WORD_SEARCH_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub orientation: Orientation,
    pub line: u32,
    pub start: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSearchRule {
    pub grid: GridSpec,
    pub target_word: String,
    pub present: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
    /// One string of `n` uppercase letters per row.
    pub letters: Vec<String>,
}

fn random_letter(rng: &mut RandomStream) -> char {
    (b'A' + rng.random_range(0..26u8)) as char
}

/// Every forward (left-to-right or top-to-bottom) occurrence of `word`.
pub fn scan_word(letters: &[Vec<char>], word: &str) -> Vec<Placement> {
    let w: Vec<char> = word.chars().collect();
    let n = letters.len();
    let mut hits = Vec::new();
    if w.is_empty() || w.len() > n {
        return hits;
    }
    for line in 0..n {
        for start in 0..=n - w.len() {
            if (0..w.len()).all(|k| letters[line][start + k] == w[k]) {
                hits.push(Placement {
                    orientation: Orientation::Row,
                    line: line as u32,
                    start: start as u32,
                });
            }
            if (0..w.len()).all(|k| letters[start + k][line] == w[k]) {
                hits.push(Placement {
                    orientation: Orientation::Col,
                    line: line as u32,
                    start: start as u32,
                });
            }
        }
    }
    hits
}

pub fn design_word_search(word: &str, grid: &GridSpec, present: bool, rng: &mut RandomStream) -> Result<WordSearchRule> {
    let n = grid.n as usize;
    if word.len() > n {
        return Err(Error::WordTooLong {
            word: word.to_string(),
            len: word.len(),
            n: grid.n,
        });
    }
    let fill = |rng: &mut RandomStream| -> Vec<Vec<char>> {
        (0..n).map(|_| (0..n).map(|_| random_letter(rng)).collect()).collect()
    };
    if present {
        let orientation = if rng.random_bool(0.5) { Orientation::Row } else { Orientation::Col };
        let line = rng.random_range(0..n as u32);
        let start = rng.random_range(0..=(n - word.len()) as u32);
        let mut letters = fill(rng);
        for (k, c) in word.chars().enumerate() {
            let pos = start as usize + k;
            match orientation {
                Orientation::Row => letters[line as usize][pos] = c,
                Orientation::Col => letters[pos][line as usize] = c,
            }
        }
        return Ok(WordSearchRule {
            grid: *grid,
            target_word: word.to_string(),
            present: true,
            placement: Some(Placement {
                orientation,
                line,
                start,
            }),
            letters: rows_to_strings(&letters),
        });
    }
    for _ in 0..WORD_SEARCH_ATTEMPTS {
        let letters = fill(rng);
        if scan_word(&letters, word).is_empty() {
            return Ok(WordSearchRule {
                grid: *grid,
                target_word: word.to_string(),
                present: false,
                placement: None,
                letters: rows_to_strings(&letters),
            });
        }
    }
    Err(Error::Rejected(format!(
        "no grid without {word:?} after {WORD_SEARCH_ATTEMPTS} attempts"
    )))
}

impl WordSearchRule {
    pub fn letter_rows(&self) -> Vec<Vec<char>> {
        strings_to_rows(&self.letters)
    }
}

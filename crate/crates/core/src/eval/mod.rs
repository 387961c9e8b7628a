//! Answer parsing, scoring, baseline agents and model querying.

mod client;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

pub use client::{query_model, request_body, run_endpoint, run_responses_file, ChatClient, ModelEndpoint, QueryOutcome};

use crate::decimal::Decimal;
use crate::error::{Error, Result};
use crate::qaformat::OptionMode;
use crate::rules::PuzzleRule;
use crate::sample::{GroundTruth, PuzzleSample};
use crate::seed::{derive_keyed_stream, Field, SeedContext, TaskId};

/// Clamp used for the relative-error denominator.
pub const MRE_CLAMP: &str = "max(|y|, 1)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Parsed {
    Choice(String),
    Number(Decimal),
    YesNo(bool),
    Unparsed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: String,
    pub model: String,
    pub mode: OptionMode,
    /// `None` when the request failed permanently.
    pub raw_response: Option<String>,
    pub parsed: Parsed,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
    #[serde(default)]
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

fn regex(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static pattern"))
}

/// Earliest option letter in `raw`, restricted to `labels`.
///
/// Accepted forms are a letter in parentheses or brackets, a letter after
/// "answer is" / "answer:" (both case-insensitive), or an uppercase letter
/// standing alone. Lowercase lone letters are ignored so that the article
/// "a" is not read as an answer.
fn find_letter(raw: &str, labels: &[&str]) -> Option<(usize, String)> {
    static WRAPPED: OnceLock<Regex> = OnceLock::new();
    static ANSWER: OnceLock<Regex> = OnceLock::new();
    static LONE: OnceLock<Regex> = OnceLock::new();
    let patterns = [
        regex(&WRAPPED, r"[\(\[\{<]\s*([A-Za-z])\s*[\)\]\}>]"),
        regex(&ANSWER, r"(?i)answer\s*(?:is\s*:?|:)\s*\**\s*([a-z])\b"),
        regex(&LONE, r"\b([A-Z])\b"),
    ];
    patterns
        .iter()
        .flat_map(|re| re.captures_iter(raw))
        .filter_map(|c| {
            let m = c.get(1)?;
            let label = m.as_str().to_ascii_uppercase();
            labels.contains(&label.as_str()).then_some((m.start(), label))
        })
        .min_by_key(|(pos, _)| *pos)
}

fn find_yes_no(raw: &str) -> Option<(usize, bool)> {
    static YES_NO: OnceLock<Regex> = OnceLock::new();
    let c = regex(&YES_NO, r"(?i)\b(yes|no)\b").captures(raw)?;
    let m = c.get(1)?;
    Some((m.start(), m.as_str().eq_ignore_ascii_case("yes")))
}

fn find_number(raw: &str) -> Option<Decimal> {
    static NUMBER: OnceLock<Regex> = OnceLock::new();
    let m = regex(&NUMBER, r"[-+]?(?:\d+(?:\.\d+)?|\.\d+)").find(raw)?;
    let text = m.as_str().trim_start_matches('+');
    text.parse().ok()
}

pub fn parse_answer(raw: &str, sample: &PuzzleSample) -> Parsed {
    let opts = sample.options.as_ref().filter(|o| o.mode != OptionMode::DirectAnswer);
    match opts {
        Some(o) => {
            let labels = o.labels();
            let letter = find_letter(raw, &labels);
            if sample.task == TaskId::WordSearch {
                // A Yes/No token maps to whichever label shows that text.
                let word = find_yes_no(raw).and_then(|(pos, yes)| {
                    let text = if yes { "Yes" } else { "No" };
                    o.entries.iter().find(|(_, v)| *v == text).map(|(k, _)| (pos, k.clone()))
                });
                return match (letter, word) {
                    (Some(l), Some(w)) => Parsed::Choice(if w.0 < l.0 { w.1 } else { l.1 }),
                    (Some((_, l)), None) | (None, Some((_, l))) => Parsed::Choice(l),
                    (None, None) => Parsed::Unparsed,
                };
            }
            letter.map(|(_, l)| Parsed::Choice(l)).unwrap_or(Parsed::Unparsed)
        }
        None if sample.task == TaskId::WordSearch => {
            find_yes_no(raw).map(|(_, y)| Parsed::YesNo(y)).unwrap_or(Parsed::Unparsed)
        }
        None => find_number(raw).map(Parsed::Number).unwrap_or(Parsed::Unparsed),
    }
}

/// Exact relative error `|ŷ − y| / max(|y|, 1)`.
pub fn relative_error_exact(predicted: &Decimal, truth: &Decimal) -> Ratio<i128> {
    let abs = |r: Ratio<i128>| if r < Ratio::from_integer(0) { -r } else { r };
    let y = truth.to_ratio();
    let diff = abs(predicted.to_ratio() - y);
    diff / abs(y).max(Ratio::from_integer(1))
}

pub fn ratio_to_f64(r: &Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exact mean of relative-error terms. The sum runs over big integers:
/// thousands of distinct denominators overflow `i128`.
pub fn mean_relative_error(terms: &[Ratio<i128>]) -> Option<BigRational> {
    if terms.is_empty() {
        return None;
    }
    let big = |t: &Ratio<i128>| BigRational::new(BigInt::from(*t.numer()), BigInt::from(*t.denom()));
    let sum = terms.iter().fold(BigRational::from_integer(BigInt::from(0)), |acc, t| acc + big(t));
    Some(sum / BigRational::from_integer(BigInt::from(terms.len())))
}

/// Scores one raw response for `sample`.
pub fn evaluate_response(sample: &PuzzleSample, model: &str, raw: Option<String>) -> EvalRecord {
    let parsed = raw.as_deref().map(|r| parse_answer(r, sample)).unwrap_or(Parsed::Unparsed);
    let mode = sample.options.as_ref().map(|o| o.mode).unwrap_or(OptionMode::DirectAnswer);
    let (correct, relative_error) = judge(sample, &parsed);
    EvalRecord {
        sample_id: sample.id.clone(),
        model: model.to_string(),
        mode,
        raw_response: raw,
        parsed,
        correct,
        relative_error,
        retries: 0,
        elapsed_ms: None,
    }
}

fn direct_numeric(sample: &PuzzleSample) -> bool {
    sample.options.as_ref().is_none_or(|o| o.mode == OptionMode::DirectAnswer) && sample.task.is_numeric()
}

fn judge(sample: &PuzzleSample, parsed: &Parsed) -> (bool, Option<f64>) {
    if direct_numeric(sample) {
        let truth = sample.ground_truth.as_decimal().unwrap_or_else(|| Decimal::zero(0));
        let predicted = match parsed {
            Parsed::Number(v) => *v,
            _ => Decimal::zero(0),
        };
        let correct = matches!(parsed, Parsed::Number(v) if v.value_eq(&truth));
        return (correct, Some(ratio_to_f64(&relative_error_exact(&predicted, &truth))));
    }
    let correct = match (parsed, &sample.options) {
        (Parsed::Choice(l), Some(o)) => o.correct_label.as_deref() == Some(l.as_str()),
        (Parsed::YesNo(y), _) => sample.ground_truth == GroundTruth::YesNo(*y),
        _ => false,
    };
    (correct, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Agent {
    Oracle,
    Random,
    Constant(char),
}

impl Agent {
    pub fn name(&self) -> String {
        match self {
            Agent::Oracle => "oracle".into(),
            Agent::Random => "random".into(),
            Agent::Constant(c) => format!("constant-{c}"),
        }
    }
}

impl std::str::FromStr for Agent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "oracle" => Ok(Agent::Oracle),
            "random" => Ok(Agent::Random),
            _ => {
                let label = lower
                    .strip_prefix("constant")
                    .map(|r| r.trim_start_matches([':', '-', '(']).trim_end_matches(')'))
                    .filter(|r| r.len() == 1)
                    .and_then(|r| r.chars().next())
                    .filter(|c| ('a'..='d').contains(c));
                label
                    .map(|c| Agent::Constant(c.to_ascii_uppercase()))
                    .ok_or_else(|| Error::Config(format!("unknown agent {s:?} (oracle, random, constant:B)")))
            }
        }
    }
}

fn grid_cells(rule: &PuzzleRule) -> i64 {
    let n = match rule {
        PuzzleRule::IconConnect(r) => r.grid.n,
        PuzzleRule::HanziMatrix(r) => r.grid.n,
        PuzzleRule::WordSearch(r) => r.grid.n,
        PuzzleRule::GridSum(r) => r.grid.n,
        PuzzleRule::Jigsaw(r) => r.n,
        PuzzleRule::DifferenceHunt(_) => 0,
    };
    (n * n) as i64
}

fn agent_response(agent: Agent, sample: &PuzzleSample, seed: u64) -> String {
    let choice = sample.options.as_ref().filter(|o| o.mode != OptionMode::DirectAnswer);
    match agent {
        Agent::Oracle => match choice {
            Some(o) => format!("({})", o.correct_label.clone().unwrap_or_default()),
            None => match &sample.ground_truth {
                GroundTruth::YesNo(true) => "Yes".into(),
                GroundTruth::YesNo(false) => "No".into(),
                gt => gt.display(),
            },
        },
        Agent::Constant(c) => format!("({c})"),
        Agent::Random => {
            let mut rng = derive_keyed_stream(&SeedContext::new(seed), "agent-random", sample.task, sample.seed_index);
            match choice {
                Some(o) => {
                    let labels = o.labels();
                    format!("({})", labels[rng.random_range(0..labels.len())])
                }
                None => match sample.task {
                    TaskId::WordSearch => if rng.random_bool(0.5) { "Yes" } else { "No" }.into(),
                    TaskId::DifferenceHunt => rng.random_range(1..=8).to_string(),
                    TaskId::GridSum => {
                        let bound = 100 * grid_cells(&sample.rule);
                        rng.random_range(-bound..=bound).to_string()
                    }
                    _ => rng.random_range(1..=grid_cells(&sample.rule).max(1)).to_string(),
                },
            }
        }
    }
}

/// Runs a baseline agent over `samples` through the same parse/score path a
/// model response takes.
pub fn run_agent(samples: &[PuzzleSample], agent: Agent, seed: u64) -> Vec<EvalRecord> {
    let name = agent.name();
    samples
        .iter()
        .map(|s| evaluate_response(s, &name, Some(agent_response(agent, s, seed))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub samples: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub unparsed: usize,
    pub unparsed_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mre: Option<f64>,
    /// The same mean as a reduced fraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mre_exact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub models: Vec<String>,
    pub modes: Vec<OptionMode>,
    pub per_task: BTreeMap<TaskId, TaskMetrics>,
    pub fields: BTreeMap<String, f64>,
    pub overall: f64,
    pub mre_denominator: String,
}

impl MetricsReport {
    pub fn accuracy(&self, task: TaskId) -> Option<f64> {
        self.per_task.get(&task).map(|m| m.accuracy)
    }
}

pub fn field_name(f: Field) -> &'static str {
    match f {
        Field::VisualRecognition => "visual_recognition",
        Field::LogicalReasoning => "logical_reasoning",
        Field::ContextUnderstanding => "context_understanding",
    }
}

fn join<'a>(records: &'a [EvalRecord], samples: &'a [PuzzleSample]) -> Result<Vec<(&'a EvalRecord, &'a PuzzleSample)>> {
    let by_id: BTreeMap<&str, &PuzzleSample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();
    records
        .iter()
        .map(|r| {
            by_id
                .get(r.sample_id.as_str())
                .map(|s| (r, *s))
                .ok_or_else(|| Error::OrphanRecord(r.sample_id.clone()))
        })
        .collect()
}

pub fn score(records: &[EvalRecord], samples: &[PuzzleSample]) -> Result<MetricsReport> {
    let joined = join(records, samples)?;
    let mut per_task = BTreeMap::new();
    for task in TaskId::ALL {
        let rows: Vec<_> = joined.iter().filter(|(_, s)| s.task == task).collect();
        if rows.is_empty() {
            continue;
        }
        let correct = rows.iter().filter(|(r, _)| r.correct).count();
        let unparsed = rows.iter().filter(|(r, _)| r.parsed == Parsed::Unparsed).count();
        // Recompute each term exactly rather than trusting stored floats.
        let terms: Vec<Ratio<i128>> = rows
            .iter()
            .filter(|(_, s)| direct_numeric(s))
            .map(|(r, s)| {
                let y = s.ground_truth.as_decimal().unwrap_or_else(|| Decimal::zero(0));
                let yhat = match &r.parsed {
                    Parsed::Number(v) => *v,
                    _ => Decimal::zero(0),
                };
                relative_error_exact(&yhat, &y)
            })
            .collect();
        let mre = mean_relative_error(&terms);
        let mre_float = (!terms.is_empty()).then(|| terms.iter().map(ratio_to_f64).sum::<f64>() / terms.len() as f64);
        per_task.insert(
            task,
            TaskMetrics {
                samples: rows.len(),
                correct,
                accuracy: correct as f64 / rows.len() as f64,
                unparsed,
                unparsed_rate: unparsed as f64 / rows.len() as f64,
                mre: mre_float,
                mre_exact: mre.map(|r| format!("{}/{}", r.numer(), r.denom())),
            },
        );
    }
    let mut fields = BTreeMap::new();
    for f in Field::ALL {
        let accs: Vec<f64> =
            TaskId::ALL.iter().filter(|t| t.field() == f).filter_map(|t| per_task.get(t).map(|m| m.accuracy)).collect();
        if !accs.is_empty() {
            fields.insert(field_name(f).to_string(), accs.iter().sum::<f64>() / accs.len() as f64);
        }
    }
    let overall = if per_task.is_empty() {
        0.0
    } else {
        per_task.values().map(|m| m.accuracy).sum::<f64>() / per_task.len() as f64
    };
    let mut models: Vec<String> = records.iter().map(|r| r.model.clone()).collect();
    models.sort();
    models.dedup();
    let mut modes: Vec<OptionMode> = Vec::new();
    for r in records {
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }
    Ok(MetricsReport {
        models,
        modes,
        per_task,
        fields,
        overall,
        mre_denominator: MRE_CLAMP.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakdownKey {
    GridN,
    Resolution,
    Level,
}

impl BreakdownKey {
    pub const ALL: [BreakdownKey; 3] = [BreakdownKey::GridN, BreakdownKey::Resolution, BreakdownKey::Level];

    pub fn as_str(self) -> &'static str {
        match self {
            BreakdownKey::GridN => "grid_n",
            BreakdownKey::Resolution => "resolution",
            BreakdownKey::Level => "level",
        }
    }

    fn value(self, s: &PuzzleSample) -> Option<u32> {
        match self {
            BreakdownKey::GridN => s.difficulty.grid_n,
            // Grid tasks all share one resolution; only image tasks vary.
            BreakdownKey::Resolution => {
                matches!(s.task, TaskId::Jigsaw | TaskId::DifferenceHunt).then_some(s.difficulty.resolution)
            }
            BreakdownKey::Level => s.difficulty.level.map(u32::from),
        }
    }
}

impl std::str::FromStr for BreakdownKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BreakdownKey::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown breakdown key {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub task: TaskId,
    pub key: String,
    pub value: u32,
    pub samples: usize,
    pub correct: usize,
    pub accuracy: f64,
}

pub fn breakdown(records: &[EvalRecord], samples: &[PuzzleSample], key: BreakdownKey) -> Result<Vec<BreakdownRow>> {
    let joined = join(records, samples)?;
    let mut cells: BTreeMap<(TaskId, u32), (usize, usize)> = BTreeMap::new();
    for (r, s) in joined {
        if let Some(v) = key.value(s) {
            let e = cells.entry((s.task, v)).or_default();
            e.0 += 1;
            e.1 += r.correct as usize;
        }
    }
    if cells.is_empty() {
        return Err(Error::InapplicableKey(key.as_str().to_string()));
    }
    Ok(cells
        .into_iter()
        .map(|((task, value), (n, c))| BreakdownRow {
            task,
            key: key.as_str().to_string(),
            value,
            samples: n,
            correct: c,
            accuracy: c as f64 / n as f64,
        })
        .collect())
}

pub fn write_records(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r)?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedEntry {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Writes `summary.json`, `per_task.csv` and one `breakdown_{key}.csv` per
/// applicable key into `dir`.
pub fn write_report(dir: &Path, records: &[EvalRecord], samples: &[PuzzleSample]) -> Result<MetricsReport> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report = score(records, samples)?;
    let summary = dir.join("summary.json");
    fs::write(&summary, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&summary, e))?;

    let csv_err = |p: &Path, e: csv::Error| Error::Io {
        path: p.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    let per_task = dir.join("per_task.csv");
    let mut w = csv::Writer::from_path(&per_task).map_err(|e| csv_err(&per_task, e))?;
    w.write_record(["task", "samples", "correct", "accuracy", "unparsed_rate", "mre"]).map_err(|e| csv_err(&per_task, e))?;
    for (task, m) in &report.per_task {
        w.write_record([
            task.to_string(),
            m.samples.to_string(),
            m.correct.to_string(),
            format!("{:.4}", m.accuracy),
            format!("{:.4}", m.unparsed_rate),
            m.mre.map(|v| format!("{v:.4}")).unwrap_or_default(),
        ])
        .map_err(|e| csv_err(&per_task, e))?;
    }
    w.flush().map_err(|e| Error::io(&per_task, e))?;

    for key in BreakdownKey::ALL {
        let rows = match breakdown(records, samples, key) {
            Ok(r) => r,
            Err(Error::InapplicableKey(_)) => continue,
            Err(e) => return Err(e),
        };
        let path = dir.join(format!("breakdown_{}.csv", key.as_str()));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        for row in rows {
            w.serialize(row).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}

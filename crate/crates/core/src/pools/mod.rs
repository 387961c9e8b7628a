//! Source pools and condition-constrained material sampling.
//!
//! A pool is loaded once from user-supplied assets and is immutable
//! afterwards. [`sample_materials`] draws a [`MaterialSet`] of distinct entries
//! satisfying a [`SamplingCondition`], recording the ids it picked.

pub mod scene;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decimal::Decimal;
use crate::error::{Error, Result};
use crate::seed::RandomStream;

pub const WORD_MIN_LEN: usize = 2;
pub const WORD_MAX_LEN: usize = 9;
const RASTER_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "bmp", "gif"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoolKind {
    Icon,
    Hanzi,
    Word,
    Number,
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMode {
    Original,
    Tinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignMode {
    Positive,
    Negative,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    Integer,
    OneDecimal,
    TwoDecimal,
}

impl Precision {
    pub fn places(self) -> u8 {
        match self {
            Precision::Integer => 0,
            Precision::OneDecimal => 1,
            Precision::TwoDecimal => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Constraint {
    Any,
    Icon { color: ColorMode },
    Hanzi { near_form_priority: bool },
    Word { max_len: usize },
    Number { sign: SignMode, precision: Precision },
    Image { category: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingCondition {
    pub count: usize,
    pub constraint: Constraint,
}

impl SamplingCondition {
    pub fn new(count: usize, constraint: Constraint) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("sampling count must be at least 1".into()));
        }
        Ok(Self { count, constraint })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IconEntry {
    pub id: String,
    pub path: PathBuf,
    pub monochrome: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HanziEntry {
    pub ch: char,
    pub group: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: String,
    pub path: PathBuf,
    pub category: Option<String>,
    pub caption: Option<String>,
}

pub trait PoolEntry: Clone {
    const KIND: PoolKind;

    fn entry_id(&self) -> String;

    fn satisfies(&self, _constraint: &Constraint) -> bool {
        true
    }

    fn near_form_group(&self) -> Option<usize> {
        None
    }
}

impl PoolEntry for IconEntry {
    const KIND: PoolKind = PoolKind::Icon;

    fn entry_id(&self) -> String {
        self.id.clone()
    }
}

impl PoolEntry for HanziEntry {
    const KIND: PoolKind = PoolKind::Hanzi;

    fn entry_id(&self) -> String {
        format!("U+{:04X}", self.ch as u32)
    }

    fn near_form_group(&self) -> Option<usize> {
        self.group
    }
}

impl PoolEntry for String {
    const KIND: PoolKind = PoolKind::Word;

    fn entry_id(&self) -> String {
        self.clone()
    }

    fn satisfies(&self, constraint: &Constraint) -> bool {
        match constraint {
            Constraint::Word { max_len } => self.len() <= *max_len,
            _ => true,
        }
    }
}

impl PoolEntry for ImageEntry {
    const KIND: PoolKind = PoolKind::Image;

    fn entry_id(&self) -> String {
        self.id.clone()
    }

    fn satisfies(&self, constraint: &Constraint) -> bool {
        match constraint {
            Constraint::Image { category: Some(c) } => self.category.as_deref() == Some(c.as_str()),
            _ => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SourcePool<E> {
    pub entries: Vec<E>,
    /// Entry counts per category (images) or near-form group (hanzi).
    pub metadata: BTreeMap<String, usize>,
    /// SHA-256 over the pool's source files, for provenance snapshots.
    pub content_hash: String,
}

pub type IconPool = SourcePool<IconEntry>;
pub type HanziPool = SourcePool<HanziEntry>;
pub type WordPool = SourcePool<String>;
pub type ImagePool = SourcePool<ImageEntry>;

impl<E: PoolEntry> SourcePool<E> {
    pub fn kind(&self) -> PoolKind {
        E::KIND
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ImagePool {
    pub fn get(&self, id: &str) -> Option<&ImageEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// A pool of any kind, as returned by [`load_pool`].
#[derive(Debug, Clone)]
pub enum AnyPool {
    Icon(IconPool),
    Hanzi(HanziPool),
    Word(WordPool),
    Image(ImagePool),
}

impl AnyPool {
    pub fn len(&self) -> usize {
        match self {
            AnyPool::Icon(p) => p.len(),
            AnyPool::Hanzi(p) => p.len(),
            AnyPool::Word(p) => p.len(),
            AnyPool::Image(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn load_pool(kind: PoolKind, path: &Path) -> Result<AnyPool> {
    match kind {
        PoolKind::Icon => load_icon_pool(path).map(AnyPool::Icon),
        PoolKind::Hanzi => load_hanzi_pool(path).map(AnyPool::Hanzi),
        PoolKind::Word => load_word_pool(path).map(AnyPool::Word),
        PoolKind::Image => load_image_pool(path, None).map(AnyPool::Image),
        PoolKind::Number => Err(Error::InvalidParameter(
            "number pools are generated, not loaded".into(),
        )),
    }
}

fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPath(path.to_path_buf()))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

struct PoolHasher(Sha256);

impl PoolHasher {
    fn new() -> Self {
        Self(Sha256::new())
    }

    fn file(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.0.update(name.as_bytes());
        self.0.update([0]);
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(&bytes);
        Ok(())
    }

    fn finish(self) -> String {
        hex_digest(self.0.finalize().as_slice())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn raster_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_raster = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| RASTER_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            .unwrap_or(false);
        if path.is_file() && is_raster {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Rows of a tab-separated file, with 1-based line numbers. A first line that
/// starts with `id\t` is treated as a header.
fn tsv_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("id\t")) {
            continue;
        }
        rows.push((i + 1, line.split('\t').map(|s| s.trim().to_string()).collect()));
    }
    Ok(rows)
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" => Some(false),
        _ => None,
    }
}

fn is_monochrome_raster(path: &Path) -> Result<bool> {
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .to_rgba8();
    Ok(img.pixels().all(|p| p[3] == 0 || (p[0] == p[1] && p[1] == p[2])))
}

/// Icon pool: a directory of raster files, optionally described by
/// `icons.tsv` (id, filename, monochrome flag).
pub fn load_icon_pool(dir: &Path) -> Result<IconPool> {
    require_exists(dir)?;
    let tsv = dir.join("icons.tsv");
    let mut hasher = PoolHasher::new();
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    if tsv.is_file() {
        hasher.file(&tsv)?;
        for (line, cols) in tsv_rows(&tsv)? {
            let malformed = |message: String| Error::MalformedEntry {
                path: tsv.clone(),
                line,
                message,
            };
            if cols.len() < 2 {
                return Err(malformed("expected id, filename[, monochrome]".into()));
            }
            let path = dir.join(&cols[1]);
            if !path.is_file() {
                return Err(malformed(format!("icon file {} not found", cols[1])));
            }
            let monochrome = match cols.get(2) {
                Some(flag) => parse_flag(flag).ok_or_else(|| malformed(format!("bad monochrome flag {flag:?}")))?,
                None => is_monochrome_raster(&path)?,
            };
            if !seen.insert(cols[0].clone()) {
                return Err(malformed(format!("duplicate icon id {}", cols[0])));
            }
            hasher.file(&path)?;
            entries.push(IconEntry {
                id: cols[0].clone(),
                path,
                monochrome,
            });
        }
    } else {
        for path in raster_files(dir)? {
            let id = file_stem(&path);
            if !seen.insert(id.clone()) {
                return Err(Error::MalformedEntry {
                    path,
                    line: 0,
                    message: format!("duplicate icon id {id}"),
                });
            }
            hasher.file(&path)?;
            let monochrome = is_monochrome_raster(&path)?;
            entries.push(IconEntry { id, path, monochrome });
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyPool(dir.to_path_buf()));
    }
    let mut metadata = BTreeMap::new();
    let mono = entries.iter().filter(|e| e.monochrome).count();
    metadata.insert("monochrome".to_string(), mono);
    metadata.insert("colored".to_string(), entries.len() - mono);
    Ok(SourcePool {
        entries,
        metadata,
        content_hash: hasher.finish(),
    })
}

fn parse_codepoint(token: &str) -> Option<char> {
    let t = token.trim();
    if let Some(hex) = t.strip_prefix("U+").or_else(|| t.strip_prefix("u+")) {
        return u32::from_str_radix(hex, 16).ok().and_then(char::from_u32);
    }
    let mut chars = t.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

/// Hanzi pool: either a directory holding `hanzi.txt` (one codepoint per
/// line, as the character or `U+XXXX`) and an optional `near_forms.txt` (one
/// group per line, members space-separated), or a bare `hanzi.txt` path.
pub fn load_hanzi_pool(path: &Path) -> Result<HanziPool> {
    require_exists(path)?;
    let (list, groups) = if path.is_dir() {
        let nf = path.join("near_forms.txt");
        (path.join("hanzi.txt"), nf.is_file().then_some(nf))
    } else {
        (path.to_path_buf(), None)
    };
    load_hanzi_files(&list, groups.as_deref())
}

pub fn load_hanzi_files(list: &Path, near_forms: Option<&Path>) -> Result<HanziPool> {
    require_exists(list)?;
    let mut hasher = PoolHasher::new();
    hasher.file(list)?;
    let mut entries: Vec<HanziEntry> = Vec::new();
    let mut position: HashMap<char, usize> = HashMap::new();
    for (i, line) in read_text(list)?.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let ch = parse_codepoint(line).ok_or_else(|| Error::MalformedEntry {
            path: list.to_path_buf(),
            line: i + 1,
            message: format!("expected one codepoint, found {:?}", line.trim()),
        })?;
        if position.contains_key(&ch) {
            continue;
        }
        position.insert(ch, entries.len());
        entries.push(HanziEntry { ch, group: None });
    }
    let mut metadata = BTreeMap::new();
    if let Some(nf) = near_forms {
        require_exists(nf)?;
        hasher.file(nf)?;
        let mut group = 0usize;
        for (i, line) in read_text(nf)?.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut members = Vec::new();
            for token in line.split_whitespace() {
                let ch = parse_codepoint(token).ok_or_else(|| Error::MalformedEntry {
                    path: nf.to_path_buf(),
                    line: i + 1,
                    message: format!("bad codepoint {token:?}"),
                })?;
                if !members.contains(&ch) {
                    members.push(ch);
                }
            }
            if members.len() < 2 {
                return Err(Error::NearFormGroupTooSmall {
                    group,
                    members: members.len(),
                    listing: line.trim().to_string(),
                });
            }
            for ch in &members {
                let idx = match position.get(ch) {
                    Some(&idx) => idx,
                    None => {
                        position.insert(*ch, entries.len());
                        entries.push(HanziEntry { ch: *ch, group: None });
                        entries.len() - 1
                    }
                };
                if entries[idx].group.is_some() {
                    return Err(Error::MalformedEntry {
                        path: nf.to_path_buf(),
                        line: i + 1,
                        message: format!("{ch} already belongs to another near-form group"),
                    });
                }
                entries[idx].group = Some(group);
            }
            metadata.insert(format!("group-{group:03}"), members.len());
            group += 1;
        }
        metadata.insert("groups".to_string(), group);
    }
    if entries.is_empty() {
        return Err(Error::EmptyPool(list.to_path_buf()));
    }
    Ok(SourcePool {
        entries,
        metadata,
        content_hash: hasher.finish(),
    })
}

/// Word corpus: one word per line; normalized to uppercase, duplicates
/// collapsed.
pub fn load_word_pool(path: &Path) -> Result<WordPool> {
    require_exists(path)?;
    let file = if path.is_dir() { path.join("words.txt") } else { path.to_path_buf() };
    let mut hasher = PoolHasher::new();
    hasher.file(&file)?;
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for (i, line) in read_text(&file)?.lines().enumerate() {
        let word = line.trim();
        if word.is_empty() || word.starts_with('#') {
            continue;
        }
        let malformed = |message: String| Error::MalformedEntry {
            path: file.clone(),
            line: i + 1,
            message,
        };
        if !word.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(malformed(format!("{word:?} is not purely alphabetic")));
        }
        if !(WORD_MIN_LEN..=WORD_MAX_LEN).contains(&word.len()) {
            return Err(malformed(format!(
                "{word:?} has length {} outside [{WORD_MIN_LEN}, {WORD_MAX_LEN}]",
                word.len()
            )));
        }
        let upper = word.to_ascii_uppercase();
        if seen.insert(upper.clone()) {
            entries.push(upper);
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyPool(file));
    }
    let mut metadata = BTreeMap::new();
    for w in &entries {
        *metadata.entry(format!("length-{}", w.len())).or_insert(0) += 1;
    }
    Ok(SourcePool {
        entries,
        metadata,
        content_hash: hasher.finish(),
    })
}

/// Image pool: a directory of raster files, optionally described by
/// `images.tsv` (id, filename, category, caption). A separate two-column
/// captions file (id, caption) may override or add captions.
pub fn load_image_pool(dir: &Path, captions: Option<&Path>) -> Result<ImagePool> {
    require_exists(dir)?;
    let tsv = dir.join("images.tsv");
    let mut hasher = PoolHasher::new();
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    let optional = |s: Option<&String>| s.filter(|v| !v.is_empty()).cloned();
    if tsv.is_file() {
        hasher.file(&tsv)?;
        for (line, cols) in tsv_rows(&tsv)? {
            let malformed = |message: String| Error::MalformedEntry {
                path: tsv.clone(),
                line,
                message,
            };
            if cols.len() < 2 {
                return Err(malformed("expected id, filename[, category[, caption]]".into()));
            }
            let path = dir.join(&cols[1]);
            if !path.is_file() {
                return Err(malformed(format!("image file {} not found", cols[1])));
            }
            if !seen.insert(cols[0].clone()) {
                return Err(malformed(format!("duplicate image id {}", cols[0])));
            }
            hasher.file(&path)?;
            entries.push(ImageEntry {
                id: cols[0].clone(),
                path,
                category: optional(cols.get(2)),
                caption: optional(cols.get(3)),
            });
        }
    } else {
        for path in raster_files(dir)? {
            hasher.file(&path)?;
            entries.push(ImageEntry {
                id: file_stem(&path),
                path,
                category: None,
                caption: None,
            });
        }
    }
    if let Some(cap) = captions {
        require_exists(cap)?;
        hasher.file(cap)?;
        for (line, cols) in tsv_rows(cap)? {
            if cols.len() < 2 {
                return Err(Error::MalformedEntry {
                    path: cap.to_path_buf(),
                    line,
                    message: "expected id, caption".into(),
                });
            }
            match entries.iter_mut().find(|e| e.id == cols[0]) {
                Some(e) => e.caption = Some(cols[1].clone()),
                None => {
                    return Err(Error::MalformedEntry {
                        path: cap.to_path_buf(),
                        line,
                        message: format!("caption for unknown image id {}", cols[0]),
                    })
                }
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyPool(dir.to_path_buf()));
    }
    let mut metadata = BTreeMap::new();
    for e in &entries {
        let key = e.category.clone().unwrap_or_else(|| "uncategorized".into());
        *metadata.entry(key).or_insert(0) += 1;
    }
    Ok(SourcePool {
        entries,
        metadata,
        content_hash: hasher.finish(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialSet<E> {
    pub pool_kind: PoolKind,
    pub items: Vec<E>,
    pub condition: SamplingCondition,
    pub provenance: Vec<String>,
}

/// Draws `cond.count` distinct entries satisfying `cond`.
///
/// With a hanzi near-form priority condition, one near-form group is chosen
/// uniformly and exhausted first; remaining slots are filled from characters
/// outside that group.
pub fn sample_materials<E: PoolEntry>(
    pool: &SourcePool<E>,
    cond: &SamplingCondition,
    rng: &mut RandomStream,
) -> Result<MaterialSet<E>> {
    let eligible: Vec<usize> = (0..pool.entries.len())
        .filter(|&i| pool.entries[i].satisfies(&cond.constraint))
        .collect();
    if cond.count > eligible.len() {
        return Err(Error::InsufficientEntries {
            requested: cond.count,
            available: eligible.len(),
        });
    }
    let priority = matches!(cond.constraint, Constraint::Hanzi { near_form_priority: true });
    let picked: Vec<usize> = if priority && eligible.iter().any(|&i| pool.entries[i].near_form_group().is_some()) {
        let groups: BTreeSet<usize> = eligible.iter().filter_map(|&i| pool.entries[i].near_form_group()).collect();
        let groups: Vec<usize> = groups.into_iter().collect();
        let chosen = groups[rng.random_range(0..groups.len())];
        let (mut inside, mut outside): (Vec<usize>, Vec<usize>) = eligible
            .iter()
            .partition(|&&i| pool.entries[i].near_form_group() == Some(chosen));
        inside.shuffle(rng);
        inside.truncate(cond.count);
        let missing = cond.count - inside.len();
        if missing > 0 {
            outside.shuffle(rng);
            inside.extend_from_slice(&outside[..missing]);
            inside.shuffle(rng);
        }
        inside
    } else {
        index::sample(rng, eligible.len(), cond.count)
            .into_iter()
            .map(|k| eligible[k])
            .collect()
    };
    let items: Vec<E> = picked.iter().map(|&i| pool.entries[i].clone()).collect();
    Ok(MaterialSet {
        pool_kind: E::KIND,
        provenance: items.iter().map(PoolEntry::entry_id).collect(),
        items,
        condition: cond.clone(),
    })
}

/// Uniform draws over the representable grid of `precision` in [-100, 100],
/// restricted by `sign` (`positive` excludes zero, as does `negative`).
pub fn sample_numbers(sign: SignMode, precision: Precision, count: usize, rng: &mut RandomStream) -> Vec<Decimal> {
    let places = precision.places();
    let limit = 100 * 10i64.pow(places as u32);
    let (lo, hi) = match sign {
        SignMode::Positive => (1, limit),
        SignMode::Negative => (-limit, -1),
        SignMode::Mixed => (-limit, limit),
    };
    (0..count).map(|_| Decimal::new(rng.random_range(lo..=hi), places)).collect()
}

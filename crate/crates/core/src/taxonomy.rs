//! Cognitive-bias taxonomy: the eight core subtypes, their parent categories,
//! broader concepts and synonym keys.
//!
//! The taxonomy is data. [`BiasTaxonomy::builtin`] loads the seed file shipped
//! in `data/taxonomy.json`; [`BiasTaxonomy::load`] accepts an edited copy.
//! Lookups normalise case, punctuation and whitespace, so `"Gambler’s fallacy"`
//! and `"gamblers fallacy"` resolve to the same label.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUILTIN_TAXONOMY: &str = include_str!("../data/taxonomy.json");

/// Number of core subtypes every taxonomy must define.
pub const CORE_SUBTYPE_COUNT: usize = 8;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("bias mention is empty")]
    EmptyInput,
    #[error("failed to read taxonomy file: {0}")]
    Io(#[from] std::io::Error),
    #[error("taxonomy file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid taxonomy: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    CoreSubtype,
    BroaderConcept,
    Foreign,
}

/// The two columns of the BRU category table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParentCategory {
    MisjudgmentOfProbability,
    ErrorsInJudgment,
}

impl ParentCategory {
    pub fn display_name(self) -> &'static str {
        match self {
            ParentCategory::MisjudgmentOfProbability => "Misjudgment of Probability",
            ParentCategory::ErrorsInJudgment => "Errors in Judgment",
        }
    }
}

/// One entry of the bias set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BiasLabel {
    pub canonical_name: String,
    pub kind: LabelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_category: Option<ParentCategory>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub broader_concepts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synonyms: Vec<String>,
}

impl BiasLabel {
    /// A label for a mention that is not in the taxonomy.
    pub fn foreign(raw: &str) -> Self {
        BiasLabel {
            canonical_name: title_case(raw),
            kind: LabelKind::Foreign,
            parent_category: None,
            broader_concepts: Vec::new(),
            synonyms: Vec::new(),
        }
    }

    pub fn is_core(&self) -> bool {
        self.kind == LabelKind::CoreSubtype
    }

    pub fn is_foreign(&self) -> bool {
        self.kind == LabelKind::Foreign
    }

    /// Identity comparison: same canonical name and kind.
    pub fn same_as(&self, other: &BiasLabel) -> bool {
        self.kind == other.kind && self.canonical_name == other.canonical_name
    }
}

impl fmt::Display for BiasLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_name)
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct TaxonomyFile {
    labels: Vec<LabelEntry>,
    #[serde(default)]
    synonyms: BTreeMap<String, String>,
    #[serde(default)]
    broader_edges: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize, Serialize)]
struct LabelEntry {
    canonical_name: String,
    kind: LabelKind,
    #[serde(default)]
    parent_category: Option<ParentCategory>,
}

/// Validated, immutable taxonomy with a normalised lookup index.
#[derive(Debug, Clone)]
pub struct BiasTaxonomy {
    labels: Vec<BiasLabel>,
    broader_edges: BTreeMap<String, String>,
    /// normalised key -> index into `labels`
    index: HashMap<String, usize>,
}

impl BiasTaxonomy {
    /// The seed taxonomy compiled into the crate.
    pub fn builtin() -> Self {
        Self::from_json_str(BUILTIN_TAXONOMY).expect("builtin taxonomy is valid")
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, TaxonomyError> {
        let file: TaxonomyFile = serde_json::from_str(text)?;
        Self::build(file)
    }

    fn build(file: TaxonomyFile) -> Result<Self, TaxonomyError> {
        let mut labels: Vec<BiasLabel> = Vec::with_capacity(file.labels.len());
        let mut by_name: HashMap<String, usize> = HashMap::new();
        for entry in file.labels {
            if entry.kind == LabelKind::Foreign {
                return Err(TaxonomyError::Invalid(format!(
                    "label {:?} cannot be declared foreign",
                    entry.canonical_name
                )));
            }
            match (entry.kind, entry.parent_category) {
                (LabelKind::CoreSubtype, None) => {
                    return Err(TaxonomyError::Invalid(format!(
                        "core subtype {:?} has no parent category",
                        entry.canonical_name
                    )))
                }
                (LabelKind::BroaderConcept, Some(_)) => {
                    return Err(TaxonomyError::Invalid(format!(
                        "broader concept {:?} must not carry a parent category",
                        entry.canonical_name
                    )))
                }
                _ => {}
            }
            if by_name.insert(entry.canonical_name.clone(), labels.len()).is_some() {
                return Err(TaxonomyError::Invalid(format!(
                    "duplicate label {:?}",
                    entry.canonical_name
                )));
            }
            labels.push(BiasLabel {
                canonical_name: entry.canonical_name,
                kind: entry.kind,
                parent_category: entry.parent_category,
                broader_concepts: Vec::new(),
                synonyms: Vec::new(),
            });
        }

        let core_count = labels.iter().filter(|l| l.is_core()).count();
        if core_count != CORE_SUBTYPE_COUNT {
            return Err(TaxonomyError::Invalid(format!(
                "expected {CORE_SUBTYPE_COUNT} core subtypes, found {core_count}"
            )));
        }

        for (from, to) in &file.broader_edges {
            let from_idx = *by_name
                .get(from)
                .ok_or_else(|| TaxonomyError::Invalid(format!("edge source {from:?} is not a label")))?;
            let to_idx = *by_name
                .get(to)
                .ok_or_else(|| TaxonomyError::Invalid(format!("edge target {to:?} is not a label")))?;
            if !labels[from_idx].is_core() || labels[to_idx].kind != LabelKind::BroaderConcept {
                return Err(TaxonomyError::Invalid(format!(
                    "edge {from:?} -> {to:?} must link a core subtype to a broader concept"
                )));
            }
            labels[from_idx].broader_concepts.push(to.clone());
        }

        for (synonym, target) in &file.synonyms {
            let idx = *by_name.get(target).ok_or_else(|| {
                TaxonomyError::Invalid(format!("synonym {synonym:?} points at unknown label {target:?}"))
            })?;
            labels[idx].synonyms.push(synonym.clone());
        }

        let mut index: HashMap<String, usize> = HashMap::new();
        for (i, label) in labels.iter().enumerate() {
            let keys = std::iter::once(&label.canonical_name).chain(label.synonyms.iter());
            for key in keys {
                let norm = normalize_key(key);
                if norm.is_empty() {
                    return Err(TaxonomyError::Invalid(format!("empty match key for {label}")));
                }
                match index.get(&norm) {
                    Some(&other) if other != i => {
                        return Err(TaxonomyError::Invalid(format!(
                            "match key {norm:?} maps to both {} and {}",
                            labels[other], label
                        )))
                    }
                    _ => {
                        index.insert(norm, i);
                    }
                }
            }
        }

        Ok(BiasTaxonomy {
            labels,
            broader_edges: file.broader_edges,
            index,
        })
    }

    pub fn labels(&self) -> &[BiasLabel] {
        &self.labels
    }

    /// Core subtypes in file order.
    pub fn core_subtypes(&self) -> impl Iterator<Item = &BiasLabel> {
        self.labels.iter().filter(|l| l.is_core())
    }

    pub fn broader_edges(&self) -> &BTreeMap<String, String> {
        &self.broader_edges
    }

    /// Exact canonical-name lookup.
    pub fn get(&self, canonical_name: &str) -> Option<&BiasLabel> {
        self.labels.iter().find(|l| l.canonical_name == canonical_name)
    }

    /// Normalised lookup over canonical names and synonyms.
    pub fn lookup(&self, raw: &str) -> Option<&BiasLabel> {
        self.index.get(&normalize_key(raw)).map(|&i| &self.labels[i])
    }

    /// Resolve a free-text mention to a label; unknown mentions become
    /// [`LabelKind::Foreign`] labels carrying the cleaned text.
    pub fn canonicalize(&self, raw: &str) -> Result<BiasLabel, TaxonomyError> {
        let cleaned = clean_mention(raw);
        if normalize_key(&cleaned).is_empty() {
            return Err(TaxonomyError::EmptyInput);
        }
        Ok(self
            .lookup(&cleaned)
            .cloned()
            .unwrap_or_else(|| BiasLabel::foreign(&cleaned)))
    }

    /// Broader concept linked to a core subtype.
    pub fn broader_of(&self, core: &BiasLabel) -> Option<&BiasLabel> {
        self.broader_edges
            .get(&core.canonical_name)
            .and_then(|name| self.get(name))
    }

    /// Label of the parent category of a core subtype.
    pub fn parent_of(&self, core: &BiasLabel) -> Option<&BiasLabel> {
        core.parent_category.and_then(|p| self.get(p.display_name()))
    }

    /// Every taxonomy key occurring in `text`, as (byte range, label), sorted
    /// by start. Overlapping hits at the same start keep the longest key.
    pub fn find_mentions<'a>(&'a self, text: &str) -> Vec<(std::ops::Range<usize>, &'a BiasLabel)> {
        let (norm, offsets) = normalize_with_offsets(text);
        let padded = format!(" {norm} ");
        let mut hits: Vec<(usize, usize, usize)> = Vec::new();
        for (key, &label_idx) in &self.index {
            let needle = format!(" {key} ");
            let mut from = 0;
            while let Some(pos) = padded[from..].find(&needle) {
                // `start` is the padded position of the leading space, which is
                // exactly the normalised index of the key's first character.
                let start = from + pos;
                hits.push((start, key.len(), label_idx));
                from = start + 1;
            }
        }
        hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        hits.dedup_by_key(|h| h.0);
        hits.into_iter()
            .map(|(start, len, i)| {
                let last = offsets[start + len - 1];
                let end = last + text[last..].chars().next().map_or(0, char::len_utf8);
                (offsets[start]..end, &self.labels[i])
            })
            .collect()
    }
}

/// Lowercase, drop apostrophes, map every other non-alphanumeric run to one
/// space, trim.
pub fn normalize_key(raw: &str) -> String {
    normalize_with_offsets(raw).0
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{2018}' | '`')
}

/// Normalised text plus, for each normalised byte, the byte offset in the
/// original string it came from.
fn normalize_with_offsets(raw: &str) -> (String, Vec<usize>) {
    let mut out = String::with_capacity(raw.len());
    let mut offsets = Vec::with_capacity(raw.len());
    let mut pending_space: Option<usize> = None;
    for (i, c) in raw.char_indices() {
        if is_apostrophe(c) {
            continue;
        }
        if c.is_alphanumeric() {
            if let Some(sp) = pending_space.take() {
                if !out.is_empty() {
                    out.push(' ');
                    offsets.push(sp);
                }
            }
            for lc in c.to_lowercase() {
                let before = out.len();
                out.push(lc);
                offsets.extend(std::iter::repeat(i).take(out.len() - before));
            }
        } else if pending_space.is_none() {
            pending_space = Some(i);
        }
    }
    (out, offsets)
}

/// Strip markdown emphasis, surrounding quotes and trailing punctuation.
fn clean_mention(raw: &str) -> String {
    let stripped: String = raw.chars().filter(|c| !matches!(c, '*' | '_' | '"' | '\u{201c}' | '\u{201d}')).collect();
    let trimmed = stripped
        .trim()
        .trim_matches(|c: char| c.is_whitespace() || matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | '(' | ')'));
    trimmed.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn title_case(raw: &str) -> String {
    raw.split_whitespace()
        .map(|word| {
            let mut chars = word.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars.flat_map(|c| c.to_lowercase())).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

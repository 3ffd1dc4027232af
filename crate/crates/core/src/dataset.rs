//! BRU-format datasets: loading, the count manifest, and validation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::taxonomy::BiasTaxonomy;

/// Option letter reserved for the abstention choice injected at prompt time.
pub const ABSTENTION_LABEL: OptionLabel = OptionLabel('E');

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("unknown dataset format {0:?} (expected jsonl or csv)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "jsonl" | "ndjson" => Some(DatasetFormat::Jsonl),
            "csv" => Some(DatasetFormat::Csv),
            _ => None,
        }
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(DatasetError::UnknownFormat(other.to_string())),
        }
    }
}

/// A single option letter. Any single character parses; range checks are
/// validation rules, not parse errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OptionLabel(pub char);

impl OptionLabel {
    pub fn parse(s: &str) -> Option<Self> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Some(OptionLabel(c)),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        self.0
    }

    pub fn is_abstention(self) -> bool {
        self == ABSTENTION_LABEL
    }
}

impl fmt::Display for OptionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for OptionLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OptionLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        OptionLabel::parse(&s).ok_or_else(|| de::Error::custom(format!("option label {s:?} is not a single letter")))
    }
}

/// Options in file order. Kept as a list so duplicate keys in the source
/// survive parsing and can be reported.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Options(pub Vec<(OptionLabel, String)>);

impl Options {
    pub fn iter(&self) -> impl Iterator<Item = &(OptionLabel, String)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, label: OptionLabel) -> Option<&str> {
        self.0.iter().find(|(l, _)| *l == label).map(|(_, t)| t.as_str())
    }

    pub fn contains(&self, label: OptionLabel) -> bool {
        self.get(label).is_some()
    }

    pub fn labels(&self) -> impl Iterator<Item = OptionLabel> + '_ {
        self.0.iter().map(|(l, _)| *l)
    }
}

impl<const N: usize> From<[(char, &str); N]> for Options {
    fn from(pairs: [(char, &str); N]) -> Self {
        Options(pairs.iter().map(|(c, t)| (OptionLabel(*c), t.to_string())).collect())
    }
}

impl Serialize for Options {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (label, text) in &self.0 {
            map.serialize_entry(&label.to_string(), text)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Options {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct OptionsVisitor;

        impl<'de> Visitor<'de> for OptionsVisitor {
            type Value = Options;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping option letters to option text")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Options, A::Error> {
                let mut out = Vec::new();
                while let Some((label, text)) = access.next_entry::<OptionLabel, String>()? {
                    out.push((label, text));
                }
                Ok(Options(out))
            }
        }

        deserializer.deserialize_map(OptionsVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub stem: String,
    pub options: Options,
    pub ground_truth: OptionLabel,
    pub bias_subtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_subtype: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl McqItem {
    /// Hex SHA-256 of the item's canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("items serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn ground_truth_text(&self) -> Option<&str> {
        self.options.get(self.ground_truth)
    }
}

/// Expected per-subtype counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest(pub BTreeMap<String, usize>);

impl Manifest {
    /// Counts of the full 205-question BRU dataset.
    pub fn bru_full() -> Self {
        Manifest(
            [
                ("Base Rate Fallacy", 40),
                ("Conjunction Fallacy", 15),
                ("Insensitivity to Sample Size", 30),
                ("Gambler's Fallacy", 20),
                ("Regression Fallacy", 35),
                ("Anchoring Bias", 20),
                ("Overconfidence Bias", 30),
                ("Sunk Cost Fallacy", 15),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        )
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub items: Vec<McqItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<Manifest>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, items: Vec<McqItem>) -> Self {
        Dataset {
            name: name.into(),
            items,
            manifest: None,
        }
    }

    pub fn with_manifest(mut self, manifest: Manifest) -> Self {
        self.manifest = Some(manifest);
        self
    }

    pub fn item(&self, id: &str) -> Option<&McqItem> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Hex SHA-256 over the items in order.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for item in &self.items {
            hasher.update(serde_json::to_vec(item).expect("items serialize"));
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

/// Read a dataset, preserving file order. Only field presence is checked here;
/// see [`validate_dataset`] for the content rules.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let items = match format {
        DatasetFormat::Jsonl => parse_jsonl(&text)?,
        DatasetFormat::Csv => parse_csv(&text)?,
    };
    Ok(Dataset::new(name, items))
}

pub fn parse_jsonl(text: &str) -> Result<Vec<McqItem>, DatasetError> {
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: McqItem = serde_json::from_str(line).map_err(|e| DatasetError::MalformedRecord {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// CSV layout: `id,stem,<letter columns...>,ground_truth,bias_subtype[,design_subtype][,provenance]`.
/// Every single-letter header is an option column; empty cells are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<McqItem>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::MalformedRecord { line: 1, reason: e.to_string() })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let option_cols: Vec<(usize, OptionLabel)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let h = h.trim();
            (h.len() == 1 && h.chars().all(|c| c.is_ascii_uppercase())).then(|| (i, OptionLabel::parse(h).unwrap()))
        })
        .collect();
    let (id_col, stem_col, gt_col, subtype_col) = (col("id"), col("stem"), col("ground_truth"), col("bias_subtype"));
    let (design_col, prov_col) = (col("design_subtype"), col("provenance"));

    let mut items = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| DatasetError::MalformedRecord { line, reason: e.to_string() })?;
        let required = |c: Option<usize>, name: &str| -> Result<String, DatasetError> {
            c.and_then(|i| record.get(i))
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(str::to_string)
                .ok_or_else(|| DatasetError::MalformedRecord {
                    line,
                    reason: format!("missing field `{name}`"),
                })
        };
        let optional = |c: Option<usize>| {
            c.and_then(|i| record.get(i))
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(str::to_string)
        };
        let gt_raw = required(gt_col, "ground_truth")?;
        let ground_truth = OptionLabel::parse(&gt_raw).ok_or_else(|| DatasetError::MalformedRecord {
            line,
            reason: format!("ground_truth {gt_raw:?} is not a single letter"),
        })?;
        let options = Options(
            option_cols
                .iter()
                .filter_map(|(i, label)| {
                    record
                        .get(*i)
                        .map(str::trim)
                        .filter(|v| !v.is_empty())
                        .map(|v| (*label, v.to_string()))
                })
                .collect(),
        );
        items.push(McqItem {
            id: required(id_col, "id")?,
            stem: required(stem_col, "stem")?,
            options,
            ground_truth,
            bias_subtype: required(subtype_col, "bias_subtype")?,
            design_subtype: optional(design_col),
            provenance: optional(prov_col),
        });
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationRule {
    DuplicateItemId,
    EmptyStem,
    DuplicateOptionLabel,
    InvalidOptionLabel,
    ReservedAbstentionOption,
    NonContiguousOptionLabels,
    GroundTruthIsAbstention,
    GroundTruthNotAnOption,
    UnknownBiasSubtype,
    ManifestCountMismatch,
    ManifestTotalMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub item_id: Option<String>,
    pub rule: ViolationRule,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: ViolationRule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }
}

/// Check every dataset invariant. Violations are data; the dataset is not
/// modified. The report is sorted, so item order does not affect it.
pub fn validate_dataset(ds: &Dataset, taxonomy: &BiasTaxonomy) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |item: Option<&str>, rule, detail: String| {
        violations.push(Violation {
            item_id: item.map(str::to_string),
            rule,
            detail,
        })
    };

    let mut seen_ids = HashSet::new();
    let mut subtype_counts: BTreeMap<String, usize> = BTreeMap::new();

    for item in &ds.items {
        let id = Some(item.id.as_str());
        if !seen_ids.insert(item.id.as_str()) {
            push(id, ViolationRule::DuplicateItemId, format!("id {:?} appears more than once", item.id));
        }
        if item.stem.trim().is_empty() {
            push(id, ViolationRule::EmptyStem, "stem is empty".into());
        }

        let mut seen_labels = HashSet::new();
        for label in item.options.labels() {
            if !seen_labels.insert(label) {
                push(id, ViolationRule::DuplicateOptionLabel, format!("option {label} listed twice"));
            }
            if label.is_abstention() {
                push(
                    id,
                    ViolationRule::ReservedAbstentionOption,
                    "option E is reserved for abstention".into(),
                );
            } else if !('A'..='D').contains(&label.0) {
                push(id, ViolationRule::InvalidOptionLabel, format!("option label {label} outside A..D"));
            }
        }
        let mut distinct: Vec<char> = seen_labels.iter().map(|l| l.0).collect();
        distinct.sort_unstable();
        let contiguous = distinct.iter().zip('A'..).all(|(c, expected)| *c == expected);
        if !contiguous {
            let got: String = distinct.iter().collect();
            push(
                id,
                ViolationRule::NonContiguousOptionLabels,
                format!("labels {got:?} are not contiguous from A"),
            );
        }

        if item.ground_truth.is_abstention() {
            push(
                id,
                ViolationRule::GroundTruthIsAbstention,
                "ground truth is the abstention option E".into(),
            );
        } else if !item.options.contains(item.ground_truth) {
            push(
                id,
                ViolationRule::GroundTruthNotAnOption,
                format!("ground truth {} is not an option", item.ground_truth),
            );
        }

        match taxonomy.lookup(&item.bias_subtype) {
            Some(label) if label.is_core() => {
                *subtype_counts.entry(label.canonical_name.clone()).or_default() += 1;
            }
            _ => push(
                id,
                ViolationRule::UnknownBiasSubtype,
                format!("{:?} is not a core subtype", item.bias_subtype),
            ),
        }
    }

    if let Some(manifest) = &ds.manifest {
        for (subtype, expected) in &manifest.0 {
            let got = subtype_counts.get(subtype).copied().unwrap_or(0);
            if got != *expected {
                push(
                    None,
                    ViolationRule::ManifestCountMismatch,
                    format!("{subtype}: expected {expected} items, found {got}"),
                );
            }
        }
        for (subtype, got) in &subtype_counts {
            if !manifest.0.contains_key(subtype) {
                push(
                    None,
                    ViolationRule::ManifestCountMismatch,
                    format!("{subtype}: expected 0 items, found {got}"),
                );
            }
        }
        if ds.items.len() != manifest.total() {
            push(
                None,
                ViolationRule::ManifestTotalMismatch,
                format!("expected {} items in total, found {}", manifest.total(), ds.items.len()),
            );
        }
    }

    violations.sort();
    ValidationReport { violations }
}

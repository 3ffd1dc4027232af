//! Verdict classification, tallies and the D / A / E rates.
//!
//! All rates are exact rationals; rounding happens only when rendering.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use chrono::{DateTime, Utc};
use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dataset::{Dataset, McqItem};
use crate::engine::{ItemTranscript, RunRecord};
use crate::parser::{MatchClass, ParsedChoice};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoringError {
    #[error("no scorable items: n_total must be positive")]
    EmptyRun,
    #[error("item {0:?} has no parseable final choice")]
    UnparseableTranscript(String),
    #[error("item {0:?} failed during the run")]
    FailedTranscript(String),
    #[error("run transcript refers to unknown item {0:?}")]
    UnknownItem(String),
}

/// A reviewer's judgement of one item's reasoning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningAnnotation {
    pub run_id: String,
    pub item_id: String,
    pub reasoning_correct: bool,
    pub reviewer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub created_at: DateTime<Utc>,
}

/// Reasoning correctness first, result correctness second; `O` is abstention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VerdictKind {
    TT,
    TF,
    FT,
    FF,
    O,
}

impl VerdictKind {
    pub const ALL: [VerdictKind; 5] = [VerdictKind::TT, VerdictKind::TF, VerdictKind::FT, VerdictKind::FF, VerdictKind::O];

    pub fn from_judgements(reasoning_correct: bool, result_correct: bool) -> Self {
        match (reasoning_correct, result_correct) {
            (true, true) => VerdictKind::TT,
            (true, false) => VerdictKind::TF,
            (false, true) => VerdictKind::FT,
            (false, false) => VerdictKind::FF,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::TT => "TT",
            VerdictKind::TF => "TF",
            VerdictKind::FT => "FT",
            VerdictKind::FF => "FF",
            VerdictKind::O => "O",
        }
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// No annotation backed the reasoning judgement.
    pub provisional: bool,
}

/// Verdict for a final choice. Without an annotation, reasoning correctness
/// defaults to result correctness and the verdict is provisional.
pub fn classify_choice(
    final_choice: &ParsedChoice,
    item: &McqItem,
    annotation: Option<&ReasoningAnnotation>,
) -> Result<Verdict, ScoringError> {
    let label = match final_choice {
        ParsedChoice::Abstain => {
            return Ok(Verdict {
                kind: VerdictKind::O,
                provisional: false,
            })
        }
        ParsedChoice::Unparseable(_) => return Err(ScoringError::UnparseableTranscript(item.id.clone())),
        ParsedChoice::Decisive(label) => *label,
    };
    let result_correct = label == item.ground_truth;
    let (reasoning_correct, provisional) = match annotation {
        Some(a) => (a.reasoning_correct, false),
        None => (result_correct, true),
    };
    Ok(Verdict {
        kind: VerdictKind::from_judgements(reasoning_correct, result_correct),
        provisional,
    })
}

pub fn classify_verdict(
    transcript: &ItemTranscript,
    item: &McqItem,
    annotation: Option<&ReasoningAnnotation>,
) -> Result<Verdict, ScoringError> {
    if transcript.is_failed() {
        return Err(ScoringError::FailedTranscript(transcript.item_id.clone()));
    }
    classify_choice(&transcript.final_choice, item, annotation)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictTally {
    pub n_tt: u64,
    pub n_tf: u64,
    pub n_ft: u64,
    pub n_ff: u64,
    pub n_o: u64,
    pub n_total: u64,
    /// Excluded from `n_total`.
    pub n_unparseable: u64,
    /// Failed items, excluded from `n_total`.
    #[serde(default)]
    pub n_failed: u64,
    /// Verdicts without an annotation.
    #[serde(default)]
    pub n_provisional: u64,
}

impl VerdictTally {
    pub fn from_counts(tt: u64, tf: u64, ft: u64, ff: u64, o: u64) -> Result<Self, ScoringError> {
        let n_total = tt + tf + ft + ff + o;
        if n_total == 0 {
            return Err(ScoringError::EmptyRun);
        }
        Ok(VerdictTally {
            n_tt: tt,
            n_tf: tf,
            n_ft: ft,
            n_ff: ff,
            n_o: o,
            n_total,
            ..VerdictTally::default()
        })
    }

    pub fn count(&self, kind: VerdictKind) -> u64 {
        match kind {
            VerdictKind::TT => self.n_tt,
            VerdictKind::TF => self.n_tf,
            VerdictKind::FT => self.n_ft,
            VerdictKind::FF => self.n_ff,
            VerdictKind::O => self.n_o,
        }
    }

    pub fn decided(&self) -> u64 {
        self.n_total - self.n_o
    }

    fn add(&mut self, v: &Verdict) {
        match v.kind {
            VerdictKind::TT => self.n_tt += 1,
            VerdictKind::TF => self.n_tf += 1,
            VerdictKind::FT => self.n_ft += 1,
            VerdictKind::FF => self.n_ff += 1,
            VerdictKind::O => self.n_o += 1,
        }
        self.n_total += 1;
        if v.provisional && v.kind != VerdictKind::O {
            self.n_provisional += 1;
        }
    }

    fn add_error(&mut self, err: &ScoringError) {
        match err {
            ScoringError::FailedTranscript(_) => self.n_failed += 1,
            _ => self.n_unparseable += 1,
        }
    }

    /// Exact counts scaled by `k`; used to check scale invariance.
    pub fn scaled(&self, k: u64) -> Self {
        VerdictTally {
            n_tt: self.n_tt * k,
            n_tf: self.n_tf * k,
            n_ft: self.n_ft * k,
            n_ff: self.n_ff * k,
            n_o: self.n_o * k,
            n_total: self.n_total * k,
            n_unparseable: self.n_unparseable * k,
            n_failed: self.n_failed * k,
            n_provisional: self.n_provisional * k,
        }
    }
}

/// Count verdicts. An empty list is rejected.
pub fn tally(verdicts: &[Verdict]) -> Result<VerdictTally, ScoringError> {
    let mut t = VerdictTally::default();
    for v in verdicts {
        t.add(v);
    }
    if t.n_total == 0 {
        return Err(ScoringError::EmptyRun);
    }
    Ok(t)
}

/// Count classification outcomes, routing errors to the excluded counters.
/// A tally whose every item was excluded is returned with `n_total = 0`.
pub fn tally_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a Result<Verdict, ScoringError>>) -> VerdictTally {
    let mut t = VerdictTally::default();
    for o in outcomes {
        match o {
            Ok(v) => t.add(v),
            Err(e) => t.add_error(e),
        }
    }
    t
}

/// Exact rate in `[0, 1]`. Serialises as `{numer, denom, value}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate(pub Ratio<u64>);

impl Rate {
    pub fn new(numer: u64, denom: u64) -> Self {
        Rate(Ratio::new(numer, denom))
    }

    pub fn zero() -> Self {
        Rate::new(0, 1)
    }

    pub fn one() -> Self {
        Rate::new(1, 1)
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    pub fn percent(self) -> f64 {
        self.to_f64() * 100.0
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

#[derive(Serialize, Deserialize)]
struct RateRepr {
    numer: u64,
    denom: u64,
    #[serde(default, skip_deserializing)]
    value: f64,
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RateRepr {
            numer: *self.0.numer(),
            denom: *self.0.denom(),
            value: self.to_f64(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = RateRepr::deserialize(d)?;
        if repr.denom == 0 {
            return Err(serde::de::Error::custom("rate denominator is zero"));
        }
        Ok(Rate::new(repr.numer, repr.denom))
    }
}

/// D, A and both E conventions for one tally. A and E are absent when every
/// item abstained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub d: Rate,
    pub a: Option<Rate>,
    /// Errors over decided items.
    pub e_defined: Option<Rate>,
    /// Errors over all items.
    pub e_reported: Option<Rate>,
}

pub fn compute_metrics(t: &VerdictTally) -> Result<Metrics, ScoringError> {
    if t.n_total == 0 {
        return Err(ScoringError::EmptyRun);
    }
    let decided = t.decided();
    let errors = t.n_ff + t.n_tf;
    let (a, e_defined, e_reported) = if decided > 0 {
        (
            Some(Rate::new(t.n_tt + t.n_ft, decided)),
            Some(Rate::new(errors, decided)),
            Some(Rate::new(errors, t.n_total)),
        )
    } else {
        (None, None, None)
    };
    Ok(Metrics {
        d: Rate::new(decided, t.n_total),
        a,
        e_defined,
        e_reported,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupScore {
    pub tally: VerdictTally,
    /// Absent when every item of the group was excluded.
    pub metrics: Option<Metrics>,
}

impl GroupScore {
    pub fn from_tally(tally: VerdictTally) -> Self {
        GroupScore {
            metrics: compute_metrics(&tally).ok(),
            tally,
        }
    }
}

/// Metrics for one (model, condition) group, in total and per subtype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub model: String,
    pub condition: String,
    pub total: GroupScore,
    pub per_subtype: BTreeMap<String, GroupScore>,
}

impl MetricsSummary {
    /// Summarise per-item outcomes labelled with their subtype.
    pub fn from_outcomes(
        model: impl Into<String>,
        condition: impl Into<String>,
        outcomes: &[(String, Result<Verdict, ScoringError>)],
    ) -> Self {
        let mut by_subtype: BTreeMap<String, Vec<&Result<Verdict, ScoringError>>> = BTreeMap::new();
        for (subtype, o) in outcomes {
            by_subtype.entry(subtype.clone()).or_default().push(o);
        }
        MetricsSummary {
            model: model.into(),
            condition: condition.into(),
            total: GroupScore::from_tally(tally_outcomes(outcomes.iter().map(|(_, o)| o))),
            per_subtype: by_subtype
                .into_iter()
                .map(|(k, v)| (k, GroupScore::from_tally(tally_outcomes(v))))
                .collect(),
        }
    }

    pub fn from_tallies(
        model: impl Into<String>,
        condition: impl Into<String>,
        total: VerdictTally,
        per_subtype: BTreeMap<String, VerdictTally>,
    ) -> Self {
        MetricsSummary {
            model: model.into(),
            condition: condition.into(),
            total: GroupScore::from_tally(total),
            per_subtype: per_subtype.into_iter().map(|(k, t)| (k, GroupScore::from_tally(t))).collect(),
        }
    }
}

/// Per-subtype abstention rate `n_o / n_total`.
pub fn abstention_distribution(summary: &MetricsSummary) -> BTreeMap<String, Rate> {
    summary
        .per_subtype
        .iter()
        .filter(|(_, g)| g.tally.n_total > 0)
        .map(|(k, g)| (k.clone(), Rate::new(g.tally.n_o, g.tally.n_total)))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub n: u64,
    pub direct: u64,
    pub indirect: u64,
    pub miss: u64,
}

impl DetectionRow {
    fn add(&mut self, m: MatchClass) {
        self.n += 1;
        match m {
            MatchClass::Direct => self.direct += 1,
            MatchClass::Indirect => self.indirect += 1,
            MatchClass::Miss => self.miss += 1,
        }
    }

    fn rate(&self, k: u64) -> Option<Rate> {
        (self.n > 0).then(|| Rate::new(k, self.n))
    }

    pub fn direct_rate(&self) -> Option<Rate> {
        self.rate(self.direct)
    }

    pub fn indirect_rate(&self) -> Option<Rate> {
        self.rate(self.indirect)
    }

    pub fn overall_rate(&self) -> Option<Rate> {
        self.rate(self.direct + self.indirect)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub per_subtype: BTreeMap<String, DetectionRow>,
    pub total: DetectionRow,
}

pub fn detection_stats<'a>(matches: impl IntoIterator<Item = (&'a str, MatchClass)>) -> DetectionStats {
    let mut per_subtype: BTreeMap<String, DetectionRow> = BTreeMap::new();
    let mut total = DetectionRow::default();
    for (subtype, m) in matches {
        per_subtype.entry(subtype.to_string()).or_default().add(m);
        total.add(m);
    }
    DetectionStats { per_subtype, total }
}

/// Verdict of one item in a scored run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemScore {
    pub item_id: String,
    pub bias_subtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

/// Contents of `scores.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScores {
    pub run_id: String,
    pub summary: MetricsSummary,
    pub items: Vec<ItemScore>,
}

/// Score a run against its dataset and the active annotations (by item id).
pub fn score_run(
    run: &RunRecord,
    ds: &Dataset,
    annotations: &HashMap<String, ReasoningAnnotation>,
) -> Result<RunScores, ScoringError> {
    let mut outcomes = Vec::with_capacity(run.transcripts.len());
    let mut items = Vec::with_capacity(run.transcripts.len());
    for t in &run.transcripts {
        let item = ds.item(&t.item_id).ok_or_else(|| ScoringError::UnknownItem(t.item_id.clone()))?;
        let outcome = classify_verdict(t, item, annotations.get(&t.item_id));
        items.push(ItemScore {
            item_id: t.item_id.clone(),
            bias_subtype: item.bias_subtype.clone(),
            verdict: outcome.as_ref().ok().copied(),
            excluded: outcome.as_ref().err().map(|e| e.to_string()),
        });
        outcomes.push((item.bias_subtype.clone(), outcome));
    }
    Ok(RunScores {
        run_id: run.meta.run_id.clone(),
        summary: MetricsSummary::from_outcomes(&run.meta.model.model_name, run.meta.condition.slug(), &outcomes),
        items,
    })
}

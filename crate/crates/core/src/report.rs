//! Summary tables (markdown, CSV, JSON) and plot series.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::scoring::{abstention_distribution, GroupScore, MetricsSummary, Rate, VerdictKind};
use crate::taxonomy::BiasTaxonomy;

pub const NOT_AVAILABLE: &str = "N/A";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no summaries to report")]
    EmptySummaries,
    #[error("report needs at least one error-rate convention")]
    NoConvention,
    #[error("plot kind {kind} is not available: {reason}")]
    IncompatibleKind { kind: String, reason: String },
    #[error("unknown {what} {value:?}")]
    UnknownValue { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Total,
    PerSubtype,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Defined,
    Reported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Markdown,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(ReportError::UnknownValue {
                what: "format",
                value: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub grouping: Grouping,
    pub conventions: BTreeSet<Convention>,
    pub format: Format,
}

impl ReportSpec {
    pub fn new(format: Format) -> Self {
        ReportSpec {
            grouping: Grouping::Total,
            conventions: [Convention::Defined, Convention::Reported].into_iter().collect(),
            format,
        }
    }

    pub fn per_subtype(mut self) -> Self {
        self.grouping = Grouping::PerSubtype;
        self
    }
}

/// Percentage rounded half-up to one decimal, computed exactly.
pub fn percent_1dp(rate: Rate) -> String {
    let (n, d) = (*rate.0.numer() as u128, *rate.0.denom() as u128);
    let tenths = (n * 2000 + d) / (2 * d);
    format!("{}.{}", tenths / 10, tenths % 10)
}

fn cell(rate: Option<Rate>) -> String {
    rate.map_or_else(|| NOT_AVAILABLE.to_string(), percent_1dp)
}

struct Row<'a> {
    model: &'a str,
    condition: &'a str,
    subtype: Option<&'a str>,
    score: &'a GroupScore,
}

fn rows<'a>(summaries: &'a [MetricsSummary], grouping: Grouping) -> Vec<Row<'a>> {
    let mut out = Vec::new();
    for s in summaries {
        match grouping {
            Grouping::Total => out.push(Row {
                model: &s.model,
                condition: &s.condition,
                subtype: None,
                score: &s.total,
            }),
            Grouping::PerSubtype => {
                for (subtype, score) in &s.per_subtype {
                    out.push(Row {
                        model: &s.model,
                        condition: &s.condition,
                        subtype: Some(subtype),
                        score,
                    });
                }
                out.push(Row {
                    model: &s.model,
                    condition: &s.condition,
                    subtype: Some("Total"),
                    score: &s.total,
                });
            }
        }
    }
    out
}

fn header(spec: &ReportSpec) -> Vec<&'static str> {
    let mut h = vec!["Model", "Condition"];
    if spec.grouping == Grouping::PerSubtype {
        h.push("Subtype");
    }
    h.extend(["N", "D", "A"]);
    if spec.conventions.contains(&Convention::Defined) {
        h.push("E (defined)");
    }
    if spec.conventions.contains(&Convention::Reported) {
        h.push("E (as reported)");
    }
    h.extend(["Unparseable", "Provisional"]);
    h
}

fn row_cells(row: &Row<'_>, spec: &ReportSpec) -> Vec<String> {
    let m = row.score.metrics;
    let mut c = vec![row.model.to_string(), row.condition.to_string()];
    if let Some(s) = row.subtype {
        c.push(s.to_string());
    }
    c.push(row.score.tally.n_total.to_string());
    c.push(cell(m.map(|m| m.d)));
    c.push(cell(m.and_then(|m| m.a)));
    if spec.conventions.contains(&Convention::Defined) {
        c.push(cell(m.and_then(|m| m.e_defined)));
    }
    if spec.conventions.contains(&Convention::Reported) {
        c.push(cell(m.and_then(|m| m.e_reported)));
    }
    c.push((row.score.tally.n_unparseable + row.score.tally.n_failed).to_string());
    c.push(row.score.tally.n_provisional.to_string());
    c
}

/// Render one row per group (and per subtype when requested). Rates are
/// percentages with one decimal; undefined rates render as `N/A`.
pub fn render_summary_table(summaries: &[MetricsSummary], spec: &ReportSpec) -> Result<String, ReportError> {
    if summaries.is_empty() {
        return Err(ReportError::EmptySummaries);
    }
    if spec.conventions.is_empty() {
        return Err(ReportError::NoConvention);
    }
    let header = header(spec);
    let body: Vec<Vec<String>> = rows(summaries, spec.grouping).iter().map(|r| row_cells(r, spec)).collect();
    Ok(match spec.format {
        Format::Markdown => {
            let mut out = format!("| {} |\n", header.join(" | "));
            out.push_str(&format!("|{}\n", header.iter().map(|_| "---|").collect::<String>()));
            for r in &body {
                out.push_str(&format!("| {} |\n", r.join(" | ")));
            }
            out
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).expect("in-memory csv write");
            for r in &body {
                w.write_record(r).expect("in-memory csv write");
            }
            String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
        }
        Format::Json => {
            let objects: Vec<Value> = body
                .iter()
                .map(|r| {
                    let map: serde_json::Map<String, Value> = header
                        .iter()
                        .zip(r)
                        .map(|(h, v)| (h.to_string(), json_cell(v)))
                        .collect();
                    Value::Object(map)
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&objects).expect("json rows serialize");
            text.push('\n');
            text
        }
    })
}

fn json_cell(v: &str) -> Value {
    if v == NOT_AVAILABLE {
        return Value::Null;
    }
    match v.parse::<f64>() {
        Ok(n) if v.chars().all(|c| c.is_ascii_digit() || c == '.') => json!(n),
        _ => Value::String(v.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    VerdictStack,
    AbstentionBySubtype,
    AccuracyErrorBars,
}

impl FromStr for PlotKind {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "verdict_stack" => Ok(PlotKind::VerdictStack),
            "abstention_by_subtype" => Ok(PlotKind::AbstentionBySubtype),
            "accuracy_error_bars" => Ok(PlotKind::AccuracyErrorBars),
            _ => Err(ReportError::UnknownValue {
                what: "plot kind",
                value: s.into(),
            }),
        }
    }
}

impl PlotKind {
    fn name(self) -> &'static str {
        match self {
            PlotKind::VerdictStack => "verdict_stack",
            PlotKind::AbstentionBySubtype => "abstention_by_subtype",
            PlotKind::AccuracyErrorBars => "accuracy_error_bars",
        }
    }
}

fn frac(rate: Option<Rate>) -> Value {
    rate.map_or(Value::Null, |r| json!(r.to_f64()))
}

/// Data for one chart, as raw fractions. Groups are emitted in input order.
pub fn emit_plot_series(summaries: &[MetricsSummary], kind: PlotKind) -> Result<Value, ReportError> {
    if summaries.is_empty() {
        return Err(ReportError::EmptySummaries);
    }
    let incompatible = |reason: String| ReportError::IncompatibleKind {
        kind: kind.name().into(),
        reason,
    };
    let mut series = Vec::with_capacity(summaries.len());
    for s in summaries {
        let t = &s.total.tally;
        let values = match kind {
            PlotKind::VerdictStack => {
                if t.n_total == 0 {
                    return Err(incompatible(format!("group {}/{} has no scored items", s.model, s.condition)));
                }
                let mut obj = serde_json::Map::new();
                for k in VerdictKind::ALL {
                    obj.insert(k.as_str().into(), json!(Rate::new(t.count(k), t.n_total).to_f64()));
                }
                Value::Object(obj)
            }
            PlotKind::AbstentionBySubtype => {
                if s.per_subtype.is_empty() {
                    return Err(incompatible(format!("group {}/{} has no per-subtype data", s.model, s.condition)));
                }
                let dist = abstention_distribution(s);
                let taxonomy = BiasTaxonomy::builtin();
                let obj: serde_json::Map<String, Value> = taxonomy
                    .core_subtypes()
                    .map(|l| (l.canonical_name.clone(), frac(dist.get(&l.canonical_name).copied())))
                    .collect();
                Value::Object(obj)
            }
            PlotKind::AccuracyErrorBars => {
                let m = s.total.metrics;
                json!({
                    "d": frac(m.map(|m| m.d)),
                    "a": frac(m.and_then(|m| m.a)),
                    "e_defined": frac(m.and_then(|m| m.e_defined)),
                    "e_reported": frac(m.and_then(|m| m.e_reported)),
                })
            }
        };
        series.push(json!({ "model": s.model, "condition": s.condition, "values": values }));
    }
    Ok(json!({ "kind": kind.name(), "series": series }))
}

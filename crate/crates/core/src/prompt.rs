//! Prompt rendering for the decision-mode × inspection-scope matrix and for
//! the bias-detection query.
//!
//! Fragment order is: inspection preamble, abstention sentence, stem, options,
//! then the abstention option line (abstention mode) or the forced-choice
//! sentence (non-abstention mode). Fragments are joined with a single newline.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::McqItem;
use crate::taxonomy::{BiasLabel, BiasTaxonomy};

pub const ABSTENTION_CLAUSE: &str = "If you prefer not to make a decisive choice, then select option E.";
pub const ABSTENTION_OPTION: &str = "E: I am not sure which choice is the best to select.";
pub const FORCED_CHOICE: &str = "You can only choose one option.";
pub const GENERAL_PREAMBLE: &str =
    "Please provide a definition of cognitive bias and identify any instances of these biases in the decision-making process.";
pub const SPECIFIC_PREAMBLE: &str =
    "Please provide a definition of the {bias}, then identify any instances of this specific bias in the decision-making process.";
pub const DETECTION_INSTRUCTION: &str = "Please identify which cognitive bias trap is contained in this question and return the cognitive bias type. The most likely cognitive bias trap is";
pub const OPTIONS_PREFIX: &str = "Option:";

const BIAS_PLACEHOLDER: &str = "{bias}";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("specific inspection needs a taxonomy bias, got {0:?}")]
    UnresolvedSbiTarget(String),
    #[error("failed to read template overrides: {0}")]
    Io(#[from] std::io::Error),
    #[error("template overrides are not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown template fragment {0:?}")]
    UnknownFragment(String),
    #[error("specific_preamble override must contain {{bias}}")]
    MissingPlaceholder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    Abstention,
    NonAbstention,
}

impl DecisionMode {
    pub fn allows_abstention(self) -> bool {
        self == DecisionMode::Abstention
    }
}

/// Condition-level scope selector. The concrete SBI target is resolved per
/// item, see [`Condition::resolve_scope`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeKind {
    Standard,
    General,
    Specific,
}

/// Where the SBI target bias comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SbiSource {
    /// The item's annotated subtype.
    #[default]
    Oracle,
    /// The detection model's answer, used by the feedback loop.
    Detected,
}

/// Inspection scope with a resolved target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InspectionScope {
    Standard,
    General,
    Specific(BiasLabel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub mode: DecisionMode,
    pub scope: ScopeKind,
    #[serde(default)]
    pub sbi_source: SbiSource,
}

impl Condition {
    pub fn new(mode: DecisionMode, scope: ScopeKind) -> Self {
        Condition {
            mode,
            scope,
            sbi_source: SbiSource::Oracle,
        }
    }

    pub fn with_sbi_source(mut self, source: SbiSource) -> Self {
        self.sbi_source = source;
        self
    }

    /// The six experimental conditions: {non-abstention, abstention} × {standard, GBI, SBI}.
    pub fn matrix() -> Vec<Condition> {
        let mut out = Vec::with_capacity(6);
        for mode in [DecisionMode::NonAbstention, DecisionMode::Abstention] {
            for scope in [ScopeKind::Standard, ScopeKind::General, ScopeKind::Specific] {
                out.push(Condition::new(mode, scope));
            }
        }
        out
    }

    /// Short stable name, e.g. `abstention-gbi` or `abstention-gbi-loop`.
    pub fn slug(&self) -> String {
        let mode = match self.mode {
            DecisionMode::Abstention => "abstention",
            DecisionMode::NonAbstention => "nonabstention",
        };
        let scope = match self.scope {
            ScopeKind::Standard => "standard",
            ScopeKind::General => "gbi",
            ScopeKind::Specific => "sbi",
        };
        match self.sbi_source {
            SbiSource::Detected => format!("{mode}-{scope}-loop"),
            SbiSource::Oracle => format!("{mode}-{scope}"),
        }
    }

    /// Resolve the scope for one item. Oracle SBI uses the item's subtype;
    /// detected SBI needs the detection result.
    pub fn resolve_scope(
        &self,
        item: &McqItem,
        taxonomy: &BiasTaxonomy,
        detected: Option<&BiasLabel>,
    ) -> Result<InspectionScope, PromptError> {
        match self.scope {
            ScopeKind::Standard => Ok(InspectionScope::Standard),
            ScopeKind::General => Ok(InspectionScope::General),
            ScopeKind::Specific => {
                let target = match self.sbi_source {
                    SbiSource::Oracle => taxonomy
                        .lookup(&item.bias_subtype)
                        .cloned()
                        .ok_or_else(|| PromptError::UnresolvedSbiTarget(item.bias_subtype.clone()))?,
                    SbiSource::Detected => detected
                        .cloned()
                        .ok_or_else(|| PromptError::UnresolvedSbiTarget("<no detection result>".into()))?,
                };
                if target.is_foreign() {
                    return Err(PromptError::UnresolvedSbiTarget(target.canonical_name));
                }
                Ok(InspectionScope::Specific(target))
            }
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPart {
    pub name: String,
    pub text: String,
}

/// Prompt text plus the named fragments it was assembled from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub parts: Vec<PromptPart>,
}

impl RenderedPrompt {
    fn from_parts(parts: Vec<PromptPart>) -> Self {
        let text = parts.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join("\n");
        RenderedPrompt { text, parts }
    }

    pub fn part(&self, name: &str) -> Option<&str> {
        self.parts.iter().find(|p| p.name == name).map(|p| p.text.as_str())
    }
}

/// The template fragments. Defaults are the verbatim experiment wording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptKit {
    abstention_clause: String,
    abstention_option: String,
    forced_choice: String,
    general_preamble: String,
    specific_preamble: String,
    detection_instruction: String,
    options_prefix: String,
}

impl Default for PromptKit {
    fn default() -> Self {
        PromptKit {
            abstention_clause: ABSTENTION_CLAUSE.into(),
            abstention_option: ABSTENTION_OPTION.into(),
            forced_choice: FORCED_CHOICE.into(),
            general_preamble: GENERAL_PREAMBLE.into(),
            specific_preamble: SPECIFIC_PREAMBLE.into(),
            detection_instruction: DETECTION_INSTRUCTION.into(),
            options_prefix: OPTIONS_PREFIX.into(),
        }
    }
}

impl PromptKit {
    /// Apply an override map (fragment name → text) on top of the defaults.
    pub fn with_overrides(overrides: &BTreeMap<String, String>) -> Result<Self, PromptError> {
        let mut kit = PromptKit::default();
        for (name, text) in overrides {
            let slot = match name.as_str() {
                "abstention_clause" => &mut kit.abstention_clause,
                "abstention_option" => &mut kit.abstention_option,
                "forced_choice" => &mut kit.forced_choice,
                "general_preamble" => &mut kit.general_preamble,
                "specific_preamble" => &mut kit.specific_preamble,
                "detection_instruction" => &mut kit.detection_instruction,
                "options_prefix" => &mut kit.options_prefix,
                other => return Err(PromptError::UnknownFragment(other.to_string())),
            };
            *slot = text.clone();
        }
        if !kit.specific_preamble.contains(BIAS_PLACEHOLDER) {
            return Err(PromptError::MissingPlaceholder);
        }
        Ok(kit)
    }

    pub fn load_overrides(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)?;
        let map: BTreeMap<String, String> = serde_json::from_str(&text)?;
        Self::with_overrides(&map)
    }

    fn options_line(&self, item: &McqItem) -> Option<String> {
        if item.options.is_empty() {
            return None;
        }
        let body = item
            .options
            .iter()
            .map(|(label, text)| format!("{label}. {text}"))
            .collect::<Vec<_>>()
            .join(" ");
        Some(format!("{} {}", self.options_prefix, body))
    }

    pub fn render_question(
        &self,
        item: &McqItem,
        mode: DecisionMode,
        scope: &InspectionScope,
    ) -> Result<RenderedPrompt, PromptError> {
        let mut parts = Vec::with_capacity(5);
        let part = |name: &str, text: String| PromptPart { name: name.into(), text };
        match scope {
            InspectionScope::Standard => {}
            InspectionScope::General => parts.push(part("preamble", self.general_preamble.clone())),
            InspectionScope::Specific(target) => {
                if target.is_foreign() {
                    return Err(PromptError::UnresolvedSbiTarget(target.canonical_name.clone()));
                }
                parts.push(part(
                    "preamble",
                    self.specific_preamble.replace(BIAS_PLACEHOLDER, &target.canonical_name),
                ));
            }
        }
        if mode.allows_abstention() {
            parts.push(part("abstention_clause", self.abstention_clause.clone()));
        }
        parts.push(part("stem", item.stem.clone()));
        if let Some(options) = self.options_line(item) {
            parts.push(part("options", options));
        }
        let closing = match mode {
            DecisionMode::Abstention => self.abstention_option.clone(),
            DecisionMode::NonAbstention => self.forced_choice.clone(),
        };
        parts.push(part("closing", closing));
        Ok(RenderedPrompt::from_parts(parts))
    }

    /// Detection runs on the raw question: no E option, no inspection preamble.
    pub fn render_detection(&self, item: &McqItem) -> RenderedPrompt {
        let mut parts = vec![PromptPart {
            name: "stem".into(),
            text: item.stem.clone(),
        }];
        if let Some(options) = self.options_line(item) {
            parts.push(PromptPart {
                name: "options".into(),
                text: options,
            });
        }
        parts.push(PromptPart {
            name: "closing".into(),
            text: self.detection_instruction.clone(),
        });
        RenderedPrompt::from_parts(parts)
    }
}

/// Render with the default templates.
pub fn render_question_prompt(
    item: &McqItem,
    mode: DecisionMode,
    scope: &InspectionScope,
) -> Result<RenderedPrompt, PromptError> {
    PromptKit::default().render_question(item, mode, scope)
}

pub fn render_detection_prompt(item: &McqItem) -> RenderedPrompt {
    PromptKit::default().render_detection(item)
}

/// Collapse all whitespace runs to single spaces and trim.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

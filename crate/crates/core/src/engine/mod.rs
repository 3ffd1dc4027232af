//! The per-item answer / detect / re-ask loop and resumable condition runs.

mod detect;
mod run;

pub use detect::{detection_pass, DetectionOutcome};
pub use run::{
    default_run_id, replay_run, run_condition, DatasetRef, RunConfig, RunMeta, RunRecord, RunStatus, RunStore,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

use crate::dataset::McqItem;
use crate::gateway::{CachePolicy, Gateway, GatewayError, Message, ModelReply, ModelRequest};
use crate::parser::{extract_bias_label, extract_choice, DetectedBias, ParsedChoice};
use crate::prompt::{Condition, DecisionMode, InspectionScope, PromptError, PromptKit, RenderedPrompt, SbiSource, ScopeKind};
use crate::taxonomy::{BiasLabel, BiasTaxonomy};

/// Follow-up sent once when an answer cannot be parsed.
pub const REASK_SUFFIX: &str = "Reply with only the single letter of your final choice.";

pub const DEFAULT_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("run storage failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("run storage holds malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("run {0:?} not found")]
    RunNotFound(String),
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

/// Provider and sampling settings for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub provider_id: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

impl ModelSpec {
    pub fn new(provider_id: impl Into<String>, model_name: impl Into<String>) -> Self {
        ModelSpec {
            provider_id: provider_id.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn request(&self, messages: Vec<Message>) -> ModelRequest {
        ModelRequest {
            provider_id: self.provider_id.clone(),
            model_name: self.model_name.clone(),
            messages,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Answer,
    Detection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TurnOutcome {
    Choice { choice: ParsedChoice },
    Bias { detected: DetectedBias },
    NoBias { reason: String },
}

/// The single re-ask made after an unparseable answer, sent as a follow-up
/// message in the same conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Followup {
    pub prompt: String,
    pub reply: ModelReply,
    pub choice: ParsedChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub kind: TurnKind,
    pub prompt: RenderedPrompt,
    pub reply: ModelReply,
    pub outcome: TurnOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followup: Option<Followup>,
}

impl Turn {
    /// Final parsed choice of an answer turn, taking the follow-up into account.
    pub fn choice(&self) -> Option<&ParsedChoice> {
        if let Some(f) = &self.followup {
            return Some(&f.choice);
        }
        match &self.outcome {
            TurnOutcome::Choice { choice } => Some(choice),
            _ => None,
        }
    }

    pub fn detected(&self) -> Option<&DetectedBias> {
        match &self.outcome {
            TurnOutcome::Bias { detected } => Some(detected),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopState {
    pub bias: Option<BiasLabel>,
    pub loop_count: u32,
    pub max_loops: u32,
    pub decision: ParsedChoice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemTranscript {
    pub item_id: String,
    pub item_digest: String,
    pub condition: Condition,
    pub turns: Vec<Turn>,
    pub final_choice: ParsedChoice,
    pub loop_trace: Vec<LoopState>,
    /// Why the loop stopped early on a detection turn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<ItemFailure>,
}

impl ItemTranscript {
    pub fn is_failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn loop_count(&self) -> u32 {
        self.loop_trace.last().map_or(0, |s| s.loop_count)
    }

    pub fn answer_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.kind == TurnKind::Answer)
    }

    pub fn detection_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.kind == TurnKind::Detection)
    }

    /// Bias named by the last detection turn, if any.
    pub fn detected_bias(&self) -> Option<&DetectedBias> {
        self.detection_turns().filter_map(Turn::detected).last()
    }
}

/// Everything needed to query models for one condition.
#[derive(Clone, Copy)]
pub struct Session<'a> {
    pub gateway: &'a Gateway,
    pub taxonomy: &'a BiasTaxonomy,
    pub kit: &'a PromptKit,
    pub model: &'a ModelSpec,
    /// Model answering detection prompts.
    pub detector: &'a ModelSpec,
    pub policy: CachePolicy,
    pub max_loops: u32,
}

/// Reject conditions the loop cannot execute.
pub fn validate_condition(cond: &Condition, max_loops: u32) -> Result<(), EngineError> {
    if max_loops == 0 {
        return Err(EngineError::Config("max_loops must be at least 1".into()));
    }
    if cond.sbi_source == SbiSource::Detected {
        if cond.scope == ScopeKind::Specific {
            return Err(EngineError::Config(
                "the feedback loop starts from a standard or general scope; specific scope with detected source has no initial target".into(),
            ));
        }
        if cond.mode == DecisionMode::NonAbstention {
            return Err(EngineError::Config(
                "the feedback loop needs abstention mode; non-abstention never abstains".into(),
            ));
        }
    }
    Ok(())
}

impl<'a> Session<'a> {
    /// Render the question, make exactly one gateway call, parse the choice.
    pub fn answer_once(&self, item: &McqItem, mode: DecisionMode, scope: &InspectionScope) -> Result<Turn, EngineError> {
        let prompt = self.kit.render_question(item, mode, scope)?;
        let req = self.model.request(vec![Message::user(prompt.text.clone())]);
        let reply = self.gateway.complete(&req, self.policy)?;
        let choice = extract_choice(&reply.text, item, mode);
        debug!(item = %item.id, %choice, "answer");
        Ok(Turn {
            kind: TurnKind::Answer,
            prompt,
            reply,
            outcome: TurnOutcome::Choice { choice },
            followup: None,
        })
    }

    /// [`Session::answer_once`] plus one follow-up when the reply is unparseable.
    pub fn answer(&self, item: &McqItem, mode: DecisionMode, scope: &InspectionScope) -> Result<Turn, EngineError> {
        let mut turn = self.answer_once(item, mode, scope)?;
        if turn.choice().is_some_and(ParsedChoice::is_unparseable) {
            let req = self.model.request(vec![
                Message::user(turn.prompt.text.clone()),
                Message::assistant(turn.reply.text.clone()),
                Message::user(REASK_SUFFIX),
            ]);
            let reply = self.gateway.complete(&req, self.policy)?;
            let choice = extract_choice(&reply.text, item, mode);
            turn.followup = Some(Followup {
                prompt: REASK_SUFFIX.into(),
                reply,
                choice,
            });
        }
        Ok(turn)
    }

    /// Ask the detector which bias the question contains.
    pub fn detect(&self, item: &McqItem) -> Result<Turn, EngineError> {
        let prompt = self.kit.render_detection(item);
        let req = self.detector.request(vec![Message::user(prompt.text.clone())]);
        let reply = self.gateway.complete(&req, self.policy)?;
        let outcome = match extract_bias_label(&reply.text, self.taxonomy) {
            Ok(detected) => TurnOutcome::Bias { detected },
            Err(err) => TurnOutcome::NoBias { reason: err.to_string() },
        };
        Ok(Turn {
            kind: TurnKind::Detection,
            prompt,
            reply,
            outcome,
            followup: None,
        })
    }

    /// Answer under `cond`; while the decision is an abstention and loops
    /// remain, detect the bias and re-ask with that bias as the specific
    /// inspection target. Only detected-source conditions loop.
    ///
    /// Gateway and prompt failures are recorded in the transcript.
    pub fn feedback_loop(&self, item: &McqItem, cond: &Condition) -> ItemTranscript {
        let mut transcript = ItemTranscript {
            item_id: item.id.clone(),
            item_digest: item.digest(),
            condition: *cond,
            turns: Vec::new(),
            final_choice: ParsedChoice::Unparseable("not answered".into()),
            loop_trace: Vec::new(),
            detection_error: None,
            failure: None,
        };
        if let Err(err) = self.drive(item, cond, &mut transcript) {
            let kind = match &err {
                EngineError::Gateway(g) => g.kind().to_string(),
                EngineError::Prompt(_) => "Prompt".into(),
                EngineError::Config(_) => "Config".into(),
                _ => "Internal".into(),
            };
            debug!(item = %item.id, %kind, "item failed");
            transcript.failure = Some(ItemFailure {
                kind,
                message: err.to_string(),
            });
        }
        transcript
    }

    fn drive(&self, item: &McqItem, cond: &Condition, t: &mut ItemTranscript) -> Result<(), EngineError> {
        validate_condition(cond, self.max_loops)?;
        let scope = cond.resolve_scope(item, self.taxonomy, None)?;
        let first = self.answer(item, cond.mode, &scope)?;
        let mut state = LoopState {
            bias: None,
            loop_count: 0,
            max_loops: self.max_loops,
            decision: first.choice().cloned().expect("answer turn has a choice"),
        };
        t.turns.push(first);
        t.final_choice = state.decision.clone();
        t.loop_trace.push(state.clone());
        if cond.sbi_source != SbiSource::Detected {
            return Ok(());
        }
        while state.loop_count < state.max_loops && state.decision.is_abstain() {
            let detection = self.detect(item)?;
            let detected = detection.detected().map(|d| d.label.clone());
            let reason = match &detection.outcome {
                TurnOutcome::NoBias { reason } => Some(reason.clone()),
                _ => None,
            };
            t.turns.push(detection);
            let label = match (detected, reason) {
                (Some(label), _) if !label.is_foreign() => label,
                (Some(label), _) => {
                    t.detection_error = Some(format!("detected bias {:?} is not in the taxonomy", label.canonical_name));
                    state.bias = Some(label);
                    t.loop_trace.push(state.clone());
                    break;
                }
                (None, reason) => {
                    t.detection_error = reason;
                    break;
                }
            };
            state.bias = Some(label.clone());
            let reask = self.answer(item, cond.mode, &InspectionScope::Specific(label))?;
            state.loop_count += 1;
            state.decision = reask.choice().cloned().expect("answer turn has a choice");
            t.turns.push(reask);
            t.final_choice = state.decision.clone();
            t.loop_trace.push(state.clone());
        }
        Ok(())
    }
}

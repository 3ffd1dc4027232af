//! Reasoning annotations: an append-only journal per run, the review queue,
//! and JSONL import / export.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, McqItem, OptionLabel, Options};
use crate::engine::{EngineError, ItemTranscript, RunRecord, RunStore, TurnKind};
use crate::parser::ParsedChoice;
use crate::scoring::{score_run, ReasoningAnnotation, RunScores, ScoringError};

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("run {0:?} not found")]
    RunNotFound(String),
    #[error("unknown item id(s): {}", .0.join(", "))]
    UnknownItem(Vec<String>),
    #[error("item {0:?} abstained; abstentions are not reviewed")]
    AbstainedItem(String),
    #[error("item {0:?} has no decided answer")]
    UndecidedItem(String),
    #[error("annotation I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed annotation record at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Engine(EngineError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

impl From<EngineError> for ReviewError {
    fn from(err: EngineError) -> Self {
        match err {
            EngineError::RunNotFound(id) => ReviewError::RunNotFound(id),
            other => ReviewError::Engine(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnExcerpt {
    pub kind: TurnKind,
    pub prompt: String,
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followup_reply: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewQueueItem {
    pub run_id: String,
    pub item_id: String,
    pub bias_subtype: String,
    pub stem: String,
    pub options: Options,
    pub ground_truth: OptionLabel,
    pub final_choice: ParsedChoice,
    pub turns: Vec<TurnExcerpt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<ReasoningAnnotation>,
}

fn excerpt(t: &ItemTranscript) -> Vec<TurnExcerpt> {
    t.turns
        .iter()
        .map(|turn| TurnExcerpt {
            kind: turn.kind,
            prompt: turn.prompt.text.clone(),
            reply: turn.reply.text.clone(),
            followup_reply: turn.followup.as_ref().map(|f| f.reply.text.clone()),
        })
        .collect()
}

fn is_decided(t: &ItemTranscript) -> bool {
    !t.is_failed() && matches!(t.final_choice, ParsedChoice::Decisive(_))
}

pub fn queue_item(
    run: &RunRecord,
    item: &McqItem,
    t: &ItemTranscript,
    annotation: Option<&ReasoningAnnotation>,
) -> ReviewQueueItem {
    ReviewQueueItem {
        run_id: run.meta.run_id.clone(),
        item_id: item.id.clone(),
        bias_subtype: item.bias_subtype.clone(),
        stem: item.stem.clone(),
        options: item.options.clone(),
        ground_truth: item.ground_truth,
        final_choice: t.final_choice.clone(),
        turns: excerpt(t),
        annotation: annotation.cloned(),
    }
}

/// Decided items without an annotation, in dataset order.
pub fn enqueue_pending(
    run: &RunRecord,
    ds: &Dataset,
    annotations: &HashMap<String, ReasoningAnnotation>,
) -> Vec<ReviewQueueItem> {
    run.transcripts
        .iter()
        .filter(|t| is_decided(t) && !annotations.contains_key(&t.item_id))
        .filter_map(|t| ds.item(&t.item_id).map(|item| queue_item(run, item, t, None)))
        .collect()
}

/// Append-only annotation journal with a last-write-wins view.
pub struct Journal {
    active: RwLock<HashMap<String, ReasoningAnnotation>>,
    history: RwLock<usize>,
    writer: Mutex<Option<File>>,
}

impl Journal {
    pub fn in_memory() -> Self {
        Journal {
            active: RwLock::new(HashMap::new()),
            history: RwLock::new(0),
            writer: Mutex::new(None),
        }
    }

    pub fn open(path: &Path) -> Result<Self, ReviewError> {
        let records = if path.is_file() { read_annotations(path)? } else { Vec::new() };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let journal = Journal {
            active: RwLock::new(HashMap::new()),
            history: RwLock::new(records.len()),
            writer: Mutex::new(Some(file)),
        };
        {
            let mut active = journal.active.write().expect("journal lock");
            for r in records {
                active.insert(r.item_id.clone(), r);
            }
        }
        Ok(journal)
    }

    pub fn append(&self, ann: ReasoningAnnotation) -> Result<(), ReviewError> {
        let mut writer = self.writer.lock().expect("journal writer lock");
        if let Some(file) = writer.as_mut() {
            let mut line = serde_json::to_string(&ann).expect("annotations serialize");
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        *self.history.write().expect("journal lock") += 1;
        self.active.write().expect("journal lock").insert(ann.item_id.clone(), ann);
        Ok(())
    }

    /// Snapshot of the active annotations by item id.
    pub fn active(&self) -> HashMap<String, ReasoningAnnotation> {
        self.active.read().expect("journal lock").clone()
    }

    /// Number of journal records, superseded ones included.
    pub fn history_len(&self) -> usize {
        *self.history.read().expect("journal lock")
    }
}

/// Parse an annotation JSONL file.
pub fn read_annotations(path: &Path) -> Result<Vec<ReasoningAnnotation>, ReviewError> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ann = serde_json::from_str(&line).map_err(|e| ReviewError::Malformed {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        out.push(ann);
    }
    Ok(out)
}

/// Review operations over a run store. Safe to share across threads.
pub struct ReviewService {
    runs: RunStore,
    journals: Mutex<HashMap<String, Arc<Journal>>>,
}

impl ReviewService {
    pub fn new(runs: RunStore) -> Self {
        ReviewService {
            runs,
            journals: Mutex::new(HashMap::new()),
        }
    }

    pub fn runs(&self) -> &RunStore {
        &self.runs
    }

    pub fn list_runs(&self) -> Result<Vec<String>, ReviewError> {
        Ok(self.runs.list()?)
    }

    fn journal(&self, run_id: &str) -> Result<Arc<Journal>, ReviewError> {
        let mut journals = self.journals.lock().expect("journal map lock");
        if let Some(j) = journals.get(run_id) {
            return Ok(Arc::clone(j));
        }
        if !self.runs.exists(run_id) {
            return Err(ReviewError::RunNotFound(run_id.to_string()));
        }
        let j = Arc::new(Journal::open(&self.runs.annotations_path(run_id))?);
        journals.insert(run_id.to_string(), Arc::clone(&j));
        Ok(j)
    }

    fn load(&self, run_id: &str) -> Result<(RunRecord, Dataset), ReviewError> {
        let run = self.runs.load_run(run_id)?;
        let ds = self.runs.load_dataset(run_id)?;
        Ok((run, ds))
    }

    pub fn annotations(&self, run_id: &str) -> Result<HashMap<String, ReasoningAnnotation>, ReviewError> {
        Ok(self.journal(run_id)?.active())
    }

    pub fn queue(&self, run_id: &str) -> Result<Vec<ReviewQueueItem>, ReviewError> {
        let annotations = self.annotations(run_id)?;
        let (run, ds) = self.load(run_id)?;
        Ok(enqueue_pending(&run, &ds, &annotations))
    }

    /// Full view of one item, including any active annotation.
    pub fn item(&self, run_id: &str, item_id: &str) -> Result<ReviewQueueItem, ReviewError> {
        let annotations = self.annotations(run_id)?;
        let (run, ds) = self.load(run_id)?;
        let (item, t) = ds
            .item(item_id)
            .zip(run.transcript(item_id))
            .ok_or_else(|| ReviewError::UnknownItem(vec![item_id.to_string()]))?;
        Ok(queue_item(&run, item, t, annotations.get(item_id)))
    }

    fn check_annotatable(run: &RunRecord, item_id: &str) -> Result<(), ReviewError> {
        let t = run
            .transcript(item_id)
            .ok_or_else(|| ReviewError::UnknownItem(vec![item_id.to_string()]))?;
        if !t.is_failed() && t.final_choice.is_abstain() {
            return Err(ReviewError::AbstainedItem(item_id.to_string()));
        }
        if !is_decided(t) {
            return Err(ReviewError::UndecidedItem(item_id.to_string()));
        }
        Ok(())
    }

    pub fn submit_annotation(
        &self,
        run_id: &str,
        item_id: &str,
        reasoning_correct: bool,
        reviewer: &str,
        note: Option<String>,
    ) -> Result<ReasoningAnnotation, ReviewError> {
        let journal = self.journal(run_id)?;
        let run = self.runs.load_run(run_id)?;
        Self::check_annotatable(&run, item_id)?;
        let ann = ReasoningAnnotation {
            run_id: run_id.to_string(),
            item_id: item_id.to_string(),
            reasoning_correct,
            reviewer: reviewer.to_string(),
            note,
            created_at: Utc::now(),
        };
        journal.append(ann.clone())?;
        Ok(ann)
    }

    pub fn scores(&self, run_id: &str) -> Result<RunScores, ReviewError> {
        let annotations = self.annotations(run_id)?;
        let (run, ds) = self.load(run_id)?;
        Ok(score_run(&run, &ds, &annotations)?)
    }

    /// Write the active annotations as JSONL in dataset order.
    pub fn export_annotations(&self, run_id: &str, path: &Path) -> Result<usize, ReviewError> {
        let annotations = self.annotations(run_id)?;
        let meta = self.runs.load_meta(run_id)?;
        let mut text = String::new();
        let mut n = 0;
        for id in &meta.dataset.item_ids {
            if let Some(a) = annotations.get(id) {
                text.push_str(&serde_json::to_string(a).expect("annotations serialize"));
                text.push('\n');
                n += 1;
            }
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, text)?;
        Ok(n)
    }

    /// Append annotations from a JSONL file. All item ids are checked first;
    /// nothing is written when any is unknown or not annotatable.
    pub fn import_annotations(&self, run_id: &str, path: &Path) -> Result<usize, ReviewError> {
        let journal = self.journal(run_id)?;
        let run = self.runs.load_run(run_id)?;
        let records = read_annotations(path)?;
        let unknown: Vec<String> = records
            .iter()
            .filter(|a| run.transcript(&a.item_id).is_none())
            .map(|a| a.item_id.clone())
            .collect();
        if !unknown.is_empty() {
            return Err(ReviewError::UnknownItem(unknown));
        }
        for a in &records {
            Self::check_annotatable(&run, &a.item_id)?;
        }
        let n = records.len();
        for mut a in records {
            a.run_id = run_id.to_string();
            journal.append(a)?;
        }
        Ok(n)
    }
}

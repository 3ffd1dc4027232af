//! Detection-only passes: ask the detector about every item and classify the
//! answer against the annotated subtype.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Session, TurnOutcome};
use crate::dataset::Dataset;
use crate::parser::{classify_match, DetectedBias, MatchClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub item_id: String,
    pub bias_subtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detected: Option<DetectedBias>,
    pub class: MatchClass,
    /// Gateway failure or missing bias mention; such items count as misses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Run the detection prompt over every item, `parallelism` at a time.
/// Outcomes follow dataset order.
pub fn detection_pass(session: &Session<'_>, ds: &Dataset, parallelism: usize) -> Vec<DetectionOutcome> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, DetectionOutcome)>> = Mutex::new(Vec::with_capacity(ds.items.len()));
    let workers = parallelism.clamp(1, ds.items.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = ds.items.get(idx) else { break };
                let mut outcome = DetectionOutcome {
                    item_id: item.id.clone(),
                    bias_subtype: item.bias_subtype.clone(),
                    detected: None,
                    class: MatchClass::Miss,
                    error: None,
                };
                match session.detect(item) {
                    Ok(turn) => match turn.outcome {
                        TurnOutcome::Bias { detected } => {
                            outcome.class = match session.taxonomy.lookup(&item.bias_subtype) {
                                Some(truth) => classify_match(&detected.label, truth, session.taxonomy),
                                None => MatchClass::Miss,
                            };
                            outcome.detected = Some(detected);
                        }
                        TurnOutcome::NoBias { reason } => outcome.error = Some(reason),
                        TurnOutcome::Choice { .. } => unreachable!("detection turns carry a bias outcome"),
                    },
                    Err(err) => outcome.error = Some(err.to_string()),
                }
                results.lock().expect("results lock").push((idx, outcome));
            });
        }
    });
    let mut out = results.into_inner().expect("results lock");
    out.sort_by_key(|(idx, _)| *idx);
    out.into_iter().map(|(_, o)| o).collect()
}

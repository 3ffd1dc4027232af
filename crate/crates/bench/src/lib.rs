//! Shared inputs for the benchmarks: the bundled demo items and recorded
//! replies.

use std::path::{Path, PathBuf};

use bru_core::dataset::{load_dataset, DatasetFormat};
use bru_core::scoring::{Verdict, VerdictKind};
use bru_core::Dataset;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn demo_items() -> Dataset {
    load_dataset(&fixtures().join("demo/items.jsonl"), DatasetFormat::Jsonl).expect("demo items load")
}

pub fn sample_dataset() -> Dataset {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/sample_bru.jsonl");
    load_dataset(&path, DatasetFormat::Jsonl).expect("sample dataset loads")
}

/// A recorded reply: (kind, item id, reply text).
pub struct Reply {
    pub kind: String,
    pub item: Option<String>,
    pub text: String,
}

pub fn replies() -> Vec<Reply> {
    std::fs::read_to_string(fixtures().join("replies/appendix.jsonl"))
        .expect("reply corpus")
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).expect("reply line is JSON");
            Reply {
                kind: v["kind"].as_str().unwrap_or_default().to_string(),
                item: v["item"].as_str().map(str::to_string),
                text: v["reply_text"].as_str().unwrap_or_default().to_string(),
            }
        })
        .collect()
}

/// Deterministic verdict list of length `n` cycling through every kind.
pub fn verdicts(n: usize) -> Vec<Verdict> {
    (0..n)
        .map(|i| Verdict {
            kind: VerdictKind::ALL[(i * 7 + i / 3) % 5],
            provisional: i % 2 == 0,
        })
        .collect()
}

//! Regenerate `fixtures/demo/cache.jsonl` from the recorded demo replies.
//!
//! Each reply is keyed by the request the engine would send for the demo run
//! config, so replaying that config needs no provider.
//!
//! ```text
//! cargo run -p bru-core --example seed_demo_cache
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use bru_core::dataset::{load_dataset, DatasetFormat};
use bru_core::engine::RunConfig;
use bru_core::gateway::{CacheEntry, Message, ModelReply, ReplySource};
use bru_core::prompt::{DecisionMode, InspectionScope};
use bru_core::BiasTaxonomy;
use chrono::{TimeZone, Utc};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = RunConfig::load(&root.join("demo/run.json"))?;
    let ds = load_dataset(&config.dataset, DatasetFormat::Jsonl)?;
    let taxonomy = BiasTaxonomy::builtin();
    let kit = config.kit()?;

    let replies: HashMap<String, String> = fs::read_to_string(root.join("replies/appendix.jsonl"))?
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).expect("fixture line is JSON");
            (v["id"].as_str().unwrap().to_string(), v["reply_text"].as_str().unwrap().to_string())
        })
        .collect();

    let recorded_at = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let mut lines = String::new();
    let mut push = |spec: &bru_core::engine::ModelSpec, prompt: String, reply_id: &str| {
        let reply = ModelReply {
            text: replies[reply_id].clone(),
            latency_ms: 0,
            usage: None,
            source: ReplySource::Live,
        };
        let mut entry = CacheEntry::new(spec.request(vec![Message::user(prompt)]), reply);
        entry.recorded_at = recorded_at;
        lines.push_str(&serde_json::to_string(&entry).unwrap());
        lines.push('\n');
    };

    let plan = [
        ("runner", "demo1", "Gambler's Fallacy"),
        ("tech-company", "demo2", "Representativeness Heuristic"),
    ];
    for (item_id, demo, detected) in plan {
        let item = ds.item(item_id).expect("demo item present");
        let first = kit.render_question(item, DecisionMode::Abstention, &InspectionScope::General)?;
        push(&config.model, first.text, &format!("{demo}-gbi"));
        push(config.detector(), kit.render_detection(item).text, &format!("{demo}-detect"));
        let target = taxonomy.get(detected).expect("taxonomy label").clone();
        let reask = kit.render_question(item, DecisionMode::Abstention, &InspectionScope::Specific(target))?;
        push(&config.model, reask.text, &format!("{demo}-sbi"));
    }
    let out = root.join("demo/cache.jsonl");
    fs::write(&out, lines)?;
    println!("wrote {}", out.display());
    Ok(())
}

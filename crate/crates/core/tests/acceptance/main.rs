//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod tables;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use bru_core::dataset::{load_dataset, DatasetFormat, OptionLabel};
use bru_core::engine::{replay_run, run_condition, ModelSpec, RunConfig, RunStore, Session};
use bru_core::gateway::{CachePolicy, Gateway, ModelRequest, Provider, ProviderError, ProviderReply, ReplayCache};
use bru_core::parser::{classify_match, extract_bias_label, extract_choice};
use bru_core::prompt::{normalize_whitespace, PromptKit, ABSTENTION_OPTION, FORCED_CHOICE};
use bru_core::scoring::{
    compute_metrics, detection_stats, tally, DetectionRow, Rate, Verdict, VerdictKind, VerdictTally,
};
use bru_core::{
    dataset::validate_dataset, BiasLabel, BiasTaxonomy, Condition, Dataset, DecisionMode, InspectionScope,
    MatchClass, McqItem, ParsedChoice, ScopeKind, ViolationRule,
};
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use serde_json::Value;
use tables::*;

const METRIC_TOL_PP: f64 = 0.15;
const IDENTITY_TOL_PP: f64 = 0.2;
const DETECTION_TOL_PP: f64 = 0.1;
const PROPERTY_CASES: u32 = 1000;

type Outcome = Result<(), String>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("fixture line is JSON"))
        .collect()
}

fn demo_items() -> Dataset {
    load_dataset(&fixtures().join("demo/items.jsonl"), DatasetFormat::Jsonl).expect("demo items load")
}

fn pct(rate: Rate) -> f64 {
    rate.percent()
}

fn collect(errors: Vec<String>) -> Outcome {
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("; "))
    }
}

/// Nearest-integer counts for five verdict percentages over `n` items. The
/// abstention count absorbs any rounding residue.
fn reconstruct(p: [f64; 5], n: u64) -> Result<VerdictTally, String> {
    let c = |x: f64| (x * n as f64 / 100.0).round() as u64;
    let decided = c(p[0]) + c(p[1]) + c(p[2]) + c(p[3]);
    let o = n.checked_sub(decided).ok_or_else(|| format!("counts exceed n={n}"))?;
    if o.abs_diff(c(p[4])) > 1 {
        return Err(format!("abstention residue {o} vs {} for n={n}", c(p[4])));
    }
    VerdictTally::from_counts(c(p[0]), c(p[1]), c(p[2]), c(p[3]), o).map_err(|e| e.to_string())
}

fn row_name(row: usize) -> &'static str {
    SUBTYPES.get(row).map(|s| s.0).unwrap_or("Total")
}

fn row_n(row: usize) -> u64 {
    SUBTYPES.get(row).map(|s| s.1).unwrap_or_else(|| SUBTYPES.iter().map(|s| s.1).sum())
}

fn metric_oracle() -> Outcome {
    let started = Instant::now();
    let mut errors = Vec::new();
    let mut cells = 0;
    for m in 0..3 {
        for s in 0..3 {
            for row in 0..9 {
                let at = format!("{} {} {}", MODELS[m], SCOPES[s], row_name(row));
                let tally = match reconstruct(VERDICT_PCT[m][s][row], row_n(row)) {
                    Ok(t) => t,
                    Err(e) => {
                        errors.push(format!("{at}: {e}"));
                        continue;
                    }
                };
                let metrics = compute_metrics(&tally).map_err(|e| e.to_string())?;
                let mut expected = vec![ABSTENTION_AE[m][s][row]];
                if row == 8 {
                    expected.push(Some(HEADLINE_ABSTENTION[m][s]));
                }
                for exp in expected {
                    cells += 1;
                    match (exp, metrics.a, metrics.e_reported) {
                        (None, None, _) => {}
                        (None, Some(a), _) => errors.push(format!("{at}: expected N/A, got A={:.2}", pct(a))),
                        (Some(_), None, _) | (Some(_), _, None) => errors.push(format!("{at}: expected values, got N/A")),
                        (Some((ea, ee)), Some(a), Some(e)) => {
                            if (pct(a) - ea).abs() > METRIC_TOL_PP {
                                errors.push(format!("{at}: A {:.2} vs {ea}", pct(a)));
                            }
                            if (pct(e) - ee).abs() > METRIC_TOL_PP {
                                errors.push(format!("{at}: E {:.2} vs {ee}", pct(e)));
                            }
                        }
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    if elapsed.as_secs_f64() >= 1.0 {
        errors.push(format!("runtime {elapsed:?} exceeds 1 s"));
    }
    if cells != 3 * 3 * 10 {
        errors.push(format!("checked {cells} cells"));
    }
    collect(errors)
}

fn identity_check() -> Outcome {
    let mut errors = Vec::new();
    for m in 0..3 {
        for s in 0..3 {
            let at = format!("{} {}", MODELS[m], SCOPES[s]);
            let (a, e) = ABSTENTION_AE[m][s][8].expect("total rows are defined");
            let d = 100.0 - VERDICT_PCT[m][s][8][4];
            let sum = a + e / (d / 100.0);
            if (sum - 100.0).abs() > IDENTITY_TOL_PP {
                errors.push(format!("{at}: published A + E/D = {sum:.3}"));
            }
            let tally = reconstruct(VERDICT_PCT[m][s][8], row_n(8))?;
            let metrics = compute_metrics(&tally).map_err(|e| e.to_string())?;
            let (Some(ca), Some(ce)) = (metrics.a, metrics.e_reported) else {
                errors.push(format!("{at}: undefined metrics"));
                continue;
            };
            if ca.0 + ce.0 / metrics.d.0 != Rate::one().0 {
                errors.push(format!("{at}: computed A + E/D is not exactly 1"));
            }
        }
    }
    for m in 0..3 {
        for s in 0..3 {
            for row in 0..9 {
                let at = format!("{} {} {} non-abstention", MODELS[m], SCOPES[s], row_name(row));
                let (a, e) = (NON_ABSTENTION_A[m][s][row], NON_ABSTENTION_E[m][s][row]);
                // One-decimal values: compare in integer tenths.
                if (a * 10.0).round() as i64 + (e * 10.0).round() as i64 != 1000 {
                    errors.push(format!("{at}: published A + E = {}", a + e));
                }
                let n = row_n(row);
                let tt = (a * n as f64 / 100.0).round() as u64;
                let tally = VerdictTally::from_counts(tt, 0, 0, n - tt, 0).map_err(|e| e.to_string())?;
                let metrics = compute_metrics(&tally).map_err(|e| e.to_string())?;
                match (metrics.a, metrics.e_defined) {
                    (Some(ca), Some(ce)) if ca.0 + ce.0 == Rate::one().0 && metrics.d == Rate::one() => {
                        if (pct(ca) - a).abs() > METRIC_TOL_PP {
                            errors.push(format!("{at}: reconstructed A {:.2} vs {a}", pct(ca)));
                        }
                    }
                    _ => errors.push(format!("{at}: computed A + E_defined is not exactly 1")),
                }
            }
        }
    }
    collect(errors)
}

fn detection_oracle() -> Outcome {
    let taxonomy = BiasTaxonomy::builtin();
    let unrelated = BiasLabel::foreign("Confirmation Bias");
    let mut pairs: Vec<(String, MatchClass)> = Vec::new();
    for (name, n, direct, indirect) in DETECTION_COUNTS {
        let truth = taxonomy.get(name).ok_or_else(|| format!("{name} missing from taxonomy"))?;
        let broader = taxonomy.broader_of(truth);
        for i in 0..n {
            let detected = if i < direct {
                truth
            } else if i < direct + indirect {
                broader.ok_or_else(|| format!("{name} has no broader concept"))?
            } else {
                &unrelated
            };
            pairs.push((name.to_string(), classify_match(detected, truth, &taxonomy)));
        }
    }
    let stats = detection_stats(pairs.iter().map(|(s, m)| (s.as_str(), *m)));
    let mut errors = Vec::new();
    let check_row = |label: &str, row: Option<&DetectionRow>, exp: (f64, f64, f64), errors: &mut Vec<String>| {
        let Some(row) = row else {
            errors.push(format!("{label}: missing row"));
            return;
        };
        let got = [row.direct_rate(), row.indirect_rate(), row.overall_rate()];
        for (g, (e, what)) in got.iter().zip([(exp.0, "direct"), (exp.1, "indirect"), (exp.2, "overall")]) {
            match g {
                Some(r) if (pct(*r) - e).abs() <= DETECTION_TOL_PP => {}
                Some(r) => errors.push(format!("{label} {what}: {:.2} vs {e}", pct(*r))),
                None => errors.push(format!("{label} {what}: undefined")),
            }
        }
    };
    for (name, d, i, o) in DETECTION_RATES {
        let row = if name == "Total" { Some(&stats.total) } else { stats.per_subtype.get(name) };
        check_row(name, row, (d, i, o), &mut errors);
    }
    collect(errors)
}

fn demo_config() -> RunConfig {
    RunConfig::load(&fixtures().join("demo/run.json")).expect("demo config loads")
}

fn check_demo_transcript(
    run: &bru_core::RunRecord,
    item_id: &str,
    detected: &str,
    class: MatchClass,
    answer: char,
    taxonomy: &BiasTaxonomy,
    ds: &Dataset,
) -> Vec<String> {
    let mut errors = Vec::new();
    let Some(t) = run.transcript(item_id) else {
        return vec![format!("{item_id}: no transcript")];
    };
    if let Some(f) = &t.failure {
        return vec![format!("{item_id}: failed {}: {}", f.kind, f.message)];
    }
    if t.turns.len() != 3 {
        errors.push(format!("{item_id}: {} turns", t.turns.len()));
    }
    if t.loop_count() != 1 {
        errors.push(format!("{item_id}: loop_count {}", t.loop_count()));
    }
    let first = t.turns.first().and_then(|turn| turn.choice());
    if first != Some(&ParsedChoice::Abstain) {
        errors.push(format!("{item_id}: first answer {first:?}"));
    }
    match t.detected_bias() {
        Some(d) if d.label.canonical_name == detected => {
            let truth = taxonomy.lookup(&ds.item(item_id).expect("demo item").bias_subtype).expect("subtype");
            let got = classify_match(&d.label, truth, taxonomy);
            if got != class {
                errors.push(format!("{item_id}: match {got:?}, expected {class:?}"));
            }
        }
        other => errors.push(format!("{item_id}: detected {other:?}")),
    }
    if t.final_choice != ParsedChoice::Decisive(OptionLabel(answer)) {
        errors.push(format!("{item_id}: final {:?}", t.final_choice));
    }
    errors
}

fn fixture_replay() -> Outcome {
    let taxonomy = BiasTaxonomy::builtin();
    let config = demo_config();
    let ds = load_dataset(&config.dataset, DatasetFormat::Jsonl).map_err(|e| e.to_string())?;
    let mut errors = Vec::new();

    // The loop itself, straight off the bundled cache.
    let cache = ReplayCache::open(&tempcopy(config.seed_cache.as_ref().expect("demo seed cache"))?)
        .map_err(|e| e.to_string())?;
    let gateway = Gateway::new(Arc::new(cache));
    let kit = config.kit().map_err(|e| e.to_string())?;
    let session = Session {
        gateway: &gateway,
        taxonomy: &taxonomy,
        kit: &kit,
        model: &config.model,
        detector: config.detector(),
        policy: CachePolicy::ReplayOnly,
        max_loops: config.max_loops,
    };
    let direct = bru_core::RunRecord {
        meta: replay_meta(&config, &ds),
        transcripts: ds.items.iter().map(|i| session.feedback_loop(i, &config.condition)).collect(),
    };
    let expectations = [
        ("runner", "Gambler's Fallacy", MatchClass::Direct, 'C'),
        ("tech-company", "Representativeness Heuristic", MatchClass::Indirect, 'B'),
    ];
    for (item, detected, class, answer) in expectations {
        errors.extend(check_demo_transcript(&direct, item, detected, class, answer, &taxonomy, &ds));
    }

    // Through a run store, as `bru run` and `bru replay` drive it.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = RunStore::new(dir.path());
    let gateway = store.gateway_for(&config, &ds).map_err(|e| e.to_string())?;
    let run = run_condition(&ds, &config, &gateway, &taxonomy, Some(&store)).map_err(|e| e.to_string())?;
    for (item, detected, class, answer) in expectations {
        errors.extend(check_demo_transcript(&run, item, detected, class, answer, &taxonomy, &ds));
    }
    let first = replay_run(&store, run.run_id(), &taxonomy).map_err(|e| e.to_string())?;
    let second = replay_run(&store, run.run_id(), &taxonomy).map_err(|e| e.to_string())?;
    let a = serde_json::to_vec(&first).map_err(|e| e.to_string())?;
    let b = serde_json::to_vec(&second).map_err(|e| e.to_string())?;
    if a != b {
        errors.push("two replays serialize differently".into());
    }
    if first.transcripts != run.transcripts {
        errors.push("replay transcripts differ from the stored run".into());
    }
    collect(errors)
}

fn tempcopy(path: &Path) -> Result<PathBuf, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?.keep();
    let target = dir.join("cache.jsonl");
    fs::copy(path, &target).map_err(|e| e.to_string())?;
    Ok(target)
}

fn replay_meta(config: &RunConfig, ds: &Dataset) -> bru_core::engine::RunMeta {
    bru_core::engine::RunMeta {
        run_id: config.run_id_for(ds),
        dataset: bru_core::engine::DatasetRef {
            name: ds.name.clone(),
            digest: ds.digest(),
            item_ids: ds.items.iter().map(|i| i.id.clone()).collect(),
        },
        condition: config.condition,
        model: config.model.clone(),
        detector: config.detector().clone(),
        config: config.clone(),
        status: bru_core::RunStatus::Complete,
    }
}

fn parse_expected_choice(s: &str) -> ParsedChoice {
    match OptionLabel::parse(s) {
        Some(l) if l.is_abstention() => ParsedChoice::Abstain,
        Some(l) => ParsedChoice::Decisive(l),
        None => panic!("bad expected choice {s:?}"),
    }
}

fn parser_corpus() -> Outcome {
    let taxonomy = BiasTaxonomy::builtin();
    let items = demo_items();
    let records = read_jsonl(&fixtures().join("replies/appendix.jsonl"));
    let mut errors = Vec::new();
    for r in &records {
        let id = r["id"].as_str().unwrap_or("?");
        let reply = r["reply_text"].as_str().unwrap_or_default();
        let expected = r["expected"].as_str().unwrap_or_default();
        let answer = r["model_answer"].as_str().unwrap_or_default();
        match r["kind"].as_str() {
            Some("choice") => {
                let Some(item) = r["item"].as_str().and_then(|i| items.item(i)) else {
                    errors.push(format!("{id}: unknown item"));
                    continue;
                };
                let want = parse_expected_choice(expected);
                if !answer.starts_with(expected) {
                    errors.push(format!("{id}: expected {expected:?} disagrees with model answer {answer:?}"));
                }
                for (what, text) in [("reply", reply), ("model answer", answer)] {
                    let got = extract_choice(text, item, DecisionMode::Abstention);
                    if got != want {
                        errors.push(format!("{id} {what}: {got}"));
                    }
                }
            }
            Some("bias") => {
                if !answer.starts_with(expected) {
                    errors.push(format!("{id}: expected {expected:?} disagrees with model answer {answer:?}"));
                }
                for (what, text) in [("reply", reply), ("model answer", answer)] {
                    match extract_bias_label(text, &taxonomy) {
                        Ok(d) if d.label.canonical_name == expected && !d.label.is_foreign() => {}
                        Ok(d) => errors.push(format!("{id} {what}: {}", d.label.canonical_name)),
                        Err(e) => errors.push(format!("{id} {what}: {e}")),
                    }
                }
            }
            other => errors.push(format!("{id}: unknown kind {other:?}")),
        }
    }
    if records.is_empty() {
        errors.push("empty corpus".into());
    }
    collect(errors)
}

fn prompt_snapshots() -> Outcome {
    let taxonomy = BiasTaxonomy::builtin();
    let items = demo_items();
    let kit = PromptKit::default();
    let mut errors = Vec::new();
    for r in read_jsonl(&fixtures().join("prompts/snapshots.jsonl")) {
        let id = r["id"].as_str().unwrap_or("?").to_string();
        let Some(item) = r["item"].as_str().and_then(|i| items.item(i)) else {
            errors.push(format!("{id}: unknown item"));
            continue;
        };
        let rendered = if r["kind"].as_str() == Some("detection") {
            kit.render_detection(item)
        } else {
            let scope = match r["scope"].as_str() {
                Some("standard") => InspectionScope::Standard,
                Some("general") => InspectionScope::General,
                Some("specific") => {
                    let target = r["target"].as_str().and_then(|t| taxonomy.get(t)).expect("snapshot target");
                    InspectionScope::Specific(target.clone())
                }
                other => panic!("{id}: scope {other:?}"),
            };
            let mode = match r["mode"].as_str() {
                Some("non_abstention") => DecisionMode::NonAbstention,
                _ => DecisionMode::Abstention,
            };
            match kit.render_question(item, mode, &scope) {
                Ok(p) => p,
                Err(e) => {
                    errors.push(format!("{id}: {e}"));
                    continue;
                }
            }
        };
        let got = normalize_whitespace(&rendered.text);
        let want = normalize_whitespace(r["expected"].as_str().unwrap_or_default());
        if got != want {
            errors.push(format!("{id}: rendered {got:?}"));
        }
    }
    let item = items.item("tech-company").expect("base-rate item");
    for scope in [InspectionScope::Standard, InspectionScope::General] {
        let text = kit.render_question(item, DecisionMode::NonAbstention, &scope).map_err(|e| e.to_string())?.text;
        if !text.contains(FORCED_CHOICE) {
            errors.push(format!("non-abstention {scope:?}: missing forced-choice sentence"));
        }
        if text.contains(ABSTENTION_OPTION) || text.contains("option E") || text.lines().any(|l| l.starts_with("E")) {
            errors.push(format!("non-abstention {scope:?}: contains an E option"));
        }
    }
    collect(errors)
}

/// Provider that answers every request with the text currently in `reply`.
struct Echo {
    reply: Mutex<String>,
}

impl Provider for Echo {
    fn send(&self, _req: &ModelRequest) -> Result<ProviderReply, ProviderError> {
        Ok(ProviderReply {
            text: self.reply.lock().expect("echo lock").clone(),
            usage: None,
        })
    }
}

fn verdict_strategy() -> impl Strategy<Value = Verdict> {
    (prop::sample::select(VerdictKind::ALL.to_vec()), any::<bool>())
        .prop_map(|(kind, provisional)| Verdict { kind, provisional })
}

fn tally_strategy() -> impl Strategy<Value = VerdictTally> {
    (0u64..300, 0u64..300, 0u64..300, 0u64..300, 0u64..300)
        .prop_filter("non-empty", |c| c.0 + c.1 + c.2 + c.3 + c.4 > 0)
        .prop_map(|(a, b, c, d, e)| VerdictTally::from_counts(a, b, c, d, e).expect("non-empty"))
}

fn reply_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        "[A-Ea-e .:()\n*\"]{0,40}",
        ("[A-E]", "[a-z ]{0,20}").prop_map(|(l, t)| format!("{l}. {t}")),
        ("[A-E]", "[a-z ,]{0,30}").prop_map(|(l, t)| format!("{t}\nOption {l}")),
        Just("E. I am not sure which choice is the best to select.".to_string()),
        Just("E: I am not sure which option is the best to select.".to_string()),
        "\\PC{0,60}",
    ]
}

fn property(name: &str, errors: &mut Vec<String>, f: impl FnOnce(&mut TestRunner) -> Result<(), String>) {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    if let Err(e) = f(&mut runner) {
        errors.push(format!("{name}: {e}"));
    }
}

fn property_suite() -> Outcome {
    let mut errors = Vec::new();
    let taxonomy = BiasTaxonomy::builtin();
    let items = demo_items();

    property("tally conservation", &mut errors, |runner| {
        runner
            .run(&prop::collection::vec(verdict_strategy(), 1..200), |vs| {
                let t = tally(&vs).expect("non-empty");
                prop_assert_eq!(t.n_tt + t.n_tf + t.n_ft + t.n_ff + t.n_o, t.n_total);
                prop_assert_eq!(t.n_total, vs.len() as u64);
                for kind in VerdictKind::ALL {
                    prop_assert_eq!(t.count(kind), vs.iter().filter(|v| v.kind == kind).count() as u64);
                }
                Ok(())
            })
            .map_err(|e| e.to_string())
    });

    property("A + E_defined = 1", &mut errors, |runner| {
        runner
            .run(&tally_strategy(), |t| {
                let m = compute_metrics(&t).expect("non-empty");
                match (m.a, m.e_defined) {
                    (Some(a), Some(e)) => {
                        prop_assert!(t.decided() > 0);
                        prop_assert_eq!(a.0 + e.0, Rate::one().0);
                    }
                    (None, None) => prop_assert_eq!(t.decided(), 0),
                    _ => prop_assert!(false, "A and E_defined disagree on definedness"),
                }
                Ok(())
            })
            .map_err(|e| e.to_string())
    });

    property("D = 1 under non-abstention", &mut errors, |runner| {
        let item = items.item("runner").expect("runner item").clone();
        runner
            .run(&prop::collection::vec(reply_strategy(), 1..30), |replies| {
                let verdicts: Vec<Verdict> = replies
                    .iter()
                    .filter_map(|text| {
                        let choice = extract_choice(text, &item, DecisionMode::NonAbstention);
                        bru_core::scoring::classify_choice(&choice, &item, None).ok()
                    })
                    .collect();
                if let Ok(t) = tally(&verdicts) {
                    let m = compute_metrics(&t).expect("non-empty");
                    prop_assert_eq!(t.n_o, 0);
                    prop_assert_eq!(m.d, Rate::one());
                    prop_assert_eq!(m.e_defined, m.e_reported);
                }
                Ok(())
            })
            .map_err(|e| e.to_string())
    });

    property("scale invariance", &mut errors, |runner| {
        runner
            .run(&(tally_strategy(), 1u64..50), |(t, k)| {
                prop_assert_eq!(compute_metrics(&t).expect("non-empty"), compute_metrics(&t.scaled(k)).expect("non-empty"));
                Ok(())
            })
            .map_err(|e| e.to_string())
    });

    property("classify_match(x, x) = Direct", &mut errors, |runner| {
        let labels: Vec<BiasLabel> = taxonomy.labels().to_vec();
        runner
            .run(&(prop::sample::select(labels), "[A-Za-z' ]{1,24}"), |(label, raw)| {
                prop_assert_eq!(classify_match(&label, &label, &taxonomy), MatchClass::Direct);
                let foreign = BiasLabel::foreign(&raw);
                prop_assert_eq!(classify_match(&foreign, &foreign, &taxonomy), MatchClass::Direct);
                Ok(())
            })
            .map_err(|e| e.to_string())
    });

    property("non-abstention transcripts never abstain", &mut errors, |runner| {
        let echo = Arc::new(Echo { reply: Mutex::new(String::new()) });
        let mut gateway = Gateway::new(Arc::new(ReplayCache::in_memory()));
        gateway.register("echo", echo.clone(), 1);
        let model = ModelSpec::new("echo", "echo-model");
        let kit = PromptKit::default();
        let session = Session {
            gateway: &gateway,
            taxonomy: &taxonomy,
            kit: &kit,
            model: &model,
            detector: &model,
            policy: CachePolicy::LiveOnly,
            max_loops: 1,
        };
        let scopes = [ScopeKind::Standard, ScopeKind::General, ScopeKind::Specific];
        let item_ids: Vec<String> = items.items.iter().map(|i| i.id.clone()).collect();
        runner
            .run(
                &(reply_strategy(), prop::sample::select(scopes.to_vec()), prop::sample::select(item_ids)),
                |(text, scope, item_id)| {
                    *echo.reply.lock().expect("echo lock") = text;
                    let item: &McqItem = items.item(&item_id).expect("item");
                    let t = session.feedback_loop(item, &Condition::new(DecisionMode::NonAbstention, scope));
                    prop_assert!(t.failure.is_none(), "failure {:?}", t.failure);
                    prop_assert!(!t.final_choice.is_abstain());
                    for turn in &t.turns {
                        prop_assert!(!turn.choice().is_some_and(ParsedChoice::is_abstain));
                    }
                    Ok(())
                },
            )
            .map_err(|e| e.to_string())
    });

    collect(errors)
}

fn dataset_gate() -> Outcome {
    let taxonomy = BiasTaxonomy::builtin();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample_bru.jsonl");
    let ds = load_dataset(&path, DatasetFormat::Jsonl).map_err(|e| e.to_string())?;
    let report = validate_dataset(&ds, &taxonomy);
    if !report.is_valid() {
        return Err(format!("sample dataset invalid: {:?}", report.violations));
    }
    let mut mutated = ds.clone();
    mutated.items[0].ground_truth = OptionLabel('E');
    let report = validate_dataset(&mutated, &taxonomy);
    if report.violations.len() != 1 || report.count(ViolationRule::GroundTruthIsAbstention) != 1 {
        return Err(format!("mutated dataset: {:?}", report.violations));
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("metric oracle reproduces published accuracy and error rates", metric_oracle),
        ("metric identities hold for abstention and non-abstention groups", identity_check),
        ("detection stats reproduce published match rates", detection_oracle),
        ("demo fixtures replay end-to-end and deterministically", fixture_replay),
        ("parser reproduces every recorded model answer", parser_corpus),
        ("prompt renders match recorded queries", prompt_snapshots),
        ("property suite", property_suite),
        ("dataset gate", dataset_gate),
    ];
    let mut failed = 0;
    for (idx, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let ms = started.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS [{}] {name} ({ms} ms)", idx + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL [{}] {name} ({ms} ms): {reason}", idx + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

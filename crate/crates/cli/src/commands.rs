use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bru_core::dataset::{load_dataset, validate_dataset, DatasetFormat, Manifest};
use bru_core::engine::{detection_pass, replay_run, run_condition, RunConfig, RunStore, Session};
use bru_core::gateway::{CachePolicy, Gateway, ProviderConfig};
use bru_core::report::{emit_plot_series, render_summary_table, Format, ReportSpec};
use bru_core::review::{read_annotations, ReviewService};
use bru_core::scoring::{detection_stats, score_run, DetectionStats, MetricsSummary};
use bru_core::{BiasTaxonomy, Dataset, RunStatus, ValidationReport};
use serde_json::json;
use tracing::{info, warn};

use crate::args::*;
use crate::error::CliError;
use crate::server::{router, AppState};

pub const SCORES_FILE: &str = "scores.json";
pub const DETECTIONS_FILE: &str = "detections.json";

pub struct Context {
    pub store: RunStore,
    pub taxonomy: BiasTaxonomy,
}

impl Context {
    pub fn new(cli: &Cli) -> Result<Self, CliError> {
        let taxonomy = match &cli.taxonomy {
            Some(path) => BiasTaxonomy::load(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            None => BiasTaxonomy::builtin(),
        };
        Ok(Context {
            store: RunStore::new(&cli.run_dir),
            taxonomy,
        })
    }

    fn service(&self) -> ReviewService {
        ReviewService::new(self.store.clone())
    }
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let format = DatasetFormat::from_path(path)
        .ok_or_else(|| CliError::Config(format!("{}: unknown dataset format (use .jsonl or .csv)", path.display())))?;
    load_dataset(path, format).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let config = RunConfig::load(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

fn print_violations(report: &ValidationReport) {
    for v in &report.violations {
        match &v.item_id {
            Some(id) => eprintln!("{id}: {:?}: {}", v.rule, v.detail),
            None => eprintln!("{:?}: {}", v.rule, v.detail),
        }
    }
}

fn check_dataset(ds: &Dataset, taxonomy: &BiasTaxonomy) -> Result<(), CliError> {
    let report = validate_dataset(ds, taxonomy);
    if report.is_valid() {
        return Ok(());
    }
    print_violations(&report);
    Err(CliError::Violation(format!("dataset {} has {} violation(s)", ds.name, report.violations.len())))
}

fn register_providers(gateway: &mut Gateway, config: &RunConfig) -> Result<(), CliError> {
    if let Some(path) = &config.providers {
        let providers = ProviderConfig::load(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        providers.register_all(gateway);
    } else if config.policy != CachePolicy::ReplayOnly {
        warn!("no provider registry configured; only cached replies are available");
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn validate(ctx: &Context, args: &ValidateArgs) -> Result<(), CliError> {
    let mut ds = read_dataset(&args.dataset)?;
    if args.full {
        ds = ds.with_manifest(Manifest::bru_full());
    } else if let Some(path) = &args.manifest {
        let counts: BTreeMap<String, usize> = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        ds = ds.with_manifest(Manifest(counts));
    }
    let report = validate_dataset(&ds, &ctx.taxonomy);
    match args.format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        OutputFormat::Text if report.is_valid() => println!("{}: {} items, valid", ds.name, ds.items.len()),
        OutputFormat::Text => print_violations(&report),
    }
    if report.is_valid() {
        Ok(())
    } else {
        Err(CliError::Violation(format!("{} violation(s)", report.violations.len())))
    }
}

pub fn run(ctx: &Context, args: &RunArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    if let Some(id) = &args.run_id {
        config.run_id = Some(id.clone());
    }
    let ds = read_dataset(&config.dataset)?;
    check_dataset(&ds, &ctx.taxonomy)?;
    let mut gateway = ctx.store.gateway_for(&config, &ds)?;
    register_providers(&mut gateway, &config)?;
    let record = run_condition(&ds, &config, &gateway, &ctx.taxonomy, Some(&ctx.store))?;
    let failed = record.failed_count();
    println!(
        "{}: {} items, {} failed, {}",
        record.run_id(),
        record.transcripts.len(),
        failed,
        match record.meta.status {
            RunStatus::Complete => "complete",
            RunStatus::InProgress => "in progress",
        }
    );
    if failed > 0 {
        warn!(failed, "some items failed; rerun the same command to retry them");
    }
    Ok(())
}

/// Score a run from its journal, with `extra` annotations applied on top.
fn score(ctx: &Context, run_id: &str, extra: Option<&Path>) -> Result<bru_core::scoring::RunScores, CliError> {
    let service = ctx.service();
    let mut annotations = service.annotations(run_id)?;
    let run = ctx.store.load_run(run_id)?;
    let ds = ctx.store.load_dataset(run_id)?;
    if let Some(path) = extra {
        let records = read_annotations(path)?;
        let unknown: Vec<String> = records
            .iter()
            .filter(|a| run.transcript(&a.item_id).is_none())
            .map(|a| a.item_id.clone())
            .collect();
        if !unknown.is_empty() {
            return Err(CliError::Violation(format!("unknown item id(s) in annotations: {}", unknown.join(", "))));
        }
        for a in records {
            annotations.insert(a.item_id.clone(), a);
        }
    }
    Ok(score_run(&run, &ds, &annotations)?)
}

pub fn score_cmd(ctx: &Context, args: &ScoreArgs) -> Result<(), CliError> {
    let scores = score(ctx, &args.run_id, args.annotations.as_deref())?;
    let out = args.out.clone().unwrap_or_else(|| ctx.store.run_dir(&args.run_id).join(SCORES_FILE));
    write_json(&out, &scores)?;
    info!(path = %out.display(), "scores written");
    print!("{}", render_summary_table(&[scores.summary], &ReportSpec::new(Format::Markdown).per_subtype())?);
    Ok(())
}

fn summaries(ctx: &Context, run_ids: &[String]) -> Result<Vec<MetricsSummary>, CliError> {
    run_ids.iter().map(|id| Ok(score(ctx, id, None)?.summary)).collect()
}

pub fn report(ctx: &Context, args: &ReportArgs) -> Result<(), CliError> {
    let mut spec = ReportSpec::new(args.format);
    if args.per_subtype {
        spec = spec.per_subtype();
    }
    if !args.conventions.is_empty() {
        spec.conventions = args.conventions.iter().map(|&c| c.into()).collect();
    }
    print!("{}", render_summary_table(&summaries(ctx, &args.run_ids)?, &spec)?);
    Ok(())
}

pub fn plot(ctx: &Context, args: &PlotArgs) -> Result<(), CliError> {
    let series = emit_plot_series(&summaries(ctx, &args.run_ids)?, args.kind)?;
    println!("{}", serde_json::to_string_pretty(&series)?);
    Ok(())
}

fn detection_table(stats: &DetectionStats) -> String {
    let pct = |r: Option<bru_core::scoring::Rate>| r.map_or_else(|| "N/A".into(), bru_core::report::percent_1dp);
    let mut out = String::from("| Subtype | N | Direct | Indirect | Overall |\n|---|---|---|---|---|\n");
    let rows = stats.per_subtype.iter().map(|(k, v)| (k.as_str(), v)).chain([("Total", &stats.total)]);
    for (name, row) in rows {
        out.push_str(&format!(
            "| {name} | {} | {} | {} | {} |\n",
            row.n,
            pct(row.direct_rate()),
            pct(row.indirect_rate()),
            pct(row.overall_rate())
        ));
    }
    out
}

pub fn detect(ctx: &Context, args: &DetectArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    let ds = read_dataset(&args.dataset)?;
    check_dataset(&ds, &ctx.taxonomy)?;
    config.run_id = Some(format!("{}-detect", config.run_id_for(&ds)));
    let mut gateway = ctx.store.gateway_for(&config, &ds)?;
    register_providers(&mut gateway, &config)?;
    let kit = config.kit()?;
    let session = Session {
        gateway: &gateway,
        taxonomy: &ctx.taxonomy,
        kit: &kit,
        model: &config.model,
        detector: config.detector(),
        policy: config.policy,
        max_loops: config.max_loops,
    };
    let outcomes = detection_pass(&session, &ds, config.parallelism);
    let stats = detection_stats(outcomes.iter().map(|o| (o.bias_subtype.as_str(), o.class)));
    let doc = json!({ "outcomes": outcomes, "stats": stats });
    let dir = ctx.store.run_dir(config.run_id.as_deref().expect("set above"));
    write_json(&dir.join(DETECTIONS_FILE), &doc)?;
    match args.format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&doc)?),
        OutputFormat::Text => print!("{}", detection_table(&stats)),
    }
    Ok(())
}

pub fn replay(ctx: &Context, args: &ReplayArgs) -> Result<(), CliError> {
    let record = replay_run(&ctx.store, &args.run_id, &ctx.taxonomy)?;
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    match &args.out {
        Some(path) => fs::write(path, &text)?,
        None => print!("{text}"),
    }
    let stored = ctx.store.load_run(&args.run_id)?;
    if stored.transcripts != record.transcripts {
        return Err(CliError::Violation(format!("replay of {} differs from the stored transcripts", args.run_id)));
    }
    Ok(())
}

pub fn review(ctx: &Context, command: &ReviewCommand) -> Result<(), CliError> {
    match command {
        ReviewCommand::Serve(args) => serve(ctx, args),
        ReviewCommand::Export { run_id, path } => {
            let n = ctx.service().export_annotations(run_id, path)?;
            println!("exported {n} annotation(s) to {}", path.display());
            Ok(())
        }
        ReviewCommand::Import { run_id, path } => {
            let n = ctx.service().import_annotations(run_id, path)?;
            println!("imported {n} annotation(s) into {run_id}");
            Ok(())
        }
    }
}

fn serve(ctx: &Context, args: &ServeArgs) -> Result<(), CliError> {
    if !ctx.store.exists(&args.run_id) {
        return Err(CliError::Config(format!("run {:?} not found in {}", args.run_id, ctx.store.root().display())));
    }
    let ui_dir: Option<PathBuf> = match &args.ui_dir {
        Some(dir) if dir.join("index.html").is_file() => Some(dir.clone()),
        Some(dir) => return Err(CliError::Config(format!("{}: no index.html", dir.display()))),
        None => None,
    };
    let state = AppState {
        service: Arc::new(ctx.service()),
        run_id: args.run_id.clone(),
    };
    let app = router(state, ui_dir);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.bind, args.port)).await?;
        println!("review API for {} on http://{}", args.run_id, listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}

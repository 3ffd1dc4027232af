use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use super::{validate_condition, EngineError, ItemTranscript, ModelSpec, Session};
use crate::dataset::{parse_jsonl, Dataset, McqItem};
use crate::gateway::{CachePolicy, Gateway, ReplayCache};
use crate::prompt::{Condition, PromptKit};
use crate::taxonomy::BiasTaxonomy;

pub const RUN_FILE: &str = "run.json";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const CACHE_FILE: &str = "cache.jsonl";
pub const ITEMS_FILE: &str = "items.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";

fn default_max_loops() -> u32 {
    1
}

fn default_parallelism() -> usize {
    1
}

fn default_policy() -> CachePolicy {
    CachePolicy::LiveRecord
}

/// Run configuration file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub dataset: PathBuf,
    pub model: ModelSpec,
    /// Detection model; the answer model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<ModelSpec>,
    pub condition: Condition,
    #[serde(default = "default_max_loops")]
    pub max_loops: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_policy")]
    pub policy: CachePolicy,
    /// Provider registry file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub providers: Option<PathBuf>,
    /// Cache file whose entries are imported into the run cache before starting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_cache: Option<PathBuf>,
    /// Template fragment overrides.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub templates: BTreeMap<String, String>,
}

impl RunConfig {
    /// Load a config; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = fs::read_to_string(path)?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| EngineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.dataset);
        if let Some(p) = cfg.providers.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.seed_cache.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn detector(&self) -> &ModelSpec {
        self.detector.as_ref().unwrap_or(&self.model)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        validate_condition(&self.condition, self.max_loops)?;
        if self.parallelism == 0 {
            return Err(EngineError::Config("parallelism must be at least 1".into()));
        }
        for spec in [&self.model, self.detector()] {
            if spec.provider_id.is_empty() || spec.model_name.is_empty() {
                return Err(EngineError::Config("model provider_id and model_name must be set".into()));
            }
        }
        Ok(())
    }

    pub fn kit(&self) -> Result<PromptKit, EngineError> {
        Ok(PromptKit::with_overrides(&self.templates)?)
    }

    pub fn run_id_for(&self, dataset: &Dataset) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| default_run_id(&dataset.name, &self.condition, &self.model.model_name))
    }
}

/// `{dataset}-{condition}-{model}` with path-hostile characters replaced.
pub fn default_run_id(dataset: &str, condition: &Condition, model: &str) -> String {
    let raw = format!("{dataset}-{}-{model}", condition.slug());
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    InProgress,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub name: String,
    pub digest: String,
    pub item_ids: Vec<String>,
}

/// Run metadata as stored in `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub dataset: DatasetRef,
    pub condition: Condition,
    pub model: ModelSpec,
    pub detector: ModelSpec,
    pub config: RunConfig,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(flatten)]
    pub meta: RunMeta,
    pub transcripts: Vec<ItemTranscript>,
}

impl RunRecord {
    pub fn run_id(&self) -> &str {
        &self.meta.run_id
    }

    pub fn transcript(&self, item_id: &str) -> Option<&ItemTranscript> {
        self.transcripts.iter().find(|t| t.item_id == item_id)
    }

    pub fn failed_count(&self) -> usize {
        self.transcripts.iter().filter(|t| t.is_failed()).count()
    }
}

/// Directory of runs, one sub-directory per run id.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
    writers: Arc<Mutex<HashMap<String, Arc<Mutex<File>>>>>,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunStore {
            root: root.into(),
            writers: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join(run_id)
    }

    pub fn cache_path(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join(CACHE_FILE)
    }

    pub fn annotations_path(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join(ANNOTATIONS_FILE)
    }

    pub fn exists(&self, run_id: &str) -> bool {
        self.run_dir(run_id).join(RUN_FILE).is_file()
    }

    /// Run ids with a `run.json`, sorted.
    pub fn list(&self) -> Result<Vec<String>, EngineError> {
        let mut out = Vec::new();
        if !self.root.is_dir() {
            return Ok(out);
        }
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join(RUN_FILE).is_file() {
                out.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn write_meta(&self, meta: &RunMeta) -> Result<(), EngineError> {
        let dir = self.run_dir(&meta.run_id);
        fs::create_dir_all(&dir)?;
        let tmp = dir.join(format!("{RUN_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(meta)?)?;
        fs::rename(tmp, dir.join(RUN_FILE))?;
        Ok(())
    }

    pub fn load_meta(&self, run_id: &str) -> Result<RunMeta, EngineError> {
        let path = self.run_dir(run_id).join(RUN_FILE);
        if !path.is_file() {
            return Err(EngineError::RunNotFound(run_id.to_string()));
        }
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    /// Snapshot of the dataset items, so a run directory is self-contained.
    pub fn write_items(&self, run_id: &str, ds: &Dataset) -> Result<(), EngineError> {
        let dir = self.run_dir(run_id);
        fs::create_dir_all(&dir)?;
        let mut text = String::new();
        for item in &ds.items {
            text.push_str(&serde_json::to_string(item)?);
            text.push('\n');
        }
        fs::write(dir.join(ITEMS_FILE), text)?;
        Ok(())
    }

    pub fn load_dataset(&self, run_id: &str) -> Result<Dataset, EngineError> {
        let meta = self.load_meta(run_id)?;
        let text = fs::read_to_string(self.run_dir(run_id).join(ITEMS_FILE))?;
        let items = parse_jsonl(&text).map_err(|e| EngineError::Config(e.to_string()))?;
        Ok(Dataset::new(meta.dataset.name, items))
    }

    pub fn append_transcript(&self, run_id: &str, t: &ItemTranscript) -> Result<(), EngineError> {
        let writer = {
            let mut writers = self.writers.lock().expect("writer map lock");
            match writers.get(run_id) {
                Some(w) => Arc::clone(w),
                None => {
                    let dir = self.run_dir(run_id);
                    fs::create_dir_all(&dir)?;
                    let file = OpenOptions::new().create(true).append(true).open(dir.join(TRANSCRIPTS_FILE))?;
                    let w = Arc::new(Mutex::new(file));
                    writers.insert(run_id.to_string(), Arc::clone(&w));
                    w
                }
            }
        };
        let mut line = serde_json::to_string(t)?;
        line.push('\n');
        let mut file = writer.lock().expect("transcript writer lock");
        file.write_all(line.as_bytes())?;
        file.flush()?;
        Ok(())
    }

    /// Latest persisted transcript per item id. Corrupt lines are skipped.
    pub fn load_transcripts(&self, run_id: &str) -> Result<HashMap<String, ItemTranscript>, EngineError> {
        let path = self.run_dir(run_id).join(TRANSCRIPTS_FILE);
        let mut out = HashMap::new();
        if !path.is_file() {
            return Ok(out);
        }
        for (idx, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<ItemTranscript>(&line) {
                Ok(t) => {
                    out.insert(t.item_id.clone(), t);
                }
                Err(err) => warn!(line = idx + 1, %err, "corrupt transcript line skipped"),
            }
        }
        Ok(out)
    }

    /// Metadata plus the latest transcripts in dataset order.
    pub fn load_run(&self, run_id: &str) -> Result<RunRecord, EngineError> {
        let meta = self.load_meta(run_id)?;
        let mut by_id = self.load_transcripts(run_id)?;
        let transcripts = meta.dataset.item_ids.iter().filter_map(|id| by_id.remove(id)).collect();
        Ok(RunRecord { meta, transcripts })
    }

    /// Gateway backed by this run's cache file.
    pub fn open_gateway(&self, run_id: &str) -> Result<Gateway, EngineError> {
        let cache = ReplayCache::open(&self.cache_path(run_id))?;
        Ok(Gateway::new(Arc::new(cache)))
    }

    /// Copy entries from `seed` into the run cache; keys already present are
    /// kept. Returns the number of entries newly added.
    pub fn import_seed_cache(&self, run_id: &str, seed: &Path) -> Result<usize, EngineError> {
        let source = ReplayCache::in_memory();
        let text = fs::read_to_string(seed)?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            source.insert(serde_json::from_str(line)?)?;
        }
        let target = ReplayCache::open(&self.cache_path(run_id))?;
        let before = target.len();
        for entry in source.entries() {
            if entry.key == crate::gateway::cache_key(&entry.request) {
                target.insert(entry)?;
            } else {
                warn!(key = %entry.key, "seed cache entry key does not match its request; skipped");
            }
        }
        Ok(target.len() - before)
    }

    /// Gateway for a config's run: imports the seed cache, if any, then opens
    /// the run cache.
    pub fn gateway_for(&self, config: &RunConfig, ds: &Dataset) -> Result<Gateway, EngineError> {
        let run_id = config.run_id_for(ds);
        if let Some(seed) = &config.seed_cache {
            let added = self.import_seed_cache(&run_id, seed)?;
            info!(run = %run_id, added, "seed cache imported");
        }
        self.open_gateway(&run_id)
    }
}

/// Run one condition over a dataset.
///
/// With a store, transcripts are appended as items finish and items that
/// already have a successful transcript for the same item digest are skipped.
/// Transcript order in the returned record follows dataset order.
pub fn run_condition(
    ds: &Dataset,
    config: &RunConfig,
    gateway: &Gateway,
    taxonomy: &BiasTaxonomy,
    store: Option<&RunStore>,
) -> Result<RunRecord, EngineError> {
    config.validate()?;
    let kit = config.kit()?;
    let run_id = config.run_id_for(ds);
    let mut meta = RunMeta {
        run_id: run_id.clone(),
        dataset: DatasetRef {
            name: ds.name.clone(),
            digest: ds.digest(),
            item_ids: ds.items.iter().map(|i| i.id.clone()).collect(),
        },
        condition: config.condition,
        model: config.model.clone(),
        detector: config.detector().clone(),
        config: config.clone(),
        status: RunStatus::InProgress,
    };

    let mut done: HashMap<String, ItemTranscript> = HashMap::new();
    if let Some(store) = store {
        if store.exists(&run_id) {
            let previous = store.load_meta(&run_id)?;
            if previous.condition != meta.condition || previous.model != meta.model {
                return Err(EngineError::Config(format!(
                    "run {run_id:?} already exists with a different condition or model"
                )));
            }
        }
        let digests: HashMap<&str, String> = ds.items.iter().map(|i| (i.id.as_str(), i.digest())).collect();
        done = store
            .load_transcripts(&run_id)?
            .into_iter()
            .filter(|(id, t)| {
                !t.is_failed() && t.condition == config.condition && digests.get(id.as_str()) == Some(&t.item_digest)
            })
            .collect();
        store.write_items(&run_id, ds)?;
        store.write_meta(&meta)?;
    }

    let pending: Vec<&McqItem> = ds.items.iter().filter(|i| !done.contains_key(&i.id)).collect();
    info!(run = %run_id, total = ds.items.len(), pending = pending.len(), "running condition");

    let session = Session {
        gateway,
        taxonomy,
        kit: &kit,
        model: &config.model,
        detector: config.detector(),
        policy: config.policy,
        max_loops: config.max_loops,
    };
    let results: Mutex<Vec<(usize, ItemTranscript)>> = Mutex::new(Vec::with_capacity(pending.len()));
    let store_error: Mutex<Option<EngineError>> = Mutex::new(None);
    let next = AtomicUsize::new(0);
    let workers = config.parallelism.min(pending.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = pending.get(idx) else { break };
                let transcript = session.feedback_loop(item, &config.condition);
                if let Some(store) = store {
                    if let Err(err) = store.append_transcript(&run_id, &transcript) {
                        store_error.lock().expect("error slot").get_or_insert(err);
                    }
                }
                results.lock().expect("results lock").push((idx, transcript));
            });
        }
    });
    if let Some(err) = store_error.into_inner().expect("error slot") {
        return Err(err);
    }

    let mut fresh: HashMap<String, ItemTranscript> =
        results.into_inner().expect("results lock").into_iter().map(|(_, t)| (t.item_id.clone(), t)).collect();
    let transcripts: Vec<ItemTranscript> = ds
        .items
        .iter()
        .filter_map(|i| fresh.remove(&i.id).or_else(|| done.remove(&i.id)))
        .collect();
    meta.status = if transcripts.len() == ds.items.len() {
        RunStatus::Complete
    } else {
        RunStatus::InProgress
    };
    if let Some(store) = store {
        store.write_meta(&meta)?;
    }
    Ok(RunRecord { meta, transcripts })
}

/// Re-execute a stored run against its own cache with no provider access.
/// Nothing is written to the store.
pub fn replay_run(store: &RunStore, run_id: &str, taxonomy: &BiasTaxonomy) -> Result<RunRecord, EngineError> {
    let meta = store.load_meta(run_id)?;
    let ds = store.load_dataset(run_id)?;
    let cache = ReplayCache::open(&store.cache_path(run_id))?;
    let snapshot = cache.entries();
    let memory = ReplayCache::in_memory();
    for entry in snapshot {
        memory.insert(entry)?;
    }
    let gateway = Gateway::new(Arc::new(memory));
    let mut config = meta.config.clone();
    config.run_id = Some(meta.run_id.clone());
    config.policy = CachePolicy::ReplayOnly;
    let mut record = run_condition(&ds, &config, &gateway, taxonomy, None)?;
    record.meta.config = meta.config;
    Ok(record)
}

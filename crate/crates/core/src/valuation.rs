//! Valuation functions over training subsets.
//!
//! - [`SyntheticValuation`]: closed-form fixtures with known Shapley values
//! - [`EndToEndValuation`]: fit a world model on the subset, tune a PID
//!   agent against it, and score the agent on the true environment
//! - [`Cached`]: memoizes any valuation in memory and, optionally, in an
//!   append-only [`ValuationStore`] file

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agent::{run_episode, train_policy, Anchor, OptimizerKind, PidPolicy, TrueEnv};
use crate::env::{aggregate_percentile, training_transitions, EnvSpec, TrainingPoint};
use crate::error::{Error, Result};
use crate::seed;
use crate::shapley::{Valuation, ValuationOutcome};
use crate::subset::SubsetMask;
use crate::world_model::{fit, TrainConfig, Transition};

/// Closed-form valuations used as fixtures.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticValuation {
    /// `|d|`
    Cardinality,
    /// `sum of w_i over i in d`
    LinearWeights(Vec<f64>),
    /// Failure unless every pivot is in `d`; otherwise `|d|`.
    PlantedNull(Vec<usize>),
    Constant(f64),
    /// Failure when `|d| < min_size`; otherwise `|d|`.
    CutOff(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub weights: Vec<f64>,
    pub pivots: Vec<usize>,
    pub score: f64,
    pub min_size: usize,
}

/// Builds a synthetic valuation by name: `cardinality`, `linear-weights`,
/// `planted-null`, `constant` or `cut-off`.
pub fn synthetic_valuation(kind: &str, params: &SyntheticParams) -> Result<SyntheticValuation> {
    match kind {
        "cardinality" => Ok(SyntheticValuation::Cardinality),
        "linear-weights" => {
            if params.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::domain("weights must be finite"));
            }
            Ok(SyntheticValuation::LinearWeights(params.weights.clone()))
        }
        "planted-null" => {
            if params.pivots.is_empty() {
                return Err(Error::domain("planted-null needs at least one pivot"));
            }
            Ok(SyntheticValuation::PlantedNull(params.pivots.clone()))
        }
        "constant" => {
            if !params.score.is_finite() {
                return Err(Error::domain("constant score must be finite"));
            }
            Ok(SyntheticValuation::Constant(params.score))
        }
        "cut-off" => Ok(SyntheticValuation::CutOff(params.min_size)),
        other => Err(Error::domain(format!("unknown synthetic valuation {other:?}"))),
    }
}

impl Valuation for SyntheticValuation {
    fn evaluate(&self, d: &SubsetMask) -> ValuationOutcome {
        let size = d.cardinality() as f64;
        match self {
            SyntheticValuation::Cardinality => ValuationOutcome::Success(size),
            SyntheticValuation::LinearWeights(w) => {
                ValuationOutcome::Success(d.members().map(|i| w.get(i).copied().unwrap_or(0.0)).sum())
            }
            SyntheticValuation::PlantedNull(pivots) => {
                if pivots.iter().all(|&p| d.contains(p)) {
                    ValuationOutcome::Success(size)
                } else {
                    ValuationOutcome::Failure
                }
            }
            SyntheticValuation::Constant(c) => ValuationOutcome::Success(*c),
            SyntheticValuation::CutOff(min) => {
                if d.cardinality() < *min {
                    ValuationOutcome::Failure
                } else {
                    ValuationOutcome::Success(size)
                }
            }
        }
    }
}

/// Attaches a seed to a valuation that has none of its own.
#[derive(Debug, Clone)]
pub struct WithSeed<V>(pub V, pub u64);

impl<V: Valuation> Valuation for WithSeed<V> {
    fn evaluate(&self, d: &SubsetMask) -> ValuationOutcome {
        self.0.evaluate(d)
    }

    fn seed(&self) -> u64 {
        self.1
    }
}

/// One persisted evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationRecord {
    pub mask: SubsetMask,
    pub outcome: ValuationOutcome,
    /// Seconds spent computing the outcome.
    pub wall_time: f64,
    pub seed: u64,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    n: usize,
    mask: String,
    seed: u64,
    outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    wall_time: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct StoreHeader {
    format: String,
    version: u32,
}

const STORE_FORMAT: &str = "action-shapley/valuation-store";
const STORE_VERSION: u32 = 1;

impl RecordLine {
    fn from_record(r: &ValuationRecord) -> Self {
        let (outcome, score) = match r.outcome {
            ValuationOutcome::Success(s) => ("success", Some(s)),
            ValuationOutcome::Failure => ("failure", None),
        };
        RecordLine {
            n: r.mask.n(),
            mask: r.mask.to_hex(),
            seed: r.seed,
            outcome: outcome.into(),
            score,
            wall_time: r.wall_time,
            metadata: r.metadata.clone(),
        }
    }

    fn into_record(self) -> std::result::Result<ValuationRecord, String> {
        let mask = SubsetMask::from_hex(self.n, &self.mask).map_err(|e| e.to_string())?;
        let outcome = match (self.outcome.as_str(), self.score) {
            ("success", Some(s)) if s.is_finite() => ValuationOutcome::Success(s),
            ("failure", None) => ValuationOutcome::Failure,
            (o, s) => return Err(format!("inconsistent outcome {o:?} with score {s:?}")),
        };
        Ok(ValuationRecord {
            mask,
            outcome,
            wall_time: self.wall_time,
            seed: self.seed,
            metadata: self.metadata,
        })
    }
}

/// Append-only file of valuation records, one JSON object per line after a
/// versioned header line.
#[derive(Debug)]
pub struct ValuationStore {
    path: PathBuf,
    file: Mutex<File>,
    records: Mutex<HashMap<(SubsetMask, u64), ValuationRecord>>,
}

impl ValuationStore {
    /// Opens or creates a store. Existing records are loaded; a malformed
    /// line is a hard error naming its byte offset.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut records = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            let corrupt = |offset: usize, reason: String| Error::StoreCorrupt {
                path: path.clone(),
                offset: offset as u64,
                reason,
            };
            let mut offset = 0usize;
            for (lineno, line) in text.split_inclusive('\n').enumerate() {
                let body = line.trim_end_matches(['\n', '\r']);
                if lineno == 0 {
                    let header: StoreHeader = serde_json::from_str(body)
                        .map_err(|e| corrupt(offset, format!("bad header: {e}")))?;
                    if header.format != STORE_FORMAT || header.version != STORE_VERSION {
                        return Err(corrupt(offset, format!(
                            "unsupported store {} v{}",
                            header.format, header.version
                        )));
                    }
                } else if !body.is_empty() {
                    if !line.ends_with('\n') {
                        return Err(corrupt(offset, "truncated record".into()));
                    }
                    let rec = serde_json::from_str::<RecordLine>(body)
                        .map_err(|e| e.to_string())
                        .and_then(RecordLine::into_record)
                        .map_err(|e| corrupt(offset, e))?;
                    records.insert((rec.mask, rec.seed), rec);
                }
                offset += line.len();
            }
        }
        let fresh = !path.exists() || std::fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        if fresh {
            let header = StoreHeader {
                format: STORE_FORMAT.into(),
                version: STORE_VERSION,
            };
            let mut line = serde_json::to_string(&header).expect("header serializes");
            line.push('\n');
            file.write_all(line.as_bytes())
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
        Ok(Self {
            path,
            file: Mutex::new(file),
            records: Mutex::new(records),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, mask: &SubsetMask, seed: u64) -> Option<ValuationRecord> {
        self.records.lock().expect("store lock").get(&(*mask, seed)).cloned()
    }

    /// Appends a record as a single line write.
    pub fn append(&self, record: ValuationRecord) -> Result<()> {
        let mut line = serde_json::to_string(&RecordLine::from_record(&record)).expect("record serializes");
        line.push('\n');
        {
            let mut f = self.file.lock().expect("store file lock");
            f.write_all(line.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| Error::io(format!("appending to {}", self.path.display()), e))?;
        }
        self.records
            .lock()
            .expect("store lock")
            .insert((record.mask, record.seed), record);
        Ok(())
    }
}

/// Memoizing wrapper. Each `(mask, seed)` is computed at most once per
/// process and, with a store attached, at most once across runs.
pub struct Cached<V> {
    inner: V,
    store: Option<ValuationStore>,
    memo: Mutex<HashMap<SubsetMask, Arc<OnceLock<ValuationOutcome>>>>,
    computed: AtomicU64,
    write_error: Mutex<Option<Error>>,
}

/// Wraps `valuation` with in-memory memoization and an optional store.
pub fn cached<V: Valuation>(valuation: V, store: Option<ValuationStore>) -> Cached<V> {
    Cached {
        inner: valuation,
        store,
        memo: Mutex::new(HashMap::new()),
        computed: AtomicU64::new(0),
        write_error: Mutex::new(None),
    }
}

impl<V: Valuation> Cached<V> {
    /// Number of times the wrapped valuation actually ran.
    pub fn computed(&self) -> u64 {
        self.computed.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &V {
        &self.inner
    }

    pub fn store(&self) -> Option<&ValuationStore> {
        self.store.as_ref()
    }

    /// Surfaces the first failed store write, if any.
    pub fn take_write_error(&self) -> Option<Error> {
        self.write_error.lock().expect("error lock").take()
    }

    fn compute(&self, mask: &SubsetMask) -> ValuationOutcome {
        let seed = self.inner.seed();
        if let Some(rec) = self.store.as_ref().and_then(|s| s.get(mask, seed)) {
            return rec.outcome;
        }
        let start = Instant::now();
        let outcome = self.inner.evaluate(mask);
        self.computed.fetch_add(1, Ordering::Relaxed);
        if let Some(store) = &self.store {
            let rec = ValuationRecord {
                mask: *mask,
                outcome,
                wall_time: start.elapsed().as_secs_f64(),
                seed,
                metadata: BTreeMap::new(),
            };
            if let Err(e) = store.append(rec) {
                self.write_error.lock().expect("error lock").get_or_insert(e);
            }
        }
        outcome
    }
}

impl<V: Valuation> Valuation for Cached<V> {
    fn evaluate(&self, mask: &SubsetMask) -> ValuationOutcome {
        let cell = {
            let mut memo = self.memo.lock().expect("memo lock");
            memo.entry(*mask).or_default().clone()
        };
        *cell.get_or_init(|| self.compute(mask))
    }

    fn seed(&self) -> u64 {
        self.inner.seed()
    }
}

/// Settings of the end-to-end valuation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndToEndValuationConfig {
    pub train: TrainConfig,
    pub optimizer: OptimizerKind,
    /// Objective evaluations per gain-tuning run.
    pub budget: usize,
    /// Episode length on the true environment; `None` uses the env's.
    pub horizon: Option<usize>,
    /// True-environment episodes averaged per valuation.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for EndToEndValuationConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                num_centers: 24,
                width_scale: 4.0,
                kmeans_iterations: 10,
                ..TrainConfig::default()
            },
            optimizer: OptimizerKind::SacpidLike,
            budget: 48,
            horizon: None,
            repeats: 1,
            seed: 0,
        }
    }
}

impl EndToEndValuationConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.budget < 1 {
            return Err(Error::domain("budget must be at least 1"));
        }
        if self.horizon == Some(0) {
            return Err(Error::domain("horizon must be at least 1"));
        }
        if self.repeats < 1 {
            return Err(Error::domain("repeats must be at least 1"));
        }
        Ok(())
    }
}

/// Train-tune-evaluate valuation over a fixed set of training points.
pub struct EndToEndValuation {
    env: EnvSpec,
    config: EndToEndValuationConfig,
    transitions: Vec<Vec<Transition>>,
    /// Per point: its configuration and the median of its logged series.
    anchors: Vec<Anchor>,
    agents: Mutex<HashMap<SubsetMask, Arc<OnceLock<Option<PidPolicy>>>>>,
}

impl EndToEndValuation {
    pub fn new(env: EnvSpec, points: &[TrainingPoint], config: EndToEndValuationConfig) -> Result<Self> {
        config.validate()?;
        env.validate()?;
        if points.len() < 2 {
            return Err(Error::domain("need at least two training points"));
        }
        let transitions = points
            .iter()
            .map(|p| {
                if p.series.is_empty() || p.series.iter().any(|x| !x.is_finite()) {
                    return Err(Error::domain(format!("training point {} has no usable series", p.id)));
                }
                training_transitions(&env, p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            env,
            config,
            transitions,
            anchors: points
                .iter()
                .map(|p| {
                    Ok(Anchor {
                        config: p.config.clone(),
                        state: vec![aggregate_percentile(&p.series, 50.0)?],
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            agents: Mutex::new(HashMap::new()),
        })
    }

    pub fn env(&self) -> &EnvSpec {
        &self.env
    }

    pub fn config(&self) -> &EndToEndValuationConfig {
        &self.config
    }

    pub fn n_points(&self) -> usize {
        self.transitions.len()
    }

    fn horizon(&self) -> usize {
        self.config.horizon.unwrap_or(self.env.horizon)
    }

    /// Fits a world model on the subset and trains a policy against it.
    /// `None` when the subset cannot support a model.
    ///
    /// Seeds depend on `base_seed` only, never on the mask, so every subset
    /// faces the same fitting, tuning and evaluation noise.
    pub fn train_agent(&self, mask: &SubsetMask, base_seed: u64) -> Option<PidPolicy> {
        if mask.is_empty() || mask.n() != self.n_points() {
            return None;
        }
        let data: Vec<Transition> = mask
            .members()
            .flat_map(|i| self.transitions[i].iter().cloned())
            .collect();
        let train = TrainConfig {
            seed: seed::derive(base_seed, 10),
            ..self.config.train.clone()
        };
        let model = fit(&data, &train).ok()?;
        let anchors: Vec<Anchor> = mask.members().map(|i| self.anchors[i].clone()).collect();
        train_policy(&model, &self.env, &anchors, self.config.optimizer, self.config.budget, seed::derive(base_seed, 11)).ok()
    }

    /// Agent for `mask` under the configured seed, trained once and reused.
    pub fn agent(&self, mask: &SubsetMask) -> Option<PidPolicy> {
        let cell = {
            let mut agents = self.agents.lock().expect("agent lock");
            agents.entry(*mask).or_default().clone()
        };
        cell.get_or_init(|| self.train_agent(mask, self.config.seed)).clone()
    }

    /// Scores a trained policy over one true-environment episode.
    pub fn score_agent(&self, policy: &PidPolicy, episode_seed: u64) -> ValuationOutcome {
        match run_episode(&TrueEnv(&self.env), policy, &self.env, self.horizon(), episode_seed) {
            Ok(ep) if ep.goal_met => ValuationOutcome::from_score(ep.cumulative_reward),
            _ => ValuationOutcome::Failure,
        }
    }

    /// Re-rolls only the true-environment noise for the cached agent.
    pub fn evaluate_episode(&self, mask: &SubsetMask, episode_seed: u64) -> ValuationOutcome {
        match self.agent(mask) {
            Some(g) => self.score_agent(&g, episode_seed),
            None => ValuationOutcome::Failure,
        }
    }

    /// Retrains and retunes with an episode-specific seed, then scores.
    pub fn evaluate_retuned(&self, mask: &SubsetMask, episode_seed: u64) -> ValuationOutcome {
        match self.train_agent(mask, episode_seed) {
            Some(g) => self.score_agent(&g, seed::derive(episode_seed, 1)),
            None => ValuationOutcome::Failure,
        }
    }
}

impl Valuation for EndToEndValuation {
    /// Success with the mean cumulative reward over `repeats` episodes if
    /// every episode meets the goal; Failure otherwise.
    fn evaluate(&self, mask: &SubsetMask) -> ValuationOutcome {
        let Some(policy) = self.agent(mask) else {
            return ValuationOutcome::Failure;
        };
        let mut total = 0.0;
        for rep in 0..self.config.repeats {
            match self.score_agent(&policy, seed::derive(self.config.seed, 100 + rep as u64)) {
                ValuationOutcome::Success(j) => total += j,
                ValuationOutcome::Failure => return ValuationOutcome::Failure,
            }
        }
        ValuationOutcome::from_score(total / self.config.repeats as f64)
    }

    fn seed(&self) -> u64 {
        self.config.seed
    }
}

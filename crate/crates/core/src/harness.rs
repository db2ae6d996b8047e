//! Experiment configuration, named suites, parallel execution, manifests
//! and replay.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::clock::{trial_seed, ClockField, TRIAL_SEED_RULE};
use crate::coupling::{detect_renewal, domination_check_liggett, spawn_auxiliary, verify_edge_identity};
use crate::engine::{SimOptions, Simulator, Trajectory, TruncationPolicy};
use crate::error::{Error, Result};
use crate::estimators::{
    clt_diagnostics, compare_tails, estimate_edge_speed, extinction_tail, increment_envelope_check,
    increments, iid_null_series, large_deviation_profile, mixing_profile, renewal_statistics, run_trial,
    run_trials, survival_curve, trajectory_digest, StopRule, TrialSummary,
};
use crate::lattice::{InitialCondition, Params, Site, Variant, LAMBDA_C_ESTIMATE};
use crate::oracle::{bits_string, build_generator, mask_of};
use crate::paths::{exhaustive_reachable, fit_box_scaling, fit_edge_envelope, half_line_edge_supremum, reachable_from, PathMode};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

/// Suite-specific knobs; unused fields are ignored by a suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteOptions {
    /// Sample times for CLT / deviation suites; grid times elsewhere.
    pub times: Vec<f64>,
    /// Initial sizes for the survival suite.
    pub sizes: Vec<usize>,
    /// Box heights for the crossing suite.
    pub heights: Vec<f64>,
    pub max_lag: usize,
    /// Largest segment for the oracle suite.
    pub oracle_n: usize,
    /// Spawn time for coupling pairs.
    pub spawn_time: f64,
    /// Per-attempt survival horizon for renewal detection.
    pub monitor_horizon: f64,
    /// Boost rate of the control batch in the tail suite.
    pub control_epsilon: Option<f64>,
    pub control_trials: usize,
    /// Spread set for the domination suite.
    pub spread_set: Vec<Site>,
    /// Envelope slack grid.
    pub slack: Vec<f64>,
    pub gamma: f64,
    pub b: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            times: vec![64.0, 128.0, 256.0, 512.0],
            sizes: vec![1, 2, 4, 8, 16],
            heights: vec![8.0, 16.0, 32.0, 64.0],
            max_lag: 10,
            oracle_n: 3,
            spawn_time: 5.0,
            monitor_horizon: 200.0,
            control_epsilon: None,
            control_trials: 0,
            spread_set: vec![0, 5],
            slack: vec![0.0, 10.0, 20.0, 40.0],
            gamma: 0.25,
            b: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Suite name.
    pub name: String,
    pub params: Params,
    pub initial: InitialCondition,
    pub t_max: f64,
    pub trials: usize,
    pub seed: u64,
    pub cadence: f64,
    pub truncation: TruncationPolicy,
    pub certify_size: Option<usize>,
    pub output_dir: PathBuf,
    /// Largest tolerated fraction of invalid trials.
    pub invalid_threshold: f64,
    pub suite: SuiteOptions,
}

const CONFIG_FIELDS: [&str; 12] = [
    "name",
    "params",
    "initial",
    "t_max",
    "trials",
    "seed",
    "cadence",
    "truncation",
    "certify_size",
    "output_dir",
    "invalid_threshold",
    "suite",
];

fn field<T: serde::de::DeserializeOwned>(obj: &serde_json::Map<String, Value>, name: &str) -> Result<Option<T>> {
    match obj.get(name) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v.clone()).map(Some).map_err(|e| Error::ConfigInvalid {
            field: name.into(),
            message: e.to_string(),
        }),
    }
}

fn required<T: serde::de::DeserializeOwned>(obj: &serde_json::Map<String, Value>, name: &str) -> Result<T> {
    field(obj, name)?.ok_or_else(|| Error::ConfigInvalid {
        field: name.into(),
        message: "missing required field".into(),
    })
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigInvalid {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Parses JSON; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| invalid("<document>", e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| invalid("<document>", "expected a JSON object"))?;
        if let Some(k) = obj.keys().find(|k| !CONFIG_FIELDS.contains(&k.as_str())) {
            return Err(invalid(k, "unknown field"));
        }
        let name: String = required(obj, "name")?;
        // Fields missing from a named suite's config take the suite defaults.
        let fallback = suite_descriptor(&name).map(|d| d.config).ok();
        macro_rules! get {
            ($f:ident) => {
                match field(obj, stringify!($f))? {
                    Some(v) => v,
                    None => match &fallback {
                        Some(b) => b.$f.clone(),
                        None => required(obj, stringify!($f))?,
                    },
                }
            };
        }
        let cfg = ExperimentConfig {
            name,
            params: get!(params),
            initial: get!(initial),
            t_max: get!(t_max),
            trials: get!(trials),
            seed: get!(seed),
            cadence: field(obj, "cadence")?.unwrap_or(1.0),
            truncation: field(obj, "truncation")?.unwrap_or_default(),
            certify_size: match obj.get("certify_size") {
                Some(_) => field::<Option<usize>>(obj, "certify_size")?.flatten(),
                None => fallback.as_ref().and_then(|b| b.certify_size),
            },
            output_dir: get!(output_dir),
            invalid_threshold: field(obj, "invalid_threshold")?.unwrap_or(0.01),
            suite: get!(suite),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if suite_descriptor(&self.name).is_err() && self.name != "custom" {
            return Err(invalid("name", format!("unknown suite `{}`", self.name)));
        }
        if let Err(e) = self.params.validate() {
            return Err(invalid("params", e.to_string()));
        }
        if let Err(e) = self.initial.validate() {
            return Err(invalid("initial", e.to_string()));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(invalid("t_max", format!("must be finite and > 0, got {}", self.t_max)));
        }
        if !(self.cadence.is_finite() && self.cadence > 0.0) {
            return Err(invalid("cadence", format!("must be finite and > 0, got {}", self.cadence)));
        }
        if !(0.0..=1.0).contains(&self.invalid_threshold) {
            return Err(invalid("invalid_threshold", "must lie in [0, 1]"));
        }
        if self.certify_size == Some(0) {
            return Err(invalid("certify_size", "must be positive"));
        }
        Ok(())
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            cadence: self.cadence,
            truncation: self.truncation,
            ..SimOptions::default()
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule {
            t_max: self.t_max,
            certify_size: self.certify_size,
        }
    }
}

/// JSON schema of [`ExperimentConfig`].
pub fn config_schema() -> Value {
    let num = json!({"type": "number"});
    let nums = json!({"type": "array", "items": {"type": "number"}});
    let ints = json!({"type": "array", "items": {"type": "integer"}});
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "ExperimentConfig",
        "type": "object",
        "additionalProperties": false,
        "required": ["name"],
        "properties": {
            "name": {"type": "string", "description": "suite name or `custom`"},
            "params": {
                "type": "object",
                "required": ["lambda_i", "lambda_e", "recovery_rate", "variant"],
                "properties": {
                    "lambda_i": num, "lambda_e": num,
                    "recovery_rate": {"const": 1.0},
                    "variant": {"enum": ["standard", "right_edge_modified", "boundary_modified"]}
                }
            },
            "initial": {
                "oneOf": [
                    {"const": "single_origin"},
                    {"type": "object", "properties": {"finite_set": {"type": "object", "properties": {"sites": ints}}}},
                    {"type": "object", "properties": {"half_line": {"type": "object", "properties": {"depth": {"type": "integer"}}}}},
                    {"type": "object", "properties": {"stationary_approx": {"type": "object", "properties": {"burn_in": num}}}}
                ]
            },
            "t_max": num,
            "trials": {"type": "integer", "minimum": 0},
            "seed": {"type": "integer", "minimum": 0},
            "cadence": num,
            "truncation": {
                "type": "object",
                "properties": {
                    "margin": {"type": "integer"}, "guard_width": {"type": "integer"},
                    "halfline_depth": {"type": ["integer", "null"]}, "moving_guard": {"type": "boolean"}
                }
            },
            "certify_size": {"type": ["integer", "null"]},
            "output_dir": {"type": "string"},
            "invalid_threshold": num,
            "suite": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "times": nums, "sizes": ints, "heights": nums, "max_lag": {"type": "integer"},
                    "oracle_n": {"type": "integer"}, "spawn_time": num, "monitor_horizon": num,
                    "control_epsilon": {"type": ["number", "null"]}, "control_trials": {"type": "integer"},
                    "spread_set": ints, "slack": nums, "gamma": num, "b": num
                }
            }
        }
    })
}

/// Command-line overrides of config fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub lambda_i: Option<f64>,
    pub lambda_e: Option<f64>,
    pub variant: Option<Variant>,
    pub init: Option<InitialCondition>,
    pub t_max: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub suite: Option<String>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(s) = &self.suite {
            cfg.name = s.clone();
        }
        if let Some(v) = self.lambda_i {
            cfg.params.lambda_i = v;
        }
        if let Some(v) = self.lambda_e {
            cfg.params.lambda_e = v;
        }
        if let Some(v) = self.variant {
            cfg.params.variant = v;
        }
        if let Some(v) = &self.init {
            cfg.initial = v.clone();
        }
        if let Some(v) = self.t_max {
            cfg.t_max = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        cfg.validate()
    }
}

/// `standard`, `right-edge` / `right_edge_modified`, `boundary` /
/// `boundary_modified`.
pub fn parse_variant(s: &str) -> Result<Variant> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "standard" => Ok(Variant::Standard),
        "right_edge" | "right_edge_modified" | "rem" => Ok(Variant::RightEdgeModified),
        "boundary" | "boundary_modified" | "bm" => Ok(Variant::BoundaryModified),
        _ => Err(invalid("params.variant", format!("unknown variant `{s}`"))),
    }
}

/// `origin`, `set:0,1,5`, `interval:A:B`, `halfline:DEPTH`,
/// `stationary:BURN_IN`.
pub fn parse_initial(s: &str) -> Result<InitialCondition> {
    let bad = |m: String| invalid("initial", m);
    let (head, rest) = s.split_once(':').unwrap_or((s, ""));
    let init = match head {
        "origin" | "single" | "single_origin" => InitialCondition::SingleOrigin,
        "set" => InitialCondition::FiniteSet {
            sites: rest
                .split(',')
                .map(|x| x.trim().parse::<Site>().map_err(|e| bad(format!("site `{x}`: {e}"))))
                .collect::<Result<_>>()?,
        },
        "interval" => {
            let (a, b) = rest.split_once(':').ok_or_else(|| bad("expected interval:A:B".into()))?;
            let a = a.parse().map_err(|e| bad(format!("{e}")))?;
            let b = b.parse().map_err(|e| bad(format!("{e}")))?;
            InitialCondition::interval(a, b)
        }
        "halfline" | "half_line" => InitialCondition::HalfLine {
            depth: rest.parse().map_err(|e| bad(format!("depth `{rest}`: {e}")))?,
        },
        "stationary" => InitialCondition::StationaryApprox {
            burn_in: rest.parse().map_err(|e| bad(format!("burn-in `{rest}`: {e}")))?,
        },
        _ => return Err(bad(format!("unknown initial condition `{s}`"))),
    };
    init.validate().map_err(|e| bad(e.to_string()))?;
    Ok(init)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteDescriptor {
    pub name: String,
    pub description: String,
    /// Acceptance criteria the suite exercises.
    pub criteria: Vec<u8>,
    pub config: ExperimentConfig,
}

pub const SUITE_NAMES: [&str; 13] = [
    "oracle-agreement",
    "coupling-exactness",
    "edge-speed",
    "clt",
    "extinction-tail",
    "survival-size",
    "large-deviation-shape",
    "box-crossing",
    "mixing",
    "renewal",
    "liggett-domination",
    "determinism",
    "path-oracle",
];

fn boosted(eps: f64) -> Params {
    Params::boosted(LAMBDA_C_ESTIMATE, eps, Variant::BoundaryModified).expect("valid defaults")
}

/// The registry entry for `name`.
pub fn suite_descriptor(name: &str) -> Result<SuiteDescriptor> {
    let stationary = InitialCondition::StationaryApprox { burn_in: 200.0 };
    let base = |params: Params, initial: InitialCondition, t_max: f64, trials: usize| ExperimentConfig {
        name: name.to_string(),
        params,
        initial,
        t_max,
        trials,
        seed: 20_240_601,
        cadence: 1.0,
        truncation: TruncationPolicy::default(),
        certify_size: None,
        output_dir: PathBuf::from("out").join(name),
        invalid_threshold: 0.01,
        suite: SuiteOptions::default(),
    };
    let (description, criteria, config) = match name {
        "oracle-agreement" => (
            "closed-segment extinction probabilities against the exact generator",
            vec![1],
            {
                let mut c = base(Params::boosted(1.0, 0.5, Variant::BoundaryModified)?, InitialCondition::SingleOrigin, 5.0, 10_000);
                c.suite.times = vec![1.0, 5.0];
                c
            },
        ),
        "coupling-exactness" => (
            "edge identity and coupled-region agreement of auxiliary processes",
            vec![2],
            base(boosted(0.5), InitialCondition::interval(-5, 5), 50.0, 1000),
        ),
        "edge-speed" => (
            "right-edge speed from the stationary edge process",
            vec![3],
            base(boosted(0.5), stationary.clone(), 512.0, 520),
        ),
        "clt" => (
            "variance growth and normality of the right edge",
            vec![4],
            base(boosted(0.5), stationary.clone(), 512.0, 520),
        ),
        "extinction-tail" => (
            "stretched-exponential tail of the extinction time",
            vec![5],
            {
                let mut c = base(boosted(0.5), InitialCondition::SingleOrigin, 1000.0, 20_000);
                c.certify_size = Some(100);
                c.suite.control_epsilon = Some(0.0);
                c.suite.control_trials = 2000;
                c
            },
        ),
        "survival-size" => (
            "survival probability against initial size",
            vec![6],
            {
                let mut c = base(boosted(0.5), InitialCondition::SingleOrigin, 1000.0, 4000);
                c.certify_size = Some(100);
                c
            },
        ),
        "large-deviation-shape" => (
            "decay of edge deviations beyond t^(1-gamma)",
            vec![7],
            base(boosted(0.5), stationary.clone(), 512.0, 520),
        ),
        "box-crossing" => (
            "critical box-crossing widths and the edge envelope",
            vec![8],
            {
                let mut c = base(boosted(0.0), InitialCondition::HalfLine { depth: 0 }, 64.0, 400);
                c.params = Params::standard(LAMBDA_C_ESTIMATE)?;
                c
            },
        ),
        "mixing" => (
            "dependence decay of stationary edge increments",
            vec![9],
            base(boosted(0.5), stationary, 512.0, 520),
        ),
        "renewal" => (
            "renewal attempts and renewal-time tail",
            vec![10],
            base(boosted(0.5), InitialCondition::interval(-5, 5), 200.0, 400),
        ),
        "liggett-domination" => (
            "spread initial sets against contiguous ones",
            vec![],
            {
                let mut c = base(Params::standard(LAMBDA_C_ESTIMATE)?, InitialCondition::SingleOrigin, 10.0, 4000);
                c.suite.times = vec![0.0, 1.0, 5.0, 10.0];
                c
            },
        ),
        "determinism" => (
            "trial digests under different thread counts",
            vec![11],
            base(boosted(0.5), InitialCondition::SingleOrigin, 50.0, 64),
        ),
        "path-oracle" => (
            "open-path sweep against exhaustive enumeration on small windows",
            vec![12],
            base(Params::standard(LAMBDA_C_ESTIMATE)?, InitialCondition::SingleOrigin, 1.0, 1000),
        ),
        _ => {
            return Err(Error::UnknownSuite {
                name: name.into(),
                available: SUITE_NAMES.join(", "),
            })
        }
    };
    Ok(SuiteDescriptor {
        name: name.into(),
        description: description.into(),
        criteria,
        config,
    })
}

pub fn named_suites() -> Vec<SuiteDescriptor> {
    SUITE_NAMES
        .iter()
        .map(|n| suite_descriptor(n).expect("registered"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub seed: u64,
    pub digest: String,
    pub valid: bool,
    pub invalid_reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvalidCensus {
    pub total: usize,
    pub invalid: usize,
    pub fraction: f64,
    pub threshold: f64,
    pub reasons: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub code_version: String,
    pub seed_rule: String,
    pub status: RunStatus,
    pub threads: usize,
    pub trials: Vec<TrialRecord>,
    pub invalid_census: InvalidCensus,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<ArtifactRecord>,
    /// Estimators that could not be evaluated, with the reason.
    pub notes: Vec<String>,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// `SIM_THREADS` capped by the available cores.
pub fn thread_count() -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    std::env::var("SIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .map_or(cores, |n| n.min(cores))
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool")
        .install(f)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files produced by a suite, relative to the output directory.
#[derive(Default)]
struct SuiteOutput {
    trials: Vec<TrialSummary>,
    files: Vec<(String, Vec<u8>)>,
    notes: Vec<String>,
}

impl SuiteOutput {
    fn json(&mut self, name: &str, v: &impl Serialize) {
        self.files.push((name.into(), serde_json::to_vec_pretty(v).expect("serializable")));
    }

    fn csv(&mut self, name: &str, s: String) {
        self.files.push((name.into(), s.into_bytes()));
    }

    fn estimate<T>(&mut self, name: &str, r: Result<T>) -> Option<T> {
        r.map_err(|e| self.notes.push(format!("{name}: {e}"))).ok()
    }
}

fn write_file(dir: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(rel);
    let unwritable = |source| Error::OutputUnwritable {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(unwritable)?;
    }
    fs::write(&path, bytes).map_err(unwritable)
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<()> {
    write_file(dir, MANIFEST_FILE, &serde_json::to_vec_pretty(m)?)
}

fn census(trials: &[TrialSummary], threshold: f64) -> InvalidCensus {
    let mut reasons = BTreeMap::new();
    for t in trials {
        if let Some(r) = &t.invalid {
            let kind = r.split(':').next().unwrap_or(r).trim().to_string();
            *reasons.entry(kind).or_insert(0) += 1;
        }
    }
    let invalid = reasons.values().sum::<usize>();
    InvalidCensus {
        total: trials.len(),
        invalid,
        fraction: if trials.is_empty() { 0.0 } else { invalid as f64 / trials.len() as f64 },
        threshold,
        reasons,
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.manifest.exit_code
    }
}

/// Runs the configured suite with [`thread_count`] workers.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    run_experiment_with_threads(config, thread_count())
}

pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<RunOutcome> {
    config.validate()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|source| Error::OutputUnwritable {
        path: dir.display().to_string(),
        source,
    })?;
    let start = Instant::now();
    let mut manifest = RunManifest {
        config: config.clone(),
        code_version: CODE_VERSION.into(),
        seed_rule: TRIAL_SEED_RULE.into(),
        status: RunStatus::Running,
        threads,
        trials: (0..config.trials as u64)
            .map(|i| TrialRecord {
                index: i,
                seed: trial_seed(config.seed, i),
                digest: String::new(),
                valid: true,
                invalid_reason: None,
            })
            .collect(),
        invalid_census: census(&[], config.invalid_threshold),
        wall_clock_seconds: 0.0,
        artifacts: Vec::new(),
        notes: Vec::new(),
        exit_code: 0,
    };
    write_manifest(&dir, &manifest)?;
    let output = with_threads(threads, || run_suite(config));
    let output = match output {
        Ok(o) => o,
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.notes.push(e.to_string());
            manifest.exit_code = 2;
            manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
            write_manifest(&dir, &manifest)?;
            return Err(e);
        }
    };
    manifest.trials = output
        .trials
        .iter()
        .map(|t| TrialRecord {
            index: t.index,
            seed: t.seed,
            digest: t.digest.clone(),
            valid: t.is_valid(),
            invalid_reason: t.invalid.clone(),
        })
        .collect();
    manifest.invalid_census = census(&output.trials, config.invalid_threshold);
    for (rel, bytes) in &output.files {
        write_file(&dir, rel, bytes)?;
        manifest.artifacts.push(ArtifactRecord {
            path: rel.clone(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }
    manifest.notes = output.notes;
    manifest.status = RunStatus::Complete;
    manifest.exit_code = if manifest.invalid_census.fraction > config.invalid_threshold { 3 } else { 0 };
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    write_manifest(&dir, &manifest)?;
    Ok(RunOutcome {
        manifest,
        manifest_path: dir.join(MANIFEST_FILE),
    })
}

/// Checks that the files under the manifest's directory and its artifact
/// list match one to one, with matching digests.
pub fn verify_output_dir(dir: &Path) -> Result<RunManifest> {
    let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
    let mut on_disk = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).expect("inside dir").to_string_lossy().replace('\\', "/");
                if rel != MANIFEST_FILE {
                    on_disk.push(rel);
                }
            }
        }
    }
    on_disk.sort();
    let mut listed: Vec<String> = manifest.artifacts.iter().map(|a| a.path.clone()).collect();
    listed.sort();
    if on_disk != listed {
        return Err(Error::ConfigInvalid {
            field: "artifacts".into(),
            message: format!("directory has {on_disk:?}, manifest lists {listed:?}"),
        });
    }
    for a in &manifest.artifacts {
        let actual = sha256_hex(&fs::read(dir.join(&a.path))?);
        if actual != a.sha256 {
            return Err(Error::ConfigInvalid {
                field: "artifacts".into(),
                message: format!("digest of {} changed", a.path),
            });
        }
    }
    Ok(manifest)
}

/// Re-runs trial `index` of a manifest and checks its digest.
pub fn replay(manifest_path: &Path, index: usize) -> Result<Trajectory> {
    let m = RunManifest::load(manifest_path)?;
    if m.code_version != CODE_VERSION {
        return Err(Error::VersionMismatch {
            manifest: m.code_version,
            running: CODE_VERSION.into(),
        });
    }
    let rec = m.trials.get(index).ok_or_else(|| Error::ConfigInvalid {
        field: "trial".into(),
        message: format!("manifest has {} trials, asked for {index}", m.trials.len()),
    })?;
    let cfg = &m.config;
    let s = run_trial(cfg.params, &cfg.initial, rec.index, rec.seed, cfg.stop_rule(), cfg.sim_options())?;
    let traj = Trajectory {
        samples: s.samples,
        extinction_time: s.extinction,
        event_count: s.event_count,
        invalid: s.invalid,
        right_edge_range: s.right_edge_range,
    };
    let actual = trajectory_digest(&traj);
    if actual != rec.digest {
        return Err(Error::DigestMismatch {
            trial: index,
            expected: rec.digest.clone(),
            actual,
        });
    }
    Ok(traj)
}

fn trial_files(out: &mut SuiteOutput) {
    let mut index = String::from("index,seed,valid,extinction_time,certified,event_count,digest\n");
    for t in &out.trials {
        index.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.index,
            t.seed,
            t.is_valid(),
            t.extinct_at().map(|x| x.to_string()).unwrap_or_default(),
            t.certified,
            t.event_count,
            t.digest
        ));
    }
    let files: Vec<(String, Vec<u8>)> = out
        .trials
        .iter()
        .map(|t| {
            let traj = Trajectory {
                samples: t.samples.clone(),
                extinction_time: t.extinction,
                event_count: t.event_count,
                invalid: t.invalid.clone(),
                right_edge_range: t.right_edge_range,
            };
            (format!("trials/trial_{:06}.csv", t.index), traj.to_csv().into_bytes())
        })
        .collect();
    out.files.extend(files);
    out.csv("trials.csv", index);
}

fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let mut out = SuiteOutput::default();
    let opts = cfg.sim_options();
    let so = &cfg.suite;
    let batch = |out: &mut SuiteOutput| -> Result<()> {
        out.trials = run_trials(cfg.params, &cfg.initial, cfg.seed, cfg.trials, cfg.stop_rule(), opts)?;
        trial_files(out);
        Ok(())
    };
    match cfg.name.as_str() {
        "edge-speed" | "custom" => {
            batch(&mut out)?;
            if cfg.trials > 0 {
                if let Some(e) = out.estimate("edge_speed", estimate_edge_speed(&out.trials, cfg.t_max.floor())) {
                    out.json("edge_speed.json", &e);
                }
                let env = increment_envelope_check(&out.trials, &cfg.params, cfg.t_max.floor().min(50.0), &so.slack);
                out.json("increment_envelope.json", &env);
            }
        }
        "clt" | "large-deviation-shape" => {
            batch(&mut out)?;
            if cfg.trials > 0 {
                let t = so.times.iter().cloned().fold(0.0, f64::max);
                if let Some(e) = out.estimate("edge_speed", estimate_edge_speed(&out.trials, t)) {
                    if cfg.name == "clt" {
                        if let Some(r) = out.estimate("clt", clt_diagnostics(&out.trials, &so.times, e.alpha)) {
                            out.csv("clt.csv", r.to_csv());
                            out.json("clt.json", &r);
                        }
                    } else {
                        let r = large_deviation_profile(&out.trials, e.alpha, &so.times, so.gamma, so.b, 2.0);
                        out.json("large_deviation.json", &r);
                    }
                }
            }
        }
        "mixing" => {
            batch(&mut out)?;
            if cfg.trials > 0 {
                let series: Vec<Vec<f64>> = out.trials.iter().filter(|t| t.is_valid()).map(|t| increments(t, cfg.t_max)).collect();
                let r = mixing_profile(&series, so.max_lag);
                let null = mixing_profile(&iid_null_series(&series, cfg.seed), so.max_lag);
                out.csv("mixing.csv", r.to_csv());
                out.csv("mixing_null.csv", null.to_csv());
                out.json("mixing.json", &json!({"observed": r, "iid_null": null}));
            }
        }
        "extinction-tail" => {
            batch(&mut out)?;
            if cfg.trials > 0 {
                if let Some(fit) = out.estimate("extinction_tail", extinction_tail(&out.trials, 1000, 20)) {
                    out.csv("extinction_tail.csv", fit.to_csv());
                    let mut report = json!({ "fit": fit });
                    if let (Some(eps), true) = (so.control_epsilon, so.control_trials > 0) {
                        let control = Params::new(cfg.params.lambda_i, cfg.params.lambda_i + eps, cfg.params.variant)?;
                        let ctrl = run_trials(control, &cfg.initial, cfg.seed ^ 0xc0, so.control_trials, StopRule::horizon(cfg.t_max), opts)?;
                        let grid: Vec<f64> = fit.points.iter().filter(|p| p.exceedances >= 20).map(|p| p.t).collect();
                        let (pts, below) = compare_tails(&out.trials, &ctrl, &grid);
                        report["control"] = json!({"params": control, "trials": so.control_trials, "points": pts, "below_everywhere": below});
                    }
                    out.json("extinction_tail.json", &report);
                }
            }
        }
        "survival-size" => {
            if cfg.trials > 0 {
                let curve = survival_curve(cfg.params, &so.sizes, cfg.stop_rule(), cfg.trials, cfg.seed, opts)?;
                out.csv("survival.csv", curve.to_csv());
                out.json("survival.json", &curve);
            }
        }
        "oracle-agreement" => {
            if cfg.trials > 0 {
                let (csv, cells) = oracle_agreement_table(cfg.params, so.oracle_n, &so.times, cfg.trials, cfg.seed)?;
                out.csv("oracle_agreement.csv", csv);
                out.json("oracle_agreement.json", &cells);
            }
        }
        "coupling-exactness" => {
            if cfg.trials > 0 {
                let reports = coupling_batch(cfg.params, &cfg.initial, so.spawn_time, cfg.t_max, cfg.trials, cfg.seed, opts)?;
                let failures: usize = reports.iter().map(|r| r.failures.len()).sum();
                let checks: usize = reports.iter().map(|r| r.checks).sum();
                out.json("coupling.json", &json!({"pairs": reports.len(), "checks": checks, "failures": failures, "reports": reports}));
            }
        }
        "renewal" => {
            if cfg.trials > 0 {
                let recs = renewal_batch(cfg.params, &cfg.initial, so.monitor_horizon, cfg.trials, cfg.seed, opts)?;
                let records: Vec<_> = recs.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
                if let Some(rep) = out.estimate("renewal", renewal_statistics(&records, 20)) {
                    out.json("renewal.json", &json!({"report": rep, "records": records}));
                }
            }
        }
        "liggett-domination" => {
            if cfg.trials > 0 {
                let rep = domination_check_liggett(cfg.params, &so.spread_set, &so.times, cfg.trials, cfg.seed)?;
                out.json("domination.json", &rep);
            }
        }
        "box-crossing" => {
            if cfg.trials > 0 {
                let fit = fit_box_scaling(cfg.params, &so.heights, 0.5, cfg.trials, cfg.seed)?;
                out.json("box_scaling.json", &fit);
                let sup: Vec<f64> = (0..cfg.trials.max(1000) as u64)
                    .into_par_iter()
                    .map(|i| half_line_edge_supremum(cfg.params, cfg.t_max, trial_seed(cfg.seed ^ 0xe7, i)))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .flatten()
                    .collect();
                let grid: Vec<f64> = (1..=12).map(|k| 0.25 * k as f64).collect();
                if let Some(env) = out.estimate("edge_envelope", fit_edge_envelope(&sup, cfg.t_max, fit.delta_hat, &grid, 1000, 20)) {
                    out.json("edge_envelope.json", &env);
                }
            }
        }
        "determinism" => {
            let runs: Vec<Vec<TrialSummary>> = [1, thread_count().max(2)]
                .iter()
                .map(|&n| with_threads(n, || run_trials(cfg.params, &cfg.initial, cfg.seed, cfg.trials, cfg.stop_rule(), opts)))
                .collect::<Result<_>>()?;
            let identical = runs[0] == runs[1];
            out.trials = runs.into_iter().next().unwrap_or_default();
            trial_files(&mut out);
            out.json("determinism.json", &json!({"trials": cfg.trials, "identical_across_thread_counts": identical}));
        }
        "path-oracle" => {
            if cfg.trials > 0 {
                let rep = path_oracle_batch(cfg.params, cfg.trials, cfg.t_max, 22, cfg.seed)?;
                out.json("path_oracle.json", &rep);
            }
        }
        other => {
            return Err(Error::UnknownSuite {
                name: other.into(),
                available: SUITE_NAMES.join(", "),
            })
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCell {
    pub n: usize,
    pub variant: Variant,
    pub lambda_i: f64,
    pub lambda_e: f64,
    pub t: f64,
    pub initial_state: String,
    pub oracle: f64,
    pub simulator: f64,
    pub se: f64,
    pub z: f64,
    pub within_3se: bool,
}

/// Extinction probability by `t` from the full segment `[0, n - 1]`,
/// simulator (closed segment) against the exact generator, for every
/// size up to `max_n` and every variant.
pub fn oracle_agreement_table(
    params: Params,
    max_n: usize,
    times: &[f64],
    trials: usize,
    seed: u64,
) -> Result<(String, Vec<OracleCell>)> {
    let mut cells = Vec::new();
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    for n in 1..=max_n {
        for variant in [Variant::Standard, Variant::RightEdgeModified, Variant::BoundaryModified] {
            let p = params.with_variant(variant);
            let model = build_generator(n, p)?;
            let sites: Vec<Site> = (0..n as Site).collect();
            let state = mask_of(&sites);
            let stream = seed ^ ((n as u64) << 8) ^ variant as u64;
            let deaths: Vec<Option<f64>> = (0..trials as u64)
                .into_par_iter()
                .map(|i| {
                    let mut sim = Simulator::closed_segment(p, n, &sites, trial_seed(stream, i), SimOptions::default())?;
                    sim.run_until(t_max);
                    Ok(sim.trajectory().extinction_time.time())
                })
                .collect::<Result<_>>()?;
            for &t in times {
                let oracle = model.extinction_probability_by(t)[state];
                let hits = deaths.iter().filter(|d| d.is_some_and(|x| x <= t)).count();
                let sim = hits as f64 / trials as f64;
                let se = (oracle * (1.0 - oracle) / trials as f64).sqrt();
                let z = if se > 0.0 { (sim - oracle) / se } else { 0.0 };
                cells.push(OracleCell {
                    n,
                    variant,
                    lambda_i: p.lambda_i,
                    lambda_e: p.lambda_e,
                    t,
                    initial_state: bits_string(state, n),
                    oracle,
                    simulator: sim,
                    se,
                    z,
                    within_3se: (sim - oracle).abs() <= 3.0 * se + 1e-12,
                });
            }
        }
    }
    let mut csv = String::from("n,variant,lambda_i,lambda_e,t,initial_state_bits,oracle,simulator,se,z,within_3se\n");
    for c in &cells {
        csv.push_str(&format!(
            "{},{:?},{},{},{},{},{},{},{},{},{}\n",
            c.n, c.variant, c.lambda_i, c.lambda_e, c.t, c.initial_state, c.oracle, c.simulator, c.se, c.z, c.within_3se
        ));
    }
    Ok((csv, cells))
}

/// Coupling reports for `pairs` parents, each spawning an auxiliary at
/// `spawn_time`.
pub fn coupling_batch(
    params: Params,
    initial: &InitialCondition,
    spawn_time: f64,
    horizon: f64,
    pairs: usize,
    seed: u64,
    options: SimOptions,
) -> Result<Vec<crate::coupling::CouplingReport>> {
    (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut parent = Simulator::new(params, initial, trial_seed(seed, i), spawn_time + horizon, options)?;
            parent.run_until(spawn_time);
            let mut aux = spawn_auxiliary(&parent, spawn_time, horizon, options)?;
            Ok(verify_edge_identity(&mut parent, &mut aux, horizon))
        })
        .collect()
}

/// Renewal records for `trials` parents; the cap on cumulative attempt
/// time is fifty monitor horizons.
pub fn renewal_batch(
    params: Params,
    initial: &InitialCondition,
    monitor_horizon: f64,
    trials: usize,
    seed: u64,
    options: SimOptions,
) -> Result<Vec<Result<crate::coupling::RenewalRecord>>> {
    let cap = 50.0 * monitor_horizon;
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut parent = Simulator::new(params, initial, trial_seed(seed, i), cap + 2.0 * monitor_horizon, options)?;
            detect_renewal(&mut parent, monitor_horizon, cap, options)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOracleReport {
    pub windows: usize,
    /// Window and initial-set pairs compared.
    pub comparisons: usize,
    /// Windows skipped because they exceed the enumeration budget.
    pub skipped: usize,
    pub disagreements: Vec<(u64, Vec<Site>)>,
}

/// Compares the reachability sweep with exhaustive enumeration on
/// `windows` random records over sites `0..=3` and times `[0, height]`,
/// for all 16 initial sets.
pub fn path_oracle_batch(
    params: Params,
    windows: usize,
    height: f64,
    max_edges: usize,
    seed: u64,
) -> Result<PathOracleReport> {
    let per: Vec<(usize, usize, Vec<(u64, Vec<Site>)>)> = (0..windows as u64)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i);
            let rec = ClockField::new(s, &params).arrivals_in_box(0, 3, 0.0, height, 1e6)?;
            let mut cmp = 0;
            let mut skipped = 0;
            let mut bad = Vec::new();
            for mask in 0..16u32 {
                let sources: Vec<Site> = (0..4).filter(|x| mask >> x & 1 == 1).collect();
                let Some(oracle) = exhaustive_reachable(&rec, &sources, 0.0, height, max_edges) else {
                    skipped += 1;
                    continue;
                };
                let got: Vec<Site> = reachable_from(&rec, &sources, 0.0, height, PathMode::LambdaI, &[], None)?
                    .into_iter()
                    .map(|(x, _)| x)
                    .collect();
                cmp += 1;
                if got != oracle {
                    bad.push((s, sources));
                }
            }
            Ok((cmp, skipped, bad))
        })
        .collect::<Result<_>>()?;
    Ok(PathOracleReport {
        windows,
        comparisons: per.iter().map(|p| p.0).sum(),
        skipped: per.iter().map(|p| p.1).sum(),
        disagreements: per.into_iter().flat_map(|p| p.2).collect(),
    })
}

//! Seeded experiment runner: plays an arm matrix (baselines vs. memory
//! policies) over a shared seed range, persists transcripts and match logs,
//! and emits per-arm reports plus a combined comparison table.
//!
//! Every arm sees the same seed-derived keyword stream but owns its state:
//! stores are never shared across arms. All randomness flows from the seeds,
//! so a rerun reproduces every output byte except wall-clock latency fields.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{Embedder, EmbedderConfig};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, render_comparison, ComparisonRow, MetricReport};
use crate::policy::PolicyKind;
use crate::session::{ResponderConfig, Session, SessionConfig, Transcript};
use crate::twentyq::{
    run_match, ContextProvider, Corpus, FullHistoryProvider, GameOutcome, MemoryProvider,
    RollingProvider, ScriptedGuesser, StatelessProvider, TableAnswerer,
};

/// Inclusive-start seed range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

impl Default for SeedRange {
    fn default() -> Self {
        SeedRange { start: 0, count: 200 }
    }
}

impl SeedRange {
    pub fn iter(&self) -> impl Iterator<Item = u64> {
        self.start..self.start + self.count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreParams {
    pub capacity: usize,
    /// Recent-query window length T.
    pub window: usize,
}

impl Default for StoreParams {
    fn default() -> Self {
        StoreParams { capacity: 64, window: 8 }
    }
}

/// Policy selection for the plain `memory` arm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyParams {
    pub name: String,
    /// Relevance window; defaults to the store window.
    pub window: Option<usize>,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams { name: "relevance".to_string(), window: None }
    }
}

/// What the plain `baseline` arm name means.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub kind: String,
    /// Window size for the rolling variant.
    pub k: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams { kind: "rolling".to_string(), k: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    /// Worker threads for the seed fan-out; 0 means all available cores.
    pub parallelism: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// "builtin" or a path to a corpus JSON file.
    pub corpus: String,
    pub out: PathBuf,
    pub arms: Vec<String>,
    pub seeds: SeedRange,
    pub store: StoreParams,
    pub policy: PolicyParams,
    pub embedder: EmbedderConfig,
    pub responder: ResponderConfig,
    pub baseline: BaselineParams,
    pub run: RunParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: "builtin".to_string(),
            out: PathBuf::from("mnemos-out"),
            arms: vec!["baseline-rolling-1".to_string(), "memory-relevance".to_string()],
            seeds: SeedRange::default(),
            store: StoreParams::default(),
            policy: PolicyParams::default(),
            embedder: EmbedderConfig::default(),
            responder: ResponderConfig::default(),
            baseline: BaselineParams::default(),
            run: RunParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(Error::config("at least one arm is required"));
        }
        let mut seen = BTreeMap::new();
        for name in &self.arms {
            if seen.insert(name, ()).is_some() {
                return Err(Error::config(format!("duplicate arm {name:?}")));
            }
            self.parse_arm(name)?;
        }
        if self.seeds.count == 0 {
            return Err(Error::config("seed range must be non-empty"));
        }
        if self.store.capacity == 0 {
            return Err(Error::config("store capacity must be at least 1"));
        }
        Ok(())
    }

    /// Content hash of the configuration with secrets stripped; stable under
    /// key reordering in the source file because hashing runs over the
    /// canonical (sorted-key) JSON form of the parsed structure.
    pub fn fingerprint(&self) -> Result<String> {
        let mut sanitized = self.clone();
        sanitized.embedder.token = None;
        sanitized.responder.token = None;
        let canonical = serde_json::to_string(&serde_json::to_value(&sanitized)?)?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }

    pub fn load_corpus(&self) -> Result<Corpus> {
        if self.corpus == "builtin" {
            Ok(Corpus::builtin().clone())
        } else {
            let text = std::fs::read_to_string(&self.corpus)?;
            Corpus::from_json(&text)
        }
    }

    fn relevance_window(&self) -> usize {
        self.policy.window.unwrap_or(self.store.window)
    }

    pub fn parse_arm(&self, name: &str) -> Result<Arm> {
        let kind = match name {
            "baseline" => match self.baseline.kind.as_str() {
                "stateless" => ArmKind::BaselineStateless,
                "rolling" => {
                    if self.baseline.k == 0 {
                        return Err(Error::config("baseline k must be at least 1"));
                    }
                    ArmKind::BaselineRolling(self.baseline.k)
                }
                other => {
                    return Err(Error::config(format!(
                        "unknown baseline kind {other:?}; use stateless or rolling"
                    )))
                }
            },
            "baseline-stateless" => ArmKind::BaselineStateless,
            "memory-none" => ArmKind::Memory(PolicyKind::None),
            "memory-lru" => ArmKind::Memory(PolicyKind::Lru),
            "memory-relevance" => ArmKind::Memory(PolicyKind::Relevance {
                window: self.relevance_window(),
            }),
            "memory" => ArmKind::Memory(match self.policy.name.as_str() {
                "none" => PolicyKind::None,
                "lru" => PolicyKind::Lru,
                "relevance" => PolicyKind::Relevance {
                    window: self.relevance_window(),
                },
                other => {
                    return Err(Error::config(format!(
                        "unknown policy {other:?}; use none, lru or relevance"
                    )))
                }
            }),
            "full-history" => ArmKind::FullHistory,
            other => match other.strip_prefix("baseline-rolling-") {
                Some(k) => {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::config(format!("bad rolling window in {other:?}")))?;
                    if k == 0 {
                        return Err(Error::config("rolling window must be at least 1"));
                    }
                    ArmKind::BaselineRolling(k)
                }
                None => return Err(Error::config(format!("unknown arm {other:?}"))),
            },
        };
        Ok(Arm { name: name.to_string(), kind })
    }

    pub fn arms(&self) -> Result<Vec<Arm>> {
        self.arms.iter().map(|n| self.parse_arm(n)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArmKind {
    BaselineStateless,
    BaselineRolling(usize),
    Memory(PolicyKind),
    FullHistory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arm {
    pub name: String,
    pub kind: ArmKind,
}

impl Arm {
    /// Builds this arm's context provider for one match.
    pub fn provider(&self, config: &ExperimentConfig, seed: u64) -> Result<Box<dyn ContextProvider>> {
        Ok(match &self.kind {
            ArmKind::BaselineStateless => Box::new(StatelessProvider),
            ArmKind::BaselineRolling(k) => Box::new(RollingProvider::new(*k)),
            ArmKind::FullHistory => Box::new(FullHistoryProvider::default()),
            ArmKind::Memory(policy) => {
                let session = Session::new(SessionConfig {
                    session_id: format!("seed-{seed}"),
                    capacity: config.store.capacity,
                    window: config.store.window,
                    policy: policy.clone(),
                    embedder: config.embedder.clone(),
                    responder: config.responder.clone(),
                })?;
                Box::new(MemoryProvider::new(session))
            }
        })
    }
}

/// Everything one arm produced over the seed range, in seed order.
#[derive(Debug)]
pub struct ArmResults {
    pub arm: Arm,
    pub outcomes: Vec<GameOutcome>,
    pub transcripts: Vec<Transcript>,
    pub report: Option<MetricReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmOutputs {
    pub report: String,
    pub matches: String,
    pub transcripts: Vec<String>,
}

/// Record of one experiment run; file paths are relative to the output
/// directory. The wall-clock stamps are latency-class metadata, excluded
/// from determinism comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_fingerprint: String,
    pub engine_version: String,
    pub started_unix_ms: u64,
    pub ended_unix_ms: u64,
    pub complete: bool,
    pub arms: BTreeMap<String, ArmOutputs>,
    pub comparison: Option<String>,
    pub error: Option<String>,
}

fn now_unix_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Plays every seed of one arm. Results come back in seed order regardless
/// of the worker fan-out.
pub fn run_arm(
    corpus: &Corpus,
    config: &ExperimentConfig,
    arm: &Arm,
    experiment_fingerprint: &str,
) -> Result<ArmResults> {
    let arm_fingerprint = format!("{experiment_fingerprint}:{}", arm.name);
    let play = |seed: u64| -> Result<(GameOutcome, Transcript)> {
        let mut guesser = ScriptedGuesser::new(corpus);
        let mut answerer = TableAnswerer;
        let mut provider = arm.provider(config, seed)?;
        let outcome = run_match(corpus, seed, &mut guesser, &mut answerer, provider.as_mut())?;
        let transcript = Transcript {
            session_id: format!("seed-{seed}"),
            config_fingerprint: arm_fingerprint.clone(),
            turns: outcome.turns.clone(),
        };
        Ok((outcome, transcript))
    };
    let seeds: Vec<u64> = config.seeds.iter().collect();
    let results: Vec<(GameOutcome, Transcript)> = if config.run.parallelism == 1 {
        seeds.iter().map(|&s| play(s)).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.run.parallelism)
            .build()
            .map_err(|e| Error::backend(format!("worker pool: {e}")))?;
        pool.install(|| seeds.par_iter().map(|&s| play(s)).collect::<Result<_>>())?
    };
    let (outcomes, transcripts) = results.into_iter().unzip();
    Ok(ArmResults {
        arm: arm.clone(),
        outcomes,
        transcripts,
        report: None,
    })
}

fn write_file(root: &Path, relative: &str, contents: &str) -> Result<()> {
    let path = root.join(relative);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Runs the full arm matrix and persists all outputs under `config.out`:
/// per-arm transcripts (JSONL), match logs, metric reports, a combined
/// comparison table, and a manifest. On failure the manifest is still
/// written, marked incomplete, listing whatever was produced.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let fingerprint = config.fingerprint()?;
    let mut manifest = RunManifest {
        config_fingerprint: fingerprint.clone(),
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_ms: now_unix_ms(),
        ended_unix_ms: 0,
        complete: false,
        arms: BTreeMap::new(),
        comparison: None,
        error: None,
    };

    let outcome = run_experiment_inner(config, &fingerprint, &mut manifest);
    manifest.ended_unix_ms = now_unix_ms();
    manifest.complete = outcome.is_ok();
    if let Err(e) = &outcome {
        manifest.error = Some(e.to_string());
    }
    std::fs::create_dir_all(&config.out)?;
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    write_file(&config.out, "manifest.json", &format!("{manifest_json}\n"))?;
    outcome.map(|_| manifest)
}

fn run_experiment_inner(
    config: &ExperimentConfig,
    fingerprint: &str,
    manifest: &mut RunManifest,
) -> Result<()> {
    let corpus = config.load_corpus()?;
    let arms = config.arms()?;
    let metric_embedder = Embedder::new(config.embedder.clone())?;

    let mut results: Vec<ArmResults> = Vec::with_capacity(arms.len());
    for arm in &arms {
        results.push(run_arm(&corpus, config, arm, fingerprint)?);
    }

    // The first baseline-named arm anchors the paired-transfer column for
    // every arm (including itself, which scores 0 by the strictness of the
    // win condition).
    let baseline_index = arms.iter().position(|a| a.name.starts_with("baseline"));
    let baseline_transcripts: Option<Vec<Transcript>> =
        baseline_index.map(|i| results[i].transcripts.clone());

    for r in results.iter_mut() {
        let report = aggregate(
            &r.transcripts,
            baseline_transcripts.as_deref(),
            Some(&r.outcomes),
            &metric_embedder,
        )?;
        r.report = Some(report);
    }

    for r in &results {
        let arm_dir = r.arm.name.as_str();
        let mut outputs = ArmOutputs {
            report: format!("{arm_dir}/report.json"),
            matches: format!("{arm_dir}/matches.jsonl"),
            transcripts: Vec::with_capacity(r.transcripts.len()),
        };
        let report_json = serde_json::to_string_pretty(r.report.as_ref().expect("filled above"))?;
        write_file(&config.out, &outputs.report, &format!("{report_json}\n"))?;
        let mut match_log = String::new();
        for outcome in &r.outcomes {
            match_log.push_str(&outcome.to_log_jsonl()?);
        }
        write_file(&config.out, &outputs.matches, &match_log)?;
        for (outcome, transcript) in r.outcomes.iter().zip(&r.transcripts) {
            let rel = format!("{arm_dir}/transcripts/seed-{}.jsonl", outcome.seed);
            write_file(&config.out, &rel, &transcript.to_jsonl()?)?;
            outputs.transcripts.push(rel);
        }
        manifest.arms.insert(r.arm.name.clone(), outputs);
    }

    let rows: Vec<ComparisonRow> = results
        .iter()
        .map(|r| ComparisonRow {
            label: r.arm.name.clone(),
            report: r.report.clone().expect("filled above"),
        })
        .collect();
    write_file(&config.out, "comparison.txt", &render_comparison(&rows))?;
    manifest.comparison = Some("comparison.txt".to_string());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(out: &Path) -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.out = out.to_path_buf();
        config.seeds = SeedRange { start: 0, count: 3 };
        config.store = StoreParams { capacity: 8, window: 4 };
        config.embedder.dimension = 32;
        config.run.parallelism = 1;
        config
    }

    #[test]
    fn arm_names_parse_to_the_documented_grammar() {
        let config = ExperimentConfig::default();
        assert_eq!(
            config.parse_arm("baseline").unwrap().kind,
            ArmKind::BaselineRolling(1)
        );
        assert_eq!(
            config.parse_arm("baseline-stateless").unwrap().kind,
            ArmKind::BaselineStateless
        );
        assert_eq!(
            config.parse_arm("baseline-rolling-4").unwrap().kind,
            ArmKind::BaselineRolling(4)
        );
        assert_eq!(
            config.parse_arm("memory-lru").unwrap().kind,
            ArmKind::Memory(PolicyKind::Lru)
        );
        assert_eq!(
            config.parse_arm("memory").unwrap().kind,
            ArmKind::Memory(PolicyKind::Relevance { window: 8 })
        );
        assert_eq!(
            config.parse_arm("memory-none").unwrap().kind,
            ArmKind::Memory(PolicyKind::None)
        );
        assert_eq!(config.parse_arm("full-history").unwrap().kind, ArmKind::FullHistory);
        assert!(config.parse_arm("baseline-rolling-0").is_err());
        assert!(config.parse_arm("baseline-rolling-x").is_err());
        assert!(config.parse_arm("mystery-arm").is_err());
    }

    #[test]
    fn config_validation_catches_degenerate_setups() {
        let mut config = ExperimentConfig::default();
        config.arms = vec![];
        assert!(config.validate().is_err());

        let mut config = ExperimentConfig::default();
        config.arms = vec!["memory".to_string(), "memory".to_string()];
        assert!(config.validate().is_err());

        let mut config = ExperimentConfig::default();
        config.seeds.count = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn toml_round_trip_covers_all_sections() {
        let text = r#"
            corpus = "builtin"
            out = "somewhere"
            arms = ["baseline-stateless", "memory-lru"]

            [seeds]
            start = 10
            count = 5

            [store]
            capacity = 16
            window = 4

            [policy]
            name = "lru"

            [embedder]
            dimension = 64

            [responder]
            backend = "echo"

            [baseline]
            kind = "stateless"

            [run]
            parallelism = 2
        "#;
        let config = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(config.seeds, SeedRange { start: 10, count: 5 });
        assert_eq!(config.store.capacity, 16);
        assert_eq!(config.embedder.dimension, 64);
        assert_eq!(config.run.parallelism, 2);
        assert_eq!(
            config.parse_arm("baseline").unwrap().kind,
            ArmKind::BaselineStateless
        );
        assert!(ExperimentConfig::from_toml_str("arms = [\"nope\"]").is_err());
        assert!(ExperimentConfig::from_toml_str("sections = \"unknown\"").is_err());
    }

    #[test]
    fn fingerprint_ignores_key_order_and_secrets_but_not_parameters() {
        let a = ExperimentConfig::from_toml_str(
            "corpus = \"builtin\"\n[seeds]\nstart = 3\ncount = 7\n[store]\ncapacity = 8\nwindow = 4\n",
        )
        .unwrap();
        let b = ExperimentConfig::from_toml_str(
            "corpus = \"builtin\"\n[store]\nwindow = 4\ncapacity = 8\n[seeds]\ncount = 7\nstart = 3\n",
        )
        .unwrap();
        assert_eq!(a.fingerprint().unwrap(), b.fingerprint().unwrap());

        let mut with_token = a.clone();
        with_token.embedder.token = Some("secret".to_string());
        assert_eq!(a.fingerprint().unwrap(), with_token.fingerprint().unwrap());

        let mut other = a.clone();
        other.store.capacity = 9;
        assert_ne!(a.fingerprint().unwrap(), other.fingerprint().unwrap());
    }

    #[test]
    fn tiny_experiment_produces_the_declared_file_tree() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        let manifest = run_experiment(&config).unwrap();
        assert!(manifest.complete);
        assert_eq!(manifest.arms.len(), 2);

        for outputs in manifest.arms.values() {
            let report_text =
                std::fs::read_to_string(dir.path().join(&outputs.report)).unwrap();
            let report: MetricReport = serde_json::from_str(&report_text).unwrap();
            report.validate().unwrap();
            assert!(std::fs::read_to_string(dir.path().join(&outputs.matches))
                .unwrap()
                .lines()
                .count() > 0);
            assert_eq!(outputs.transcripts.len(), 3);
            for t in &outputs.transcripts {
                let text = std::fs::read_to_string(dir.path().join(t)).unwrap();
                Transcript::from_jsonl("replay", "fp", &text).unwrap();
            }
        }

        // The baseline arm is scored against itself: transfer is exactly 0.
        let baseline_report: MetricReport = serde_json::from_str(
            &std::fs::read_to_string(
                dir.path().join(&manifest.arms["baseline-rolling-1"].report),
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(baseline_report.ptr_percent, 0.0);
        assert!(baseline_report.interaction_count > 0);

        let comparison = std::fs::read_to_string(
            dir.path().join(manifest.comparison.as_deref().unwrap()),
        )
        .unwrap();
        assert_eq!(comparison.lines().count(), 4);
        assert!(comparison.contains("memory-relevance"));

        let manifest_disk: RunManifest = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(manifest_disk.config_fingerprint, manifest.config_fingerprint);
    }

    #[test]
    fn failed_run_leaves_an_incomplete_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.corpus = dir.path().join("missing.json").display().to_string();
        assert!(run_experiment(&config).is_err());
        let manifest: RunManifest = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("manifest.json")).unwrap(),
        )
        .unwrap();
        assert!(!manifest.complete);
        assert!(manifest.error.is_some());
    }

    #[test]
    fn rerun_reproduces_transcripts_apart_from_latency() {
        let run_once = |dir: &Path| -> Vec<String> {
            let config = small_config(dir);
            let manifest = run_experiment(&config).unwrap();
            let mut normalized = Vec::new();
            for outputs in manifest.arms.values() {
                for rel in &outputs.transcripts {
                    let text = std::fs::read_to_string(dir.join(rel)).unwrap();
                    let mut t = Transcript::from_jsonl("replay", "fp", &text).unwrap();
                    for turn in t.turns.iter_mut() {
                        turn.latency_ms = 0.0;
                    }
                    normalized.push(t.to_jsonl().unwrap());
                }
            }
            normalized
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(run_once(a.path()), run_once(b.path()));
    }
}

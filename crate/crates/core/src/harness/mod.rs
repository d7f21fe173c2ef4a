//! The single-experiment protocol and the seeded batch runner.
//!
//! One experiment: pick an ROI, draw a stratified sample, split 75/25, train
//! on all 64 dimensions, rank dimensions by MDI, then retrain on the top-k
//! ranked dimensions for k = 1..=ablation_max_k on the same partition.

mod log;

use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use log::{canonicalize_log, read_log, timing_path, write_log, LogWriter, LOG_SCHEMA, LOG_VERSION};

use crate::data::{compute_metrics, DimensionId, LandCoverClass, MetricVector};
use crate::error::{Error, Result};
use crate::learners::{self, mdi_importance, Algorithm, Dataset, ImportanceVector, LearnerSettings};
use crate::parallel;
use crate::rng;
use crate::world::{draw_samples, sample_roi, Roi, SampleProvenance, WorldConfig};

/// Paper-silent protocol knobs shared by every experiment of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n_samples: usize,
    pub split_fraction: f64,
    pub ablation_max_k: usize,
    /// Learner families drawn uniformly per experiment.
    pub algorithms: Vec<Algorithm>,
    /// Retrain every ablation step with the baseline learner seed instead
    /// of a fresh per-k seed.
    pub reuse_learner_seed: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_samples: 1000,
            split_fraction: 0.75,
            ablation_max_k: 30,
            algorithms: Algorithm::ALL.to_vec(),
            reuse_learner_seed: false,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 || self.n_samples % 2 != 0 {
            return Err(Error::config("n_samples must be even and at least 2"));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::config("split_fraction must lie strictly between 0 and 1"));
        }
        if !(1..=crate::N_DIMS).contains(&self.ablation_max_k) {
            return Err(Error::config("ablation_max_k must be in 1..=64"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("at least one algorithm is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment_index: u64,
    pub target_class: LandCoverClass,
    pub algorithm: Algorithm,
    pub n_samples: usize,
    pub split_fraction: f64,
    pub ablation_max_k: usize,
    pub global_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::invalid("split_fraction must lie strictly between 0 and 1"));
        }
        if !(1..=crate::N_DIMS).contains(&self.ablation_max_k) {
            return Err(Error::invalid("ablation_max_k must be in 1..=64"));
        }
        Ok(())
    }

    fn seed(&self) -> u64 {
        rng::experiment_seed(self.global_seed, self.experiment_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    #[serde(flatten)]
    pub metrics: MetricVector,
}

/// Wall time per stage, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimes {
    pub sampling: f64,
    pub baseline: f64,
    pub ablation: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment_index: u64,
    pub target_class: LandCoverClass,
    pub algorithm: Algorithm,
    pub n_samples: usize,
    pub split_fraction: f64,
    pub ablation_max_k: usize,
    pub global_seed: u64,
    pub roi: Roi,
    pub provenance: SampleProvenance,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_reason: Option<String>,
    pub baseline: Option<MetricVector>,
    pub importance: Option<ImportanceVector>,
    pub mdi_ranking: Vec<DimensionId>,
    pub top2: Vec<DimensionId>,
    pub curve: Vec<CurvePoint>,
    /// Kept out of the results log so that logs are reproducible; see
    /// [`LogWriter`] for the timing sidecar.
    #[serde(skip)]
    pub wall_time_ms: StageTimes,
}

impl ExperimentRecord {
    fn invalid(config: &ExperimentConfig, roi: Roi, provenance: SampleProvenance, reason: String) -> Self {
        ExperimentRecord {
            experiment_index: config.experiment_index,
            target_class: config.target_class,
            algorithm: config.algorithm,
            n_samples: config.n_samples,
            split_fraction: config.split_fraction,
            ablation_max_k: config.ablation_max_k,
            global_seed: config.global_seed,
            roi,
            provenance,
            valid: false,
            invalid_reason: Some(reason),
            baseline: None,
            importance: None,
            mdi_ranking: Vec::new(),
            top2: Vec::new(),
            curve: Vec::new(),
            wall_time_ms: StageTimes::default(),
        }
    }

    /// Metrics at ablation step `k` (1-based).
    pub fn at_k(&self, k: usize) -> Option<&MetricVector> {
        self.curve.get(k.checked_sub(1)?).filter(|p| p.k == k).map(|p| &p.metrics)
    }
}

/// Per-class proportional split of row indices into (train, test).
///
/// The total train size is `round(fraction * n)`; per-class counts are
/// allocated by largest remainder with ties broken by `stream`. Every class
/// keeps at least one row on each side. Both outputs are sorted.
pub fn stratified_split(labels: &[bool], fraction: f64, stream: &mut rng::Stream) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("split fraction must lie strictly between 0 and 1"));
    }
    let mut groups: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        groups[l as usize].push(i);
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(Error::invalid("each class needs at least two samples to split"));
    }
    let n = labels.len();
    let total_train = (fraction * n as f64).round() as usize;
    let ideal: Vec<f64> = groups.iter().map(|g| fraction * g.len() as f64).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let mut order = [0usize, 1];
    order.shuffle(stream);
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - ideal[a].floor();
        let rb = ideal[b] - ideal[b].floor();
        rb.total_cmp(&ra)
    });
    let mut remaining = total_train.saturating_sub(counts.iter().sum());
    // two classes: at most one extra row each
    for &c in &order {
        if remaining > 0 && counts[c] < groups[c].len() {
            counts[c] += 1;
            remaining -= 1;
        }
    }
    let mut train = Vec::with_capacity(total_train);
    let mut test = Vec::with_capacity(n - total_train);
    for (group, &count) in groups.iter_mut().zip(&counts) {
        let count = count.clamp(1, group.len() - 1);
        group.shuffle(stream);
        train.extend_from_slice(&group[..count]);
        test.extend_from_slice(&group[count..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn evaluate(
    algorithm: Algorithm,
    learners: &LearnerSettings,
    train: &Dataset,
    train_labels: &[bool],
    test: &Dataset,
    test_labels: &[bool],
    seed: u64,
) -> Result<(learners::Model, MetricVector)> {
    let model = learners::train(algorithm, learners, train, train_labels, seed)?;
    let scores = model.predict_dataset(test);
    let metrics = compute_metrics(&scores, test_labels)?;
    Ok((model, metrics))
}

/// Run one experiment end to end.
///
/// Configuration errors are returned as `Err`; degenerate data produces a
/// record with `valid == false`.
pub fn run_experiment(
    config: &ExperimentConfig,
    learners: &LearnerSettings,
    world: &WorldConfig,
    reuse_learner_seed: bool,
) -> Result<ExperimentRecord> {
    config.validate()?;
    let start = Instant::now();
    let seed = config.seed();
    let target = config.target_class;

    let roi = sample_roi(world, target, &mut rng::stream(rng::derive(seed, rng::ROI)))?;
    let draw = match draw_samples(world, &roi, config.n_samples, target, &mut rng::stream(rng::derive(seed, rng::SAMPLES))) {
        Ok(d) => d,
        Err(Error::InvalidArgument(reason)) => {
            return Ok(ExperimentRecord::invalid(config, roi, SampleProvenance::default(), reason));
        }
        Err(e) => return Err(e),
    };
    let (all, labels) = Dataset::from_samples(&draw.samples, target);
    let (train_rows, test_rows) = match stratified_split(&labels, config.split_fraction, &mut rng::stream(rng::derive(seed, rng::SPLIT))) {
        Ok(split) => split,
        Err(Error::InvalidArgument(reason)) => {
            return Ok(ExperimentRecord::invalid(config, roi, draw.provenance, reason));
        }
        Err(e) => return Err(e),
    };
    let train = all.take_rows(&train_rows);
    let test = all.take_rows(&test_rows);
    let train_labels: Vec<bool> = train_rows.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<bool> = test_rows.iter().map(|&i| labels[i]).collect();
    let sampling_ms = ms_since(start);

    let t = Instant::now();
    let baseline_seed = rng::derive(seed, rng::BASELINE);
    let (model, baseline) = evaluate(config.algorithm, learners, &train, &train_labels, &test, &test_labels, baseline_seed)?;
    if model.is_degenerate() {
        return Ok(ExperimentRecord::invalid(config, roi, draw.provenance, "single-class training data".into()));
    }
    let importance = mdi_importance(&model);
    let ranking = importance.ranking();
    let baseline_ms = ms_since(t);

    let t = Instant::now();
    let mut curve = Vec::with_capacity(config.ablation_max_k);
    for k in 1..=config.ablation_max_k {
        let mut dims: Vec<usize> = ranking[..k].iter().map(|d| d.index()).collect();
        dims.sort_unstable();
        let k_seed = if reuse_learner_seed {
            baseline_seed
        } else {
            rng::derive_path(seed, &[rng::ABLATION, k as u64])
        };
        let (_, metrics) = evaluate(
            config.algorithm,
            learners,
            &train.select(&dims),
            &train_labels,
            &test.select(&dims),
            &test_labels,
            k_seed,
        )?;
        curve.push(CurvePoint { k, metrics });
    }
    let ablation_ms = ms_since(t);

    Ok(ExperimentRecord {
        experiment_index: config.experiment_index,
        target_class: target,
        algorithm: config.algorithm,
        n_samples: config.n_samples,
        split_fraction: config.split_fraction,
        ablation_max_k: config.ablation_max_k,
        global_seed: config.global_seed,
        roi,
        provenance: draw.provenance,
        valid: true,
        invalid_reason: None,
        baseline: Some(baseline),
        top2: ranking[..2].to_vec(),
        mdi_ranking: ranking,
        importance: Some(importance),
        curve,
        wall_time_ms: StageTimes { sampling: sampling_ms, baseline: baseline_ms, ablation: ablation_ms, total: ms_since(start) },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub targets: Vec<LandCoverClass>,
    pub per_class_count: usize,
    pub global_seed: u64,
    pub protocol: ProtocolConfig,
    pub learners: LearnerSettings,
}

/// Experiment `e` targets `targets[e % targets.len()]`; its algorithm is
/// drawn from the experiment's own stream.
pub fn schedule(spec: &BatchSpec) -> Vec<ExperimentConfig> {
    let total = spec.targets.len() * spec.per_class_count;
    (0..total as u64)
        .map(|e| {
            let target_class = spec.targets[e as usize % spec.targets.len()];
            let seed = rng::experiment_seed(spec.global_seed, e);
            let mut choice = rng::stream(rng::derive(seed, rng::ALGORITHM));
            let algorithm = spec.protocol.algorithms[choice.random_range(0..spec.protocol.algorithms.len())];
            ExperimentConfig {
                experiment_index: e,
                target_class,
                algorithm,
                n_samples: spec.protocol.n_samples,
                split_fraction: spec.protocol.split_fraction,
                ablation_max_k: spec.protocol.ablation_max_k,
                global_seed: spec.global_seed,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    /// Sorted by experiment index.
    pub records: Vec<ExperimentRecord>,
    pub n_invalid: usize,
}

/// Run every scheduled experiment with up to `parallelism` workers.
///
/// When `log_path` is given the log is created before any work starts,
/// records are appended as they finish, and the file is rewritten in
/// canonical (experiment index) order at the end.
pub fn run_batch(spec: &BatchSpec, world: &WorldConfig, parallelism: usize, log_path: Option<&Path>) -> Result<BatchOutcome> {
    world.validate()?;
    spec.protocol.validate()?;
    if spec.targets.is_empty() && spec.per_class_count > 0 {
        return Err(Error::config("no target classes"));
    }
    let sink = match log_path {
        Some(p) => Some(Mutex::new(LogWriter::create(p)?)),
        None => None,
    };
    let configs = if spec.per_class_count == 0 { Vec::new() } else { schedule(spec) };

    let results = parallel::map_indexed(&configs, parallelism.max(1), |config| {
        let record = run_experiment(config, &spec.learners, world, spec.protocol.reuse_learner_seed)?;
        if let Some(sink) = &sink {
            sink.lock().expect("log writer poisoned").append(&record)?;
        }
        Ok::<_, Error>(record)
    });
    let mut records = results.into_iter().collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| r.experiment_index);

    if let Some(sink) = sink {
        let writer = sink.into_inner().expect("log writer poisoned");
        writer.finish()?;
        if let Some(p) = log_path {
            canonicalize_log(p)?;
        }
    }
    let n_invalid = records.iter().filter(|r| !r.valid).count();
    Ok(BatchOutcome { records, n_invalid })
}

//! Hand-built results logs with known aggregates, for tests and examples.
//!
//! Records here are not produced by any learner: rankings, top-2 sets and
//! curves are written down directly, so every aggregate over them can be
//! worked out by hand.

use crate::analysis::{analyze, AnalysisBundle};
use crate::config::AnalysisSettings;
use crate::data::{DimensionId, LandCoverClass, MetricVector, N_DIMS};
use crate::harness::{CurvePoint, ExperimentRecord, StageTimes};
use crate::learners::{Algorithm, ImportanceVector};
use crate::world::{Roi, SampleProvenance};

/// Experiments per class in [`excerpt_log`].
pub const EXCERPT_EXPERIMENTS: usize = 10_000;

/// Dimensions (0-based) covered by [`EXCERPT`]: A01..A04 and A64.
pub const EXCERPT_DIMS: [usize; 5] = [0, 1, 2, 3, 63];

/// Reference top-2 frequencies for A01, A02, A03, A04 and A64.
pub const EXCERPT: [(LandCoverClass, [f64; 5]); 11] = [
    (LandCoverClass::BareSparse, [0.0267, 0.0223, 0.0350, 0.0167, 0.0409]),
    (LandCoverClass::BuiltUp, [0.0044, 0.1092, 0.0478, 0.0057, 0.0040]),
    (LandCoverClass::Cropland, [0.0163, 0.0266, 0.0564, 0.0369, 0.0179]),
    (LandCoverClass::Grassland, [0.0211, 0.0315, 0.0552, 0.0270, 0.0161]),
    (LandCoverClass::HerbaceousWetland, [0.0177, 0.0449, 0.0269, 0.1090, 0.0199]),
    (LandCoverClass::Mangroves, [0.0446, 0.0103, 0.0112, 0.0162, 0.0093]),
    (LandCoverClass::MossLichen, [0.0093, 0.0265, 0.0338, 0.0136, 0.0285]),
    (LandCoverClass::Shrubland, [0.0140, 0.0278, 0.0892, 0.0178, 0.0190]),
    (LandCoverClass::SnowIce, [0.0043, 0.0041, 0.1583, 0.0778, 0.0063]),
    (LandCoverClass::TreeCover, [0.0314, 0.0208, 0.0454, 0.0248, 0.0315]),
    (LandCoverClass::PermanentWater, [0.0381, 0.0983, 0.0659, 0.0180, 0.1386]),
];

fn metrics(accuracy: f64) -> MetricVector {
    MetricVector {
        accuracy,
        balanced_accuracy: accuracy,
        precision: accuracy,
        recall: accuracy,
        f1: accuracy,
        roc_auc: Some(accuracy),
        cohen_kappa: 2.0 * accuracy - 1.0,
        mcc: 2.0 * accuracy - 1.0,
    }
}

fn dim(i: usize) -> DimensionId {
    DimensionId::new(i).expect("index in range")
}

/// A valid record whose MDI ranking starts with `leading` (then the other
/// dimensions in index order) and whose curve is given per k.
pub fn record(
    index: u64,
    class: LandCoverClass,
    leading: &[usize],
    baseline: f64,
    curve: &[f64],
    center: (f64, f64),
) -> ExperimentRecord {
    let mut ranking: Vec<usize> = leading.to_vec();
    ranking.extend((0..N_DIMS).filter(|i| !leading.contains(i)));
    // Importances consistent with the ranking: strictly decreasing.
    let mut values = vec![0.0; N_DIMS];
    let total: f64 = (1..=N_DIMS).map(|r| r as f64).sum();
    for (pos, &d) in ranking.iter().enumerate() {
        values[d] = (N_DIMS - pos) as f64 / total;
    }
    let algorithm = Algorithm::ALL[index as usize % Algorithm::ALL.len()];
    ExperimentRecord {
        experiment_index: index,
        target_class: class,
        algorithm,
        n_samples: 1000,
        split_fraction: 0.75,
        ablation_max_k: curve.len(),
        global_seed: 0,
        roi: Roi {
            center_lon: center.0,
            center_lat: center.1,
            width: 0.5,
            height: 0.5,
            target_class: class,
            continent: 0,
            fallback_used: false,
        },
        provenance: SampleProvenance::default(),
        valid: true,
        invalid_reason: None,
        baseline: Some(metrics(baseline)),
        importance: Some(ImportanceVector { values }),
        mdi_ranking: ranking.iter().map(|&i| dim(i)).collect(),
        top2: ranking[..2].iter().map(|&i| dim(i)).collect(),
        curve: curve.iter().enumerate().map(|(i, &a)| CurvePoint { k: i + 1, metrics: metrics(a) }).collect(),
        wall_time_ms: StageTimes::default(),
    }
}

/// Top-2 slot counts per dimension for one excerpt row: the listed
/// frequencies exactly, the remaining slots spread evenly over A05..A63.
pub fn excerpt_counts(scores: &[f64; 5]) -> [u64; N_DIMS] {
    let n = EXCERPT_EXPERIMENTS as f64;
    let mut counts = [0u64; N_DIMS];
    for (&d, &s) in EXCERPT_DIMS.iter().zip(scores) {
        counts[d] = (s * n).round() as u64;
    }
    let used: u64 = counts.iter().sum();
    let rest = 2 * EXCERPT_EXPERIMENTS as u64 - used;
    let fillers: Vec<usize> = (4..63).collect();
    let (base, extra) = (rest / fillers.len() as u64, rest % fillers.len() as u64);
    for (j, &d) in fillers.iter().enumerate() {
        counts[d] = base + u64::from((j as u64) < extra);
    }
    counts
}

/// `EXCERPT_EXPERIMENTS` records per listed class whose top-2 sets
/// reproduce [`EXCERPT`].
pub fn excerpt_log(classes: &[LandCoverClass]) -> Vec<ExperimentRecord> {
    let mut log = Vec::new();
    for &class in classes {
        let Some((_, scores)) = EXCERPT.iter().find(|(c, _)| *c == class) else { continue };
        // Lay the slots out in dimension order and pair slot i with slot
        // i + n; no dimension fills more than n slots, so pairs never repeat.
        let slots: Vec<usize> = excerpt_counts(scores)
            .iter()
            .enumerate()
            .flat_map(|(d, &c)| std::iter::repeat_n(d, c as usize))
            .collect();
        let n = EXCERPT_EXPERIMENTS;
        for i in 0..n {
            let index = log.len() as u64;
            let lon = -10.0 + (i % 40) as f64 * 0.5;
            let lat = 35.0 + (i % 7) as f64;
            log.push(record(index, class, &[slots[i], slots[i + n]], 0.9, &[0.9], (lon, lat)));
        }
    }
    log
}

/// Minimum subsets of the frozen golden bundle, by class.
pub const GOLDEN_SUBSETS: [(LandCoverClass, &[usize]); 11] = [
    (LandCoverClass::TreeCover, &[11, 49, 2]),
    (LandCoverClass::Shrubland, &[5, 9, 14, 18, 23, 28, 30, 2]),
    (LandCoverClass::Grassland, &[16, 32, 6, 2]),
    (LandCoverClass::Cropland, &[4, 57, 6, 2]),
    (LandCoverClass::BuiltUp, &[8, 34, 1]),
    (LandCoverClass::BareSparse, &[20, 45, 1, 2]),
    (LandCoverClass::SnowIce, &[40]),
    (LandCoverClass::PermanentWater, &[63]),
    (LandCoverClass::HerbaceousWetland, &[3, 26, 22]),
    (LandCoverClass::Mangroves, &[0, 38, 22]),
    (LandCoverClass::MossLichen, &[13, 54]),
];

/// Three records per class. Each curve sits at 90% of its baseline below
/// the class's subset size and at the baseline from there on, so every
/// class tips exactly at its subset size.
pub fn golden_log() -> Vec<ExperimentRecord> {
    let max_k = 10;
    let mut log = Vec::new();
    for (ci, (class, subset)) in GOLDEN_SUBSETS.iter().enumerate() {
        for j in 0..3 {
            let baseline = 0.80 + 0.015 * ci as f64 + 0.01 * j as f64;
            let curve: Vec<f64> =
                (1..=max_k).map(|k| if k >= subset.len() { baseline } else { 0.9 * baseline }).collect();
            let center = (-60.0 + 7.3 * ci as f64 + 0.4 * j as f64, -20.0 + 3.1 * ci as f64);
            log.push(record(log.len() as u64, *class, subset, baseline, &curve, center));
        }
    }
    log
}

pub fn golden_bundle() -> AnalysisBundle {
    let settings = AnalysisSettings { heatmap_cell_deg: 5.0, ..Default::default() };
    analyze(&golden_log(), &settings).expect("golden log has valid experiments")
}

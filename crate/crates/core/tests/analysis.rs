use embedprobe::analysis::*;
use embedprobe::config::AnalysisSettings;
use embedprobe::fixture::{self, EXCERPT, EXCERPT_DIMS, EXCERPT_EXPERIMENTS};
use embedprobe::harness::{run_batch, BatchSpec, ProtocolConfig};
use embedprobe::learners::{ForestParams, GbtParams, LearnerSettings};
use embedprobe::world::WorldConfig;
use embedprobe::{DimensionId, LandCoverClass, Metric};

fn tiny_learners() -> LearnerSettings {
    LearnerSettings {
        forest: ForestParams { n_trees: 3, max_depth: 4, ..Default::default() },
        gbt: GbtParams { n_rounds: 3, max_depth: 2, ..Default::default() },
    }
}

fn planted_batch(per_class: usize, seed: u64, max_k: usize) -> Vec<embedprobe::harness::ExperimentRecord> {
    let spec = BatchSpec {
        targets: LandCoverClass::ALL.to_vec(),
        per_class_count: per_class,
        global_seed: seed,
        protocol: ProtocolConfig { n_samples: 60, ablation_max_k: max_k, ..Default::default() },
        learners: tiny_learners(),
    };
    run_batch(&spec, &WorldConfig::default_world(seed), 1, None).unwrap().records
}

#[test]
fn excerpt_row_is_reproduced() {
    let log = fixture::excerpt_log(&[LandCoverClass::BuiltUp]);
    assert_eq!(log.len(), EXCERPT_EXPERIMENTS);
    let m = build_association_matrix(&log);
    let row = m.row(LandCoverClass::BuiltUp).unwrap();
    assert_eq!(row.counts[1], 1092);
    assert_eq!(row.scores[1], 0.1092);
    assert_eq!(row.scores[0], 0.0044);
    assert_eq!(format!("{:.4}", row.scores[2]), "0.0478");
    assert_eq!(format!("{:.4}", row.scores[3]), "0.0057");
    assert_eq!(format!("{:.4}", row.scores[63]), "0.0040");
    assert!((row.sum() - 2.0).abs() < 1e-9);
}

#[test]
fn every_excerpt_row_is_reproduced() {
    let classes: Vec<_> = EXCERPT.iter().map(|(c, _)| *c).collect();
    let m = build_association_matrix(&fixture::excerpt_log(&classes));
    for (class, scores) in EXCERPT {
        let row = m.row(class).unwrap();
        for (&d, &s) in EXCERPT_DIMS.iter().zip(&scores) {
            assert_eq!(format!("{:.4}", row.scores[d]), format!("{s:.4}"), "{class} dim {d}");
        }
        assert!((row.sum() - 2.0).abs() < 1e-9);
    }
}

#[test]
fn row_sums_on_generated_logs() {
    for seed in 0..3 {
        let log = planted_batch(2, seed, 3);
        let m = build_association_matrix(&log);
        assert_eq!(m.rows.len(), 11);
        for row in &m.rows {
            assert!((row.sum() - 2.0).abs() < 1e-9, "seed {seed} {}", row.class);
        }
    }
}

#[test]
fn mean_curve_matches_direct_reaggregation() {
    let log = planted_batch(10, 5, 6);
    for class in LandCoverClass::ALL {
        let curve = ablation_mean_curve(&log, class, Metric::Accuracy).unwrap();
        let mine: Vec<_> = log.iter().filter(|r| r.valid && r.target_class == class).collect();
        for k in 1..=6 {
            let direct = mine.iter().map(|r| r.curve[k - 1].metrics.accuracy).sum::<f64>() / mine.len() as f64;
            assert!((curve.points[k - 1].mean.unwrap() - direct).abs() <= 0.02);
        }
        let base = mine.iter().map(|r| r.baseline.as_ref().unwrap().accuracy).sum::<f64>() / mine.len() as f64;
        assert!((curve.baseline_mean - base).abs() < 1e-12);
    }
}

#[test]
fn single_experiment_curve_is_identity() {
    let log = planted_batch(1, 9, 4);
    let r = &log[0];
    let c = ablation_mean_curve(&log, r.target_class, Metric::F1).unwrap();
    for p in &c.points {
        assert_eq!(p.mean, Some(r.at_k(p.k).unwrap().f1));
    }
}

#[test]
fn tipping_point_arithmetic() {
    let some = |v: &[f64]| v.iter().map(|&x| Some(x)).collect::<Vec<_>>();
    // First crossing.
    assert_eq!(first_crossing(&some(&[0.900, 0.920, 0.9310, 0.9400]), 0.950, 0.98).1, Some(3));
    // Never crossing.
    assert_eq!(first_crossing(&some(&[0.5, 0.6, 0.7]), 0.95, 0.98).1, None);
    // Exactly on the threshold counts as reaching it.
    let t = 0.98 * 0.8;
    assert_eq!(first_crossing(&some(&[0.7, t, 0.9]), 0.8, 0.98).1, Some(2));
    // Just below does not.
    assert_eq!(first_crossing(&some(&[0.7, t - 1e-9, 0.9]), 0.8, 0.98).1, Some(3));
    // Already at k = 1.
    assert_eq!(first_crossing(&some(&[0.99]), 0.9, 0.98).1, Some(1));
    // Above-baseline recovery.
    assert_eq!(first_crossing(&some(&[0.95, 0.951]), 0.95, 1.01).1, None);
}

#[test]
fn tipping_point_is_monotone_in_recovery() {
    let log = planted_batch(3, 2, 8);
    for class in LandCoverClass::ALL {
        let mut last = 0;
        for r in [0.5, 0.8, 0.9, 0.95, 0.98, 1.0, 1.05] {
            let tp = tipping_point(&log, class, Metric::Accuracy, r).unwrap();
            let k = tp.k_star.unwrap_or(usize::MAX);
            assert!(k >= last, "{class} r={r}");
            last = k;
            assert_eq!(tp.minimum_subset.len(), tp.k_star.unwrap_or(0));
        }
    }
}

#[test]
fn taxonomy_partitions_dimensions() {
    let bundle = fixture::golden_bundle();
    let tax = bundle.taxonomy.unwrap();
    let tps = bundle.tipping_points.unwrap();
    assert_eq!(tax.len(), 64);
    let supported: usize = tax.iter().map(|a| a.supporting_classes.len()).sum();
    assert_eq!(supported, tps.iter().filter_map(|t| t.k_star).sum::<usize>());
    let role = |label: &str| tax[label.parse::<DimensionId>().unwrap().index()].role;
    assert_eq!(role("A64"), Role::Specialist);
    assert_eq!(role("A07"), Role::LowGeneralist);
    assert_eq!(role("A03"), Role::HighGeneralist);
    assert_eq!(role("A60"), Role::Uninterpreted);
    for a in &tax {
        assert_eq!(a.role, Role::from_support(a.supporting_classes.len()));
    }
}

#[test]
fn golden_tipping_points_follow_construction() {
    let tps = fixture::golden_bundle().tipping_points.unwrap();
    for (class, subset) in fixture::GOLDEN_SUBSETS {
        let tp = tps.iter().find(|t| t.class == class).unwrap();
        assert_eq!(tp.k_star, Some(subset.len()));
        let got: Vec<usize> = tp.minimum_subset.iter().map(|d| d.index()).collect();
        assert_eq!(got, subset);
    }
}

#[test]
fn analysis_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = fixture::golden_bundle();
    write_analysis(dir.path(), &bundle).unwrap();
    let (back, missing) = read_analysis(dir.path()).unwrap();
    assert!(missing.is_empty());
    assert_eq!(back, bundle);
    let csv = std::fs::read_to_string(dir.path().join(files::MATRIX_CSV)).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("class,impA01,impA02"));
    assert!(header.ends_with("impA64"));
    assert_eq!(header.split(',').count(), 65);
}

#[test]
fn excerpt_matrix_csv_cell() {
    let dir = tempfile::tempdir().unwrap();
    let log = fixture::excerpt_log(&[LandCoverClass::BuiltUp]);
    let bundle = analyze(&log, &AnalysisSettings::default()).unwrap();
    write_analysis(dir.path(), &bundle).unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join(files::MATRIX_CSV)).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "impA02").unwrap();
    let row = rdr.records().next().unwrap().unwrap();
    assert_eq!(&row[0], "Built-up");
    assert_eq!(&row[col], "0.1092");
}

#[test]
fn exclusions_are_counted() {
    let mut log = planted_batch(1, 3, 2);
    log[0].valid = false;
    let s = summarize(&log, &AnalysisSettings::default());
    assert_eq!((s.valid_experiments, s.excluded_experiments), (10, 1));
    let cls = log[0].target_class;
    assert!(build_association_matrix(&log).row(cls).is_none());
}

//! Aggregates over a results log: the class-by-dimension association
//! matrix, mean ablation curves, tipping points with their minimum subsets,
//! the dimension taxonomy, and a lon/lat accuracy heatmap.
//!
//! Invalid experiments are left out of every aggregate and only show up as
//! exclusion counts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::AnalysisSettings;
use crate::data::{DimensionId, LandCoverClass, Metric, MetricVector, N_DIMS};
use crate::error::{Error, Result};
use crate::harness::ExperimentRecord;
use crate::learners::Algorithm;

/// Slack allowed when deciding that a mean "reaches" the threshold, so
/// that a curve sitting exactly on it is not lost to rounding.
pub const REACH_TOLERANCE: f64 = 1e-12;

/// Names of the files written by [`write_analysis`].
pub mod files {
    pub const SUMMARY: &str = "summary.json";
    pub const MATRIX_JSON: &str = "association_matrix.json";
    pub const MATRIX_CSV: &str = "association_matrix.csv";
    pub const CURVES_JSON: &str = "mean_curves.json";
    pub const TIPPING_JSON: &str = "tipping_points.json";
    pub const TIPPING_CSV: &str = "tipping_points.csv";
    pub const TAXONOMY_JSON: &str = "taxonomy.json";
    pub const TAXONOMY_CSV: &str = "taxonomy.csv";
    pub const HEATMAP_JSON: &str = "heatmap.json";
    pub const HEATMAP_CSV: &str = "heatmap.csv";
}

fn valid_for(log: &[ExperimentRecord], class: LandCoverClass) -> impl Iterator<Item = &ExperimentRecord> {
    log.iter().filter(move |r| r.valid && r.target_class == class)
}

// ---------------------------------------------------------------------------
// Association matrix

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRow {
    pub class: LandCoverClass,
    pub experiments: usize,
    /// Top-2 appearances per dimension.
    pub counts: Vec<u64>,
    /// `counts / experiments`.
    pub scores: Vec<f64>,
}

impl AssociationRow {
    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }
}

/// Rows only for classes with at least one valid experiment, in canonical
/// class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationMatrix {
    pub rows: Vec<AssociationRow>,
}

impl AssociationMatrix {
    pub fn row(&self, class: LandCoverClass) -> Option<&AssociationRow> {
        self.rows.iter().find(|r| r.class == class)
    }

    pub fn score(&self, class: LandCoverClass, dim: DimensionId) -> Option<f64> {
        self.row(class).map(|r| r.scores[dim.index()])
    }
}

pub fn build_association_matrix(log: &[ExperimentRecord]) -> AssociationMatrix {
    let rows = LandCoverClass::ALL
        .iter()
        .filter_map(|&class| {
            let mut counts = vec![0u64; N_DIMS];
            let mut experiments = 0;
            for r in valid_for(log, class) {
                experiments += 1;
                for d in &r.top2 {
                    counts[d.index()] += 1;
                }
            }
            (experiments > 0).then(|| AssociationRow {
                class,
                experiments,
                scores: counts.iter().map(|&c| c as f64 / experiments as f64).collect(),
                counts,
            })
        })
        .collect();
    AssociationMatrix { rows }
}

// ---------------------------------------------------------------------------
// Mean ablation curves

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanPoint {
    pub k: usize,
    /// `None` when every experiment was excluded at this k.
    pub mean: Option<f64>,
    pub n: usize,
    /// Experiments whose metric was not applicable at this k.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCurve {
    pub class: LandCoverClass,
    pub metric: Metric,
    pub experiments: usize,
    pub baseline_mean: f64,
    pub baseline_excluded: usize,
    pub points: Vec<MeanPoint>,
}

impl MeanCurve {
    pub fn means(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.mean).collect()
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize, usize) {
    let (mut sum, mut n, mut excluded) = (0.0, 0usize, 0usize);
    for v in values {
        match v {
            Some(v) => {
                sum += v;
                n += 1;
            }
            None => excluded += 1,
        }
    }
    ((n > 0).then(|| sum / n as f64), n, excluded)
}

pub fn ablation_mean_curve(log: &[ExperimentRecord], class: LandCoverClass, metric: Metric) -> Result<MeanCurve> {
    let records: Vec<_> = valid_for(log, class).collect();
    if records.is_empty() {
        return Err(Error::invalid(format!("no valid experiments for {class}")));
    }
    let (baseline, _, baseline_excluded) =
        mean_of(records.iter().map(|r| r.baseline.as_ref().and_then(|b| metric.of(b))));
    let baseline_mean = baseline
        .ok_or_else(|| Error::invalid(format!("{metric} is not applicable to any {class} baseline")))?;
    let max_k = records.iter().map(|r| r.curve.len()).max().unwrap_or(0);
    let points = (1..=max_k)
        .map(|k| {
            let (mean, n, excluded) = mean_of(records.iter().map(|r| r.at_k(k).and_then(|m| metric.of(m))));
            MeanPoint { k, mean, n, excluded }
        })
        .collect();
    Ok(MeanCurve { class, metric, experiments: records.len(), baseline_mean, baseline_excluded, points })
}

// ---------------------------------------------------------------------------
// Tipping points

/// First 1-based k with `curve[k-1] >= recovery * baseline`, with the
/// threshold. Missing means never qualify.
pub fn first_crossing(curve: &[Option<f64>], baseline: f64, recovery: f64) -> (f64, Option<usize>) {
    let threshold = recovery * baseline;
    let k = curve
        .iter()
        .position(|m| m.is_some_and(|m| m >= threshold - REACH_TOLERANCE))
        .map(|i| i + 1);
    (threshold, k)
}

fn serialize_k_star<S: Serializer>(k: &Option<usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match k {
        Some(k) => s.serialize_u64(*k as u64),
        None => s.serialize_str(NOT_REACHED),
    }
}

fn deserialize_k_star<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        K(usize),
        Tag(String),
    }
    match Raw::deserialize(d)? {
        Raw::K(k) => Ok(Some(k)),
        Raw::Tag(t) if t == NOT_REACHED => Ok(None),
        Raw::Tag(t) => Err(serde::de::Error::custom(format!("bad k_star {t:?}"))),
    }
}

pub const NOT_REACHED: &str = "not-reached";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TippingPoint {
    pub class: LandCoverClass,
    pub metric_name: Metric,
    pub recovery: f64,
    pub baseline_mean: f64,
    pub threshold: f64,
    #[serde(serialize_with = "serialize_k_star", deserialize_with = "deserialize_k_star")]
    pub k_star: Option<usize>,
    pub minimum_subset: Vec<DimensionId>,
    /// Fraction of the class's experiments ranking each subset dimension
    /// within positions 1..=k_star.
    pub subset_frequency: Vec<f64>,
    pub experiments: usize,
}

impl TippingPoint {
    pub fn k_star_label(&self) -> String {
        self.k_star.map_or_else(|| NOT_REACHED.to_string(), |k| k.to_string())
    }
}

/// The `k` dimensions most often ranked within positions 1..=k, ties going
/// to the higher mean MDI and then the lower index. Returns the dimensions
/// with their appearance frequencies.
pub fn consolidate_subset(records: &[&ExperimentRecord], k: usize) -> Vec<(DimensionId, f64)> {
    let mut freq = [0u64; N_DIMS];
    let mut mdi = [0.0f64; N_DIMS];
    for r in records {
        for d in r.mdi_ranking.iter().take(k) {
            freq[d.index()] += 1;
        }
        if let Some(imp) = &r.importance {
            for (m, v) in mdi.iter_mut().zip(&imp.values) {
                *m += v;
            }
        }
    }
    let mut order: Vec<usize> = (0..N_DIMS).collect();
    order.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then(mdi[b].total_cmp(&mdi[a])).then(a.cmp(&b)));
    let n = records.len().max(1) as f64;
    order
        .into_iter()
        .take(k)
        .map(|i| (DimensionId::new(i).expect("index in range"), freq[i] as f64 / n))
        .collect()
}

pub fn tipping_point(log: &[ExperimentRecord], class: LandCoverClass, metric: Metric, recovery: f64) -> Result<TippingPoint> {
    let curve = ablation_mean_curve(log, class, metric)?;
    Ok(tipping_point_from_curve(log, &curve, recovery))
}

fn tipping_point_from_curve(log: &[ExperimentRecord], curve: &MeanCurve, recovery: f64) -> TippingPoint {
    let (threshold, k_star) = first_crossing(&curve.means(), curve.baseline_mean, recovery);
    let (minimum_subset, subset_frequency) = match k_star {
        Some(k) => {
            let records: Vec<_> = valid_for(log, curve.class).collect();
            consolidate_subset(&records, k).into_iter().unzip()
        }
        None => (Vec::new(), Vec::new()),
    };
    TippingPoint {
        class: curve.class,
        metric_name: curve.metric,
        recovery,
        baseline_mean: curve.baseline_mean,
        threshold,
        k_star,
        minimum_subset,
        subset_frequency,
        experiments: curve.experiments,
    }
}

// ---------------------------------------------------------------------------
// Taxonomy

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Specialist,
    LowGeneralist,
    MidGeneralist,
    HighGeneralist,
    Uninterpreted,
}

impl Role {
    pub const ALL: [Role; 5] =
        [Role::Specialist, Role::LowGeneralist, Role::MidGeneralist, Role::HighGeneralist, Role::Uninterpreted];

    pub fn from_support(n_classes: usize) -> Role {
        match n_classes {
            0 => Role::Uninterpreted,
            1 => Role::Specialist,
            2 => Role::LowGeneralist,
            3 => Role::MidGeneralist,
            _ => Role::HighGeneralist,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Specialist => "specialist",
            Role::LowGeneralist => "low_generalist",
            Role::MidGeneralist => "mid_generalist",
            Role::HighGeneralist => "high_generalist",
            Role::Uninterpreted => "uninterpreted",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyAssignment {
    pub dimension: DimensionId,
    pub role: Role,
    /// Canonical class order.
    pub supporting_classes: Vec<LandCoverClass>,
}

/// One assignment per dimension, in dimension order. Classes that never
/// reached their threshold contribute nothing.
pub fn classify_dimensions(tipping_points: &[TippingPoint]) -> Vec<TaxonomyAssignment> {
    let mut support: Vec<Vec<LandCoverClass>> = vec![Vec::new(); N_DIMS];
    for tp in tipping_points {
        for d in &tp.minimum_subset {
            let s = &mut support[d.index()];
            if !s.contains(&tp.class) {
                s.push(tp.class);
            }
        }
    }
    DimensionId::all()
        .zip(support)
        .map(|(dimension, mut classes)| {
            classes.sort();
            TaxonomyAssignment { dimension, role: Role::from_support(classes.len()), supporting_classes: classes }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Heatmap

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    #[serde(rename = ">0.90")]
    High,
    #[serde(rename = "0.80-0.90")]
    Mid,
    #[serde(rename = "<0.80")]
    Low,
}

impl Band {
    /// Half-open bands: [0.90, 1] high, [0.80, 0.90) mid, below 0.80 low.
    /// A mean within `REACH_TOLERANCE` under a boundary counts as on it.
    pub fn of(accuracy: f64) -> Band {
        if accuracy >= 0.90 - REACH_TOLERANCE {
            Band::High
        } else if accuracy >= 0.80 - REACH_TOLERANCE {
            Band::Mid
        } else {
            Band::Low
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Band::High => ">0.90",
            Band::Mid => "0.80-0.90",
            Band::Low => "<0.80",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    /// `floor(lon / cell_deg)`.
    pub lon_index: i64,
    /// `floor(lat / cell_deg)`.
    pub lat_index: i64,
    pub mean_accuracy: f64,
    pub experiments: usize,
    pub band: Band,
}

/// Only cells with at least one experiment, ordered by (lat, lon) index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub cell_deg: f64,
    pub cells: Vec<HeatmapCell>,
}

impl Heatmap {
    pub fn cell(&self, lon_index: i64, lat_index: i64) -> Option<&HeatmapCell> {
        self.cells.iter().find(|c| c.lon_index == lon_index && c.lat_index == lat_index)
    }
}

pub fn geographic_heatmap(log: &[ExperimentRecord], cell_deg: f64) -> Result<Heatmap> {
    if !(cell_deg > 0.0 && cell_deg.is_finite()) {
        return Err(Error::invalid("cell size must be positive"));
    }
    let mut acc: BTreeMap<(i64, i64), (f64, usize)> = BTreeMap::new();
    for r in log.iter().filter(|r| r.valid) {
        let Some(b) = &r.baseline else { continue };
        let lon = (r.roi.center_lon / cell_deg).floor() as i64;
        let lat = (r.roi.center_lat / cell_deg).floor() as i64;
        let e = acc.entry((lat, lon)).or_insert((0.0, 0));
        e.0 += b.accuracy;
        e.1 += 1;
    }
    let cells = acc
        .into_iter()
        .map(|((lat_index, lon_index), (sum, n))| {
            let mean_accuracy = sum / n as f64;
            HeatmapCell { lon_index, lat_index, mean_accuracy, experiments: n, band: Band::of(mean_accuracy) }
        })
        .collect();
    Ok(Heatmap { cell_deg, cells })
}

// ---------------------------------------------------------------------------
// Summary and the full bundle

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub class: LandCoverClass,
    pub valid: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub experiments: usize,
    /// Mean baseline metric; `None` when no experiment had a value.
    pub mean_baseline: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total_experiments: usize,
    pub valid_experiments: usize,
    pub excluded_experiments: usize,
    pub per_class: Vec<ClassCount>,
    pub per_algorithm: Vec<AlgorithmSummary>,
    pub metric: Metric,
    pub recovery: f64,
}

pub fn summarize(log: &[ExperimentRecord], settings: &AnalysisSettings) -> Summary {
    let valid = log.iter().filter(|r| r.valid).count();
    let per_class = LandCoverClass::ALL
        .iter()
        .map(|&class| {
            let all = log.iter().filter(|r| r.target_class == class);
            let v = all.clone().filter(|r| r.valid).count();
            ClassCount { class, valid: v, excluded: all.count() - v }
        })
        .filter(|c| c.valid + c.excluded > 0)
        .collect();
    let per_algorithm = Algorithm::ALL
        .iter()
        .filter_map(|&algorithm| {
            let baselines: Vec<&MetricVector> = log
                .iter()
                .filter(|r| r.valid && r.algorithm == algorithm)
                .filter_map(|r| r.baseline.as_ref())
                .collect();
            if baselines.is_empty() {
                return None;
            }
            let mean_baseline = Metric::ALL
                .iter()
                .map(|m| (m.name().to_string(), mean_of(baselines.iter().map(|b| m.of(b))).0))
                .collect();
            Some(AlgorithmSummary { algorithm, experiments: baselines.len(), mean_baseline })
        })
        .collect();
    Summary {
        total_experiments: log.len(),
        valid_experiments: valid,
        excluded_experiments: log.len() - valid,
        per_class,
        per_algorithm,
        metric: settings.metric,
        recovery: settings.recovery,
    }
}

/// Everything the report renders. Each part is optional so that a report
/// can be built from an incomplete analysis directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisBundle {
    pub summary: Option<Summary>,
    pub matrix: Option<AssociationMatrix>,
    pub curves: Option<Vec<MeanCurve>>,
    pub tipping_points: Option<Vec<TippingPoint>>,
    pub taxonomy: Option<Vec<TaxonomyAssignment>>,
    pub heatmap: Option<Heatmap>,
}

pub fn analyze(log: &[ExperimentRecord], settings: &AnalysisSettings) -> Result<AnalysisBundle> {
    settings.validate()?;
    if !log.iter().any(|r| r.valid) {
        return Err(Error::invalid("no valid experiments"));
    }
    let matrix = build_association_matrix(log);
    let mut curves = Vec::new();
    let mut tipping_points = Vec::new();
    for row in &matrix.rows {
        match ablation_mean_curve(log, row.class, settings.metric) {
            Ok(curve) => {
                tipping_points.push(tipping_point_from_curve(log, &curve, settings.recovery));
                curves.push(curve);
            }
            // Metric not applicable anywhere for this class: leave it out.
            Err(Error::InvalidArgument(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let taxonomy = classify_dimensions(&tipping_points);
    Ok(AnalysisBundle {
        summary: Some(summarize(log, settings)),
        matrix: Some(matrix),
        curves: Some(curves),
        tipping_points: Some(tipping_points),
        taxonomy: Some(taxonomy),
        heatmap: Some(geographic_heatmap(log, settings.heatmap_cell_deg)?),
    })
}

// ---------------------------------------------------------------------------
// Files

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::file(&path, e))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| Error::file(&path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn join_dims(dims: &[DimensionId]) -> String {
    dims.iter().map(|d| d.label()).collect::<Vec<_>>().join(";")
}

pub fn write_matrix_csv(dir: &Path, matrix: &AssociationMatrix) -> Result<()> {
    let mut w = csv_writer(dir, files::MATRIX_CSV)?;
    let mut header = vec!["class".to_string()];
    header.extend(DimensionId::all().map(|d| format!("imp{}", d.label())));
    w.write_record(&header)?;
    for row in &matrix.rows {
        let mut rec = vec![row.class.name().to_string()];
        rec.extend(row.scores.iter().map(|s| s.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Write every present part of `bundle` into `dir` as JSON, plus CSV views
/// of the matrix, tipping points, taxonomy and heatmap.
pub fn write_analysis(dir: &Path, bundle: &AnalysisBundle) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    if let Some(s) = &bundle.summary {
        write_json(dir, files::SUMMARY, s)?;
    }
    if let Some(m) = &bundle.matrix {
        write_json(dir, files::MATRIX_JSON, m)?;
        write_matrix_csv(dir, m)?;
    }
    if let Some(c) = &bundle.curves {
        write_json(dir, files::CURVES_JSON, c)?;
    }
    if let Some(tps) = &bundle.tipping_points {
        write_json(dir, files::TIPPING_JSON, tps)?;
        let mut w = csv_writer(dir, files::TIPPING_CSV)?;
        w.write_record(["class", "metric", "experiments", "baseline_mean", "threshold", "k_star", "minimum_subset"])?;
        for tp in tps {
            w.write_record([
                tp.class.name().to_string(),
                tp.metric_name.name().to_string(),
                tp.experiments.to_string(),
                tp.baseline_mean.to_string(),
                tp.threshold.to_string(),
                tp.k_star_label(),
                join_dims(&tp.minimum_subset),
            ])?;
        }
        w.flush()?;
    }
    if let Some(tax) = &bundle.taxonomy {
        write_json(dir, files::TAXONOMY_JSON, tax)?;
        let mut w = csv_writer(dir, files::TAXONOMY_CSV)?;
        w.write_record(["dimension", "role", "n_classes", "supporting_classes"])?;
        for a in tax {
            let classes: Vec<_> = a.supporting_classes.iter().map(|c| c.name()).collect();
            w.write_record([
                a.dimension.label(),
                a.role.name().to_string(),
                a.supporting_classes.len().to_string(),
                classes.join(";"),
            ])?;
        }
        w.flush()?;
    }
    if let Some(h) = &bundle.heatmap {
        write_json(dir, files::HEATMAP_JSON, h)?;
        let mut w = csv_writer(dir, files::HEATMAP_CSV)?;
        w.write_record(["lon_min", "lat_min", "cell_deg", "experiments", "mean_accuracy", "band"])?;
        for c in &h.cells {
            w.write_record([
                (c.lon_index as f64 * h.cell_deg).to_string(),
                (c.lat_index as f64 * h.cell_deg).to_string(),
                h.cell_deg.to_string(),
                c.experiments.to_string(),
                c.mean_accuracy.to_string(),
                c.band.label().to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn read_part<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str, missing: &mut Vec<String>) -> Result<Option<T>> {
    let path = dir.join(name);
    match fs::read_to_string(&path) {
        Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            missing.push(name.to_string());
            Ok(None)
        }
        Err(e) => Err(Error::file(&path, e)),
    }
}

/// Load whatever parts of an analysis directory exist. The second value
/// lists the files that were missing.
pub fn read_analysis(dir: &Path) -> Result<(AnalysisBundle, Vec<String>)> {
    let mut missing = Vec::new();
    let bundle = AnalysisBundle {
        summary: read_part(dir, files::SUMMARY, &mut missing)?,
        matrix: read_part(dir, files::MATRIX_JSON, &mut missing)?,
        curves: read_part(dir, files::CURVES_JSON, &mut missing)?,
        tipping_points: read_part(dir, files::TIPPING_JSON, &mut missing)?,
        taxonomy: read_part(dir, files::TAXONOMY_JSON, &mut missing)?,
        heatmap: read_part(dir, files::HEATMAP_JSON, &mut missing)?,
    };
    Ok((bundle, missing))
}

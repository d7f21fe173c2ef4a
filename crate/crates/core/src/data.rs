//! Shared vocabulary: land cover classes, embedding dimensions, samples and
//! binary classification metrics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const N_DIMS: usize = 64;
pub const N_CLASSES: usize = 11;

/// ESA WorldCover land cover categories, in canonical id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LandCoverClass {
    TreeCover,
    Shrubland,
    Grassland,
    Cropland,
    BuiltUp,
    BareSparse,
    SnowIce,
    PermanentWater,
    HerbaceousWetland,
    Mangroves,
    MossLichen,
}

impl LandCoverClass {
    pub const ALL: [LandCoverClass; N_CLASSES] = [
        LandCoverClass::TreeCover,
        LandCoverClass::Shrubland,
        LandCoverClass::Grassland,
        LandCoverClass::Cropland,
        LandCoverClass::BuiltUp,
        LandCoverClass::BareSparse,
        LandCoverClass::SnowIce,
        LandCoverClass::PermanentWater,
        LandCoverClass::HerbaceousWetland,
        LandCoverClass::Mangroves,
        LandCoverClass::MossLichen,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LandCoverClass::TreeCover => "Tree cover",
            LandCoverClass::Shrubland => "Shrubland",
            LandCoverClass::Grassland => "Grassland",
            LandCoverClass::Cropland => "Cropland",
            LandCoverClass::BuiltUp => "Built-up",
            LandCoverClass::BareSparse => "Bare/sparse vegetation",
            LandCoverClass::SnowIce => "Snow/ice",
            LandCoverClass::PermanentWater => "Permanent water bodies",
            LandCoverClass::HerbaceousWetland => "Herbaceous wetland",
            LandCoverClass::Mangroves => "Mangroves",
            LandCoverClass::MossLichen => "Moss/lichen",
        }
    }

    /// Native raster code in the WorldCover product. Metadata only.
    pub fn worldcover_code(self) -> u8 {
        match self {
            LandCoverClass::TreeCover => 10,
            LandCoverClass::Shrubland => 20,
            LandCoverClass::Grassland => 30,
            LandCoverClass::Cropland => 40,
            LandCoverClass::BuiltUp => 50,
            LandCoverClass::BareSparse => 60,
            LandCoverClass::SnowIce => 70,
            LandCoverClass::PermanentWater => 80,
            LandCoverClass::HerbaceousWetland => 90,
            LandCoverClass::Mangroves => 95,
            LandCoverClass::MossLichen => 100,
        }
    }

    pub(crate) fn bit(self) -> u16 {
        1 << self.id()
    }
}

impl fmt::Display for LandCoverClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LandCoverClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown land cover class {s:?}")))
    }
}

impl Serialize for LandCoverClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for LandCoverClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One of the 64 embedding coordinates, labelled `A01`..`A64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DimensionId(u8);

impl DimensionId {
    pub fn new(index: usize) -> Result<Self> {
        if index < N_DIMS {
            Ok(DimensionId(index as u8))
        } else {
            Err(Error::invalid(format!("dimension index {index} outside 0..{N_DIMS}")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> String {
        format!("A{:02}", self.0 + 1)
    }

    pub fn all() -> impl Iterator<Item = DimensionId> {
        (0..N_DIMS as u8).map(DimensionId)
    }
}

/// Canonical label for a dimension index.
pub fn dimension_label(index: usize) -> Result<String> {
    DimensionId::new(index).map(DimensionId::label)
}

/// Inverse of [`dimension_label`]. Accepts exactly `A01`..`A64`.
pub fn parse_dimension_label(label: &str) -> Result<DimensionId> {
    let bad = || Error::invalid(format!("malformed dimension label {label:?}"));
    let digits = label.strip_prefix('A').ok_or_else(bad)?;
    if digits.len() != 2 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let n: usize = digits.parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    DimensionId::new(n - 1)
}

impl fmt::Display for DimensionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{:02}", self.0 + 1)
    }
}

impl FromStr for DimensionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_dimension_label(s)
    }
}

impl Serialize for DimensionId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for DimensionId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A 64-component embedding vector with its land cover label.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSample {
    pub features: [f64; N_DIMS],
    pub label: LandCoverClass,
}

impl EmbeddingSample {
    pub fn new(features: &[f64], label: LandCoverClass) -> Result<Self> {
        if features.len() != N_DIMS {
            return Err(Error::invalid(format!(
                "expected {N_DIMS} features, got {}",
                features.len()
            )));
        }
        if let Some(j) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value in {}", DimensionId(j as u8))));
        }
        let mut arr = [0.0; N_DIMS];
        arr.copy_from_slice(features);
        Ok(EmbeddingSample { features: arr, label })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_labels(predicted: &[bool], truths: &[bool]) -> Self {
        let mut c = ConfusionCounts::default();
        for (&p, &t) in predicted.iter().zip(truths) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Same counts with the positive and negative labels exchanged.
    pub fn swapped(&self) -> Self {
        ConfusionCounts { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp }
    }
}

/// The eight binary classification metrics recorded for every model.
///
/// `roc_auc` is `None` when the truths contain a single class; it is
/// serialized as the string `"not-applicable"`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricVector {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(with = "auc_serde")]
    pub roc_auc: Option<f64>,
    pub cohen_kappa: f64,
    pub mcc: f64,
}

mod auc_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub const NOT_APPLICABLE: &str = "not-applicable";

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str(NOT_APPLICABLE),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Some(x)),
            Raw::Text(t) if t == NOT_APPLICABLE => Ok(None),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad roc_auc value {t:?}"))),
        }
    }
}

/// Selector for one field of a [`MetricVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    BalancedAccuracy,
    Precision,
    Recall,
    F1,
    RocAuc,
    CohenKappa,
    Mcc,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Accuracy,
        Metric::BalancedAccuracy,
        Metric::Precision,
        Metric::Recall,
        Metric::F1,
        Metric::RocAuc,
        Metric::CohenKappa,
        Metric::Mcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::BalancedAccuracy => "balanced_accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::RocAuc => "roc_auc",
            Metric::CohenKappa => "cohen_kappa",
            Metric::Mcc => "mcc",
        }
    }

    /// `None` only for a not-applicable ROC-AUC.
    pub fn of(self, m: &MetricVector) -> Option<f64> {
        match self {
            Metric::Accuracy => Some(m.accuracy),
            Metric::BalancedAccuracy => Some(m.balanced_accuracy),
            Metric::Precision => Some(m.precision),
            Metric::Recall => Some(m.recall),
            Metric::F1 => Some(m.f1),
            Metric::RocAuc => m.roc_auc,
            Metric::CohenKappa => Some(m.cohen_kappa),
            Metric::Mcc => Some(m.mcc),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric {s:?}")))
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricVector {
    /// Threshold-based metrics from confusion counts; `roc_auc` is left unset.
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let n = c.total() as f64;
        let accuracy = ratio(c.tp + c.tn, c.total());
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let specificity = ratio(c.tn, c.tn + c.fp);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let balanced_accuracy = match (c.tp + c.fn_, c.tn + c.fp) {
            (0, _) => specificity,
            (_, 0) => recall,
            _ => (recall + specificity) / 2.0,
        };

        let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
        let expected = ((tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn)) / (n * n);
        let cohen_kappa = if n == 0.0 || expected >= 1.0 {
            0.0
        } else {
            (accuracy - expected) / (1.0 - expected)
        };
        let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        let mcc = if den == 0.0 { 0.0 } else { (tp * tn - fp * fn_) / den };

        MetricVector {
            accuracy,
            balanced_accuracy,
            precision,
            recall,
            f1,
            roc_auc: None,
            cohen_kappa,
            mcc,
        }
    }
}

/// Area under the ROC curve via the Mann-Whitney statistic with average
/// ranks for tied scores. `None` if either class is missing.
pub fn roc_auc(scores: &[f64], truths: &[bool]) -> Option<f64> {
    let n_pos = truths.iter().filter(|&&t| t).count();
    let n_neg = truths.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their average
        let avg_rank = (i + j + 2) as f64 / 2.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| truths[k]).count();
        pos_rank_sum += avg_rank * tied_pos as f64;
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// All eight metrics for positive-class scores against binary truths.
/// Hard labels are `score >= 0.5`.
pub fn compute_metrics(scores: &[f64], truths: &[bool]) -> Result<MetricVector> {
    if scores.is_empty() {
        return Err(Error::invalid("no predictions to evaluate"));
    }
    if scores.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} predictions but {} truths",
            scores.len(),
            truths.len()
        )));
    }
    let predicted: Vec<bool> = scores.iter().map(|&s| s >= 0.5).collect();
    let counts = ConfusionCounts::from_labels(&predicted, truths);
    let mut m = MetricVector::from_counts(&counts);
    m.roc_auc = roc_auc(scores, truths);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn class_table_is_a_bijection() {
        for (i, c) in LandCoverClass::ALL.iter().enumerate() {
            assert_eq!(c.id(), i);
            assert_eq!(LandCoverClass::from_id(i), Some(*c));
            assert_eq!(c.name().parse::<LandCoverClass>().unwrap(), *c);
        }
        let mut names: Vec<_> = LandCoverClass::ALL.iter().map(|c| c.name()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), N_CLASSES);
        assert!("Ocean".parse::<LandCoverClass>().is_err());
    }

    #[test]
    fn dimension_labels() {
        assert_eq!(dimension_label(0).unwrap(), "A01");
        assert_eq!(dimension_label(63).unwrap(), "A64");
        assert_eq!(dimension_label(8).unwrap(), "A09");
        assert!(dimension_label(64).is_err());
        for bad in ["A00", "A65", "A1", "B01", "A001", "a01", ""] {
            assert!(parse_dimension_label(bad).is_err(), "{bad}");
        }
        for i in 0..N_DIMS {
            let label = dimension_label(i).unwrap();
            assert_eq!(parse_dimension_label(&label).unwrap().index(), i);
        }
    }

    #[test]
    fn sample_validation() {
        assert!(EmbeddingSample::new(&[0.0; 63], LandCoverClass::Cropland).is_err());
        let mut v = [0.0; 64];
        v[5] = f64::NAN;
        assert!(EmbeddingSample::new(&v, LandCoverClass::Cropland).is_err());
        v[5] = 1.0;
        assert!(EmbeddingSample::new(&v, LandCoverClass::Cropland).is_ok());
    }

    #[test]
    fn perfect_classifier() {
        let truths = [true, false, true, false];
        let scores = [1.0, 0.0, 1.0, 0.0];
        let m = compute_metrics(&scores, &truths).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.f1, 1.0);
        assert_eq!(m.mcc, 1.0);
        assert_eq!(m.cohen_kappa, 1.0);
        assert_eq!(m.roc_auc, Some(1.0));
    }

    #[test]
    fn symmetric_confusion() {
        let c = ConfusionCounts { tp: 1, fp: 1, tn: 1, fn_: 1 };
        let m = MetricVector::from_counts(&c);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 0.5);
        assert_eq!(m.f1, 0.5);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.mcc, 0.0);
    }

    #[test]
    fn ranked_scores_auc() {
        let m = compute_metrics(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(m.roc_auc, Some(1.0));
        assert_eq!(roc_auc(&[0.5, 0.5], &[true, false]), Some(0.5));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(compute_metrics(&[], &[]).is_err());
        assert!(compute_metrics(&[0.1], &[true, false]).is_err());
        let m = compute_metrics(&[0.1, 0.2], &[false, false]).unwrap();
        assert_eq!(m.roc_auc, None);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn not_applicable_round_trips() {
        let m = compute_metrics(&[0.1, 0.2], &[false, false]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"roc_auc\":\"not-applicable\""));
        let back: MetricVector = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn metrics_are_order_invariant(
            pairs in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let (s, t): (Vec<f64>, Vec<bool>) = pairs.iter().copied().unzip();
            let a = compute_metrics(&s, &t).unwrap();
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut crate::rng::stream(seed));
            let (s2, t2): (Vec<f64>, Vec<bool>) = shuffled.into_iter().unzip();
            let b = compute_metrics(&s2, &t2).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn label_swap_symmetry(tp in 0usize..30, fp in 0usize..30, tn in 0usize..30, fn_ in 0usize..30) {
            prop_assume!(tp + fp + tn + fn_ > 0);
            let c = ConfusionCounts { tp, fp, tn, fn_ };
            let a = MetricVector::from_counts(&c);
            let b = MetricVector::from_counts(&c.swapped());
            let npv = if tn + fn_ == 0 { 0.0 } else { tn as f64 / (tn + fn_) as f64 };
            prop_assert!((b.precision - npv).abs() < 1e-12);
            prop_assert!((a.accuracy - b.accuracy).abs() < 1e-12);
            prop_assert!((a.mcc.abs() - b.mcc.abs()).abs() < 1e-12);
        }

        #[test]
        fn metric_ranges(tp in 0usize..30, fp in 0usize..30, tn in 0usize..30, fn_ in 0usize..30) {
            prop_assume!(tp + fp + tn + fn_ > 0);
            let m = MetricVector::from_counts(&ConfusionCounts { tp, fp, tn, fn_ });
            for v in [m.accuracy, m.balanced_accuracy, m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&m.mcc));
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&m.cohen_kappa));
        }
    }
}

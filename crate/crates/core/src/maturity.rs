//! Region-level maturity: confidence aggregation, threshold training,
//! binary classification, model persistence and evaluation metrics.
//!
//! Polarity follows the confusion-matrix convention used throughout:
//! positive = immature. A region is classified immature when its confidence
//! is greater than or equal to the threshold (boundary inclusive).

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::RegionSet;
use crate::unmixing::{EndmemberSet, ProportionMap};

/// Binary maturity outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Maturity {
    Mature,
    Immature,
}

impl fmt::Display for Maturity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Maturity::Mature => "mature",
            Maturity::Immature => "immature",
        })
    }
}

impl FromStr for Maturity {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mature" => Ok(Maturity::Mature),
            "immature" => Ok(Maturity::Immature),
            other => Err(format!("unknown maturity class '{other}'")),
        }
    }
}

/// Mean immature proportion over one region's valid pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionConfidence {
    pub region: u32,
    pub confidence: f64,
    pub pixel_count: usize,
}

/// Statistic used to aggregate pixel proportions into a region confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

impl FromStr for Aggregation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            other => Err(format!("unknown aggregation '{other}'")),
        }
    }
}

/// Aggregate the immature-class proportion of every region into one
/// confidence value per region.
pub fn aggregate_confidence(
    props: &ProportionMap,
    regions: &RegionSet,
    immature_class: &str,
) -> Result<Vec<RegionConfidence>> {
    aggregate_confidence_with(props, regions, immature_class, Aggregation::Mean)
}

pub fn aggregate_confidence_with(
    props: &ProportionMap,
    regions: &RegionSet,
    immature_class: &str,
    aggregation: Aggregation,
) -> Result<Vec<RegionConfidence>> {
    let class = props
        .class_index(immature_class)
        .ok_or_else(|| Error::UnknownClass(immature_class.into()))?;
    let m = props.classes();
    let r = regions.region_count();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); r];
    for (i, &label) in regions.label_map.iter().enumerate() {
        if label == 0 {
            continue;
        }
        if props.valid[i] {
            values[(label - 1) as usize].push(props.proportions[i * m + class]);
        }
    }
    let mut out = Vec::with_capacity(r);
    for (idx, mut vs) in values.into_iter().enumerate() {
        let region = idx as u32 + 1;
        if vs.is_empty() {
            return Err(Error::EmptyRegion(region));
        }
        let confidence = match aggregation {
            Aggregation::Mean => vs.iter().sum::<f64>() / vs.len() as f64,
            Aggregation::Median => {
                vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let n = vs.len();
                if n % 2 == 1 {
                    vs[n / 2]
                } else {
                    0.5 * (vs[n / 2 - 1] + vs[n / 2])
                }
            }
        };
        out.push(RegionConfidence {
            region,
            confidence,
            pixel_count: vs.len(),
        });
    }
    Ok(out)
}

/// The searched threshold grid: 0.01, 0.02, ..., 0.99.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (1..=99).map(|i| i as f64 / 100.0)
}

/// Misclassification count at `tau` under "immature iff c >= tau":
/// `FP` matures predicted immature plus `FN` immatures predicted mature.
pub fn errors_at(samples: &[(f64, Maturity)], tau: f64) -> usize {
    samples
        .iter()
        .filter(|(c, label)| match label {
            Maturity::Mature => *c >= tau,
            Maturity::Immature => *c < tau,
        })
        .count()
}

/// Pick the threshold minimising `FP + FN` over the 99-point grid, smallest
/// minimiser on ties.
pub fn train_threshold(samples: &[(f64, Maturity)]) -> Result<f64> {
    let has = |class| samples.iter().any(|(_, l)| *l == class);
    if !has(Maturity::Mature) {
        return Err(Error::SingleClass("immature".into()));
    }
    if !has(Maturity::Immature) {
        return Err(Error::SingleClass("mature".into()));
    }
    let mut best_tau = 0.01;
    let mut best_err = usize::MAX;
    for tau in threshold_grid() {
        let e = errors_at(samples, tau);
        if e < best_err {
            best_err = e;
            best_tau = tau;
        }
    }
    Ok(best_tau)
}

/// Classify each region: immature iff `confidence >= tau`.
pub fn classify(confidences: &[RegionConfidence], tau: f64) -> Vec<(u32, Maturity)> {
    confidences
        .iter()
        .map(|rc| {
            let pred = if rc.confidence >= tau {
                Maturity::Immature
            } else {
                Maturity::Mature
            };
            (rc.region, pred)
        })
        .collect()
}

/// Confusion counts with positive = immature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    pub fn tally(pairs: impl IntoIterator<Item = (Maturity, Maturity)>) -> Self {
        let mut c = ConfusionCounts::default();
        for (actual, predicted) in pairs {
            match (actual, predicted) {
                (Maturity::Immature, Maturity::Immature) => c.true_pos += 1,
                (Maturity::Mature, Maturity::Mature) => c.true_neg += 1,
                (Maturity::Mature, Maturity::Immature) => c.false_pos += 1,
                (Maturity::Immature, Maturity::Mature) => c.false_neg += 1,
            }
        }
        c
    }
}

/// Derived classification metrics; `None` marks an undefined value (zero
/// denominator), which is distinct from 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

pub fn compute_metrics(c: &ConfusionCounts) -> Metrics {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    let recall = ratio(c.true_pos, c.true_pos + c.false_neg);
    let specificity = ratio(c.true_neg, c.true_neg + c.false_pos);
    Metrics {
        accuracy: ratio(c.true_pos + c.true_neg, c.total()),
        precision: ratio(c.true_pos, c.true_pos + c.false_pos),
        recall,
        specificity,
        balanced_accuracy: match (recall, specificity) {
            (Some(r), Some(s)) => Some(0.5 * (r + s)),
            _ => None,
        },
    }
}

/// Persisted artifact of training: endmembers, analysis band range,
/// classification threshold and the smoothing configuration that produced the
/// training cubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub endmembers: EndmemberSet,
    pub band_range_nm: (f64, f64),
    pub tau: f64,
    pub sg_order: usize,
    pub sg_width: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_id: String,
    pub date: String,
}

const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

/// Write the model as versioned, human-diffable TOML with full-precision
/// numbers.
pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = ModelFile {
        version: MODEL_VERSION,
        model: model.clone(),
    };
    let text = toml::to_string_pretty(&file).map_err(|e| Error::ModelFormat {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    // check the version before a full parse so a newer file fails cleanly
    let probe: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::ModelFormat {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    match probe.get("version").and_then(|v| v.as_integer()) {
        Some(v) if v == MODEL_VERSION as i64 => {}
        Some(v) => {
            return Err(Error::ModelVersion {
                path: path.to_path_buf(),
                found: v as u32,
                expected: MODEL_VERSION,
            })
        }
        None => {
            return Err(Error::ModelFormat {
                path: path.to_path_buf(),
                msg: "missing version".into(),
            })
        }
    }
    let file: ModelFile = toml::from_str(&text).map_err(|e| Error::ModelFormat {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    Ok(file.model)
}

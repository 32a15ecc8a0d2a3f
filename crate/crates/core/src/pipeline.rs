//! End-to-end orchestration: training (preprocess, segment, endmember
//! estimation, unmixing, confidence aggregation, threshold search) and
//! classification of new scenes with a trained model, plus the report
//! structures both phases emit.

use std::collections::BTreeMap;

use crate::cube::{crop_bands, savgol_smooth, HyperCube};
use crate::error::{Error, Result};
use crate::maturity::{
    aggregate_confidence_with, classify, compute_metrics, errors_at, threshold_grid,
    train_threshold, Aggregation, ConfusionCounts, Maturity, Metrics, Provenance, RegionConfidence,
    TrainedModel,
};
use crate::segmentation::{
    extract_rgb, kmeans2, segment_regions, Connectivity, ForegroundRule, RegionSet,
    DEFAULT_RGB_NM,
};
use crate::unmixing::{
    estimate_endmembers, unmix_regions, LabelGrouping, LabeledRegionSpectra, ProportionMap,
};

pub const IMMATURE_CLASS: &str = "immature";

/// Shared pipeline configuration; defaults reproduce the reference setup
/// (650-1000 nm analysis range, SG order 4 / width 25).
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub band_range_nm: (f64, f64),
    pub sg_order: usize,
    pub sg_width: usize,
    /// Apply Savitzky-Golay smoothing before analysis. Disable when the
    /// input cubes are already smoothed (e.g. produced by the calibrate
    /// command).
    pub smooth: bool,
    pub rgb_nm: (f64, f64, f64),
    pub kmeans_seed: u64,
    pub kmeans_max_iter: usize,
    pub foreground: ForegroundRule,
    pub min_region_area: usize,
    pub connectivity: Connectivity,
    pub grouping: LabelGrouping,
    pub aggregation: Aggregation,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            band_range_nm: (650.0, 1000.0),
            sg_order: 4,
            sg_width: 25,
            smooth: true,
            rgb_nm: DEFAULT_RGB_NM,
            kmeans_seed: 0,
            kmeans_max_iter: 100,
            foreground: ForegroundRule::Minority,
            min_region_area: 50,
            connectivity: Connectivity::Eight,
            grouping: LabelGrouping::default_colors(),
            aggregation: Aggregation::Mean,
        }
    }
}

/// One training input: a calibrated reflectance cube plus per-region colour
/// labels keyed by the region ids segmentation will assign (row-major
/// discovery order).
#[derive(Debug, Clone)]
pub struct LabelEntry {
    pub color: String,
    pub cultivar: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrainingScene {
    pub cube: HyperCube,
    pub labels: BTreeMap<u32, LabelEntry>,
}

/// Per-region record of a training or evaluation run.
#[derive(Debug, Clone)]
pub struct RegionRecord {
    pub scene: usize,
    pub region: u32,
    pub color: Option<String>,
    pub cultivar: Option<String>,
    pub class: Option<Maturity>,
    pub confidence: f64,
    pub pixel_count: usize,
    pub predicted: Maturity,
}

/// Histogram of confidences per true colour label, bins of width 0.05.
#[derive(Debug, Clone)]
pub struct ConfidenceHistogram {
    pub bin_edges: Vec<f64>,
    /// colour -> count per bin
    pub series: BTreeMap<String, Vec<usize>>,
}

pub fn confidence_histogram(records: &[RegionRecord]) -> ConfidenceHistogram {
    let bins = 20;
    let bin_edges: Vec<f64> = (0..=bins).map(|i| i as f64 * 0.05).collect();
    let mut series: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for r in records {
        let Some(color) = &r.color else { continue };
        let bin = ((r.confidence / 0.05).floor() as usize).min(bins - 1);
        series.entry(color.clone()).or_insert_with(|| vec![0; bins])[bin] += 1;
    }
    ConfidenceHistogram { bin_edges, series }
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub tau: f64,
    pub records: Vec<RegionRecord>,
    pub confusion: ConfusionCounts,
    pub metrics: Metrics,
    pub histogram: ConfidenceHistogram,
}

/// Intermediate per-scene products shared by training and testing.
pub struct PreparedScene {
    pub regions: RegionSet,
    pub cropped: HyperCube,
    pub preview: crate::segmentation::RgbImage,
}

/// Smooth (optionally), extract the RGB preview, cluster, label regions and
/// crop to the analysis range.
pub fn prepare_scene(cube: &HyperCube, cfg: &PipelineConfig) -> Result<PreparedScene> {
    let smoothed;
    let working = if cfg.smooth {
        smoothed = savgol_smooth(cube, cfg.sg_order, cfg.sg_width)?;
        &smoothed
    } else {
        cube
    };
    let preview = extract_rgb(working, cfg.rgb_nm.0, cfg.rgb_nm.1, cfg.rgb_nm.2);
    let km = kmeans2(&preview, cfg.kmeans_seed, cfg.kmeans_max_iter);
    let regions = segment_regions(
        &preview,
        &km,
        cfg.min_region_area,
        cfg.connectivity,
        cfg.foreground,
    )?;
    if regions.is_empty() {
        return Err(Error::NoRegions);
    }
    let cropped = crop_bands(working, cfg.band_range_nm.0, cfg.band_range_nm.1)?;
    Ok(PreparedScene {
        regions,
        cropped,
        preview,
    })
}

fn collect_labeled_spectra(
    scene_idx: usize,
    prepared: &PreparedScene,
    labels: &BTreeMap<u32, LabelEntry>,
) -> Result<Vec<LabeledRegionSpectra>> {
    let _ = scene_idx;
    let mut out = Vec::new();
    for id in 1..=prepared.regions.region_count() as u32 {
        let entry = labels.get(&id).ok_or(Error::MissingLabel(id))?;
        let spectra = prepared
            .regions
            .pixels_of(id)
            .into_iter()
            .map(|i| prepared.cropped.spectrum_at(i).to_vec())
            .collect();
        out.push(LabeledRegionSpectra {
            region: id,
            label: entry.color.clone(),
            axis: prepared.cropped.axis().clone(),
            spectra,
        });
    }
    Ok(out)
}

/// Algorithm: preprocess each scene, estimate class-mean endmembers from the
/// labelled regions, unmix, aggregate per-region confidences, and search the
/// threshold grid. Confidences are pooled across scenes so one threshold is
/// fitted for the whole training set.
pub fn train_model(
    scenes: &[TrainingScene],
    cfg: &PipelineConfig,
    dataset_id: &str,
) -> Result<(TrainedModel, TrainingReport)> {
    let mut prepared = Vec::new();
    let mut labeled = Vec::new();
    for (i, scene) in scenes.iter().enumerate() {
        let p = prepare_scene(&scene.cube, cfg)?;
        labeled.push(collect_labeled_spectra(i, &p, &scene.labels)?);
        prepared.push(p);
    }
    let pooled: Vec<LabeledRegionSpectra> = labeled.iter().flatten().cloned().collect();
    let endmembers = estimate_endmembers(&pooled, &cfg.grouping)?;

    let mut records = Vec::new();
    let mut samples = Vec::new();
    for (i, (p, scene)) in prepared.iter().zip(scenes).enumerate() {
        let unmixed = unmix_regions(&p.cropped, &p.regions, &endmembers)?;
        let confs =
            aggregate_confidence_with(&unmixed.map, &p.regions, IMMATURE_CLASS, cfg.aggregation)?;
        for rc in &confs {
            let entry = &scene.labels[&rc.region];
            let class = cfg
                .grouping
                .class_of(&entry.color)
                .ok_or_else(|| Error::UnknownLabel(entry.color.clone()))?;
            let class: Maturity = class
                .parse()
                .map_err(|_| Error::UnknownLabel(entry.color.clone()))?;
            samples.push((rc.confidence, class));
            records.push(RegionRecord {
                scene: i,
                region: rc.region,
                color: Some(entry.color.clone()),
                cultivar: entry.cultivar.clone(),
                class: Some(class),
                confidence: rc.confidence,
                pixel_count: rc.pixel_count,
                predicted: Maturity::Mature, // filled in after tau is known
            });
        }
    }
    let tau = train_threshold(&samples)?;
    for r in &mut records {
        r.predicted = if r.confidence >= tau {
            Maturity::Immature
        } else {
            Maturity::Mature
        };
    }
    let confusion = ConfusionCounts::tally(
        records
            .iter()
            .map(|r| (r.class.unwrap(), r.predicted)),
    );
    let report = TrainingReport {
        tau,
        metrics: compute_metrics(&confusion),
        histogram: confidence_histogram(&records),
        records,
        confusion,
    };
    let model = TrainedModel {
        endmembers,
        band_range_nm: cfg.band_range_nm,
        tau,
        sg_order: cfg.sg_order,
        sg_width: cfg.sg_width,
        provenance: Provenance {
            dataset_id: dataset_id.to_string(),
            date: String::new(),
        },
    };
    Ok((model, report))
}

/// Accuracy grouped by an attribute of the true label (colour or cultivar).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAccuracy {
    pub group: String,
    pub correct: usize,
    pub total: usize,
}

fn group_accuracy(
    records: &[RegionRecord],
    key: impl Fn(&RegionRecord) -> Option<String>,
) -> Vec<GroupAccuracy> {
    let mut map: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in records {
        let (Some(group), Some(class)) = (key(r), r.class) else {
            continue;
        };
        let e = map.entry(group).or_default();
        e.1 += 1;
        if class == r.predicted {
            e.0 += 1;
        }
    }
    map.into_iter()
        .map(|(group, (correct, total))| GroupAccuracy {
            group,
            correct,
            total,
        })
        .collect()
}

/// One precision-recall sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PrPoint {
    pub tau: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub confusion: ConfusionCounts,
    pub metrics: Metrics,
    pub per_color: Vec<GroupAccuracy>,
    pub per_cultivar: Vec<GroupAccuracy>,
    pub pr_curve: Vec<PrPoint>,
    pub histogram: ConfidenceHistogram,
}

#[derive(Debug, Clone)]
pub struct SceneClassification {
    pub records: Vec<RegionRecord>,
    pub confidences: Vec<RegionConfidence>,
    pub proportions: ProportionMap,
    pub regions: RegionSet,
    pub evaluation: Option<Evaluation>,
}

/// Classify one scene with a trained model; with labels supplied, also emit
/// the full evaluation report.
pub fn classify_regions(
    cube: &HyperCube,
    model: &TrainedModel,
    labels: Option<&BTreeMap<u32, LabelEntry>>,
    cfg: &PipelineConfig,
) -> Result<SceneClassification> {
    let mut cfg = cfg.clone();
    cfg.band_range_nm = model.band_range_nm;
    cfg.sg_order = model.sg_order;
    cfg.sg_width = model.sg_width;
    let p = prepare_scene(cube, &cfg)?;
    if !p.cropped.axis().approx_eq(model.endmembers.axis(), 1e-6) {
        return Err(Error::AxisMismatch(
            "scene bands do not match the model's endmember axis after cropping".into(),
        ));
    }
    let unmixed = unmix_regions(&p.cropped, &p.regions, &model.endmembers)?;
    let confidences =
        aggregate_confidence_with(&unmixed.map, &p.regions, IMMATURE_CLASS, cfg.aggregation)?;
    let predictions = classify(&confidences, model.tau);

    let mut records = Vec::new();
    for (rc, (region, predicted)) in confidences.iter().zip(&predictions) {
        debug_assert_eq!(rc.region, *region);
        let entry = labels.and_then(|l| l.get(region));
        let class = match entry {
            Some(e) => Some(
                cfg.grouping
                    .class_of(&e.color)
                    .ok_or_else(|| Error::UnknownLabel(e.color.clone()))?
                    .parse::<Maturity>()
                    .map_err(|_| Error::UnknownLabel(e.color.clone()))?,
            ),
            None => None,
        };
        records.push(RegionRecord {
            scene: 0,
            region: *region,
            color: entry.map(|e| e.color.clone()),
            cultivar: entry.and_then(|e| e.cultivar.clone()),
            class,
            confidence: rc.confidence,
            pixel_count: rc.pixel_count,
            predicted: *predicted,
        });
    }

    let evaluation = if let Some(labels) = labels {
        for id in 1..=p.regions.region_count() as u32 {
            if !labels.contains_key(&id) {
                return Err(Error::MissingLabel(id));
            }
        }
        let pairs: Vec<(f64, Maturity)> = records
            .iter()
            .map(|r| (r.confidence, r.class.unwrap()))
            .collect();
        let confusion =
            ConfusionCounts::tally(records.iter().map(|r| (r.class.unwrap(), r.predicted)));
        let pr_curve = threshold_grid()
            .map(|tau| {
                let c = ConfusionCounts::tally(pairs.iter().map(|&(conf, class)| {
                    let pred = if conf >= tau {
                        Maturity::Immature
                    } else {
                        Maturity::Mature
                    };
                    (class, pred)
                }));
                let m = compute_metrics(&c);
                PrPoint {
                    tau,
                    precision: m.precision,
                    recall: m.recall,
                }
            })
            .collect();
        // sanity tie between the two error accountings
        debug_assert_eq!(
            errors_at(&pairs, model.tau) as u64,
            confusion.false_pos + confusion.false_neg
        );
        Some(Evaluation {
            metrics: compute_metrics(&confusion),
            confusion,
            per_color: group_accuracy(&records, |r| r.color.clone()),
            per_cultivar: group_accuracy(&records, |r| r.cultivar.clone()),
            pr_curve,
            histogram: confidence_histogram(&records),
        })
    } else {
        None
    };

    Ok(SceneClassification {
        records,
        confidences,
        proportions: unmixed.map,
        regions: p.regions,
        evaluation,
    })
}

//! CSV and image emission for training/evaluation artifacts, plus the labels
//! file parser. All outputs are UTF-8 CSV or binary Netpbm.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::maturity::Metrics;
use crate::netpbm;
use crate::pipeline::{
    ConfidenceHistogram, Evaluation, GroupAccuracy, LabelEntry, RegionRecord,
};
use crate::segmentation::{RegionSet, RgbImage};
use crate::unmixing::ProportionMap;

fn write_text(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "undefined".into(),
    }
}

/// Parse a labels CSV: `region_id,color[,cultivar]`, with or without a
/// header line.
pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<u32, LabelEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if lineno == 0 && fields[0].parse::<u32>().is_err() {
            continue; // header
        }
        if fields.len() < 2 {
            return Err(Error::LabelsFormat {
                path: path.to_path_buf(),
                msg: format!("line {} needs at least region_id,color", lineno + 1),
            });
        }
        let region: u32 = fields[0].parse().map_err(|_| Error::LabelsFormat {
            path: path.to_path_buf(),
            msg: format!("bad region id '{}' on line {}", fields[0], lineno + 1),
        })?;
        out.insert(
            region,
            LabelEntry {
                color: fields[1].to_string(),
                cultivar: fields.get(2).filter(|s| !s.is_empty()).map(|s| s.to_string()),
            },
        );
    }
    Ok(out)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[(u32, String)]) -> Result<()> {
    let mut text = String::from("region_id,color\n");
    for (id, color) in labels {
        writeln!(text, "{id},{color}").unwrap();
    }
    write_text(path.as_ref(), text)
}

/// Per-region predictions: `region_id,pixel_count,confidence,prediction`.
pub fn write_predictions(path: impl AsRef<Path>, records: &[RegionRecord]) -> Result<()> {
    let mut text = String::from("region_id,pixel_count,confidence,prediction\n");
    for r in records {
        writeln!(text, "{},{},{},{}", r.region, r.pixel_count, r.confidence, r.predicted).unwrap();
    }
    write_text(path.as_ref(), text)
}

/// Training confidences: `scene,region_id,color,class,confidence,predicted`.
pub fn write_confidences(path: impl AsRef<Path>, records: &[RegionRecord]) -> Result<()> {
    let mut text = String::from("scene,region_id,color,class,confidence,predicted\n");
    for r in records {
        writeln!(
            text,
            "{},{},{},{},{},{}",
            r.scene,
            r.region,
            r.color.as_deref().unwrap_or(""),
            r.class.map(|c| c.to_string()).unwrap_or_default(),
            r.confidence,
            r.predicted
        )
        .unwrap();
    }
    write_text(path.as_ref(), text)
}

/// Confusion matrix in table layout: rows actual, columns predicted.
pub fn write_confusion(path: impl AsRef<Path>, c: &crate::maturity::ConfusionCounts) -> Result<()> {
    let mut text = String::from("actual,predicted_mature,predicted_immature\n");
    writeln!(text, "mature,{},{}", c.true_neg, c.false_pos).unwrap();
    writeln!(text, "immature,{},{}", c.false_neg, c.true_pos).unwrap();
    write_text(path.as_ref(), text)
}

pub fn write_metrics(path: impl AsRef<Path>, m: &Metrics) -> Result<()> {
    let mut text = String::from("metric,value\n");
    writeln!(text, "accuracy,{}", fmt_opt(m.accuracy)).unwrap();
    writeln!(text, "precision,{}", fmt_opt(m.precision)).unwrap();
    writeln!(text, "recall,{}", fmt_opt(m.recall)).unwrap();
    writeln!(text, "specificity,{}", fmt_opt(m.specificity)).unwrap();
    writeln!(text, "balanced_accuracy,{}", fmt_opt(m.balanced_accuracy)).unwrap();
    write_text(path.as_ref(), text)
}

pub fn write_group_accuracy(path: impl AsRef<Path>, groups: &[GroupAccuracy]) -> Result<()> {
    let mut text = String::from("group,correct,total,accuracy\n");
    for g in groups {
        writeln!(
            text,
            "{},{},{},{:.6}",
            g.group,
            g.correct,
            g.total,
            g.correct as f64 / g.total as f64
        )
        .unwrap();
    }
    write_text(path.as_ref(), text)
}

/// Precision-recall sweep over the 99-point threshold grid.
pub fn write_pr_curve(path: impl AsRef<Path>, eval: &Evaluation) -> Result<()> {
    let mut text = String::from("tau,precision,recall\n");
    for p in &eval.pr_curve {
        writeln!(text, "{:.2},{},{}", p.tau, fmt_opt(p.precision), fmt_opt(p.recall)).unwrap();
    }
    write_text(path.as_ref(), text)
}

/// Confidence histogram, one column per true colour, bins of width 0.05.
pub fn write_histogram(path: impl AsRef<Path>, h: &ConfidenceHistogram) -> Result<()> {
    let mut text = String::from("bin_lo,bin_hi");
    for color in h.series.keys() {
        write!(text, ",{color}").unwrap();
    }
    text.push('\n');
    let bins = h.bin_edges.len() - 1;
    for b in 0..bins {
        write!(text, "{:.2},{:.2}", h.bin_edges[b], h.bin_edges[b + 1]).unwrap();
        for counts in h.series.values() {
            write!(text, ",{}", counts[b]).unwrap();
        }
        text.push('\n');
    }
    write_text(path.as_ref(), text)
}

/// Per-pixel proportions of all foreground pixels:
/// `x,y,region_id,p_<class>...`.
pub fn write_proportions_csv(
    path: impl AsRef<Path>,
    map: &ProportionMap,
    regions: &RegionSet,
) -> Result<()> {
    let mut text = String::from("x,y,region_id");
    for c in &map.class_names {
        write!(text, ",p_{c}").unwrap();
    }
    text.push('\n');
    let m = map.classes();
    for y in 0..map.height {
        for x in 0..map.width {
            let i = y * map.width + x;
            if !map.valid[i] {
                continue;
            }
            write!(text, "{x},{y},{}", regions.label_map[i]).unwrap();
            for k in 0..m {
                write!(text, ",{}", map.proportions[i * m + k]).unwrap();
            }
            text.push('\n');
        }
    }
    write_text(path.as_ref(), text)
}

/// One graymap per class: proportion scaled by 255 and rounded; background 0.
pub fn write_proportion_maps(dir: impl AsRef<Path>, map: &ProportionMap) -> Result<()> {
    let dir = dir.as_ref();
    let m = map.classes();
    for (k, class) in map.class_names.iter().enumerate() {
        let data: Vec<u16> = (0..map.width * map.height)
            .map(|i| {
                if map.valid[i] {
                    (map.proportions[i * m + k] * 255.0).round() as u16
                } else {
                    0
                }
            })
            .collect();
        netpbm::write_pgm(dir.join(format!("proportion_{class}.pgm")), map.width, map.height, &data, 255)?;
    }
    Ok(())
}

/// Region labels as a graymap (pixel value = region id).
pub fn write_region_map(path: impl AsRef<Path>, regions: &RegionSet) -> Result<()> {
    let data: Vec<u16> = regions.label_map.iter().map(|&l| l as u16).collect();
    let maxval = if regions.region_count() > 255 {
        u16::MAX
    } else {
        255
    };
    netpbm::write_pgm(path, regions.width, regions.height, &data, maxval)
}

/// Endmember spectra as `wavelength_nm,<class>...` rows.
pub fn write_endmembers_csv(
    path: impl AsRef<Path>,
    set: &crate::unmixing::EndmemberSet,
) -> Result<()> {
    let mut text = String::from("wavelength_nm");
    for c in set.class_names() {
        write!(text, ",{c}").unwrap();
    }
    text.push('\n');
    for (b, w) in set.axis().wavelengths().iter().enumerate() {
        write!(text, "{w}").unwrap();
        for k in 0..set.len() {
            write!(text, ",{}", set.spectrum(k)[b]).unwrap();
        }
        text.push('\n');
    }
    write_text(path.as_ref(), text)
}

pub fn write_preview(path: impl AsRef<Path>, image: &RgbImage) -> Result<()> {
    netpbm::write_ppm(path, image.width, image.height, &image.pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.csv");
        write_labels(&p, &[(1, "yellow".into()), (2, "black".into())]).unwrap();
        let got = read_labels(&p).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[&1].color, "yellow");
        assert_eq!(got[&2].color, "black");
        assert!(got[&1].cultivar.is_none());
    }

    #[test]
    fn labels_with_cultivar_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.csv");
        fs::write(&p, "region_id,color,cultivar\n1,brown,TUFRunner 511\n2,orange,\n").unwrap();
        let got = read_labels(&p).unwrap();
        assert_eq!(got[&1].cultivar.as_deref(), Some("TUFRunner 511"));
        assert!(got[&2].cultivar.is_none());
    }

    #[test]
    fn labels_bad_region_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.csv");
        fs::write(&p, "region_id,color\nfirst,yellow\n").unwrap();
        assert!(matches!(read_labels(&p), Err(Error::LabelsFormat { .. })));
    }
}

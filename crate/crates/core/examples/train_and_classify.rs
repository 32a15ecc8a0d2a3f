//! Full pipeline: train a threshold model on one synthetic scene, persist
//! it, then classify a second scene and print the evaluation metrics.
//!
//! Usage: cargo run --example train_and_classify [OUT_DIR]

use std::collections::BTreeMap;
use std::path::PathBuf;

use hsi_maturity::cube::calibrate;
use hsi_maturity::maturity::{load_model, save_model};
use hsi_maturity::pipeline::{
    classify_regions, train_model, LabelEntry, PipelineConfig, TrainingScene,
};
use hsi_maturity::synthgen::{make_scene, SceneSpec};

fn labels_of(scene: &hsi_maturity::synthgen::SyntheticScene) -> BTreeMap<u32, LabelEntry> {
    scene
        .labels
        .iter()
        .map(|(id, color)| {
            (
                *id,
                LabelEntry {
                    color: color.clone(),
                    cultivar: None,
                },
            )
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "example-out/model".into())
        .into();
    std::fs::create_dir_all(&out)?;

    let mut cfg = PipelineConfig::default();
    cfg.smooth = false;

    let train_scene = make_scene(&SceneSpec::default_scene(1))?;
    let test_scene = make_scene(&SceneSpec::default_scene(2))?;

    let scenes = vec![TrainingScene {
        cube: calibrate(&train_scene.raw, &train_scene.refs)?,
        labels: labels_of(&train_scene),
    }];
    let (model, report) = train_model(&scenes, &cfg, "synthetic-demo")?;
    println!(
        "trained on {} regions, tau = {}",
        report.records.len(),
        report.tau
    );

    let model_path = out.join("model.toml");
    save_model(&model, &model_path)?;
    let model = load_model(&model_path)?;

    let test_cube = calibrate(&test_scene.raw, &test_scene.refs)?;
    let result = classify_regions(&test_cube, &model, Some(&labels_of(&test_scene)), &cfg)?;
    for r in &result.records {
        println!(
            "region {:2}: confidence {:.3} -> {}",
            r.region, r.confidence, r.predicted
        );
    }
    let eval = result.evaluation.unwrap();
    println!(
        "held-out accuracy: {}",
        eval.metrics
            .accuracy
            .map(|a| format!("{:.1}%", 100.0 * a))
            .unwrap_or_else(|| "undefined".into())
    );
    Ok(())
}

//! End-to-end tests of the command-line front end: happy-path flows, exit
//! codes, and equivalence with the library calls it wraps.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hsi_maturity::cube::{calibrate, crop_bands, load_cube, save_cube, savgol_smooth};
use hsi_maturity::synthgen::{make_scene, SceneSpec};

const BIN: &str = env!("CARGO_BIN_EXE_hsi-maturity");

const SMALL_SPEC: &str = "\
seed = 4
cols = 3
rows = 2
width = 120
height = 90
disk_radius = 12
bands = 60
region_labels = [\"yellow\", \"black\", \"orange\", \"brown\", \"yellow\", \"black\"]
";

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn CLI")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

/// synth + calibrate a small scene into `dir/scene`, returning the
/// reflectance cube path.
fn make_calibrated_scene(dir: &Path) -> PathBuf {
    std::fs::write(dir.join("spec.toml"), SMALL_SPEC).unwrap();
    assert_ok(&run_in(dir, &["synth", "--spec", "spec.toml", "--out-dir", "scene"]));
    assert_ok(&run_in(
        dir,
        &[
            "calibrate",
            "--raw",
            "scene/raw.hdr",
            "--white",
            "scene/white.hdr",
            "--dark",
            "scene/dark.hdr",
            "--out",
            "scene/refl.hdr",
        ],
    ));
    dir.join("scene/refl.hdr")
}

#[test]
fn synth_writes_complete_inventory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.toml"), SMALL_SPEC).unwrap();
    assert_ok(&run_in(dir.path(), &["synth", "--spec", "spec.toml", "--out-dir", "out"]));
    for f in [
        "raw.hdr",
        "raw.raw",
        "white.hdr",
        "white.raw",
        "dark.hdr",
        "dark.raw",
        "refs.toml",
        "labels.csv",
        "truth_regions.pgm",
        "truth_proportions.csv",
        "endmembers.csv",
    ] {
        assert!(dir.path().join("out").join(f).exists(), "missing {f}");
    }
}

#[test]
fn calibrate_matches_library_path_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let refl_path = make_calibrated_scene(dir.path());

    // same work through the library
    let scene = make_scene(&toml::from_str::<SceneSpec>(SMALL_SPEC).unwrap()).unwrap();
    let refl = calibrate(&scene.raw, &scene.refs).unwrap();
    let refl = savgol_smooth(&refl, 4, 25).unwrap();
    let refl = crop_bands(&refl, 650.0, 1000.0).unwrap();
    let lib_path = dir.path().join("lib_refl.hdr");
    save_cube(&refl, &lib_path).unwrap();

    let cli_bytes = std::fs::read(refl_path.with_extension("raw")).unwrap();
    let lib_bytes = std::fs::read(lib_path.with_extension("raw")).unwrap();
    assert_eq!(cli_bytes, lib_bytes, "CLI calibrate differs from library calls");
}

#[test]
fn calibrate_writes_sidecar_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let refl = make_calibrated_scene(dir.path());
    let sidecar = std::fs::read_to_string(refl.with_extension("params.toml")).unwrap();
    for needle in [
        "sg_order = 4",
        "sg_width = 25",
        "band_range_lo_nm = 650",
        "band_range_hi_nm = 1000",
        "smoothed = true",
        "reflectivity = 0.99",
    ] {
        assert!(sidecar.contains(needle), "sidecar missing `{needle}`:\n{sidecar}");
    }
}

#[test]
fn segment_reports_expected_regions() {
    let dir = tempfile::tempdir().unwrap();
    make_calibrated_scene(dir.path());
    let out = run_in(
        dir.path(),
        &["segment", "--cube", "scene/refl.hdr", "--out-dir", "seg"],
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("6 regions"));
    assert!(dir.path().join("seg/regions.pgm").exists());
    assert!(dir.path().join("seg/preview.ppm").exists());
    let csv = std::fs::read_to_string(dir.path().join("seg/regions.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7); // header + 6 regions
}

#[test]
fn train_predict_evaluate_flow() {
    let dir = tempfile::tempdir().unwrap();
    make_calibrated_scene(dir.path());
    assert_ok(&run_in(
        dir.path(),
        &[
            "train",
            "--scene",
            "scene/refl.hdr",
            "--labels",
            "scene/labels.csv",
            "--model",
            "model.toml",
            "--report-dir",
            "trainrep",
        ],
    ));
    for f in ["confidences.csv", "histogram.csv", "confusion.csv", "metrics.csv"] {
        assert!(dir.path().join("trainrep").join(f).exists(), "missing {f}");
    }

    assert_ok(&run_in(
        dir.path(),
        &[
            "predict",
            "--scene",
            "scene/refl.hdr",
            "--model",
            "model.toml",
            "--out-dir",
            "pred",
        ],
    ));
    let preds = std::fs::read_to_string(dir.path().join("pred/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 7);
    assert!(dir.path().join("pred/proportion_mature.pgm").exists());
    assert!(dir.path().join("pred/proportion_immature.pgm").exists());
    assert!(dir.path().join("pred/proportions.csv").exists());
    assert!(dir.path().join("pred/regions.pgm").exists());
    // predict without labels emits no evaluation artifacts
    assert!(!dir.path().join("pred/metrics.csv").exists());

    let out = run_in(
        dir.path(),
        &[
            "evaluate",
            "--scene",
            "scene/refl.hdr",
            "--model",
            "model.toml",
            "--labels",
            "scene/labels.csv",
            "--out-dir",
            "eval",
        ],
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("accuracy 100.0%"));
    for f in ["metrics.csv", "confusion.csv", "per_color.csv", "pr_curve.csv", "histogram.csv"] {
        assert!(dir.path().join("eval").join(f).exists(), "missing {f}");
    }
    let pr = std::fs::read_to_string(dir.path().join("eval/pr_curve.csv")).unwrap();
    assert_eq!(pr.lines().count(), 100, "header + 99 sweep points");
}

#[test]
fn evaluate_without_labels_degrades_to_predictions_only() {
    let dir = tempfile::tempdir().unwrap();
    make_calibrated_scene(dir.path());
    assert_ok(&run_in(
        dir.path(),
        &["train", "--scene", "scene/refl.hdr", "--labels", "scene/labels.csv", "--model", "model.toml"],
    ));
    let out = run_in(
        dir.path(),
        &["evaluate", "--scene", "scene/refl.hdr", "--model", "model.toml", "--out-dir", "eval"],
    );
    assert_ok(&out);
    assert!(dir.path().join("eval/predictions.csv").exists());
    assert!(!dir.path().join("eval/metrics.csv").exists());
    assert!(!dir.path().join("eval/pr_curve.csv").exists());
}

#[test]
fn synth_rejects_overlapping_disks() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("spec.toml"),
        SMALL_SPEC.replace("disk_radius = 12", "disk_radius = 30"),
    )
    .unwrap();
    let out = run_in(dir.path(), &["synth", "--spec", "spec.toml", "--out-dir", "out"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "calibrate",
            "--raw",
            "nope.hdr",
            "--white",
            "nope.hdr",
            "--dark",
            "nope.hdr",
            "--out",
            "x.hdr",
        ],
    );
    assert_eq!(exit_code(&out), 2);
    // the diagnostic names the missing path
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.hdr"));
}

#[test]
fn single_class_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    make_calibrated_scene(dir.path());
    // relabel every region mature
    let labels = std::fs::read_to_string(dir.path().join("scene/labels.csv")).unwrap();
    let all_mature: String = labels
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                l.to_string()
            } else {
                format!("{},black", l.split(',').next().unwrap())
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(dir.path().join("mature.csv"), all_mature).unwrap();
    let out = run_in(
        dir.path(),
        &["train", "--scene", "scene/refl.hdr", "--labels", "mature.csv", "--model", "m.toml"],
    );
    assert_eq!(exit_code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn model_axis_mismatch_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    make_calibrated_scene(dir.path());
    assert_ok(&run_in(
        dir.path(),
        &["train", "--scene", "scene/refl.hdr", "--labels", "scene/labels.csv", "--model", "model.toml"],
    ));
    // a second scene with a different band count
    std::fs::write(
        dir.path().join("spec2.toml"),
        SMALL_SPEC.replace("bands = 60", "bands = 90"),
    )
    .unwrap();
    assert_ok(&run_in(dir.path(), &["synth", "--spec", "spec2.toml", "--out-dir", "scene2"]));
    assert_ok(&run_in(
        dir.path(),
        &[
            "calibrate",
            "--raw",
            "scene2/raw.hdr",
            "--white",
            "scene2/white.hdr",
            "--dark",
            "scene2/dark.hdr",
            "--out",
            "scene2/refl.hdr",
        ],
    ));
    let out = run_in(
        dir.path(),
        &["predict", "--scene", "scene2/refl.hdr", "--model", "model.toml", "--out-dir", "p"],
    );
    assert_eq!(exit_code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_model_version_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    make_calibrated_scene(dir.path());
    assert_ok(&run_in(
        dir.path(),
        &["train", "--scene", "scene/refl.hdr", "--labels", "scene/labels.csv", "--model", "model.toml"],
    ));
    let text = std::fs::read_to_string(dir.path().join("model.toml")).unwrap();
    std::fs::write(
        dir.path().join("future.toml"),
        text.replace("version = 1", "version = 99"),
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &["predict", "--scene", "scene/refl.hdr", "--model", "future.toml", "--out-dir", "p"],
    );
    assert_eq!(exit_code(&out), 4);
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    make_calibrated_scene(dir.path());
    // config sets an absurd min area so every region is filtered out
    std::fs::write(dir.path().join("cfg.toml"), "min_area = 100000\n").unwrap();
    let out = run_in(
        dir.path(),
        &["segment", "--cube", "scene/refl.hdr", "--out-dir", "s1", "--config", "cfg.toml"],
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 regions"));
    // explicit flag wins over the config file
    let out = run_in(
        dir.path(),
        &[
            "segment", "--cube", "scene/refl.hdr", "--out-dir", "s2", "--config", "cfg.toml",
            "--min-area", "50",
        ],
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("6 regions"));
}

#[test]
fn tau_override_changes_predictions() {
    let dir = tempfile::tempdir().unwrap();
    make_calibrated_scene(dir.path());
    assert_ok(&run_in(
        dir.path(),
        &["train", "--scene", "scene/refl.hdr", "--labels", "scene/labels.csv", "--model", "model.toml"],
    ));
    // confidences are near 0 and 1; tau cannot be pushed past them, but an
    // out-of-range tau must be rejected
    let out = run_in(
        dir.path(),
        &[
            "predict", "--scene", "scene/refl.hdr", "--model", "model.toml", "--out-dir", "p",
            "--tau", "1.5",
        ],
    );
    assert_eq!(exit_code(&out), 2);
    let out = run_in(
        dir.path(),
        &[
            "predict", "--scene", "scene/refl.hdr", "--model", "model.toml", "--out-dir", "p",
            "--tau", "0.5",
        ],
    );
    assert_ok(&out);
}

#[test]
fn load_cube_reads_cli_synth_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.toml"), SMALL_SPEC).unwrap();
    assert_ok(&run_in(dir.path(), &["synth", "--spec", "spec.toml", "--out-dir", "out"]));
    let cube = load_cube(dir.path().join("out/raw.hdr")).unwrap();
    assert_eq!((cube.width(), cube.height(), cube.bands()), (120, 90, 60));
}

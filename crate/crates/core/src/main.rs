//! Command-line front end. Every subcommand is a thin wrapper over the
//! library; results are bit-identical to the equivalent library calls.
//!
//! Exit codes: 0 ok, 2 input error, 3 training infeasible, 4 model/data
//! mismatch.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use hsi_maturity::cube::{calibrate, crop_bands, load_cube, save_cube, savgol_smooth, CalibrationRefs};
use hsi_maturity::error::Error;
use hsi_maturity::maturity::{load_model, save_model, Aggregation};
use hsi_maturity::pipeline::{
    classify_regions, prepare_scene, train_model, PipelineConfig, TrainingScene,
};
use hsi_maturity::report;
use hsi_maturity::segmentation::{Connectivity, ForegroundRule};
use hsi_maturity::synthgen::{make_scene, SceneSpec};
use hsi_maturity::unmixing::LabelGrouping;

#[derive(Parser)]
#[command(name = "hsi-maturity", version, about = "Hyperspectral maturity classification toolkit")]
struct Cli {
    /// Optional TOML config file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a raw-intensity cube to smoothed, band-cropped reflectance.
    Calibrate(CalibrateArgs),
    /// Segment a reflectance cube into indexed foreground regions.
    Segment(SegmentArgs),
    /// Generate a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Train endmembers and a classification threshold from labelled scenes.
    Train(TrainArgs),
    /// Classify a scene with a trained model.
    Predict(PredictArgs),
    /// Classify a scene and score the predictions against labels.
    Evaluate(PredictArgs),
}

/// Flags shared by the pipeline-driving subcommands. Unset flags fall back
/// to the config file, then to the defaults that mirror the reference
/// configuration (650-1000 nm, SG order 4 / width 25).
#[derive(Args, Clone, Default)]
struct PipelineOpts {
    /// Analysis wavelength range, e.g. 650:1000
    #[arg(long, value_name = "LO:HI")]
    band_range: Option<String>,
    #[arg(long)]
    sg_order: Option<usize>,
    #[arg(long)]
    sg_width: Option<usize>,
    /// k-means seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ForegroundRule::from_str_arg)]
    foreground: Option<ForegroundRule>,
    /// Minimum region area in pixels
    #[arg(long)]
    min_area: Option<usize>,
    /// Pixel connectivity, 4 or 8
    #[arg(long, value_parser = Connectivity::from_str_arg)]
    connectivity: Option<Connectivity>,
    /// Label grouping, e.g. black=mature,brown=mature,orange=immature,yellow=immature
    #[arg(long)]
    group: Option<String>,
    /// Confidence aggregation: mean or median
    #[arg(long, value_parser = Aggregation::from_str_arg)]
    aggregation: Option<Aggregation>,
}

trait FromStrArg: Sized + std::str::FromStr<Err = String> {
    fn from_str_arg(s: &str) -> Result<Self, String> {
        s.parse()
    }
}
impl FromStrArg for ForegroundRule {}
impl FromStrArg for Connectivity {}
impl FromStrArg for Aggregation {}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    raw: PathBuf,
    #[arg(long)]
    white: PathBuf,
    #[arg(long)]
    dark: PathBuf,
    #[arg(long)]
    reflectivity: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Skip Savitzky-Golay smoothing.
    #[arg(long)]
    no_smooth: bool,
    /// Skip cropping to the analysis band range.
    #[arg(long)]
    no_crop: bool,
    #[command(flatten)]
    opts: PipelineOpts,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    cube: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    opts: PipelineOpts,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene spec TOML; missing fields use the default verification scene.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Reflectance cube (repeatable; pair with --labels in order).
    #[arg(long, required = true)]
    scene: Vec<PathBuf>,
    /// Labels CSV per scene (region_id,color[,cultivar]).
    #[arg(long, required = true)]
    labels: Vec<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    report_dir: Option<PathBuf>,
    /// Apply smoothing inside the pipeline (for cubes not already smoothed
    /// by the calibrate command).
    #[arg(long)]
    smooth: bool,
    #[arg(long)]
    dataset_id: Option<String>,
    #[command(flatten)]
    opts: PipelineOpts,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Labels CSV; required for evaluate, ignored by predict.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the model's trained threshold.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    smooth: bool,
    #[command(flatten)]
    opts: PipelineOpts,
}

/// Optional config-file counterpart of [`PipelineOpts`].
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    band_range: Option<String>,
    sg_order: Option<usize>,
    sg_width: Option<usize>,
    seed: Option<u64>,
    foreground: Option<String>,
    min_area: Option<usize>,
    connectivity: Option<String>,
    group: Option<String>,
    aggregation: Option<String>,
}

struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn input(msg: impl Into<String>) -> Self {
        CliError {
            code: 2,
            msg: msg.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::SingleClass(_) | Error::EmptyClass(_) => 3,
            Error::AxisMismatch(_) | Error::ModelVersion { .. } => 4,
            _ => 2,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

fn parse_band_range(s: &str) -> Result<(f64, f64), CliError> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| CliError::input(format!("band range '{s}' is not LO:HI")))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("bad band range low '{lo}'")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("bad band range high '{hi}'")))?;
    Ok((lo, hi))
}

/// Precedence: flags > config file > defaults.
fn build_config(opts: &PipelineOpts, config_path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::default();
    let file: ConfigFile = match config_path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::input(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::input(format!("bad config {}: {e}", p.display())))?
        }
        None => ConfigFile::default(),
    };

    let band_range = opts.band_range.clone().or(file.band_range);
    if let Some(s) = band_range {
        cfg.band_range_nm = parse_band_range(&s)?;
    }
    if let Some(v) = opts.sg_order.or(file.sg_order) {
        cfg.sg_order = v;
    }
    if let Some(v) = opts.sg_width.or(file.sg_width) {
        cfg.sg_width = v;
    }
    if let Some(v) = opts.seed.or(file.seed) {
        cfg.kmeans_seed = v;
    }
    if let Some(v) = opts
        .foreground
        .or(file.foreground.as_deref().map(|s| s.parse()).transpose().map_err(CliError::input)?)
    {
        cfg.foreground = v;
    }
    if let Some(v) = opts.min_area.or(file.min_area) {
        cfg.min_region_area = v;
    }
    if let Some(v) = opts
        .connectivity
        .or(file.connectivity.as_deref().map(|s| s.parse()).transpose().map_err(CliError::input)?)
    {
        cfg.connectivity = v;
    }
    if let Some(s) = opts.group.clone().or(file.group) {
        cfg.grouping = LabelGrouping::parse(&s).map_err(CliError::input)?;
    }
    if let Some(v) = opts
        .aggregation
        .or(file.aggregation.as_deref().map(|s| s.parse()).transpose().map_err(CliError::input)?)
    {
        cfg.aggregation = v;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

fn cmd_calibrate(args: &CalibrateArgs, config: Option<&Path>) -> Result<(), CliError> {
    let cfg = build_config(&args.opts, config)?;
    for p in [&args.raw, &args.white, &args.dark] {
        if !p.exists() {
            return Err(CliError::input(format!("missing input file: {}", p.display())));
        }
    }
    let raw = load_cube(&args.raw)?;
    let white = load_cube(&args.white)?;
    let dark = load_cube(&args.dark)?;
    let reflectivity = args.reflectivity.unwrap_or(0.99);
    let refs = CalibrationRefs::new(white, dark, reflectivity)?;
    let mut cube = calibrate(&raw, &refs)?;
    if !args.no_smooth {
        cube = savgol_smooth(&cube, cfg.sg_order, cfg.sg_width)?;
    }
    if !args.no_crop {
        cube = crop_bands(&cube, cfg.band_range_nm.0, cfg.band_range_nm.1)?;
    }
    save_cube(&cube, &args.out)?;

    let sidecar = args.out.with_extension("params.toml");
    let text = format!(
        "raw = {:?}\nwhite = {:?}\ndark = {:?}\nreflectivity = {reflectivity}\nsmoothed = {}\nsg_order = {}\nsg_width = {}\ncropped = {}\nband_range_lo_nm = {}\nband_range_hi_nm = {}\n",
        args.raw.display().to_string(),
        args.white.display().to_string(),
        args.dark.display().to_string(),
        !args.no_smooth,
        cfg.sg_order,
        cfg.sg_width,
        !args.no_crop,
        cfg.band_range_nm.0,
        cfg.band_range_nm.1,
    );
    fs::write(&sidecar, text).map_err(|e| CliError::input(format!("cannot write sidecar: {e}")))?;
    println!(
        "calibrated {} -> {} ({} bands)",
        args.raw.display(),
        args.out.display(),
        cube.bands()
    );
    Ok(())
}

fn cmd_segment(args: &SegmentArgs, config: Option<&Path>) -> Result<(), CliError> {
    let mut cfg = build_config(&args.opts, config)?;
    cfg.smooth = false;
    ensure_dir(&args.out_dir)?;
    let cube = load_cube(&args.cube)?;
    match prepare_scene(&cube, &cfg) {
        Ok(p) => {
            report::write_region_map(args.out_dir.join("regions.pgm"), &p.regions)?;
            report::write_preview(args.out_dir.join("preview.ppm"), &p.preview)?;
            let mut csv = String::from("region_id,size\n");
            for (i, s) in p.regions.region_sizes.iter().enumerate() {
                csv.push_str(&format!("{},{s}\n", i + 1));
            }
            fs::write(args.out_dir.join("regions.csv"), csv)
                .map_err(|e| CliError::input(e.to_string()))?;
            println!("{} regions", p.regions.region_count());
            Ok(())
        }
        Err(Error::NoRegions) => {
            println!("0 regions (empty result)");
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut spec: SceneSpec = match &args.spec {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::input(format!("cannot read spec {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::input(format!("bad spec {}: {e}", p.display())))?
        }
        None => SceneSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    ensure_dir(&args.out_dir)?;
    let scene = make_scene(&spec)?;
    save_cube(&scene.raw, args.out_dir.join("raw.hdr"))?;
    save_cube(&scene.refs.white, args.out_dir.join("white.hdr"))?;
    save_cube(&scene.refs.dark, args.out_dir.join("dark.hdr"))?;
    fs::write(
        args.out_dir.join("refs.toml"),
        format!("reflectivity = {}\n", scene.refs.reflectivity),
    )
    .map_err(|e| CliError::input(e.to_string()))?;
    report::write_labels(args.out_dir.join("labels.csv"), &scene.labels)?;
    report::write_region_map(args.out_dir.join("truth_regions.pgm"), &scene.truth_regions)?;
    report::write_proportions_csv(
        args.out_dir.join("truth_proportions.csv"),
        &scene.truth_proportions,
        &scene.truth_regions,
    )?;
    report::write_endmembers_csv(args.out_dir.join("endmembers.csv"), &scene.truth_endmembers)?;
    println!(
        "scene: {}x{}x{} raw cube, {} regions -> {}",
        scene.raw.width(),
        scene.raw.height(),
        scene.raw.bands(),
        scene.truth_regions.region_count(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs, config: Option<&Path>) -> Result<(), CliError> {
    if args.scene.len() != args.labels.len() {
        return Err(CliError::input(format!(
            "{} scenes but {} label files",
            args.scene.len(),
            args.labels.len()
        )));
    }
    let mut cfg = build_config(&args.opts, config)?;
    cfg.smooth = args.smooth;
    let mut scenes = Vec::new();
    for (cube_path, labels_path) in args.scene.iter().zip(&args.labels) {
        scenes.push(TrainingScene {
            cube: load_cube(cube_path)?,
            labels: report::read_labels(labels_path)?,
        });
    }
    let dataset_id = args.dataset_id.clone().unwrap_or_else(|| {
        args.scene
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(";")
    });
    let (model, rep) = train_model(&scenes, &cfg, &dataset_id).map_err(|e| match e {
        // An unsegmentable training scene makes training infeasible rather
        // than being a plain input error.
        Error::NoRegions => CliError {
            code: 3,
            msg: e.to_string(),
        },
        e => e.into(),
    })?;
    save_model(&model, &args.model)?;
    if let Some(dir) = &args.report_dir {
        ensure_dir(dir)?;
        report::write_confidences(dir.join("confidences.csv"), &rep.records)?;
        report::write_histogram(dir.join("histogram.csv"), &rep.histogram)?;
        report::write_confusion(dir.join("confusion.csv"), &rep.confusion)?;
        report::write_metrics(dir.join("metrics.csv"), &rep.metrics)?;
    }
    let correct = rep
        .records
        .iter()
        .filter(|r| r.class == Some(r.predicted))
        .count();
    println!(
        "trained on {} regions: tau = {}, training accuracy {}/{}",
        rep.records.len(),
        rep.tau,
        correct,
        rep.records.len()
    );
    Ok(())
}

fn cmd_predict(args: &PredictArgs, config: Option<&Path>, evaluate: bool) -> Result<(), CliError> {
    let mut cfg = build_config(&args.opts, config)?;
    cfg.smooth = args.smooth;
    let mut model = load_model(&args.model)?;
    if let Some(tau) = args.tau {
        if !(0.0 < tau && tau < 1.0) {
            return Err(CliError::input(format!("tau {tau} outside (0, 1)")));
        }
        model.tau = tau;
    }
    let cube = load_cube(&args.scene)?;
    // labels are optional even for evaluate: without them it degrades to
    // predictions-only output
    let labels: Option<BTreeMap<_, _>> = if evaluate {
        args.labels.as_ref().map(report::read_labels).transpose()?
    } else {
        None
    };
    ensure_dir(&args.out_dir)?;
    let out = classify_regions(&cube, &model, labels.as_ref(), &cfg)?;

    report::write_predictions(args.out_dir.join("predictions.csv"), &out.records)?;
    report::write_proportion_maps(&args.out_dir, &out.proportions)?;
    report::write_proportions_csv(
        args.out_dir.join("proportions.csv"),
        &out.proportions,
        &out.regions,
    )?;
    report::write_region_map(args.out_dir.join("regions.pgm"), &out.regions)?;

    if let Some(eval) = &out.evaluation {
        report::write_metrics(args.out_dir.join("metrics.csv"), &eval.metrics)?;
        report::write_confusion(args.out_dir.join("confusion.csv"), &eval.confusion)?;
        report::write_group_accuracy(args.out_dir.join("per_color.csv"), &eval.per_color)?;
        if !eval.per_cultivar.is_empty() {
            report::write_group_accuracy(args.out_dir.join("per_cultivar.csv"), &eval.per_cultivar)?;
        }
        report::write_pr_curve(args.out_dir.join("pr_curve.csv"), eval)?;
        report::write_histogram(args.out_dir.join("histogram.csv"), &eval.histogram)?;
        let acc = eval
            .metrics
            .accuracy
            .map(|a| format!("{:.1}%", 100.0 * a))
            .unwrap_or_else(|| "undefined".into());
        println!("{} regions, accuracy {acc}", out.records.len());
    } else {
        println!("{} regions classified", out.records.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    let result = match &cli.cmd {
        Cmd::Calibrate(a) => cmd_calibrate(a, config),
        Cmd::Segment(a) => cmd_segment(a, config),
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Train(a) => cmd_train(a, config),
        Cmd::Predict(a) => cmd_predict(a, config, false),
        Cmd::Evaluate(a) => cmd_predict(a, config, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

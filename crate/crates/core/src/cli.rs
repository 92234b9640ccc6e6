//! `tunnel-ipm` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or I/O failure, 2 degenerate ROI,
//! 3 undecodable image. Files written by a failing command are removed.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    dataset_report, split_train_test, DatasetManifest, DatasetReport, DEFAULT_SECTION_COUNT,
    DEFAULT_SECTION_LENGTH_M,
};
use crate::error::Error;
use crate::metrics::{evaluate_by_section, EvalResult, DEFAULT_IOU_THRESHOLD};
use crate::pipeline::{case1_manifest, case2_manifest, Calibration, RoiConfig};
use crate::raster::Raster;
use crate::synth::{generate_sequence, simulate_detector, CameraModel, MissModel, SceneTemplate};
use crate::warp::{crop_and_mask, warp_image};

/// AP level `report` uses for its "every section at or above" note.
pub const ACCEPTABLE_AP: f64 = 0.85;

#[derive(Debug, Parser)]
#[command(
    name = "tunnel-ipm",
    version,
    about = "Inverse perspective mapping and section-wise AP for tunnel CCTV datasets"
)]
pub struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// IoU needed for a detection to count as a true positive.
    #[arg(long, global = true, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    /// Number of distance sections.
    #[arg(long, global = true, default_value_t = DEFAULT_SECTION_COUNT)]
    pub sections: usize,
    /// Section length in meters.
    #[arg(long = "section-length", global = true, default_value_t = DEFAULT_SECTION_LENGTH_M)]
    pub section_length: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the warp and road homographies from an ROI config.
    Calibrate(CalibrateArgs),
    /// Produce a case-1 (masked crop) or case-2 (warped) dataset.
    Transform(TransformArgs),
    /// Generate a synthetic dataset, or simulate detections on a manifest.
    Synth(SynthArgs),
    /// Section-wise AP of detections against ground truth.
    Eval(EvalArgs),
    /// Per-section dataset counts and a cross-case AP comparison.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// ROI config: four image corners plus road width and length in meters.
    #[arg(long)]
    pub roi: PathBuf,
    /// Calibration file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Warped image size as WxH; defaults to roughly square world pixels.
    #[arg(long = "out-size", value_parser = parse_size)]
    pub out_size: Option<(u32, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Source manifest; image paths resolve against its directory.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Calibration written by `calibrate`.
    #[arg(long)]
    pub calibration: PathBuf,
    /// 1 keeps the original view masked to the ROI, 2 warps to a top-down view.
    #[arg(long = "case", value_enum)]
    pub case: CaseArg,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the calibrated warp size (case 2 only).
    #[arg(long = "out-size", value_parser = parse_size)]
    pub out_size: Option<(u32, u32)>,
    /// Train fraction; writes train.json and test.json next to manifest.json.
    #[arg(long)]
    pub split: Option<f64>,
    /// Gray level for warped pixels that fall outside the source.
    #[arg(long, default_value_t = 0)]
    pub fill: u8,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON config with `camera`, `scene`, `frames` and `miss_model`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, or the detections file with `--detect`.
    #[arg(long)]
    pub out: PathBuf,
    /// Frame count, overriding the config.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Also write simulated detections for the generated frames.
    #[arg(long)]
    pub detections: bool,
    /// Skip writing PNG frames.
    #[arg(long = "no-images")]
    pub no_images: bool,
    /// Simulate detections on the ground truth of this manifest instead of
    /// generating a dataset.
    #[arg(long)]
    pub detect: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth manifest; its ROI or homography defines the sections.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detection manifest with a confidence on every annotation.
    #[arg(long)]
    pub dets: PathBuf,
    /// CSV file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Manifests to tabulate; repeat for several cases.
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    /// Evaluation CSVs, one per manifest, in the same order.
    #[arg(long = "eval")]
    pub evals: Vec<PathBuf>,
    /// Directory for table.csv and comparison.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w < 2 || h < 2 {
        return Err(format!("size {s:?} must be at least 2x2"));
    }
    Ok((w, h))
}

/// Synthetic run configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub camera: CameraModel,
    pub scene: SceneTemplate,
    pub frames: usize,
    pub miss_model: MissModel,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            camera: CameraModel::default(),
            scene: SceneTemplate::default(),
            frames: 500,
            miss_model: MissModel::default(),
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

const CORNER_NAMES: [&str; 4] = ["near-left", "near-right", "far-right", "far-left"];

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match &e {
            Error::DegenerateCorrespondences { corners: Some(c), .. } => CliError {
                code: 2,
                message: format!(
                    "degenerate ROI: corners {}, {} and {} are collinear ({e})",
                    CORNER_NAMES[c[0]], CORNER_NAMES[c[1]], CORNER_NAMES[c[2]]
                ),
            },
            Error::DegenerateCorrespondences { .. } | Error::InvalidRoi(_) => {
                CliError { code: 2, message: format!("degenerate ROI: {e}") }
            }
            Error::ImageDecode { .. } => CliError { code: 3, message: e.to_string() },
            _ => CliError { code: 1, message: e.to_string() },
        }
    }
}

fn fail(message: impl Into<String>) -> CliError {
    CliError { code: 1, message: message.into() }
}

/// Files and directories created by a command; removed again unless the
/// command commits.
#[derive(Default)]
struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn dir(&mut self, path: &Path) -> Result<(), Error> {
        let mut missing = Vec::new();
        let mut p = Some(path);
        while let Some(cur) = p {
            if cur.as_os_str().is_empty() || cur.exists() {
                break;
            }
            missing.push(cur.to_path_buf());
            p = cur.parent();
        }
        fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
        self.dirs.extend(missing.into_iter().rev());
        Ok(())
    }

    fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Error> {
        if let Some(parent) = path.parent() {
            self.dir(parent)?;
        }
        self.files.push(path.to_path_buf());
        fs::write(path, contents).map_err(|e| Error::io(path, e))
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialization is infallible") + "\n"
}

fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Parses arguments and runs the command.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)
        .map_err(|e| CliError { code: if e.use_stderr() { 1 } else { 0 }, message: e.to_string() })?;
    execute(&cli)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Calibrate(a) => cmd_calibrate(cli, a),
        Command::Transform(a) => cmd_transform(cli, a),
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Report(a) => cmd_report(cli, a),
    }
}

pub fn cmd_calibrate(cli: &Cli, a: &CalibrateArgs) -> Result<(), CliError> {
    let cfg = RoiConfig::load(&a.roi)?;
    let size = a.out_size.or(cfg.out_size());
    let cal = Calibration::new(&cfg.roi, size, cli.section_length, cli.sections, cli.seed)?;
    let mut out = Outputs::default();
    out.write(&a.out, cal.to_json() + "\n")?;
    out.commit();
    println!("warp size {}x{}", cal.out_width, cal.out_height);
    for (name, r) in CORNER_NAMES.iter().zip(cal.residuals_px) {
        println!("{name:<10} reprojection residual {r:.3e} px");
    }
    Ok(())
}

pub fn cmd_transform(cli: &Cli, a: &TransformArgs) -> Result<(), CliError> {
    let src = DatasetManifest::load(&a.manifest)?;
    let mut cal = Calibration::load(&a.calibration)?;
    if let Some((w, h)) = a.out_size {
        cal = cal.resized(w, h)?;
    }
    let (manifest, offset) = match a.case {
        CaseArg::One => {
            let (m, off) = case1_manifest(&src, &cal.roi)?;
            (m, Some(off))
        }
        CaseArg::Two => (case2_manifest(&src, &cal)?, None),
    };
    let plan = cal.plan(a.fill)?;
    let base = base_dir(&a.manifest);
    let mut out = Outputs::default();
    out.dir(&a.out.join("images"))?;
    let written: Vec<Result<PathBuf, Error>> = src
        .images
        .par_iter()
        .zip(&manifest.images)
        .map(|(s, d)| {
            let img = Raster::load(base.join(&s.file))?;
            let result = match a.case {
                CaseArg::One => crop_and_mask(&img, &cal.roi)?.0,
                CaseArg::Two => warp_image(&img, &plan)?,
            };
            let path = a.out.join(&d.file);
            result.save(&path)?;
            Ok(path)
        })
        .collect();
    let mut first_err = None;
    for w in written {
        match w {
            Ok(p) => out.files.push(p),
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(_) => {}
        }
    }
    if let Some(e) = first_err {
        // remove images whose paths were not recorded because another failed
        for d in &manifest.images {
            let _ = fs::remove_file(a.out.join(&d.file));
        }
        return Err(e.into());
    }
    out.write(&a.out.join("manifest.json"), manifest.to_json() + "\n")?;
    if let Some(ratio) = a.split {
        let (train, test) = split_train_test(&manifest, ratio, cli.seed)?;
        out.write(&a.out.join("train.json"), train.to_json() + "\n")?;
        out.write(&a.out.join("test.json"), test.to_json() + "\n")?;
        println!("split {} train / {} test images", train.images.len(), test.images.len());
    }
    out.commit();
    if let Some(off) = offset {
        println!("case 1: cropped at offset ({}, {})", off.x, off.y);
    } else {
        println!("case 2: warped to {}x{}", cal.out_width, cal.out_height);
    }
    println!("{} images, {} annotations", manifest.images.len(), manifest.annotations.len());
    Ok(())
}

fn load_synth_config(path: Option<&Path>) -> Result<SynthConfig, Error> {
    match path {
        None => Ok(SynthConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::json(p, e))
        }
    }
}

pub fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<(), CliError> {
    let mut cfg = load_synth_config(a.config.as_deref())?;
    cfg.miss_model.seed = cli.seed;
    if let Some(n) = a.frames {
        cfg.frames = n;
    }
    let mut out = Outputs::default();

    if let Some(manifest_path) = &a.detect {
        let gt = DatasetManifest::load(manifest_path)?;
        let mut dets = gt.clone();
        dets.annotations = simulate_detector(&gt.annotations, &cfg.miss_model)?;
        out.write(&a.out, dets.to_json() + "\n")?;
        out.commit();
        println!("{} detections for {} ground-truth objects", dets.annotations.len(), gt.annotations.len());
        return Ok(());
    }

    let seq = generate_sequence(&cfg.camera, &cfg.scene, cfg.frames, cli.seed)?;
    out.dir(&a.out)?;
    let roi_cfg = RoiConfig { roi: seq.roi, out_width: None, out_height: None };
    out.write(&a.out.join("roi.json"), to_json(&roi_cfg))?;
    out.write(&a.out.join("config.json"), to_json(&cfg))?;
    if !a.no_images {
        out.dir(&a.out.join("frames"))?;
        let results: Vec<Result<(), Error>> = seq
            .manifest
            .images
            .par_iter()
            .enumerate()
            .map(|(i, rec)| seq.render(i).save(a.out.join(&rec.file)))
            .collect();
        for rec in &seq.manifest.images {
            out.files.push(a.out.join(&rec.file));
        }
        results.into_iter().collect::<Result<Vec<_>, _>>()?;
    }
    out.write(&a.out.join("manifest.json"), seq.manifest.to_json() + "\n")?;
    if a.detections {
        let mut dets = seq.manifest.clone();
        dets.annotations = simulate_detector(&seq.manifest.annotations, &cfg.miss_model)?;
        out.write(&a.out.join("detections.json"), dets.to_json() + "\n")?;
    }
    out.commit();
    println!(
        "{} frames, {} objects, seed {}",
        seq.manifest.images.len(),
        seq.manifest.annotations.len(),
        cli.seed
    );
    Ok(())
}

pub fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<(), CliError> {
    let gt = DatasetManifest::load(&a.gt)?;
    let dets = DatasetManifest::load(&a.dets)?;
    if let Some((i, d)) = dets.annotations.iter().enumerate().find(|(_, d)| d.confidence.is_none()) {
        return Err(Error::MissingConfidence { index: i, image_id: d.image_id.clone() }.into());
    }
    if let Some(g) = gt.annotations.iter().find(|g| g.confidence.is_some()) {
        return Err(fail(format!(
            "{}: ground truth on image {:?} carries a confidence",
            a.gt.display(),
            g.image_id
        )));
    }
    let map = gt.section_map(cli.section_length, cli.sections)?;
    let result = evaluate_by_section(&gt.annotations, &dets.annotations, &map, cli.iou)?;
    if let Some(path) = &a.out {
        let mut out = Outputs::default();
        out.write(path, result.to_csv())?;
        out.commit();
    }
    println!("{} (IoU {})", gt.case, cli.iou);
    print!("{result}");
    Ok(())
}

pub fn cmd_report(cli: &Cli, a: &ReportArgs) -> Result<(), CliError> {
    if !a.evals.is_empty() && a.evals.len() != a.manifests.len() {
        return Err(fail(format!(
            "{} --eval files for {} --manifest files",
            a.evals.len(),
            a.manifests.len()
        )));
    }
    let mut reports: Vec<DatasetReport> = Vec::new();
    for p in &a.manifests {
        let m = DatasetManifest::load(p)?;
        let map = m.section_map(cli.section_length, cli.sections)?;
        let r = dataset_report(&m, &map);
        print!("{r}");
        reports.push(r);
    }
    let mut table = String::from("case,section,images,objects\n");
    for r in &reports {
        table += r.to_csv().split_once('\n').map_or("", |(_, rows)| rows);
    }

    let mut comparison = None;
    if !a.evals.is_empty() {
        let mut evals = Vec::new();
        for p in &a.evals {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            evals.push(EvalResult::from_csv(&text)?);
        }
        let n = evals.iter().map(|e| e.sections.len()).max().unwrap_or(0);
        let mut csv = String::from("section");
        for r in &reports {
            csv += &format!(",{}_ap", r.case);
        }
        csv.push('\n');
        let cell = |e: &EvalResult, s: usize| e.sections.get(s).map_or(String::new(), |r| r.ap.to_string());
        for s in 0..n {
            csv += &(s + 1).to_string();
            for e in &evals {
                csv += &format!(",{}", cell(e, s));
            }
            csv.push('\n');
        }
        csv += "all";
        for e in &evals {
            csv += &format!(",{}", e.overall.ap);
        }
        csv.push('\n');
        println!();
        println!("section AP by case");
        for (r, e) in reports.iter().zip(&evals) {
            let aps = e.section_aps();
            let lo = aps.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = aps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let cells: Vec<String> = aps.iter().map(|v| format!("{v:.4}")).collect();
            println!(
                "{:<8} [{}] spread {:.4}; every section >= {ACCEPTABLE_AP}: {}",
                r.case.to_string(),
                cells.join(", "),
                hi - lo,
                if lo >= ACCEPTABLE_AP { "yes" } else { "no" }
            );
        }
        comparison = Some(csv);
    }

    if let Some(dir) = &a.out {
        let mut out = Outputs::default();
        out.dir(dir)?;
        out.write(&dir.join("table.csv"), &table)?;
        if let Some(csv) = &comparison {
            out.write(&dir.join("comparison.csv"), csv)?;
        }
        out.commit();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_flag() {
        assert_eq!(parse_size("646x324"), Ok((646, 324)));
        assert!(parse_size("646").is_err());
        assert!(parse_size("1x5").is_err());
    }

    #[test]
    fn degenerate_roi_maps_to_exit_2() {
        let e: CliError =
            Error::DegenerateCorrespondences { reason: "x".into(), corners: Some([0, 1, 2]) }.into();
        assert_eq!(e.code, 2);
        assert!(e.message.contains("near-left, near-right and far-right"));
    }

    #[test]
    fn failed_command_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let nested = dir.path().join("a/b");
        {
            let mut out = Outputs::default();
            out.write(&nested.join("x.txt"), "hi").unwrap();
            assert!(nested.join("x.txt").exists());
        }
        assert!(!dir.path().join("a").exists());
    }

    #[test]
    fn default_config_round_trips() {
        let text = serde_json::to_string(&SynthConfig::default()).unwrap();
        let back: SynthConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, SynthConfig::default());
        let partial: SynthConfig = serde_json::from_str(r#"{"frames": 3}"#).unwrap();
        assert_eq!(partial.frames, 3);
        assert_eq!(partial.camera, CameraModel::default());
    }
}

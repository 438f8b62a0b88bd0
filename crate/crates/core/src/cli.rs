//! Command line front end: configuration loading and the four commands.
//!
//! Every command reads a JSON [`RunConfig`] (optional) and applies flag
//! overrides on top. Outputs are written under `out` and depend only on the
//! configuration and inputs, never on the worker count.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, Calibration, CalibrationConfig, CalibrationReport};
use crate::error::{Result, TcmError};
use crate::evaluation::{
    repeated_splits, score, EvalDataset, EvalResult, Method, SplitConfig, SplitSummary,
};
use crate::geom_raster::{extract_chip_stack, Polygon, Scene};
use crate::io::{self, FootprintRecord};
use crate::matching::{detect, DetectionResult, TcmParams};
use crate::pipeline::Workers;
use crate::synthgen::{generate, SynthConfig, TruthLabel};

/// Threshold setting: a fixed value or `"auto"` for calibration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Theta {
    #[default]
    Auto,
    Value(f64),
}

impl FromStr for Theta {
    type Err = TcmError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Theta::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(Theta::Value(v)),
            _ => Err(TcmError::Config(format!(
                "theta must be \"auto\" or a non-negative number, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta::Auto => f.write_str("auto"),
            Theta::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Theta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Theta::Auto => s.serialize_str("auto"),
            Theta::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Theta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Theta::from_str(&v.to_string()).map_err(serde::de::Error::custom),
            Raw::Text(s) => Theta::from_str(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Everything a command needs. Relative paths resolve against the working
/// directory. `data` names a directory in the layout `generate` writes;
/// `scenes`, `polygons` and `labels` override its parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub scenes: Option<PathBuf>,
    pub polygons: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Calibration report to reuse instead of calibrating again.
    pub calibration_report: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub k: Option<usize>,
    pub r: Option<f64>,
    pub theta: Theta,
    /// Methods for `evaluate`; empty means all of them.
    pub methods: Vec<Method>,
    pub calibration: CalibrationConfig,
    pub splits: SplitConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            scenes: None,
            polygons: None,
            labels: None,
            calibration_report: None,
            out: PathBuf::from("tcm-out"),
            seed: 0,
            workers: 1,
            k: None,
            r: None,
            theta: Theta::Auto,
            methods: Vec::new(),
            calibration: CalibrationConfig::default(),
            splits: SplitConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TcmError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| TcmError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = o.k {
            self.k = Some(v);
        }
        if let Some(v) = o.r {
            self.r = Some(v);
        }
        if let Some(v) = o.theta {
            self.theta = v;
        }
        if let Some(v) = o.method {
            self.methods = vec![v];
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = &o.data {
            self.data = Some(v.clone());
        }
    }

    /// Checks values and pushes the global seed into the nested settings.
    pub fn resolve(mut self) -> Result<Self> {
        if self.workers == 0 {
            return Err(TcmError::Config("workers must be at least 1".into()));
        }
        if self.k == Some(0) {
            return Err(TcmError::Config("k must be at least 1".into()));
        }
        if let Some(r) = self.r {
            if !(r > 0.0 && r.is_finite()) {
                return Err(TcmError::Config(format!("r must be positive, got {r}")));
            }
        }
        self.calibration
            .series
            .features
            .validate()
            .map_err(|e| TcmError::Config(e.to_string()))?;
        if !(self.calibration.series.epsilon > 0.0) {
            return Err(TcmError::Config("epsilon must be positive".into()));
        }
        self.calibration.seed = self.seed;
        self.splits.seed = self.seed;
        self.synth.seed = self.seed;
        if let Some(k) = self.k {
            self.calibration.k_grid = vec![k];
        }
        if let Some(r) = self.r {
            self.calibration.r_grid = vec![r];
        }
        Ok(self)
    }

    fn input(&self, explicit: &Option<PathBuf>, default_name: &str, what: &str) -> Result<PathBuf> {
        let path = match (explicit, &self.data) {
            (Some(p), _) => p.clone(),
            (None, Some(d)) => d.join(default_name),
            (None, None) => {
                return Err(TcmError::Config(format!(
                    "no {what} given; set `data` or `{what}`"
                )));
            }
        };
        if !path.exists() {
            return Err(TcmError::Config(format!(
                "{what} path {} does not exist",
                path.display()
            )));
        }
        Ok(path)
    }

    pub fn scenes_path(&self) -> Result<PathBuf> {
        self.input(&self.scenes, "scenes", "scenes")
    }

    pub fn polygons_path(&self) -> Result<PathBuf> {
        self.input(&self.polygons, "footprints.geojson", "polygons")
    }

    /// Labels file if one is configured or present in the data directory.
    pub fn labels_path(&self) -> Result<Option<PathBuf>> {
        match (&self.labels, &self.data) {
            (Some(_), _) => self.input(&self.labels, "labels.csv", "labels").map(Some),
            (None, Some(d)) if d.join("labels.csv").exists() => Ok(Some(d.join("labels.csv"))),
            _ => Ok(None),
        }
    }
}

#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    /// JSON configuration file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Number of clusters per layer.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Buffer radius in world units.
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Divergence threshold, or "auto".
    #[arg(long, global = true)]
    pub theta: Option<Theta>,
    #[arg(long, global = true)]
    pub method: Option<Method>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Dataset directory with scenes/, footprints.geojson and labels.csv.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset.
    Generate,
    /// Choose (k, r, theta) from random polygons.
    Calibrate,
    /// Date every footprint.
    Detect,
    /// Score methods over repeated train/test splits.
    Evaluate,
}

#[derive(Clone, Debug, Parser)]
#[command(
    name = "tcm",
    version,
    about = "Temporal cluster matching change detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

impl Cli {
    pub fn config(&self) -> Result<RunConfig> {
        let mut config = match &self.overrides.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        config.apply(&self.overrides);
        config.resolve()
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = cli.config()?;
    match cli.command {
        Command::Generate => cmd_generate(&config).map(|_| ()),
        Command::Calibrate => cmd_calibrate(&config).map(|_| ()),
        Command::Detect => cmd_detect(&config).map(|_| ()),
        Command::Evaluate => cmd_evaluate(&config).map(|_| ()),
    }
}

fn create_out(config: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&config.out).map_err(|e| TcmError::io(&config.out, e))?;
    Ok(&config.out)
}

pub fn cmd_generate(config: &RunConfig) -> Result<PathBuf> {
    let ds = generate(&config.synth)?;
    let out = create_out(config)?;
    io::write_scene_dir(&out.join("scenes"), &ds.scenes)?;
    let years: std::collections::HashMap<&str, i32> = ds
        .labels
        .iter()
        .map(|l| (l.footprint_id.as_str(), l.label_year))
        .collect();
    let records: Vec<FootprintRecord> = ds
        .footprints
        .iter()
        .map(|p| FootprintRecord {
            polygon: p.clone(),
            label_year: years.get(p.id()).copied(),
        })
        .collect();
    io::geojson::write(&out.join("footprints.geojson"), &records)?;
    io::write_labels(&out.join("labels.csv"), &ds.labels)?;
    io::write_json(&out.join("synth_config.json"), &config.synth)?;
    log::info!(
        "wrote {} scenes and {} footprints to {}",
        ds.scenes.len(),
        ds.footprints.len(),
        out.display()
    );
    Ok(out.to_path_buf())
}

/// Scenes, footprints and labels named by the configuration.
pub struct Inputs {
    pub scenes: Vec<Scene>,
    pub footprints: Vec<Polygon>,
    pub labels: Option<Vec<TruthLabel>>,
}

pub fn load_inputs(config: &RunConfig) -> Result<Inputs> {
    let scenes = io::read_scene_dir(&config.scenes_path()?)?;
    let records = io::geojson::read(&config.polygons_path()?)?;
    let years: Vec<i32> = scenes.iter().map(|s| s.year).collect();
    let labels = match config.labels_path()? {
        Some(p) => Some(io::read_labels(&p)?),
        None => {
            let from_props = io::labels_from_records(&records, &years)?;
            (!from_props.is_empty()).then_some(from_props)
        }
    };
    if let Some(labels) = &labels {
        for l in labels {
            if years.get(l.label_index.wrapping_sub(1)) != Some(&l.label_year) {
                return Err(TcmError::InconsistentInputs(format!(
                    "label for {} gives index {} and year {}, which disagree with the scenes",
                    l.footprint_id, l.label_index, l.label_year
                )));
            }
        }
    }
    let mut footprints: Vec<Polygon> = records.into_iter().map(|r| r.polygon).collect();
    footprints.sort_by(|a, b| a.id().cmp(b.id()));
    Ok(Inputs {
        scenes,
        footprints,
        labels,
    })
}

fn run_calibration(config: &RunConfig, inputs: &Inputs, workers: &Workers) -> Result<Calibration> {
    let mut cal = calibrate(
        workers,
        &inputs.scenes,
        &inputs.footprints,
        &config.calibration,
    )?;
    if let Some(labels) = &inputs.labels {
        let by_id = labels
            .iter()
            .map(|l| (l.footprint_id.clone(), l.label_index))
            .collect();
        cal.score_records(&by_id);
    }
    Ok(cal)
}

pub fn cmd_calibrate(config: &RunConfig) -> Result<CalibrationReport> {
    let inputs = load_inputs(config)?;
    let workers = Workers::new(config.workers)?;
    let cal = run_calibration(config, &inputs, &workers)?;
    let out = create_out(config)?;
    io::write_json(&out.join("calibration.json"), &cal.report)?;
    io::write_calibration_csv(&out.join("calibration.csv"), &cal.report)?;
    let c = cal.report.chosen;
    log::info!("chose k={} r={} theta={}", c.k, c.r, c.theta);
    Ok(cal.report)
}

/// Parameters for detection: explicit flags, a saved report, or a fresh
/// calibration, in that order.
pub fn detection_params(
    config: &RunConfig,
    inputs: &Inputs,
    workers: &Workers,
) -> Result<TcmParams> {
    if let (Some(k), Some(r), Theta::Value(theta)) = (config.k, config.r, config.theta) {
        return Ok(TcmParams { k, r, theta });
    }
    let mut chosen = match &config.calibration_report {
        Some(p) => io::read_json::<CalibrationReport>(p, "calibration report")?.chosen,
        None => run_calibration(config, inputs, workers)?.report.chosen,
    };
    if let Theta::Value(theta) = config.theta {
        chosen.theta = theta;
    }
    Ok(chosen)
}

pub fn cmd_detect(config: &RunConfig) -> Result<Vec<DetectionResult>> {
    let inputs = load_inputs(config)?;
    let workers = Workers::new(config.workers)?;
    let params = detection_params(config, &inputs, &workers)?;
    let series = config.calibration.series;
    let detections = workers.try_map(&inputs.footprints, |p| {
        let chips = extract_chip_stack(&inputs.scenes, p, params.r)?;
        detect(&chips, params, &series, config.seed)
    })?;
    let out = create_out(config)?;
    io::write_detections(&out.join("detections.csv"), &detections)?;
    log::info!(
        "dated {} footprints with k={} r={} theta={}",
        detections.len(),
        params.k,
        params.r,
        params.theta
    );
    Ok(detections)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub calibration: TcmParams,
    /// Label-free detector scored on every labeled footprint.
    pub tcm_semi_full: EvalResultSummary,
    pub methods: Vec<SplitSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResultSummary {
    pub n: usize,
    pub accuracy: f64,
    pub mae_years: f64,
    pub mae_index: f64,
}

impl From<&EvalResult> for EvalResultSummary {
    fn from(r: &EvalResult) -> Self {
        Self {
            n: r.n,
            accuracy: r.accuracy,
            mae_years: r.mae_years,
            mae_index: r.mae_index,
        }
    }
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<MetricsReport> {
    let inputs = load_inputs(config)?;
    let labels = inputs
        .labels
        .clone()
        .ok_or_else(|| TcmError::Config("evaluate needs labels".into()))?;
    let workers = Workers::new(config.workers)?;
    let cal = run_calibration(config, &inputs, &workers)?;
    let data = EvalDataset::build(&workers, &inputs.scenes, &inputs.footprints, &labels, &cal)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let full = score(&data.predictions(&all, &data.semi), &data.labels)?;
    let methods = if config.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        config.methods.clone()
    };
    let summaries = methods
        .iter()
        .map(|&m| {
            let s = repeated_splits(&workers, &data, m, config.splits)?;
            log::info!(
                "{m}: accuracy {:.3} +- {:.3}",
                s.accuracy.mean,
                s.accuracy.std
            );
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = MetricsReport {
        calibration: cal.report.chosen,
        tcm_semi_full: (&full).into(),
        methods: summaries,
    };
    let out = create_out(config)?;
    io::write_json(&out.join("metrics.json"), &report)?;
    io::write_metrics_csv(&out.join("metrics.csv"), &report.methods)?;
    Ok(report)
}

//! Command-line driver: `synth`, `analyze` and `features`.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::features::{extract_features_with, FeatureOptions, PressureScope, SpeedSummary};
use crate::hwdata::{load_dataset, parse_svc, Dataset, DeviceProfile, Recording, RecordingKey};
use crate::report::{
    aggregate_with, render_fig_data, render_table1, render_table2, FeatureSelector,
};
use crate::stats::{pairwise_session_tests, DEFAULT_EXACT_THRESHOLD};
use crate::synth::{generate_dataset, SynthConfig};

pub const DEFAULT_ALPHA: f64 = 0.05;

pub const TABLE1_CSV: &str = "table1.csv";
pub const TABLE1_JSON: &str = "table1.json";
pub const TABLE2_CSV: &str = "table2.csv";
pub const TABLE2_JSON: &str = "table2.json";
pub const FIG4_CSV: &str = "fig4_data.csv";
pub const FIG5_CSV: &str = "fig5_data.csv";

const FORMAT_HELP: &str = "\
SVC file format:
  first line: sample count N
  then N lines of 7 whitespace-separated integers
    x y timestamp pen_status azimuth altitude pressure
  pen_status is 0 (up) or 1 (down); pressure lies in [0, max_level].

Dataset layout:
  <root>/subject<NN>/session<S>/task<T>.svc
  NN = 01..99, S = 1..5, T = 1..9. Missing files are allowed.";

#[derive(Debug, Parser)]
#[command(
    name = "hwfatigue",
    version,
    about = "Pen-pressure saturation analysis of online handwriting"
)]
#[command(after_long_help = FORMAT_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    #[command(after_long_help = FORMAT_HELP)]
    Synth(SynthArgs),
    /// Run the full pipeline and write the output tables.
    #[command(after_long_help = FORMAT_HELP)]
    Analyze(AnalyzeArgs),
    /// Print the features of a single SVC file as JSON.
    #[command(after_long_help = FORMAT_HELP)]
    Features(FeaturesArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GeneratorArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 21)]
    pub subjects: u32,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
}

impl GeneratorArgs {
    pub fn to_config(&self, device: DeviceProfile) -> SynthConfig {
        SynthConfig {
            n_subjects: self.subjects,
            samples_per_recording: self.samples,
            seed: self.seed,
            device,
            ..SynthConfig::default()
        }
    }
}

impl Default for GeneratorArgs {
    fn default() -> Self {
        Self {
            seed: 0,
            subjects: 21,
            samples: 2000,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Dataset root to write.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub generator: GeneratorArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureArg {
    SaturationRatio,
    MeanPressure,
}

impl From<FeatureArg> for FeatureSelector {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::SaturationRatio => FeatureSelector::SaturationRatio,
            FeatureArg::MeanPressure => FeatureSelector::MeanPressure,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DeviceArgs {
    /// Highest pressure level the tablet reports.
    #[arg(long, default_value_t = 1023)]
    pub max_level: u32,
    /// Saturation threshold; defaults to --max-level.
    #[arg(long)]
    pub sat_level: Option<u32>,
    /// Restrict pressure features to pen-down samples.
    #[arg(long)]
    pub pen_down_only: bool,
}

impl Default for DeviceArgs {
    fn default() -> Self {
        Self {
            max_level: 1023,
            sat_level: None,
            pen_down_only: false,
        }
    }
}

impl DeviceArgs {
    fn device(&self) -> Result<DeviceProfile> {
        Ok(DeviceProfile::new(
            self.max_level,
            DeviceProfile::default().force_at_max,
        )?)
    }

    fn options(&self) -> Result<FeatureOptions> {
        if self.sat_level == Some(0) {
            bail!("--sat-level must be positive");
        }
        Ok(FeatureOptions {
            sat_level: Some(self.sat_level.unwrap_or(self.max_level)),
            scope: if self.pen_down_only {
                PressureScope::PenDown
            } else {
                PressureScope::All
            },
        })
    }
}

#[derive(Debug, Clone, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["input", "synth"]))]
pub struct AnalyzeArgs {
    /// Dataset root to analyze.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Analyze an in-memory synthetic dataset instead of --input.
    #[arg(long)]
    pub synth: bool,
    /// Directory for the output tables.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub device: DeviceArgs,
    /// Feature compared between sessions in table2.
    #[arg(long, value_enum, default_value_t = FeatureArg::SaturationRatio)]
    pub feature: FeatureArg,
    /// Use the exact rank-sum distribution when n_a + n_b is at most this.
    #[arg(long, default_value_t = DEFAULT_EXACT_THRESHOLD)]
    pub exact_threshold: usize,
    /// Significance level for flagging table2 cells.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[command(flatten)]
    pub generator: GeneratorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FeaturesArgs {
    /// SVC file to inspect.
    pub file: PathBuf,
    #[command(flatten)]
    pub device: DeviceArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Input(PathBuf),
    Synth(Box<SynthConfig>),
}

/// Resolved settings for one analysis run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: DataSource,
    pub output: PathBuf,
    pub device: DeviceProfile,
    pub options: FeatureOptions,
    pub feature: FeatureSelector,
    pub exact_threshold: usize,
    pub alpha: f64,
}

impl RunConfig {
    pub fn from_args(args: &AnalyzeArgs) -> Result<Self> {
        let device = args.device.device()?;
        let source = match (&args.input, args.synth) {
            (Some(path), false) => DataSource::Input(path.clone()),
            (None, true) => DataSource::Synth(Box::new(args.generator.to_config(device))),
            _ => bail!("exactly one of --input or --synth is required"),
        };
        ensure!(
            args.alpha > 0.0 && args.alpha < 1.0,
            "--alpha must lie in (0, 1), got {}",
            args.alpha
        );
        Ok(Self {
            source,
            output: args.output.clone(),
            device,
            options: args.device.options()?,
            feature: args.feature.into(),
            exact_threshold: args.exact_threshold,
            alpha: args.alpha,
        })
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(&args, out),
        Command::Analyze(args) => cmd_analyze(&RunConfig::from_args(&args)?, out, err),
        Command::Features(args) => cmd_features(&args, out),
    }
}

/// Writes a synthetic dataset and prints the effective configuration.
pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let config = args.generator.to_config(DeviceProfile::default());
    let dataset = generate_dataset(&config)?;
    dataset.write_to(&args.output)?;
    serde_json::to_writer_pretty(&mut *out, &config)?;
    writeln!(out)?;
    Ok(())
}

struct Artifact {
    name: &'static str,
    contents: String,
}

fn load(source: &DataSource, device: &DeviceProfile) -> Result<Dataset> {
    match source {
        DataSource::Input(root) => {
            ensure!(
                root.is_dir(),
                "input directory {} does not exist",
                root.display()
            );
            Ok(load_dataset(root, device)?)
        }
        DataSource::Synth(config) => Ok(generate_dataset(config)?),
    }
}

/// Runs the pipeline and writes the six output files.
///
/// Everything is computed before the output directory is touched, so a
/// failed run leaves no partial outputs behind.
pub fn cmd_analyze(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let dataset = load(&config.source, &config.device)?;
    ensure!(!dataset.is_empty(), "dataset contains no recordings");

    let subjects: BTreeSet<u32> = dataset.keys().map(|k| k.subject).collect();
    if subjects.len() < 2 {
        writeln!(
            err,
            "warning: {} subject(s) found; standard deviations are undefined and p-values degenerate",
            subjects.len()
        )?;
    }

    let saturation = aggregate_with(&dataset, FeatureSelector::SaturationRatio, &config.options)?;
    let pressure = aggregate_with(&dataset, FeatureSelector::MeanPressure, &config.options)?;
    let compared = match config.feature {
        FeatureSelector::SaturationRatio => &saturation,
        FeatureSelector::MeanPressure => &pressure,
    };

    let tests = pairwise_session_tests(&compared.session_values(), config.exact_threshold)?;
    for warning in &tests.warnings {
        writeln!(err, "warning: {warning}")?;
    }

    let table1 = render_table1(&pressure);
    let table2 = render_table2(&tests.results, config.alpha);
    let artifacts = [
        Artifact {
            name: TABLE1_CSV,
            contents: table1.to_csv(),
        },
        Artifact {
            name: TABLE1_JSON,
            contents: table1.to_json(),
        },
        Artifact {
            name: TABLE2_CSV,
            contents: table2.to_csv(),
        },
        Artifact {
            name: TABLE2_JSON,
            contents: table2.to_json(),
        },
        Artifact {
            name: FIG4_CSV,
            contents: render_fig_data(&saturation).to_csv(),
        },
        Artifact {
            name: FIG5_CSV,
            contents: render_fig_data(&pressure).to_csv(),
        },
    ];

    write_artifacts(&config.output, &artifacts)?;

    for row in &table2.rows {
        let pairs = row.significant_pairs();
        if pairs.is_empty() {
            writeln!(
                out,
                "task {}: no significant pairs at alpha {}",
                row.task, config.alpha
            )?;
        } else {
            writeln!(
                out,
                "task {}: significant pairs at alpha {}: {}",
                row.task,
                config.alpha,
                pairs.join(", ")
            )?;
        }
    }
    Ok(())
}

fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for a in artifacts {
        let path = dir.join(a.name);
        fs::write(&path, &a.contents).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct FeatureReport {
    saturation_ratio: f64,
    mean_pressure: f64,
    n_samples: usize,
    speed_x: SpeedSummary,
    speed_y: SpeedSummary,
}

/// Prints the feature vector of one file.
pub fn cmd_features(args: &FeaturesArgs, out: &mut dyn Write) -> Result<()> {
    let device = args.device.device()?;
    let text = fs::read_to_string(&args.file)
        .with_context(|| format!("reading {}", args.file.display()))?;
    let samples =
        parse_svc(&text, &device).with_context(|| format!("parsing {}", args.file.display()))?;
    // Identity is irrelevant for a single file.
    let key = RecordingKey::new(1, 1, 1)?;
    let recording = Recording::new(key, samples, device)
        .with_context(|| format!("validating {}", args.file.display()))?;
    let fv = extract_features_with(&recording, &args.device.options()?)?;
    let report = FeatureReport {
        saturation_ratio: fv.saturation_ratio,
        mean_pressure: fv.mean_pressure,
        n_samples: fv.n_samples,
        speed_x: SpeedSummary::of(&fv.speed_x),
        speed_y: SpeedSummary::of(&fv.speed_y),
    };
    serde_json::to_writer_pretty(&mut *out, &report)?;
    writeln!(out)?;
    Ok(())
}

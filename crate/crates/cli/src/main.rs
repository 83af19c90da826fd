use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use qstg::dataset::{load_dataset, save_dataset, DatasetFormat, LoadedDataset};
use qstg::graph::feature_columns;
use qstg::model::Dataset;
use qstg::pipeline::{dataset_features, evaluate_loso, predict, train_pipeline, ModelBundle, PipelineConfig, Variant};
use qstg::synth::{synth_generate, SynthSpec};

#[derive(Parser)]
#[command(name = "qstg", version, about = "Activity recognition from qualitative spatio-temporal graphs")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Canonical,
    Cad120,
}

impl From<Format> for DatasetFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Canonical => DatasetFormat::Canonical,
            Format::Cad120 => DatasetFormat::Cad120,
        }
    }
}

#[derive(clap::Args)]
struct DatasetArgs {
    /// Dataset directory or single video file.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "canonical")]
    format: Format,
}

#[derive(clap::Args)]
struct ConfigArg {
    /// TOML pipeline configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Apply an ablation on top of the configuration.
    #[arg(long)]
    variant: Option<Variant>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw tracks into canonical JSON video files.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "cad120")]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a scripted synthetic dataset.
    Synth {
        /// JSON script; the built-in four-class benchmark when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-window feature vectors as CSV.
    Features {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a whole dataset and write a model bundle.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify one video file with a trained bundle.
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        video: PathBuf,
    },
    /// Leave-one-subject-out evaluation.
    Evaluate {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        data: DatasetArgs,
        /// Overrides the configured repeat count.
        #[arg(long)]
        repeats: Option<usize>,
        /// JSON report path; a `.txt` confusion matrix is written next to it.
        #[arg(long)]
        report: PathBuf,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

fn load_config(arg: &ConfigArg) -> Result<PipelineConfig> {
    let cfg = match &arg.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    Ok(match arg.variant {
        Some(v) => cfg.variant(v),
        None => cfg,
    })
}

fn load(data: &DatasetArgs) -> Result<Dataset> {
    let LoadedDataset { dataset, warnings } = load_dataset(&data.dataset, data.format.into())?;
    if !warnings.is_empty() {
        log::warn!("{} frames or videos dropped while loading", warnings.len());
    }
    log::info!(
        "{} videos, {} classes, {} subjects",
        dataset.videos.len(),
        dataset.class_count(),
        dataset.subjects().len()
    );
    Ok(dataset)
}

fn write_features(cfg: &PipelineConfig, dataset: &Dataset, out: &Path) -> Result<()> {
    let feats = dataset_features(dataset, &cfg.graph)?;
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    let mut header: Vec<String> = [
        "video_id",
        "subject_id",
        "label",
        "window",
        "first_fragment",
        "last_fragment",
        "start_frame",
        "end_frame",
    ]
    .map(String::from)
    .to_vec();
    header.extend(feature_columns(&cfg.graph));
    w.write_record(&header)?;
    for f in &feats {
        for (i, (win, v)) in f.windows.iter().zip(&f.features).enumerate() {
            let mut row = vec![
                f.video_id.clone(),
                f.subject_id.clone(),
                dataset.labels[f.class_index].clone(),
                i.to_string(),
                win.first_fragment.to_string(),
                win.last_fragment.to_string(),
                win.frames.start.to_string(),
                win.frames.end.to_string(),
            ];
            row.extend(v.counts.iter().map(u32::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert { input, format, out } => {
            let LoadedDataset { dataset, warnings } = load_dataset(&input, format.into())?;
            for w in &warnings {
                log::info!("{w}");
            }
            save_dataset(&dataset, &out)?;
            println!(
                "wrote {} videos to {} ({} warnings)",
                dataset.videos.len(),
                out.display(),
                warnings.len()
            );
        }
        Command::Synth { spec, seed, out } => {
            let spec = match spec {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<SynthSpec>(&text).map_err(qstg::Error::from)?
                }
                None => SynthSpec::benchmark(),
            };
            let dataset = synth_generate(&spec, seed)?;
            save_dataset(&dataset, &out)?;
            println!("wrote {} videos to {}", dataset.videos.len(), out.display());
        }
        Command::Features { config, data, out } => {
            let cfg = load_config(&config)?;
            write_features(&cfg, &load(&data)?, &out)?;
        }
        Command::Train { config, data, out } => {
            let cfg = load_config(&config)?;
            let bundle = train_pipeline(&cfg, &load(&data)?)?;
            bundle.save(&out)?;
        }
        Command::Predict { bundle, video } => {
            let bundle = ModelBundle::load(&bundle)?;
            let LoadedDataset { dataset, .. } = load_dataset(&video, DatasetFormat::Canonical)?;
            for v in &dataset.videos {
                let p = predict(&bundle, v)?;
                let scores: serde_json::Map<String, serde_json::Value> =
                    bundle.labels.iter().cloned().zip(p.scores.iter().map(|s| serde_json::json!(s))).collect();
                let line = serde_json::json!({
                    "video_id": v.video_id,
                    "label": p.label.name,
                    "scores": scores,
                    "words": p.words,
                });
                println!("{line}");
            }
        }
        Command::Evaluate {
            config,
            data,
            repeats,
            report,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            let dataset = load(&data)?;
            let r = evaluate_loso(&cfg, &dataset, cfg.repeats)?;
            r.save(&report)?;
            print!("{}", r.to_text());
        }
        Command::DefaultConfig => {
            print!("{}", PipelineConfig::default().to_toml_string()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let stage = e.downcast_ref::<qstg::Error>().map_or("cli", qstg::Error::stage);
            eprintln!("error [{stage}]: {e:#}");
            ExitCode::FAILURE
        }
    }
}

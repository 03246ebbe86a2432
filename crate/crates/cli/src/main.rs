//! `osdgd`: overlapped-speech and gender detection from the command line.

mod commands;
mod config;
mod data;
mod error;

use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::{Config, KEYS};
use error::CliError;

/// Declares flags that mirror configuration keys. Each flag overrides the
/// key of the same name.
macro_rules! key_flags {
    ($(#[$sm:meta])* $name:ident { $($(#[$m:meta])* $field:ident),* $(,)? }) => {
        $(#[$sm])*
        #[derive(Args, Debug, Default)]
        struct $name {
            $($(#[$m])* #[arg(long, value_name = "VALUE")] $field: Option<String>,)*
        }

        impl $name {
            fn overrides(&self) -> Vec<(String, String)> {
                let mut v = Vec::new();
                $(if let Some(x) = &self.$field {
                    v.push((stringify!($field).to_string(), x.clone()));
                })*
                v
            }
        }
    };
}

#[derive(Args, Debug, Default)]
struct GlobalFlags {
    /// Seed for every random choice
    #[arg(long, global = true, value_name = "VALUE")]
    seed: Option<String>,
    /// Output directory
    #[arg(long, global = true, value_name = "VALUE")]
    out: Option<String>,
    /// Worker threads for features and detect
    #[arg(long, global = true, value_name = "VALUE")]
    jobs: Option<String>,
}

impl GlobalFlags {
    fn overrides(&self) -> Vec<(String, String)> {
        [("seed", &self.seed), ("out", &self.out), ("jobs", &self.jobs)]
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

key_flags!(SynthFlags {
    /// Corpus kind: shows, mixtures (2 s two-speaker) or pool (long overlap-free turns)
    synth_kind,
    /// Hours of audio to generate
    hours,
    /// Number of files, overriding hours
    count,
    /// Target overlap fraction of the timeline
    overlap,
    /// Speakers per gender
    speakers_per_gender,
});

key_flags!(FeatureFlags {
    /// Feature kind: mfcc, stub768, stub1024 or feat
    features,
    /// Seed of the stub projection
    stub_seed,
    /// Directory of <name>.feat files for features=feat
    feat_dir,
    /// Corpus manifest
    manifest,
});

key_flags!(TrainFlags {
    /// Maximum epochs (overlap detectors)
    max_epochs,
    /// Adam learning rate
    learning_rate,
    /// Sequences per update
    batch_size,
    /// Epochs without dev improvement before stopping
    patience,
    /// Dev-loss drop that resets the patience count
    min_delta,
});

key_flags!(OsdTrainFlags {
    /// Architecture: tcn or rosd
    arch,
    /// Fraction of shows held out for early stopping
    dev_fraction,
});

key_flags!(DetectFlags {
    /// Overlap detector checkpoint
    model,
    /// Decision threshold on the overlap probability
    threshold,
    /// Odd median filter length in frames, 1 disables it
    median_frames,
});

key_flags!(WindowFlags {
    /// Window length in frames
    window_frames,
    /// Window shift in frames
    shift_frames,
});

key_flags!(SubsetFlags {
    /// Test speakers per gender
    test_speakers,
    /// Number of test segments
    test_segments,
    /// Number of train segments
    train_segments,
    /// Segment length in seconds
    segment_s,
});

key_flags!(GdTrainFlags {
    /// Systems to train: gd1, gd2 or both
    gd_system,
    /// Training epochs
    gd_epochs,
});

key_flags!(GdModelFlags {
    /// GD1 checkpoint
    model,
    /// GD2 female presence checkpoint
    female_model,
    /// GD2 male presence checkpoint
    male_model,
    /// Added to the GD2 female score before the decision
    offset_female,
    /// Segment annotation CSV to classify (with --manifest)
    segments,
});

key_flags!(ShowFlags {
    /// GD2 female presence checkpoint
    female_model,
    /// GD2 male presence checkpoint
    male_model,
    /// Optional overlap detector checkpoint
    model,
});

key_flags!(EvalOsdFlags {
    /// Reference files, comma-separated: annotation CSV, RTTM or detector segments
    r#ref,
    /// Hypothesis files, comma-separated, paired with --ref
    hyp,
    /// Seconds excluded around reference changes
    collar_s,
});

key_flags!(EvalGdFlags {
    /// Decisions CSV from classify-gender
    decisions,
    /// Optional annotation file with reference genders
    r#ref,
});

key_flags!(PitchFlags {
    /// Decisions CSV from classify-gender, with reference genders
    decisions,
    /// Corpus manifest locating the audio
    manifest,
    /// Log-F0 histogram bin width
    bin_width,
});

key_flags!(AnnotationFlags {
    /// Annotation files, comma-separated (CSV or RTTM)
    annotations,
    /// Corpus manifest
    manifest,
});

#[derive(Parser, Debug)]
#[command(name = "osdgd", about = "Overlapped-speech detection and gender detection")]
struct Cli {
    /// Flat key=value configuration file; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override any configuration key, as key=value (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(flatten)]
    global: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus: WAV, annotation CSV, label rasters and a manifest
    Synth {
        #[command(flatten)]
        synth: SynthFlags,
    },
    /// Compute FEAT files from WAV inputs or a manifest
    Features {
        #[command(flatten)]
        features: FeatureFlags,
        /// WAV files
        inputs: Vec<PathBuf>,
    },
    /// Train an overlap detector on a manifest
    TrainOsd {
        #[command(flatten)]
        features: FeatureFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        osd: OsdTrainFlags,
        #[command(flatten)]
        window: WindowFlags,
    },
    /// Select a balanced subset from a manifest and train GD1 and/or GD2
    TrainGd {
        #[command(flatten)]
        features: FeatureFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        subset: SubsetFlags,
        #[command(flatten)]
        gd: GdTrainFlags,
    },
    /// Write overlap scores and segments for WAV or FEAT inputs
    Detect {
        #[command(flatten)]
        features: FeatureFlags,
        #[command(flatten)]
        detect: DetectFlags,
        #[command(flatten)]
        window: WindowFlags,
        /// WAV or .feat files
        inputs: Vec<PathBuf>,
    },
    /// Decide the gender of segments with GD1 or GD2
    ClassifyGender {
        #[command(flatten)]
        features: FeatureFlags,
        #[command(flatten)]
        gd: GdModelFlags,
        /// WAV or .feat files, each one segment
        inputs: Vec<PathBuf>,
    },
    /// Sliding 1 s gender scores over whole shows, with optional overlap detection
    AnalyzeShow {
        #[command(flatten)]
        features: FeatureFlags,
        #[command(flatten)]
        show: ShowFlags,
        #[command(flatten)]
        detect: DetectFlags2,
        /// WAV or .feat files
        inputs: Vec<PathBuf>,
    },
    /// Frame-level precision, recall and F1 of overlap detection
    EvalOsd {
        #[command(flatten)]
        eval: EvalOsdFlags,
    },
    /// Gender accuracies of a decisions file
    EvalGd {
        #[command(flatten)]
        eval: EvalGdFlags,
    },
    /// Log-F0 histogram of gender errors and tail-slice accuracies
    PitchAnalysis {
        #[command(flatten)]
        pitch: PitchFlags,
    },
    /// Speaker-disjoint, gender-balanced train/test selection
    Subset {
        #[command(flatten)]
        annotations: AnnotationFlags,
        #[command(flatten)]
        subset: SubsetFlags,
    },
    /// Duration, overlap and gender statistics of a manifest or annotation files
    Stats {
        #[command(flatten)]
        annotations: AnnotationFlags,
        /// Manifest or annotation files
        inputs: Vec<PathBuf>,
    },
}

key_flags!(DetectFlags2 {
    /// Decision threshold on the overlap probability
    threshold,
    /// Odd median filter length in frames, 1 disables it
    median_frames,
});

impl Command {
    fn overrides(&self) -> Vec<(String, String)> {
        match self {
            Command::Synth { synth } => synth.overrides(),
            Command::Features { features, .. } => features.overrides(),
            Command::TrainOsd {
                features,
                train,
                osd,
                window,
            } => [features.overrides(), train.overrides(), osd.overrides(), window.overrides()].concat(),
            Command::TrainGd {
                features,
                train,
                subset,
                gd,
            } => [features.overrides(), train.overrides(), subset.overrides(), gd.overrides()].concat(),
            Command::Detect {
                features,
                detect,
                window,
                ..
            } => [features.overrides(), detect.overrides(), window.overrides()].concat(),
            Command::ClassifyGender { features, gd, .. } => [features.overrides(), gd.overrides()].concat(),
            Command::AnalyzeShow {
                features, show, detect, ..
            } => [features.overrides(), show.overrides(), detect.overrides()].concat(),
            Command::EvalOsd { eval } => eval.overrides(),
            Command::EvalGd { eval } => eval.overrides(),
            Command::PitchAnalysis { pitch } => pitch.overrides(),
            Command::Subset { annotations, subset } => [annotations.overrides(), subset.overrides()].concat(),
            Command::Stats { annotations, .. } => annotations.overrides(),
        }
    }
}

/// Raw identifiers keep their prefix in `stringify!`.
fn key_name(k: &str) -> String {
    k.trim_start_matches("r#").to_string()
}

pub fn version() -> String {
    format!(
        "{} (FEAT v{}, NNCK v{})",
        env!("CARGO_PKG_VERSION"),
        osdgd::features::FEAT_VERSION,
        osdgd::neural::NNCK_VERSION
    )
}

fn keys_help() -> String {
    let mut s = String::from("Configuration keys (defaults in brackets):\n");
    for (k, d, h) in KEYS {
        s.push_str(&format!("  {k:<20} {h} [{d}]\n"));
    }
    s
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let command = Cli::command()
        .version(version())
        .after_long_help(keys_help());
    let matches = match command.try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut flags: Vec<(String, String)> = Vec::new();
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got '{kv}'")))?;
        flags.push((k.trim().to_string(), v.trim().to_string()));
    }
    flags.extend(cli.global.overrides());
    flags.extend(cli.command.overrides());
    let flags: Vec<(String, String)> = flags.into_iter().map(|(k, v)| (key_name(&k), v)).collect();
    let cfg = Config::resolve(cli.config.as_deref(), &flags)?;
    log::info!("resolved configuration:\n{}", cfg.to_text());
    match &cli.command {
        Command::Synth { .. } => commands::synth(&cfg),
        Command::Features { inputs, .. } => commands::features(&cfg, inputs),
        Command::TrainOsd { .. } => commands::train_osd_cmd(&cfg),
        Command::TrainGd { .. } => commands::train_gd_cmd(&cfg),
        Command::Detect { inputs, .. } => commands::detect(&cfg, inputs),
        Command::ClassifyGender { inputs, .. } => commands::classify_gender(&cfg, inputs),
        Command::AnalyzeShow { inputs, .. } => commands::analyze_show(&cfg, inputs),
        Command::EvalOsd { .. } => commands::eval_osd(&cfg),
        Command::EvalGd { .. } => commands::eval_gd(&cfg),
        Command::PitchAnalysis { .. } => commands::pitch_analysis(&cfg),
        Command::Subset { .. } => commands::subset(&cfg),
        Command::Stats { inputs, .. } => commands::stats(&cfg, inputs),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(std::env::args().collect()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

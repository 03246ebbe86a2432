//! Flat `key=value` configuration. Values resolve as defaults, then the
//! config file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

/// Every accepted key with its default and description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "seed for every random choice"),
    ("out", "out", "output directory"),
    ("jobs", "1", "worker threads for features and detect"),
    ("features", "mfcc", "feature kind: mfcc, stub768, stub1024 or feat"),
    ("stub_seed", "0", "seed of the stub embedding projection"),
    ("feat_dir", "", "directory of <name>.feat files when features=feat"),
    ("manifest", "", "corpus manifest (show,wav_path,csv_path,duration_s)"),
    ("arch", "tcn", "overlap detector architecture: tcn or rosd"),
    ("max_epochs", "120", "maximum overlap training epochs"),
    ("learning_rate", "0.001", "Adam learning rate"),
    ("batch_size", "8", "sequences per update"),
    ("patience", "10", "epochs without dev improvement before stopping"),
    ("min_delta", "0", "dev-loss drop that resets the patience count"),
    ("dev_fraction", "0.1", "fraction of shows held out for early stopping"),
    ("window_frames", "200", "overlap training and inference window"),
    ("shift_frames", "100", "shift between windows"),
    ("threshold", "0.5", "overlap decision threshold"),
    ("median_frames", "11", "odd median filter length, 1 disables"),
    ("collar_s", "0", "seconds excluded around reference changes in eval-osd"),
    ("model", "", "overlap detector checkpoint, or the GD1 checkpoint in classify-gender"),
    ("female_model", "", "GD2 female presence checkpoint"),
    ("male_model", "", "GD2 male presence checkpoint"),
    ("gd_system", "both", "gender systems to train: gd1, gd2 or both"),
    ("gd_epochs", "2", "gender training epochs"),
    ("offset_female", "0", "added to the GD2 female score before the decision"),
    ("synth_kind", "shows", "synthetic corpus kind: shows, mixtures or pool"),
    ("hours", "1", "hours of synthetic audio"),
    ("count", "0", "number of synthetic files, 0 derives it from hours"),
    ("overlap", "0.1", "target overlap fraction of synthetic shows"),
    ("speakers_per_gender", "0", "synthetic speakers per gender, 0 uses the kind default"),
    ("annotations", "", "comma-separated annotation files (CSV or RTTM)"),
    ("test_speakers", "40", "test speakers per gender"),
    ("test_segments", "4000", "test segments"),
    ("train_segments", "60000", "train segments"),
    ("segment_s", "1", "segment length in seconds"),
    ("segments", "", "segment annotation CSV to classify"),
    ("decisions", "", "gender decisions CSV"),
    ("ref", "", "comma-separated reference files"),
    ("hyp", "", "comma-separated hypothesis files, paired with ref"),
    ("bin_width", "0.05", "log-F0 histogram bin width"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Default,
    File,
    Flag,
}

#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<&'static str, (String, Source)>,
}

fn known(key: &str) -> Result<&'static str, CliError> {
    KEYS.iter()
        .map(|k| k.0)
        .find(|k| *k == key)
        .ok_or_else(|| CliError::Usage(format!("unknown configuration key '{key}'")))
}

/// Parses `key=value` lines; `#` starts a comment line.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Config {
    pub fn defaults() -> Self {
        Self {
            values: KEYS.iter().map(|&(k, d, _)| (k, (d.to_string(), Source::Default))).collect(),
        }
    }

    pub fn resolve(file: Option<&Path>, flags: &[(String, String)]) -> Result<Self, CliError> {
        let mut cfg = Self::defaults();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_config_text(&text)? {
                cfg.values.insert(known(&k)?, (v, Source::File));
            }
        }
        for (k, v) in flags {
            cfg.values.insert(known(k)?, (v.clone(), Source::Flag));
        }
        Ok(cfg)
    }

    pub fn str(&self, key: &str) -> &str {
        &self.values.get(key).unwrap_or_else(|| panic!("undeclared key {key}")).0
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.str(key);
        v.parse()
            .map_err(|_| CliError::Usage(format!("invalid value '{v}' for {key}")))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.str(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf, CliError> {
        self.path(key)
            .ok_or_else(|| CliError::Usage(format!("--{} is required", key.replace('_', "-"))))
    }

    pub fn list(&self, key: &str) -> Vec<PathBuf> {
        self.str(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(PathBuf::from)
            .collect()
    }

    /// The resolved configuration as a config file, each line annotated
    /// with where its value came from.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, (v, src)) in &self.values {
            let src = match src {
                Source::Default => "default",
                Source::File => "file",
                Source::Flag => "flag",
            };
            let _ = writeln!(out, "{k}={v}  # {src}");
        }
        out
    }
}

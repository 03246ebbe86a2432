//! Loading audio, features and annotations for the subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use osdgd::audio::{read_wav, AudioBuffer};
use osdgd::corpus::{parse_manifest, parse_segments, resolve, sniff_format, ManifestRow, SegmentAnnotation, SegmentFormat};
use osdgd::dataset::FeatureSet;
use osdgd::features::{extract_mfcc, load_feature_file, upsample_frames, FeatureMatrix, MfccConfig, StubProjector};
use osdgd::frames::frames_for_duration;

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Mfcc,
    Stub(usize),
    /// Precomputed FEAT files.
    Feat,
}

impl FeatureKind {
    pub fn from_config(cfg: &Config) -> Result<Self, CliError> {
        match cfg.str("features") {
            "mfcc" => Ok(Self::Mfcc),
            "stub768" => Ok(Self::Stub(768)),
            "stub1024" => Ok(Self::Stub(1024)),
            "feat" => Ok(Self::Feat),
            other => Err(CliError::Usage(format!(
                "unknown feature kind '{other}', expected mfcc, stub768, stub1024 or feat"
            ))),
        }
    }
}

/// Resolves the feature kind and owns the stub projection, if any.
pub struct Features {
    pub kind: FeatureKind,
    projector: Option<StubProjector>,
    feat_dir: Option<PathBuf>,
}

impl Features {
    pub fn from_config(cfg: &Config) -> Result<Self, CliError> {
        let kind = FeatureKind::from_config(cfg)?;
        let projector = match kind {
            FeatureKind::Stub(dim) => Some(StubProjector::new(dim, cfg.get("stub_seed")?)?),
            _ => None,
        };
        let feat_dir = cfg.path("feat_dir");
        if kind == FeatureKind::Feat && feat_dir.is_none() {
            return Err(CliError::Usage("features=feat needs --feat-dir".into()));
        }
        Ok(Self {
            kind,
            projector,
            feat_dir,
        })
    }

    /// Features kept in memory: MFCC for the stub kind, projected on use.
    pub fn base_from_audio(&self, audio: &AudioBuffer) -> Result<FeatureMatrix, CliError> {
        match self.kind {
            FeatureKind::Feat => Err(CliError::Usage("features=feat reads FEAT files, not audio".into())),
            _ => Ok(extract_mfcc(audio, &MfccConfig::default())?),
        }
    }

    /// FEAT file for `name`, upsampled to 10 ms when stored at 20 ms.
    pub fn load_feat(&self, name: &str) -> Result<FeatureMatrix, CliError> {
        let dir = self.feat_dir.as_ref().ok_or_else(|| CliError::Usage("--feat-dir is required".into()))?;
        load_feat_file(&dir.join(format!("{name}.feat")))
    }

    /// Base features of a named recording, from its FEAT file or its audio.
    pub fn base_for(&self, name: &str, wav: &Path) -> Result<FeatureMatrix, CliError> {
        match self.kind {
            FeatureKind::Feat => self.load_feat(name),
            _ => self.base_from_audio(&read_audio(wav)?),
        }
    }

    /// Model-ready features.
    pub fn finish(&self, base: FeatureMatrix) -> FeatureMatrix {
        match &self.projector {
            Some(p) => p.project(&base),
            None => base,
        }
    }

    pub fn set<L>(&self, items: Vec<(FeatureMatrix, L)>) -> FeatureSet<L> {
        match &self.projector {
            Some(p) => FeatureSet::projected(items, p.clone()),
            None => FeatureSet::new(items),
        }
    }
}

pub fn load_feat_file(path: &Path) -> Result<FeatureMatrix, CliError> {
    let m = load_feature_file(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if m.hop_ms() == 20 {
        Ok(upsample_frames(&m)?)
    } else {
        Ok(m)
    }
}

pub fn read_audio(path: &Path) -> Result<AudioBuffer, CliError> {
    read_wav(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Features of a positional input: `.feat` files load directly, anything
/// else is read as WAV.
pub fn features_of_input(features: &Features, path: &Path) -> Result<FeatureMatrix, CliError> {
    if path.extension().is_some_and(|e| e == "feat") {
        load_feat_file(path)
    } else {
        Ok(features.finish(features.base_from_audio(&read_audio(path)?)?))
    }
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

/// A manifest row with paths resolved against the manifest's directory.
pub struct Show {
    pub name: String,
    pub wav: PathBuf,
    pub annotations: PathBuf,
    pub duration_s: f64,
}

pub fn load_manifest(path: &Path) -> Result<Vec<Show>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let rows: Vec<ManifestRow> = parse_manifest(&text)?;
    Ok(rows
        .into_iter()
        .map(|r| Show {
            wav: resolve(path, &r.wav_path),
            annotations: resolve(path, &r.csv_path),
            name: r.show,
            duration_s: r.duration_s,
        })
        .collect())
}

pub fn load_annotations(path: &Path) -> Result<Vec<SegmentAnnotation>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(parse_segments(path, sniff_format(&text)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?)
}

pub fn manifest_annotations(shows: &[Show]) -> Result<Vec<SegmentAnnotation>, CliError> {
    let mut out = Vec::new();
    for s in shows {
        out.extend(parse_segments(&s.annotations, SegmentFormat::Csv)?);
    }
    Ok(out)
}

/// Cuts fixed-length excerpts out of the recordings they name and returns
/// their base features in the order given.
pub fn excerpt_features(
    features: &Features,
    shows: &[Show],
    excerpts: &[SegmentAnnotation],
) -> Result<Vec<FeatureMatrix>, CliError> {
    let by_name: BTreeMap<&str, &Show> = shows.iter().map(|s| (s.name.as_str(), s)).collect();
    let mut wanted: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in excerpts.iter().enumerate() {
        wanted.entry(e.file.as_str()).or_default().push(i);
    }
    let mut out: Vec<Option<FeatureMatrix>> = vec![None; excerpts.len()];
    for (name, list) in wanted {
        let show = by_name
            .get(name)
            .ok_or_else(|| CliError::Data(format!("segment refers to '{name}', which is not in the manifest")))?;
        match features.kind {
            FeatureKind::Feat => {
                let m = features.load_feat(name)?;
                for i in list {
                    let e = &excerpts[i];
                    let lo = frames_for_duration(e.start_s).min(m.n_frames());
                    let hi = (lo + frames_for_duration(e.duration_s())).min(m.n_frames());
                    out[i] = Some(m.slice_frames(lo, hi.max(lo + 1).min(m.n_frames())));
                }
            }
            _ => {
                let audio = read_audio(&show.wav)?;
                let rate = audio.sample_rate() as f64;
                for i in list {
                    let e = &excerpts[i];
                    let lo = ((e.start_s * rate).round() as usize).min(audio.len());
                    let hi = ((e.end_s * rate).round() as usize).min(audio.len());
                    out[i] = Some(features.base_from_audio(&audio.slice(lo, hi))?);
                }
            }
        }
    }
    Ok(out.into_iter().map(|m| m.expect("every excerpt loaded")).collect())
}

/// Runs `f` over `items` on up to `jobs` threads, keeping input order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> Result<R, CliError> + Sync,
) -> Result<Vec<R>, CliError> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let results: Vec<Result<Vec<R>, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Result<Vec<R>, CliError>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Writes through a temporary file so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(|e| CliError::Data(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

//! One function per subcommand. Each reads the resolved configuration and
//! writes its outputs under `out`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use osdgd::corpus::{
    build_synthetic_corpus, compute_stats, emit_csv, parse_manifest, rasterize, select_balanced_subset, sniff_format,
    RasterMode, SegmentAnnotation, SubsetRules, SynthConfig, MANIFEST_HEADER,
};
use osdgd::eval::{frame_prf_with_collar, gender_accuracy};
use osdgd::features::{encode_feature_file, FeatureMatrix};
use osdgd::frames::{frames_for_duration, FrameLabels};
use osdgd::gender::{
    classify_segment, gd_train_config, gender_track_csv, sliding_gender_scores, train_gd1, train_gd2, GdSystem, Gender,
};
use osdgd::neural::{encode_checkpoint, load_checkpoint, Arch, SequenceModel, TrainConfig};
use osdgd::osd::{
    detect_overlap, parse_segments_csv, scores_csv, segments_csv, segments_to_labels, train_osd, window_set,
    DetectConfig, WindowingConfig,
};
use osdgd::pitch::{error_pitch_histogram, segment_log_f0, yin_f0, SegmentPitch, YinConfig};

use crate::config::Config;
use crate::data::{
    excerpt_features, features_of_input, load_annotations, load_manifest, manifest_annotations, parallel_map, read_audio,
    stem, write_atomic, Features, Show,
};
use crate::error::CliError;

type Res = Result<(), CliError>;

fn out_dir(cfg: &Config) -> Result<PathBuf, CliError> {
    let dir = cfg.require_path("out")?;
    fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Res {
    write_atomic(path, text.as_bytes())
}

fn load_model(path: &Path) -> Result<SequenceModel, CliError> {
    load_checkpoint(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn save_model(path: &Path, model: &SequenceModel) -> Res {
    write_atomic(path, &encode_checkpoint(model))
}

fn windowing(cfg: &Config) -> Result<WindowingConfig, CliError> {
    let w = WindowingConfig {
        window_frames: cfg.get("window_frames")?,
        shift_frames: cfg.get("shift_frames")?,
    };
    w.validate()?;
    Ok(w)
}

fn detect_config(cfg: &Config) -> Result<DetectConfig, CliError> {
    Ok(DetectConfig {
        threshold: cfg.get("threshold")?,
        median_frames: cfg.get("median_frames")?,
        windowing: windowing(cfg)?,
    })
}

fn train_config(cfg: &Config, max_epochs_key: &str) -> Result<TrainConfig, CliError> {
    Ok(TrainConfig {
        max_epochs: cfg.get(max_epochs_key)?,
        learning_rate: cfg.get("learning_rate")?,
        batch_size: cfg.get("batch_size")?,
        seed: cfg.get("seed")?,
        patience: cfg.get("patience")?,
        min_delta: cfg.get("min_delta")?,
        ..TrainConfig::default()
    })
}

/// Positional inputs, or the recordings of `--manifest`, as `(name, path)`.
fn inputs(cfg: &Config, positional: &[PathBuf], features: Option<&Features>) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut out: Vec<(String, PathBuf)> = positional.iter().map(|p| (stem(p), p.clone())).collect();
    if let Some(m) = cfg.path("manifest") {
        for show in load_manifest(&m)? {
            let path = match features {
                Some(f) if f.kind == crate::data::FeatureKind::Feat => {
                    PathBuf::from(cfg.str("feat_dir")).join(format!("{}.feat", show.name))
                }
                _ => show.wav,
            };
            out.push((show.name, path));
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no inputs: give files or --manifest".into()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

pub fn synth(cfg: &Config) -> Res {
    let hours: f64 = cfg.get("hours")?;
    let overlap: f64 = cfg.get("overlap")?;
    let seed: u64 = cfg.get("seed")?;
    let count: usize = cfg.get("count")?;
    let speakers: usize = cfg.get("speakers_per_gender")?;
    let by_hours = |show_s: f64| ((hours * 3600.0) / show_s).ceil().max(1.0) as usize;
    let mut synth = match cfg.str("synth_kind") {
        "shows" => SynthConfig::for_hours(hours, overlap, seed),
        "mixtures" => SynthConfig::mixtures(by_hours(2.0), overlap, seed),
        "pool" => SynthConfig {
            overlap_fraction: overlap,
            ..SynthConfig::speaker_pool(by_hours(120.0), 100, seed)
        },
        other => return Err(CliError::Usage(format!("unknown synth_kind '{other}'"))),
    };
    if count > 0 {
        synth.n_shows = count;
    }
    if speakers > 0 {
        synth.speakers_per_gender = speakers;
    }
    let dir = out_dir(cfg)?;
    let rows = build_synthetic_corpus(&synth, &dir)?;
    let total: f64 = rows.iter().map(|r| r.duration_s).sum();
    println!(
        "wrote {} files, {:.2} h, to {}",
        rows.len(),
        total / 3600.0,
        dir.join("manifest.csv").display()
    );
    Ok(())
}

pub fn features(cfg: &Config, positional: &[PathBuf]) -> Res {
    let features = Features::from_config(cfg)?;
    if features.kind == crate::data::FeatureKind::Feat {
        return Err(CliError::Usage("features computes mfcc or stub features, not feat".into()));
    }
    let list = inputs(cfg, positional, None)?;
    let dir = out_dir(cfg)?;
    let written = parallel_map(&list, cfg.get("jobs")?, |(name, path)| {
        let m = features.finish(features.base_from_audio(&read_audio(path)?)?);
        let target = dir.join(format!("{name}.feat"));
        write_atomic(&target, &encode_feature_file(&m))?;
        Ok((m.n_frames(), m.dim()))
    })?;
    let frames: usize = written.iter().map(|w| w.0).sum();
    println!(
        "wrote {} FEAT files ({} frames, dim {}) to {}",
        written.len(),
        frames,
        written.first().map_or(0, |w| w.1),
        dir.display()
    );
    Ok(())
}

fn overlap_items(cfg: &Config, features: &Features, shows: &[Show]) -> Result<Vec<(FeatureMatrix, FrameLabels)>, CliError> {
    let items = parallel_map(shows, cfg.get("jobs")?, |show| {
        let segs = load_annotations(&show.annotations)?;
        let f = features.base_for(&show.name, &show.wav)?;
        let labels = rasterize(&segs, show.duration_s, RasterMode::Overlap)?;
        if f.n_frames().abs_diff(labels.len()) > 1 {
            return Err(CliError::Data(format!(
                "{}: {} feature frames for {} label frames",
                show.name,
                f.n_frames(),
                labels.len()
            )));
        }
        // Align by trimming or padding the labels to the feature raster.
        let mut v = labels.into_values();
        v.resize(f.n_frames(), 0);
        Ok((f, FrameLabels::binary_from_bools(v.into_iter().map(|x| x == 1))?))
    })?;
    Ok(items)
}

pub fn train_osd_cmd(cfg: &Config) -> Res {
    let features = Features::from_config(cfg)?;
    let arch: Arch = cfg.str("arch").parse().map_err(|_| CliError::Usage(format!("unknown arch '{}'", cfg.str("arch"))))?;
    let shows = load_manifest(&cfg.require_path("manifest")?)?;
    let items = overlap_items(cfg, &features, &shows)?;
    let frac: f64 = cfg.get("dev_fraction")?;
    if !(0.0..1.0).contains(&frac) {
        return Err(CliError::Usage("dev_fraction must lie in [0, 1)".into()));
    }
    let n_dev = if frac > 0.0 && items.len() >= 2 {
        ((items.len() as f64 * frac).round() as usize).clamp(1, items.len() - 1)
    } else {
        0
    };
    let split = items.len() - n_dev;
    let w = windowing(cfg)?;
    let train_set = features.set(window_set(&items[..split], &w)?);
    let dev_set = (n_dev > 0)
        .then(|| window_set(&items[split..], &w).map(|v| features.set(v)))
        .transpose()?;
    let (model, history) = train_osd(arch, &train_set, dev_set.as_ref(), &train_config(cfg, "max_epochs")?)?;
    let dir = out_dir(cfg)?;
    save_model(&dir.join("osd.nnck"), &model)?;
    let mut hist = String::from("epoch,train_loss,dev_loss\n");
    for h in &history {
        let dev = h.dev_loss.map_or(String::new(), |d| format!("{d:.6}"));
        let _ = writeln!(hist, "{},{:.6},{dev}", h.epoch, h.train_loss);
    }
    write_text(&dir.join("history.csv"), &hist)?;
    write_text(&dir.join("config.resolved"), &cfg.to_text())?;
    println!(
        "trained {arch} on {} windows from {} shows ({} dev) for {} epochs; wrote {}",
        train_set.len(),
        split,
        n_dev,
        history.len(),
        dir.join("osd.nnck").display()
    );
    Ok(())
}

fn subset_rules(cfg: &Config) -> Result<SubsetRules, CliError> {
    Ok(SubsetRules {
        n_test_speakers_per_gender: cfg.get("test_speakers")?,
        n_test_segments: cfg.get("test_segments")?,
        n_train_segments: cfg.get("train_segments")?,
        segment_s: cfg.get("segment_s")?,
        seed: cfg.get("seed")?,
    })
}

pub fn train_gd_cmd(cfg: &Config) -> Res {
    let features = Features::from_config(cfg)?;
    let shows = load_manifest(&cfg.require_path("manifest")?)?;
    let segments = manifest_annotations(&shows)?;
    let subset = select_balanced_subset(&segments, &subset_rules(cfg)?)?;
    let base = excerpt_features(&features, &shows, &subset.train)?;
    let items: Vec<(FeatureMatrix, Gender)> = base
        .into_iter()
        .zip(&subset.train)
        .map(|(f, s)| (f, s.gender.expect("subset slices carry a gender")))
        .collect();
    let set = features.set(items);
    let tc = TrainConfig {
        max_epochs: cfg.get("gd_epochs")?,
        learning_rate: cfg.get("learning_rate")?,
        batch_size: cfg.get("batch_size")?,
        seed: cfg.get("seed")?,
        ..gd_train_config()
    };
    let system = cfg.str("gd_system");
    if !matches!(system, "gd1" | "gd2" | "both") {
        return Err(CliError::Usage(format!("unknown gd_system '{system}'")));
    }
    let dir = out_dir(cfg)?;
    let mut written = Vec::new();
    if system != "gd2" {
        let m = train_gd1(&set, &tc)?;
        save_model(&dir.join("gd1.nnck"), &m)?;
        written.push("gd1.nnck");
    }
    if system != "gd1" {
        let (f, m) = train_gd2(&set, &tc)?;
        save_model(&dir.join("gd2_female.nnck"), &f)?;
        save_model(&dir.join("gd2_male.nnck"), &m)?;
        written.extend(["gd2_female.nnck", "gd2_male.nnck"]);
    }
    write_text(&dir.join("train.csv"), &emit_csv(&subset.train))?;
    write_text(&dir.join("test.csv"), &emit_csv(&subset.test))?;
    let report = subset.report.to_table();
    write_text(&dir.join("subset_report.txt"), &report)?;
    write_text(&dir.join("config.resolved"), &cfg.to_text())?;
    print!("{report}");
    println!("trained on {} segments; wrote {} to {}", set.len(), written.join(", "), dir.display());
    Ok(())
}

pub fn detect(cfg: &Config, positional: &[PathBuf]) -> Res {
    let features = Features::from_config(cfg)?;
    let model = load_model(&cfg.require_path("model")?)?;
    let dc = detect_config(cfg)?;
    let list = inputs(cfg, positional, Some(&features))?;
    let dir = out_dir(cfg)?;
    let counts = parallel_map(&list, cfg.get("jobs")?, |(name, path)| {
        let f = features_of_input(&features, path)?;
        let (labels, scores) = detect_overlap(&model, &f, &dc)?;
        write_text(&dir.join(format!("{name}.scores.csv")), &scores_csv(&scores))?;
        write_text(&dir.join(format!("{name}.segments.csv")), &segments_csv(&labels))?;
        Ok(labels.count(1))
    })?;
    let frames: usize = counts.iter().sum();
    println!(
        "detected {:.2} s of overlap in {} files; wrote scores and segments to {}",
        frames as f64 / 100.0,
        list.len(),
        dir.display()
    );
    Ok(())
}

fn gd_system(cfg: &Config) -> Result<GdSystem, CliError> {
    match (cfg.path("model"), cfg.path("female_model"), cfg.path("male_model")) {
        (Some(m), None, None) => Ok(GdSystem::Gd1(load_model(&m)?)),
        (None, Some(f), Some(m)) => Ok(GdSystem::Gd2 {
            female: load_model(&f)?,
            male: load_model(&m)?,
        }),
        _ => Err(CliError::Usage(
            "give either --model (GD1) or both --female-model and --male-model (GD2)".into(),
        )),
    }
}

const DECISIONS_HEADER: &str = "file,start_s,end_s,reference,label,score_female,score_male";

struct DecisionRow {
    segment: SegmentAnnotation,
    label: Gender,
}

fn parse_decisions(path: &Path) -> Result<Vec<DecisionRow>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(DECISIONS_HEADER) {
        return Err(CliError::Data(format!("{}: expected header {DECISIONS_HEADER}", path.display())));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || CliError::Data(format!("{} line {}: malformed decision row", path.display(), n + 2));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(bad());
        }
        out.push(DecisionRow {
            segment: SegmentAnnotation {
                file: f[0].to_string(),
                start_s: f[1].parse().map_err(|_| bad())?,
                end_s: f[2].parse().map_err(|_| bad())?,
                speaker: String::new(),
                gender: f[3].parse().ok(),
            },
            label: f[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

pub fn classify_gender(cfg: &Config, positional: &[PathBuf]) -> Res {
    let features = Features::from_config(cfg)?;
    let system = gd_system(cfg)?;
    let offset: f64 = cfg.get("offset_female")?;
    let mut rows: Vec<(SegmentAnnotation, FeatureMatrix)> = Vec::new();
    if let Some(seg_path) = cfg.path("segments") {
        let shows = load_manifest(&cfg.require_path("manifest")?)?;
        let segs = load_annotations(&seg_path)?;
        let base = excerpt_features(&features, &shows, &segs)?;
        rows.extend(segs.into_iter().zip(base.into_iter().map(|b| features.finish(b))));
    }
    for p in positional {
        let f = features_of_input(&features, p)?;
        let seg = SegmentAnnotation {
            file: stem(p),
            start_s: 0.0,
            end_s: f.n_frames() as f64 / 100.0,
            speaker: String::new(),
            gender: None,
        };
        rows.push((seg, f));
    }
    if rows.is_empty() {
        return Err(CliError::Usage("no segments: give files or --segments with --manifest".into()));
    }
    let mut csv = format!("{DECISIONS_HEADER}\n");
    let mut pairs = Vec::new();
    for (seg, f) in &rows {
        let d = classify_segment(&system, f, offset)?;
        let reference = seg.gender.map_or("unknown", Gender::as_str);
        let _ = writeln!(
            csv,
            "{},{:.3},{:.3},{reference},{},{:.6},{:.6}",
            seg.file, seg.start_s, seg.end_s, d.label, d.score_female, d.score_male
        );
        if let Some(g) = seg.gender {
            pairs.push((g, d.label));
        }
    }
    let dir = out_dir(cfg)?;
    write_text(&dir.join("decisions.csv"), &csv)?;
    println!("classified {} segments; wrote {}", rows.len(), dir.join("decisions.csv").display());
    if !pairs.is_empty() {
        print!("{}", gender_accuracy(&pairs)?.to_table());
    }
    Ok(())
}

pub fn analyze_show(cfg: &Config, positional: &[PathBuf]) -> Res {
    let features = Features::from_config(cfg)?;
    let female = load_model(&cfg.require_path("female_model")?)?;
    let male = load_model(&cfg.require_path("male_model")?)?;
    let osd = cfg.path("model").map(|p| load_model(&p)).transpose()?;
    let dc = detect_config(cfg)?;
    let list = inputs(cfg, positional, Some(&features))?;
    let dir = out_dir(cfg)?;
    for (name, path) in &list {
        let f = features_of_input(&features, path)?;
        let track = sliding_gender_scores(&female, &male, &f)?;
        write_text(&dir.join(format!("{name}.gender_track.csv")), &gender_track_csv(&track))?;
        if let Some(m) = &osd {
            let (labels, scores) = detect_overlap(m, &f, &dc)?;
            write_text(&dir.join(format!("{name}.scores.csv")), &scores_csv(&scores))?;
            write_text(&dir.join(format!("{name}.segments.csv")), &segments_csv(&labels))?;
        }
    }
    println!("analyzed {} shows; wrote tracks to {}", list.len(), dir.display());
    Ok(())
}

/// Overlap raster of a reference or hypothesis file: detector segment CSVs
/// are read as overlap spans, annotation files are rasterized.
fn overlap_raster(path: &Path) -> Result<(FrameLabels, f64), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if text.lines().next().is_some_and(|h| h.trim().starts_with("start_s,end_s")) {
        let spans = parse_segments_csv(&text)?;
        let end = spans.iter().map(|s| s.1).fold(0.0, f64::max);
        Ok((segments_to_labels(&spans, frames_for_duration(end)), end))
    } else {
        let segs = osdgd::corpus::parse_segments_str(&text, sniff_format(&text))
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let end = segs.iter().map(|s| s.end_s).fold(0.0, f64::max);
        Ok((rasterize(&segs, end, RasterMode::Overlap)?, end))
    }
}

fn padded(labels: &FrameLabels, n: usize) -> Result<FrameLabels, CliError> {
    let mut v = labels.values().to_vec();
    v.resize(n, 0);
    Ok(FrameLabels::binary_from_bools(v.into_iter().map(|x| x == 1))?)
}

pub fn eval_osd(cfg: &Config) -> Res {
    let refs = cfg.list("ref");
    let hyps = cfg.list("hyp");
    if refs.is_empty() || refs.len() != hyps.len() {
        return Err(CliError::Usage("--ref and --hyp need the same, non-zero number of files".into()));
    }
    let mut all_ref = Vec::new();
    let mut all_hyp = Vec::new();
    for (r, h) in refs.iter().zip(&hyps) {
        let (rl, _) = overlap_raster(r)?;
        let (hl, _) = overlap_raster(h)?;
        let n = rl.len().max(hl.len());
        all_ref.extend_from_slice(padded(&rl, n)?.values());
        all_hyp.extend_from_slice(padded(&hl, n)?.values());
    }
    let r = FrameLabels::binary_from_bools(all_ref.into_iter().map(|x| x == 1))?;
    let h = FrameLabels::binary_from_bools(all_hyp.into_iter().map(|x| x == 1))?;
    let collar: f64 = cfg.get("collar_s")?;
    let report = frame_prf_with_collar(&r, &h, frames_for_duration(collar))?;
    let dir = out_dir(cfg)?;
    write_text(&dir.join("eval_osd.csv"), &report.to_csv())?;
    print!("{}", report.to_table());
    Ok(())
}

pub fn eval_gd(cfg: &Config) -> Res {
    let decisions = parse_decisions(&cfg.require_path("decisions")?)?;
    let key = |s: &SegmentAnnotation| (s.file.clone(), (s.start_s * 1000.0).round() as i64, (s.end_s * 1000.0).round() as i64);
    let reference: Option<BTreeMap<_, Gender>> = match cfg.path("ref") {
        Some(p) => Some(
            load_annotations(&p)?
                .iter()
                .filter_map(|s| s.gender.map(|g| (key(s), g)))
                .collect(),
        ),
        None => None,
    };
    let mut pairs = Vec::with_capacity(decisions.len());
    for d in &decisions {
        let truth = match &reference {
            Some(map) => map.get(&key(&d.segment)).copied(),
            None => d.segment.gender,
        };
        let truth = truth.ok_or_else(|| {
            CliError::Data(format!(
                "no reference gender for {} {:.3}-{:.3}",
                d.segment.file, d.segment.start_s, d.segment.end_s
            ))
        })?;
        pairs.push((truth, d.label));
    }
    let report = gender_accuracy(&pairs)?;
    let dir = out_dir(cfg)?;
    write_text(&dir.join("eval_gd.csv"), &report.to_csv())?;
    print!("{}", report.to_table());
    Ok(())
}

pub fn pitch_analysis(cfg: &Config) -> Res {
    let decisions = parse_decisions(&cfg.require_path("decisions")?)?;
    let shows = load_manifest(&cfg.require_path("manifest")?)?;
    let by_name: BTreeMap<&str, &Show> = shows.iter().map(|s| (s.name.as_str(), s)).collect();
    let yin = YinConfig::default();
    let mut cache: BTreeMap<String, osdgd::audio::AudioBuffer> = BTreeMap::new();
    let mut results = Vec::with_capacity(decisions.len());
    let mut per_segment = String::from("file,start_s,end_s,reference,label,log_f0\n");
    for d in &decisions {
        let s = &d.segment;
        let truth = s
            .gender
            .ok_or_else(|| CliError::Data(format!("decision for {} {:.3} lacks a reference gender", s.file, s.start_s)))?;
        if !cache.contains_key(&s.file) {
            let show = by_name
                .get(s.file.as_str())
                .ok_or_else(|| CliError::Data(format!("'{}' is not in the manifest", s.file)))?;
            cache.insert(s.file.clone(), read_audio(&show.wav)?);
        }
        let audio = &cache[&s.file];
        let rate = audio.sample_rate() as f64;
        let seg = audio.slice((s.start_s * rate).round() as usize, (s.end_s * rate).round() as usize);
        let pitch = match yin_f0(&seg, &yin) {
            Ok(track) => segment_log_f0(&track),
            Err(osdgd::pitch::PitchError::TooShort { .. }) => SegmentPitch::Unvoiced,
            Err(e) => return Err(e.into()),
        };
        let lf = pitch.log_f0().map_or("unvoiced".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(per_segment, "{},{:.3},{:.3},{truth},{},{lf}", s.file, s.start_s, s.end_s, d.label);
        results.push((truth, d.label, pitch));
    }
    let hist = error_pitch_histogram(&results, cfg.get("bin_width")?)?;
    let dir = out_dir(cfg)?;
    write_text(&dir.join("pitch_histogram.csv"), &hist.to_csv())?;
    write_text(&dir.join("segment_pitch.csv"), &per_segment)?;
    let table = hist.quantile_table();
    write_text(&dir.join("pitch_quantiles.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn annotation_pool(cfg: &Config) -> Result<Vec<SegmentAnnotation>, CliError> {
    let mut segs = Vec::new();
    for p in cfg.list("annotations") {
        segs.extend(load_annotations(&p)?);
    }
    if let Some(m) = cfg.path("manifest") {
        segs.extend(manifest_annotations(&load_manifest(&m)?)?);
    }
    if segs.is_empty() {
        return Err(CliError::Usage("no annotations: give --annotations or --manifest".into()));
    }
    Ok(segs)
}

pub fn subset(cfg: &Config) -> Res {
    let segs = annotation_pool(cfg)?;
    let subset = select_balanced_subset(&segs, &subset_rules(cfg)?)?;
    let dir = out_dir(cfg)?;
    write_text(&dir.join("train.csv"), &emit_csv(&subset.train))?;
    write_text(&dir.join("test.csv"), &emit_csv(&subset.test))?;
    let report = subset.report.to_table();
    write_text(&dir.join("subset_report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

pub fn stats(cfg: &Config, positional: &[PathBuf]) -> Res {
    let mut segs = Vec::new();
    let mut durations = BTreeMap::new();
    let mut paths: Vec<PathBuf> = positional.to_vec();
    paths.extend(cfg.list("annotations"));
    paths.extend(cfg.path("manifest"));
    if paths.is_empty() {
        return Err(CliError::Usage("no inputs: give a manifest or annotation files".into()));
    }
    for p in &paths {
        let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        if text.lines().next().map(str::trim) == Some(MANIFEST_HEADER) {
            parse_manifest(&text)?;
            let shows = load_manifest(p)?;
            for s in &shows {
                durations.insert(s.name.clone(), s.duration_s);
            }
            segs.extend(manifest_annotations(&shows)?);
        } else {
            segs.extend(load_annotations(p)?);
        }
    }
    print!("{}", compute_stats(&segs, &durations).to_table());
    Ok(())
}

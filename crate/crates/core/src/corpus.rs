//! Speaker/gender segment annotations: parsing, rasterization, statistics,
//! balanced subset selection and synthetic corpora.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::audio::{encode_wav, mix_overlap, synth_voice, white_noise, AudioBuffer, AudioError, MixSpec};
use crate::frames::{frame_center, frames_for_duration, Alphabet, FrameLabels, GenderSymbol, FRAME_RATE};
use crate::gender::Gender;
use crate::SAMPLE_RATE;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: segment ends before it starts")]
    NegativeDuration { line: usize },
    #[error("speaker {speaker} has no gender, which gender rasterization needs")]
    UnknownGenderInGenderMode { speaker: String },
    #[error("need {needed} {what} speakers, the pool has {available}")]
    InsufficientSpeakers {
        what: String,
        needed: usize,
        available: usize,
    },
    #[error("need {needed} {what} segments, the selected speakers provide {available}")]
    InsufficientSegments {
        what: String,
        needed: usize,
        available: usize,
    },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Annotations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentAnnotation {
    pub file: String,
    pub start_s: f64,
    pub end_s: f64,
    pub speaker: String,
    /// `None` when the annotation carries no gender.
    pub gender: Option<Gender>,
}

impl SegmentAnnotation {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentFormat {
    Csv,
    Rttm,
}

pub const ANNOTATION_HEADER: &str = "file,start_s,end_s,speaker,gender";

fn parse_time(field: &str, line: usize, what: &str) -> Result<f64, CorpusError> {
    let v: f64 = field.trim().parse().map_err(|_| CorpusError::Parse {
        line,
        message: format!("{what} {field:?} is not a number"),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(CorpusError::Parse {
            line,
            message: format!("{what} {field:?} must be a non-negative number"),
        });
    }
    Ok(v)
}

fn parse_gender(field: &str, line: usize) -> Result<Option<Gender>, CorpusError> {
    match field.trim().to_ascii_lowercase().as_str() {
        "" | "unknown" | "u" | "<na>" => Ok(None),
        other => other.parse().map(Some).map_err(|message| CorpusError::Parse { line, message }),
    }
}

fn checked(seg: SegmentAnnotation, line: usize) -> Result<SegmentAnnotation, CorpusError> {
    if seg.end_s <= seg.start_s {
        return Err(CorpusError::NegativeDuration { line });
    }
    if seg.speaker.is_empty() || seg.file.is_empty() {
        return Err(CorpusError::Parse {
            line,
            message: "empty file or speaker id".into(),
        });
    }
    Ok(seg)
}

/// Parses annotation text; line numbers in errors are 1-based.
pub fn parse_segments_str(text: &str, format: SegmentFormat) -> Result<Vec<SegmentAnnotation>, CorpusError> {
    let mut out = Vec::new();
    match format {
        SegmentFormat::Csv => {
            let mut lines = text.lines().enumerate();
            match lines.next() {
                Some((_, h)) if h.trim() == ANNOTATION_HEADER => {}
                _ => {
                    return Err(CorpusError::Parse {
                        line: 1,
                        message: format!("expected header {ANNOTATION_HEADER}"),
                    })
                }
            }
            for (i, raw) in lines {
                let line = i + 1;
                if raw.trim().is_empty() {
                    continue;
                }
                let f: Vec<&str> = raw.split(',').collect();
                if f.len() != 5 {
                    return Err(CorpusError::Parse {
                        line,
                        message: format!("expected 5 fields, found {}", f.len()),
                    });
                }
                let seg = SegmentAnnotation {
                    file: f[0].trim().to_string(),
                    start_s: parse_time(f[1], line, "start_s")?,
                    end_s: parse_time(f[2], line, "end_s")?,
                    speaker: f[3].trim().to_string(),
                    gender: parse_gender(f[4], line)?,
                };
                out.push(checked(seg, line)?);
            }
        }
        SegmentFormat::Rttm => {
            for (i, raw) in text.lines().enumerate() {
                let line = i + 1;
                let f: Vec<&str> = raw.split_whitespace().collect();
                if f.is_empty() || f[0].starts_with(';') {
                    continue;
                }
                if f[0] != "SPEAKER" {
                    continue;
                }
                if f.len() < 8 {
                    return Err(CorpusError::Parse {
                        line,
                        message: format!("SPEAKER line needs at least 8 fields, found {}", f.len()),
                    });
                }
                let start = parse_time(f[3], line, "onset")?;
                let dur: f64 = f[4].parse().map_err(|_| CorpusError::Parse {
                    line,
                    message: format!("duration {:?} is not a number", f[4]),
                })?;
                let seg = SegmentAnnotation {
                    file: f[1].to_string(),
                    start_s: start,
                    end_s: start + dur,
                    speaker: f[7].to_string(),
                    gender: None,
                };
                out.push(checked(seg, line)?);
            }
        }
    }
    Ok(out)
}

pub fn parse_segments(path: impl AsRef<Path>, format: SegmentFormat) -> Result<Vec<SegmentAnnotation>, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_segments_str(&text, format)
}

/// Picks the format from the first meaningful line.
pub fn sniff_format(text: &str) -> SegmentFormat {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.trim_start().starts_with("SPEAKER") || first.trim_start().starts_with(';') {
        SegmentFormat::Rttm
    } else {
        SegmentFormat::Csv
    }
}

/// Annotation CSV with 3-decimal times.
pub fn emit_csv(segments: &[SegmentAnnotation]) -> String {
    let mut out = format!("{ANNOTATION_HEADER}\n");
    for s in segments {
        let g = s.gender.map_or("unknown", Gender::as_str);
        let _ = writeln!(out, "{},{:.3},{:.3},{},{}", s.file, s.start_s, s.end_s, s.speaker, g);
    }
    out
}

/// RTTM `SPEAKER` lines with 3-decimal times.
pub fn emit_rttm(segments: &[SegmentAnnotation]) -> String {
    let mut out = String::new();
    for s in segments {
        let _ = writeln!(
            out,
            "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            s.file,
            s.start_s,
            s.end_s - s.start_s,
            s.speaker
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Rasterization and statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterMode {
    /// 1 where at least two segments cover the frame center.
    Overlap,
    /// Silence, female, male or both by the genders covering the frame center.
    Gender,
}

/// 10 ms labels of one file, judged at frame centers.
pub fn rasterize(segments: &[SegmentAnnotation], duration_s: f64, mode: RasterMode) -> Result<FrameLabels, CorpusError> {
    let n = frames_for_duration(duration_s).max(1);
    let rate = FRAME_RATE as f64;
    let frame_range = |s: &SegmentAnnotation| {
        // First and one-past-last frame whose center lies in [start, end).
        let lo = ((s.start_s * rate - 0.5).ceil().max(0.0) as usize).min(n);
        let hi = ((s.end_s * rate - 0.5).ceil().max(0.0) as usize).min(n);
        let lo = if lo > 0 && frame_center(lo - 1) >= s.start_s { lo - 1 } else { lo };
        let hi = if hi < n && frame_center(hi) < s.end_s { hi + 1 } else { hi };
        (lo, hi.max(lo))
    };
    match mode {
        RasterMode::Overlap => {
            let mut count = vec![0u16; n];
            for s in segments {
                let (lo, hi) = frame_range(s);
                count[lo..hi].iter_mut().for_each(|c| *c += 1);
            }
            Ok(FrameLabels::new(Alphabet::Binary, count.iter().map(|&c| (c >= 2) as u8).collect())
                .expect("binary raster"))
        }
        RasterMode::Gender => {
            let mut has = vec![[false; 2]; n];
            for s in segments {
                let g = s.gender.ok_or_else(|| CorpusError::UnknownGenderInGenderMode {
                    speaker: s.speaker.clone(),
                })?;
                let (lo, hi) = frame_range(s);
                has[lo..hi].iter_mut().for_each(|h| h[g.index()] = true);
            }
            let v = has
                .iter()
                .map(|h| match h {
                    [false, false] => GenderSymbol::Silence as u8,
                    [true, false] => GenderSymbol::Female as u8,
                    [false, true] => GenderSymbol::Male as u8,
                    [true, true] => GenderSymbol::Both as u8,
                })
                .collect();
            Ok(FrameLabels::new(Alphabet::Gender, v).expect("gender raster"))
        }
    }
}

/// Frames covered by at least one segment.
fn speech_frames(segments: &[SegmentAnnotation], duration_s: f64) -> usize {
    let n = frames_for_duration(duration_s).max(1);
    let mut covered = vec![false; n];
    for s in segments {
        for (i, c) in covered.iter_mut().enumerate() {
            let t = frame_center(i);
            if t >= s.start_s && t < s.end_s {
                *c = true;
            }
        }
    }
    covered.iter().filter(|&&c| c).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub n_files: usize,
    /// Sum of file durations.
    pub total_s: f64,
    /// Time covered by at least one segment.
    pub speech_s: f64,
    /// Time covered by at least two segments.
    pub overlap_s: f64,
    /// Female-labeled segment time over all segment time.
    pub female_fraction: f64,
    pub speakers_f: usize,
    pub speakers_m: usize,
    pub speakers_unknown: usize,
}

impl CorpusStats {
    pub fn total_hours(&self) -> f64 {
        self.total_s / 3600.0
    }

    pub fn overlap_fraction(&self) -> f64 {
        if self.total_s > 0.0 {
            self.overlap_s / self.total_s
        } else {
            0.0
        }
    }

    pub fn overlap_fraction_of_speech(&self) -> f64 {
        if self.speech_s > 0.0 {
            self.overlap_s / self.speech_s
        } else {
            0.0
        }
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "files                    {}", self.n_files);
        let _ = writeln!(out, "total duration (h)       {:.3}", self.total_hours());
        let _ = writeln!(out, "speech duration (h)      {:.3}", self.speech_s / 3600.0);
        let _ = writeln!(out, "overlap / timeline (%)   {:.1}", 100.0 * self.overlap_fraction());
        let _ = writeln!(out, "overlap / speech (%)     {:.1}", 100.0 * self.overlap_fraction_of_speech());
        let _ = writeln!(out, "female speech (%)        {:.1}", 100.0 * self.female_fraction);
        let _ = writeln!(
            out,
            "speakers f/m/unknown     {}/{}/{}",
            self.speakers_f, self.speakers_m, self.speakers_unknown
        );
        out
    }
}

/// Groups segments by file, in file-name order.
pub fn by_file(segments: &[SegmentAnnotation]) -> BTreeMap<&str, Vec<&SegmentAnnotation>> {
    let mut map: BTreeMap<&str, Vec<&SegmentAnnotation>> = BTreeMap::new();
    for s in segments {
        map.entry(s.file.as_str()).or_default().push(s);
    }
    map
}

/// Duration, overlap and gender statistics.
///
/// File durations default to the last segment end when `durations` lacks a
/// file.
pub fn compute_stats(segments: &[SegmentAnnotation], durations: &BTreeMap<String, f64>) -> CorpusStats {
    let frame = 1.0 / FRAME_RATE as f64;
    let mut total_s = 0.0;
    let mut speech_s = 0.0;
    let mut overlap_s = 0.0;
    let mut files: BTreeSet<&str> = durations.keys().map(String::as_str).collect();
    let grouped = by_file(segments);
    files.extend(grouped.keys());
    for file in &files {
        let segs: Vec<SegmentAnnotation> = grouped.get(file).map_or(Vec::new(), |v| v.iter().map(|s| (*s).clone()).collect());
        let last_end = segs.iter().map(|s| s.end_s).fold(0.0, f64::max);
        let d = durations.get(*file).copied().unwrap_or(last_end);
        total_s += d;
        if segs.is_empty() {
            continue;
        }
        let ovl = rasterize(&segs, d, RasterMode::Overlap).expect("overlap raster");
        overlap_s += ovl.count(1) as f64 * frame;
        speech_s += speech_frames(&segs, d) as f64 * frame;
    }
    let seg_total: f64 = segments.iter().map(SegmentAnnotation::duration_s).sum();
    let female: f64 = segments
        .iter()
        .filter(|s| s.gender == Some(Gender::Female))
        .map(SegmentAnnotation::duration_s)
        .sum();
    let mut speakers: BTreeMap<&str, Option<Gender>> = BTreeMap::new();
    for s in segments {
        speakers.entry(s.speaker.as_str()).or_insert(s.gender);
    }
    let count = |g: Option<Gender>| speakers.values().filter(|&&v| v == g).count();
    CorpusStats {
        n_files: files.len(),
        total_s,
        speech_s,
        overlap_s,
        female_fraction: if seg_total > 0.0 { female / seg_total } else { 0.0 },
        speakers_f: count(Some(Gender::Female)),
        speakers_m: count(Some(Gender::Male)),
        speakers_unknown: count(None),
    }
}

// ---------------------------------------------------------------------------
// Balanced subsets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetRules {
    pub n_test_speakers_per_gender: usize,
    pub n_test_segments: usize,
    pub n_train_segments: usize,
    pub segment_s: f64,
    pub seed: u64,
}

impl Default for SubsetRules {
    fn default() -> Self {
        Self {
            n_test_speakers_per_gender: 40,
            n_test_segments: 4000,
            n_train_segments: 60000,
            segment_s: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubsetReport {
    pub test_speakers: [usize; 2],
    pub train_speakers: [usize; 2],
    pub test_segments: [usize; 2],
    pub train_segments: [usize; 2],
    pub test_cap: usize,
    pub train_cap: usize,
    /// Known-gender speakers without any single-speaker slice.
    pub ineligible_speakers: usize,
}

impl SubsetReport {
    pub fn to_table(&self) -> String {
        let mut out = String::from("set    speakers_f speakers_m segments_f segments_m cap\n");
        let _ = writeln!(
            out,
            "train  {:>10} {:>10} {:>10} {:>10} {:>3}",
            self.train_speakers[0], self.train_speakers[1], self.train_segments[0], self.train_segments[1], self.train_cap
        );
        let _ = writeln!(
            out,
            "test   {:>10} {:>10} {:>10} {:>10} {:>3}",
            self.test_speakers[0], self.test_speakers[1], self.test_segments[0], self.test_segments[1], self.test_cap
        );
        let _ = writeln!(out, "ineligible speakers: {}", self.ineligible_speakers);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub train_speakers: Vec<String>,
    pub test_speakers: Vec<String>,
    /// Fixed-length single-speaker slices.
    pub train: Vec<SegmentAnnotation>,
    pub test: Vec<SegmentAnnotation>,
    pub report: SubsetReport,
}

/// Parts of each segment not covered by any other segment, for segments of
/// one file, as `(segment index, start_s, end_s)`.
fn single_speaker_regions(segs: &[SegmentAnnotation]) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for (i, s) in segs.iter().enumerate() {
        let mut cuts: Vec<(f64, f64)> = segs
            .iter()
            .enumerate()
            .filter(|&(j, o)| j != i && o.start_s < s.end_s && o.end_s > s.start_s)
            .map(|(_, o)| (o.start_s, o.end_s))
            .collect();
        cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cursor = s.start_s;
        for (cs, ce) in cuts {
            if cs > cursor {
                out.push((i, cursor, cs.min(s.end_s)));
            }
            cursor = cursor.max(ce);
        }
        if s.end_s > cursor {
            out.push((i, cursor, s.end_s));
        }
    }
    out
}

fn slices_by_speaker(segments: &[SegmentAnnotation], segment_s: f64) -> BTreeMap<String, (Gender, Vec<SegmentAnnotation>)> {
    let mut out: BTreeMap<String, (Gender, Vec<SegmentAnnotation>)> = BTreeMap::new();
    for (_, segs) in by_file(segments) {
        let owned: Vec<SegmentAnnotation> = segs.iter().map(|s| (*s).clone()).collect();
        for (i, lo, hi) in single_speaker_regions(&owned) {
            let s = &owned[i];
            let Some(g) = s.gender else { continue };
            let n = ((hi - lo) / segment_s + 1e-9).floor() as usize;
            let entry = out.entry(s.speaker.clone()).or_insert((g, Vec::new()));
            for k in 0..n {
                let start = lo + k as f64 * segment_s;
                entry.1.push(SegmentAnnotation {
                    file: s.file.clone(),
                    start_s: start,
                    end_s: start + segment_s,
                    speaker: s.speaker.clone(),
                    gender: Some(g),
                });
            }
        }
    }
    out
}

/// Round-robin fill with a per-speaker cap of `ceil(target / speakers)`.
fn fill_round_robin(
    speakers: &[String],
    pool: &mut BTreeMap<String, (Gender, Vec<SegmentAnnotation>)>,
    target: usize,
    what: &str,
) -> Result<(Vec<SegmentAnnotation>, usize), CorpusError> {
    let cap = target.div_ceil(speakers.len().max(1));
    let mut taken = vec![0usize; speakers.len()];
    let mut out = Vec::with_capacity(target);
    while out.len() < target {
        let mut progress = false;
        for (k, spk) in speakers.iter().enumerate() {
            if out.len() == target {
                break;
            }
            let slices = &mut pool.get_mut(spk).expect("selected speaker").1;
            if taken[k] < cap && taken[k] < slices.len() {
                out.push(slices[taken[k]].clone());
                taken[k] += 1;
                progress = true;
            }
        }
        if !progress {
            return Err(CorpusError::InsufficientSegments {
                what: what.into(),
                needed: target,
                available: out.len(),
            });
        }
    }
    Ok((out, cap))
}

/// Interleaves two lists, female first.
fn interleave<T: Clone>(f: &[T], m: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(f.len() + m.len());
    for i in 0..f.len().max(m.len()) {
        out.extend(f.get(i).cloned());
        out.extend(m.get(i).cloned());
    }
    out
}

/// Fills `target` slices split evenly between genders, the female share
/// taking the odd slice.
fn fill_balanced(
    f: &[String],
    m: &[String],
    pool: &mut BTreeMap<String, (Gender, Vec<SegmentAnnotation>)>,
    target: usize,
    what: &str,
) -> Result<(Vec<SegmentAnnotation>, usize), CorpusError> {
    if target == 0 {
        return Ok((Vec::new(), 0));
    }
    let (tf, tm) = (target.div_ceil(2), target / 2);
    let (sf, cf) = fill_round_robin(f, pool, tf, &format!("{what} female"))?;
    let (sm, cm) = fill_round_robin(m, pool, tm, &format!("{what} male"))?;
    Ok((interleave(&sf, &sm), cf.max(cm)))
}

/// Speaker-disjoint, gender-balanced train/test selection of fixed-length
/// single-speaker slices.
///
/// The test set takes `n_test_speakers_per_gender` speakers of each gender.
/// The train set takes as many of the remaining speakers per gender as the
/// scarcer gender allows. Each gender receives half of each segment target,
/// drawn round-robin over its speakers in seeded order with a per-speaker
/// cap of `ceil(half / speakers)`.
pub fn select_balanced_subset(segments: &[SegmentAnnotation], rules: &SubsetRules) -> Result<Subset, CorpusError> {
    if rules.n_test_speakers_per_gender == 0 || !(rules.segment_s > 0.0) {
        return Err(CorpusError::BadConfig("test speakers and segment length must be positive".into()));
    }
    let mut pool = slices_by_speaker(segments, rules.segment_s);
    let known: BTreeSet<&str> = segments
        .iter()
        .filter(|s| s.gender.is_some())
        .map(|s| s.speaker.as_str())
        .collect();
    pool.retain(|_, (_, v)| !v.is_empty());
    let ineligible = known.len() - pool.len();
    let mut rng = ChaCha8Rng::seed_from_u64(rules.seed);
    let mut per_gender: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    for (spk, (g, _)) in &pool {
        per_gender[g.index()].push(spk.clone());
    }
    let need = rules.n_test_speakers_per_gender;
    for g in [Gender::Female, Gender::Male] {
        let available = per_gender[g.index()].len();
        if available < need {
            return Err(CorpusError::InsufficientSpeakers {
                what: format!("test {}", if g == Gender::Female { "female" } else { "male" }),
                needed: need,
                available,
            });
        }
    }
    for list in per_gender.iter_mut() {
        list.shuffle(&mut rng);
    }
    for (_, slices) in pool.values_mut() {
        slices.shuffle(&mut rng);
    }
    let n_train = (per_gender[0].len() - need).min(per_gender[1].len() - need);
    if n_train == 0 && rules.n_train_segments > 0 {
        return Err(CorpusError::InsufficientSpeakers {
            what: "train (per gender)".into(),
            needed: 1,
            available: 0,
        });
    }
    let test_f = &per_gender[0][..need];
    let test_m = &per_gender[1][..need];
    let train_f = &per_gender[0][need..need + n_train];
    let train_m = &per_gender[1][need..need + n_train];
    let (test, test_cap) = fill_balanced(test_f, test_m, &mut pool, rules.n_test_segments, "test")?;
    let (train, train_cap) = fill_balanced(train_f, train_m, &mut pool, rules.n_train_segments, "train")?;
    let count = |v: &[SegmentAnnotation], g: Gender| v.iter().filter(|s| s.gender == Some(g)).count();
    let report = SubsetReport {
        test_speakers: [need, need],
        train_speakers: [n_train, n_train],
        test_segments: [count(&test, Gender::Female), count(&test, Gender::Male)],
        train_segments: [count(&train, Gender::Female), count(&train, Gender::Male)],
        test_cap,
        train_cap,
        ineligible_speakers: ineligible,
    };
    let mut train_speakers = interleave(train_f, train_m);
    let mut test_speakers = interleave(test_f, test_m);
    train_speakers.sort();
    test_speakers.sort();
    Ok(Subset {
        train_speakers,
        test_speakers,
        train,
        test,
        report,
    })
}

/// Moves `fraction` of the train speakers of each gender (at least one when
/// two or more are available) into a dev set, returning `(train, dev)`.
pub fn carve_dev(
    train: &[SegmentAnnotation],
    fraction: f64,
    seed: u64,
) -> (Vec<SegmentAnnotation>, Vec<SegmentAnnotation>) {
    let mut speakers: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    let mut seen = BTreeSet::new();
    for s in train {
        if let Some(g) = s.gender {
            if seen.insert(s.speaker.as_str()) {
                speakers[g.index()].push(s.speaker.as_str());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xde7);
    let mut dev = BTreeSet::new();
    for list in speakers.iter_mut() {
        list.sort();
        list.shuffle(&mut rng);
        let k = ((fraction * list.len() as f64).round() as usize).max((list.len() >= 2) as usize);
        dev.extend(list.iter().take(k).copied());
    }
    train.iter().cloned().partition(|s| !dev.contains(s.speaker.as_str()))
}

// ---------------------------------------------------------------------------
// Synthetic corpora
// ---------------------------------------------------------------------------

pub const FEMALE_F0_RANGE: (f64, f64) = (180.0, 280.0);
pub const MALE_F0_RANGE: (f64, f64) = (90.0, 150.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpeaker {
    pub id: String,
    pub gender: Gender,
    pub f0_hz: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_shows: usize,
    pub show_s: f64,
    pub speakers_per_gender: usize,
    /// Speakers per gender appearing in one show.
    pub cast_per_gender: usize,
    /// Target fraction of the timeline covered by two speakers.
    pub overlap_fraction: f64,
    /// Range of turn durations in seconds.
    pub turn_s: (f64, f64),
    /// Peak amplitude of the background noise.
    pub noise: f32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_shows: 20,
            show_s: 60.0,
            speakers_per_gender: 10,
            cast_per_gender: 2,
            overlap_fraction: 0.10,
            turn_s: (1.0, 4.0),
            noise: 0.003,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Two-second two-speaker mixtures for overlap training.
    pub fn mixtures(n: usize, overlap_fraction: f64, seed: u64) -> Self {
        Self {
            n_shows: n,
            show_s: 2.0,
            speakers_per_gender: 20,
            cast_per_gender: 1,
            overlap_fraction,
            turn_s: (0.6, 1.6),
            noise: 0.003,
            seed,
        }
    }

    /// Overlap-free shows with long turns from a large speaker pool, suited
    /// to cutting single-speaker gender excerpts.
    pub fn speaker_pool(n_shows: usize, speakers_per_gender: usize, seed: u64) -> Self {
        Self {
            n_shows,
            show_s: 120.0,
            speakers_per_gender,
            cast_per_gender: 1,
            overlap_fraction: 0.0,
            turn_s: (2.0, 8.0),
            noise: 0.003,
            seed,
        }
    }

    /// Shows totalling at least `hours`.
    pub fn for_hours(hours: f64, overlap_fraction: f64, seed: u64) -> Self {
        let base = Self::default();
        Self {
            n_shows: ((hours * 3600.0) / base.show_s).ceil().max(1.0) as usize,
            overlap_fraction,
            seed,
            ..base
        }
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::BadConfig(m.into()));
        if self.n_shows == 0 || self.speakers_per_gender == 0 || self.cast_per_gender == 0 {
            return bad("shows, speakers and cast must be positive");
        }
        if self.cast_per_gender > self.speakers_per_gender {
            return bad("cast_per_gender exceeds speakers_per_gender");
        }
        if !(0.0..0.5).contains(&self.overlap_fraction) {
            return bad("overlap_fraction must lie in [0, 0.5)");
        }
        if !(self.turn_s.0 >= 0.3 && self.turn_s.1 >= self.turn_s.0 && self.show_s >= self.turn_s.0) {
            return bad("need 0.3 <= min turn <= max turn <= show duration");
        }
        if !(self.noise >= 0.0 && self.noise < 0.1) {
            return bad("noise must lie in [0, 0.1)");
        }
        Ok(())
    }
}

/// Draws the speaker population: ids `f000…`, `m000…`.
pub fn synth_speakers(cfg: &SynthConfig) -> Vec<SynthSpeaker> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut out = Vec::new();
    for (g, prefix, range) in [(Gender::Female, "f", FEMALE_F0_RANGE), (Gender::Male, "m", MALE_F0_RANGE)] {
        for k in 0..cfg.speakers_per_gender {
            out.push(SynthSpeaker {
                id: format!("{prefix}{k:03}"),
                gender: g,
                f0_hz: rng.random_range(range.0..range.1),
                seed: rng.random(),
            });
        }
    }
    out
}

/// One planned turn of a synthetic show.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub speaker: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub gain_db: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShowPlan {
    pub id: String,
    pub duration_s: f64,
    pub turns: Vec<Turn>,
}

impl ShowPlan {
    pub fn segments(&self, speakers: &[SynthSpeaker]) -> Vec<SegmentAnnotation> {
        self.turns
            .iter()
            .map(|t| SegmentAnnotation {
                file: self.id.clone(),
                start_s: t.start_s,
                end_s: t.end_s,
                speaker: speakers[t.speaker].id.clone(),
                gender: Some(speakers[t.speaker].gender),
            })
            .collect()
    }
}

/// Rounds to the 10 ms grid.
fn grid(t: f64) -> f64 {
    (t * FRAME_RATE as f64).round() / FRAME_RATE as f64
}

/// Takes `k` distinct speakers from a queue refilled with shuffled copies of
/// `all`, so every speaker appears equally often.
fn draw_cast(queue: &mut Vec<usize>, all: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if queue.len() < k {
        let mut fresh = all.to_vec();
        fresh.shuffle(rng);
        fresh.extend(std::mem::take(queue));
        *queue = fresh;
    }
    let mut cast = Vec::with_capacity(k);
    let mut i = queue.len();
    while cast.len() < k {
        i -= 1;
        if !cast.contains(&queue[i]) {
            cast.push(queue.remove(i));
        }
    }
    cast
}

/// Plans every show. Turns alternate genders; a greedy controller overlaps
/// the next turn with the previous one whenever the running overlap time
/// falls below the target fraction of the elapsed timeline.
pub fn plan_shows(cfg: &SynthConfig, speakers: &[SynthSpeaker]) -> Result<Vec<ShowPlan>, CorpusError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut idx: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, s) in speakers.iter().enumerate() {
        idx[s.gender.index()].push(i);
    }
    let mut queues: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    let mut elapsed = 0.0f64;
    let mut overlap = 0.0f64;
    let width = (cfg.n_shows.max(2) as f64).log10().ceil() as usize;
    let mut plans = Vec::with_capacity(cfg.n_shows);
    for show in 0..cfg.n_shows {
        let cast = [
            draw_cast(&mut queues[0], &idx[0], cfg.cast_per_gender, &mut rng),
            draw_cast(&mut queues[1], &idx[1], cfg.cast_per_gender, &mut rng),
        ];
        let d = cfg.show_s;
        let mut gender = rng.random_range(0..2usize);
        let mut turns: Vec<Turn> = Vec::new();
        let mut prev_prev_end = 0.0f64;
        loop {
            let dur = grid(rng.random_range(cfg.turn_s.0..=cfg.turn_s.1));
            let speaker = *cast[gender].choose(&mut rng).expect("non-empty cast");
            let start = match turns.last() {
                None => grid(rng.random_range(0.0..0.2f64.min(d / 4.0))),
                Some(prev) => {
                    let want_overlap = overlap < cfg.overlap_fraction * (elapsed + prev.end_s);
                    if want_overlap {
                        let prev_len = prev.end_s - prev.start_s;
                        let max_ov = (0.8 * prev_len.min(dur)).min(prev.end_s - prev_prev_end - 0.1);
                        if max_ov >= 0.2 {
                            grid(prev.end_s - rng.random_range(0.2..=max_ov))
                        } else {
                            prev.end_s
                        }
                    } else {
                        grid(prev.end_s + rng.random_range(0.05..0.4))
                    }
                }
            };
            let end = grid((start + dur).min(d));
            if end - start < 0.3 {
                break;
            }
            if let Some(prev) = turns.last() {
                overlap += (prev.end_s - start).max(0.0);
                prev_prev_end = prev.end_s;
            }
            turns.push(Turn {
                speaker,
                start_s: start,
                end_s: end,
                gain_db: rng.random_range(-3.0..0.0),
                seed: rng.random(),
            });
            gender = 1 - gender;
            if end >= d {
                break;
            }
        }
        elapsed += d;
        plans.push(ShowPlan {
            id: format!("show{show:0width$}"),
            duration_s: d,
            turns,
        });
    }
    Ok(plans)
}

/// Renders a planned show: each turn is mixed into the running buffer, then a
/// noise floor is added.
pub fn render_show(plan: &ShowPlan, speakers: &[SynthSpeaker], noise: f32, seed: u64) -> Result<AudioBuffer, CorpusError> {
    let n = (plan.duration_s * SAMPLE_RATE as f64).round() as usize;
    let mut show = AudioBuffer::silence(n);
    for t in &plan.turns {
        let sp = &speakers[t.speaker];
        let voice = synth_voice(sp.f0_hz, t.end_s - t.start_s, sp.seed ^ t.seed)?;
        let spec = MixSpec {
            gain_db: t.gain_db,
            ..MixSpec::at(t.start_s)
        };
        let mixed = mix_overlap(&show, &voice, &spec)?;
        let mut samples = mixed.audio.into_samples();
        samples.truncate(n);
        show = AudioBuffer::new(samples, SAMPLE_RATE)?;
    }
    if noise > 0.0 {
        let hiss = white_noise(n, noise, seed);
        let samples = show
            .samples()
            .iter()
            .zip(hiss.samples())
            .map(|(&a, &b)| (a + b).clamp(-1.0, 1.0))
            .collect();
        show = AudioBuffer::new(samples, SAMPLE_RATE)?;
    }
    Ok(show)
}

fn noise_seed(cfg: &SynthConfig, show: usize) -> u64 {
    cfg.seed.wrapping_add(show as u64) ^ 0x401_5e
}

/// Cuts the audio of annotated excerpts out of rendered shows, rendering
/// each show at most once. Excerpts refer to shows by id.
pub fn render_excerpts(
    cfg: &SynthConfig,
    speakers: &[SynthSpeaker],
    plans: &[ShowPlan],
    excerpts: &[SegmentAnnotation],
) -> Result<Vec<AudioBuffer>, CorpusError> {
    let mut wanted: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in excerpts.iter().enumerate() {
        wanted.entry(e.file.as_str()).or_default().push(i);
    }
    let mut out: Vec<Option<AudioBuffer>> = vec![None; excerpts.len()];
    let rate = SAMPLE_RATE as f64;
    for (k, plan) in plans.iter().enumerate() {
        let Some(list) = wanted.remove(plan.id.as_str()) else { continue };
        // Turns away from every excerpt do not affect the excerpt samples.
        let touched = ShowPlan {
            id: plan.id.clone(),
            duration_s: plan.duration_s,
            turns: plan
                .turns
                .iter()
                .filter(|t| list.iter().any(|&i| t.start_s < excerpts[i].end_s && t.end_s > excerpts[i].start_s))
                .cloned()
                .collect(),
        };
        let audio = render_show(&touched, speakers, cfg.noise, noise_seed(cfg, k))?;
        for i in list {
            let e = &excerpts[i];
            let lo = ((e.start_s * rate).round() as usize).min(audio.len());
            let hi = ((e.end_s * rate).round() as usize).min(audio.len());
            out[i] = Some(audio.slice(lo, hi.max(lo + 1).min(audio.len())));
        }
    }
    if let Some((file, _)) = wanted.into_iter().next() {
        return Err(CorpusError::BadConfig(format!("excerpt refers to unknown show {file}")));
    }
    Ok(out.into_iter().map(|a| a.expect("every excerpt rendered")).collect())
}

/// A rendered synthetic show.
#[derive(Debug, Clone)]
pub struct SynthShow {
    pub id: String,
    pub audio: AudioBuffer,
    pub segments: Vec<SegmentAnnotation>,
}

impl SynthShow {
    pub fn overlap_labels(&self) -> FrameLabels {
        rasterize(&self.segments, self.audio.duration_s(), RasterMode::Overlap).expect("overlap raster")
    }
}

/// Plans and renders all shows in memory.
pub fn synthesize_corpus(cfg: &SynthConfig) -> Result<(Vec<SynthSpeaker>, Vec<SynthShow>), CorpusError> {
    let speakers = synth_speakers(cfg);
    let plans = plan_shows(cfg, &speakers)?;
    let mut shows = Vec::with_capacity(plans.len());
    for (k, plan) in plans.iter().enumerate() {
        let audio = render_show(plan, &speakers, cfg.noise, noise_seed(cfg, k))?;
        shows.push(SynthShow {
            id: plan.id.clone(),
            audio,
            segments: plan.segments(&speakers),
        });
    }
    Ok((speakers, shows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub show: String,
    pub wav_path: String,
    pub csv_path: String,
    pub duration_s: f64,
}

pub const MANIFEST_HEADER: &str = "show,wav_path,csv_path,duration_s";

pub fn manifest_csv(rows: &[ManifestRow]) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{:.3}", r.show, r.wav_path, r.csv_path, r.duration_s);
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRow>, CorpusError> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, h)| h.trim()) != Some(MANIFEST_HEADER) {
        return Err(CorpusError::Parse {
            line: 1,
            message: format!("expected header {MANIFEST_HEADER}"),
        });
    }
    let mut out = Vec::new();
    for (i, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 4 {
            return Err(CorpusError::Parse {
                line: i + 1,
                message: format!("expected 4 fields, found {}", f.len()),
            });
        }
        out.push(ManifestRow {
            show: f[0].to_string(),
            wav_path: f[1].to_string(),
            csv_path: f[2].to_string(),
            duration_s: parse_time(f[3], i + 1, "duration_s")?,
        });
    }
    Ok(out)
}

/// Resolves a manifest path relative to the manifest's directory.
pub fn resolve(manifest: &Path, rel: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(rel)
}

/// `frame_index,overlap,gender` raster with gender symbols 0 silence,
/// 1 female, 2 male, 3 both.
pub fn raster_csv(overlap: &FrameLabels, gender: &FrameLabels) -> String {
    let mut out = String::from("frame_index,overlap,gender\n");
    for (i, (o, g)) in overlap.values().iter().zip(gender.values()).enumerate() {
        let _ = writeln!(out, "{i},{o},{g}");
    }
    out
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CorpusError> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// Generates shows and writes `<show>.wav`, `<show>.csv` (annotations),
/// `<show>.labels.csv` (rasters), `speakers.csv` and `manifest.csv`.
pub fn build_synthetic_corpus(cfg: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Vec<ManifestRow>, CorpusError> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let speakers = synth_speakers(cfg);
    let plans = plan_shows(cfg, &speakers)?;
    let mut rows = Vec::with_capacity(plans.len());
    for (k, plan) in plans.iter().enumerate() {
        let audio = render_show(plan, &speakers, cfg.noise, noise_seed(cfg, k))?;
        let segments = plan.segments(&speakers);
        let wav = format!("{}.wav", plan.id);
        let csv = format!("{}.csv", plan.id);
        write(&dir.join(&wav), &encode_wav(&audio))?;
        write(&dir.join(&csv), emit_csv(&segments).as_bytes())?;
        let ovl = rasterize(&segments, plan.duration_s, RasterMode::Overlap)?;
        let gen = rasterize(&segments, plan.duration_s, RasterMode::Gender)?;
        write(&dir.join(format!("{}.labels.csv", plan.id)), raster_csv(&ovl, &gen).as_bytes())?;
        rows.push(ManifestRow {
            show: plan.id.clone(),
            wav_path: wav,
            csv_path: csv,
            duration_s: plan.duration_s,
        });
    }
    let mut spk = String::from("speaker,gender,f0_hz\n");
    for s in &speakers {
        let _ = writeln!(spk, "{},{},{:.3}", s.id, s.gender, s.f0_hz);
    }
    write(&dir.join("speakers.csv"), spk.as_bytes())?;
    write(&dir.join("manifest.csv"), manifest_csv(&rows).as_bytes())?;
    Ok(rows)
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria can be selected by number: `cargo test --test acceptance -- 1 8`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use osdgd::audio::{decode_wav, encode_wav, read_wav, synth_voice, AudioBuffer};
use osdgd::corpus::{
    build_synthetic_corpus, emit_csv, emit_rttm, parse_manifest, parse_segments, parse_segments_str, plan_shows,
    rasterize, render_excerpts, resolve, select_balanced_subset, synth_speakers, CorpusError, RasterMode,
    SegmentAnnotation, SegmentFormat, SubsetRules, SynthConfig,
};
use osdgd::dataset::FeatureSet;
use osdgd::eval::{f1_score, frame_prf, gender_accuracy, Rate};
use osdgd::features::{
    decode_feature_file, encode_feature_file, extract_mfcc, load_feature_file, save_feature_file, FeatureMatrix,
    FeatureSource, MfccConfig, StubProjector,
};
use osdgd::frames::FrameLabels;
use osdgd::gender::{
    decide_gd2, evaluate_gd, gd_train_config, gender_track_csv, sliding_gender_scores, train_gd1, train_gd2, GdSystem, Gender,
};
use osdgd::neural::{
    build_rosd, build_tcn, build_tcn_seeded, checkpoint_crc, encode_checkpoint, load_checkpoint, save_checkpoint, Arch,
    TrainConfig,
};
use osdgd::osd::{detect_overlap, evaluate_osd, scores_csv, segments_csv, train_osd, window_set, DetectConfig, WindowingConfig};
use osdgd::pitch::{error_pitch_histogram, segment_log_f0, yin_f0, SegmentPitch, Slice, YinConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() <= limit_s,
        format!("runtime {:.1} s exceeds {limit_s} s", elapsed.as_secs_f64()),
    )
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn rate(r: Rate) -> f64 {
    r.value().unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------------------

fn c1_metric_oracle() -> Outcome {
    let t = Instant::now();
    let table = [
        (34.2, 60.8, 43.8),
        (46.6, 59.8, 52.4),
        (61.0, 63.6, 62.3),
        (60.1, 67.1, 63.4),
        (57.2, 62.8, 59.9),
    ];
    let mut worst = 0.0f64;
    for (p, r, f1) in table {
        // Counts realizing P and R exactly: tp = P·R, fp = R·(1 - P), fn = P·(1 - R), in per-mille.
        let (pm, rm) = ((p * 10.0) as usize, (r * 10.0) as usize);
        let tp = pm * rm;
        let fp = rm * (1000 - pm);
        let fn_ = pm * (1000 - rm);
        let tn = 1000;
        let mut reference = Vec::with_capacity(tp + fp + fn_ + tn);
        let mut hypothesis = Vec::with_capacity(reference.capacity());
        for (n, rv, hv) in [(tp, true, true), (fp, false, true), (fn_, true, false), (tn, false, false)] {
            reference.extend(std::iter::repeat_n(rv, n));
            hypothesis.extend(std::iter::repeat_n(hv, n));
        }
        let reference = FrameLabels::binary_from_bools(reference).map_err(err)?;
        let hypothesis = FrameLabels::binary_from_bools(hypothesis).map_err(err)?;
        let report = frame_prf(&reference, &hypothesis).map_err(err)?;
        let m = report.osd().ok_or("missing OSD metrics")?;
        let got = 100.0 * rate(m.f1);
        ensure(
            (100.0 * rate(m.precision) - p).abs() < 1e-9 && (100.0 * rate(m.recall) - r).abs() < 1e-9,
            format!("P/R not realized for ({p}, {r})"),
        )?;
        let direct = 100.0 * rate(f1_score(Rate::Defined(p / 100.0), Rate::Defined(r / 100.0)));
        ensure((got - direct).abs() < 1e-9, "frame_prf and f1_score disagree")?;
        worst = worst.max((got - f1).abs());
        ensure((got - f1).abs() <= 0.05, format!("({p}, {r}) -> {got:.3}, published {f1}"))?;
    }
    within(t.elapsed(), 1.0)?;
    Ok(format!("5 published rows, max |F1 - table| = {worst:.3}"))
}

fn c2_param_counts() -> Outcome {
    let t = Instant::now();
    let rosd59 = build_rosd(59).param_count();
    let rosd1024 = build_rosd(1024).param_count();
    let tcn1024 = build_tcn(1024, 2).param_count();
    let tcn59 = build_tcn(59, 2).param_count();
    ensure(rosd59 == 638_466, format!("ROSD(59) = {rosd59}"))?;
    let rel_rosd = (rosd1024 as f64 - 1.647e6).abs() / 1.647e6;
    ensure(rel_rosd <= 0.015, format!("ROSD(1024) = {rosd1024}, {:.2}% off", 100.0 * rel_rosd))?;
    let rel_tcn = (tcn1024 as f64 - 0.352e6).abs() / 0.352e6;
    ensure(rel_tcn <= 0.10, format!("TCN(1024) = {tcn1024}, {:.2}% off", 100.0 * rel_tcn))?;
    ensure(tcn59 < rosd59, format!("TCN(59) = {tcn59} not below ROSD(59)"))?;
    within(t.elapsed(), 1.0)?;
    Ok(format!(
        "ROSD(59) {rosd59}, ROSD(1024) {rosd1024} ({:+.2}%), TCN(1024) {tcn1024} ({:+.2}%), TCN(59) {tcn59}",
        100.0 * (rosd1024 as f64 / 1.647e6 - 1.0),
        100.0 * (tcn1024 as f64 / 0.352e6 - 1.0)
    ))
}

fn c3_accuracy_identity() -> Outcome {
    let mut pairs = Vec::new();
    for (g, other, correct) in [(Gender::Female, Gender::Male, 978), (Gender::Male, Gender::Female, 921)] {
        pairs.extend(std::iter::repeat_n((g, g), correct));
        pairs.extend(std::iter::repeat_n((g, other), 1000 - correct));
    }
    let report = gender_accuracy(&pairs).map_err(err)?;
    let m = report.gd().ok_or("missing GD metrics")?;
    let (acc, f, mm) = (rate(m.acc), rate(m.acc_f), rate(m.acc_m));
    ensure(acc == 0.9495 && f == 0.978 && mm == 0.921, format!("acc {acc}, F {f}, M {mm}"))?;
    Ok(format!("Acc_F 0.978, Acc_M 0.921 -> Acc {acc} ({})", m.acc.percent()))
}

fn c4_gradients() -> Outcome {
    let t = Instant::now();
    let mut worst = (0.0f64, "");
    for (name, hyper) in common::gradient_cases() {
        let e = common::max_grad_error(hyper);
        ensure(e <= common::TOL, format!("{name}: max relative error {e:e}"))?;
        if e >= worst.0 {
            worst = (e, name);
        }
    }
    within(t.elapsed(), 120.0)?;
    Ok(format!(
        "{} configurations x 5 seeds x both losses, worst {:.1e} ({})",
        common::gradient_cases().len(),
        worst.0,
        worst.1
    ))
}

/// Loads a written corpus back from disk: MFCC features and overlap rasters.
fn load_overlap_corpus(manifest: &Path) -> Result<Vec<(FeatureMatrix, FrameLabels)>, String> {
    let rows = parse_manifest(&fs::read_to_string(manifest).map_err(err)?).map_err(err)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let audio = read_wav(resolve(manifest, &row.wav_path)).map_err(err)?;
        let segs = parse_segments(resolve(manifest, &row.csv_path), SegmentFormat::Csv).map_err(err)?;
        let labels = rasterize(&segs, row.duration_s, RasterMode::Overlap).map_err(err)?;
        let feats = extract_mfcc(&audio, &MfccConfig::default()).map_err(err)?;
        ensure(feats.n_frames() == labels.len(), "feature/label length mismatch")?;
        out.push((feats, labels));
    }
    Ok(out)
}

fn c5_synthetic_osd() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(err)?;
    let cfg = SynthConfig::mixtures(2000, 0.10, 21);
    build_synthetic_corpus(&cfg, dir.path()).map_err(err)?;
    let items = load_overlap_corpus(&dir.path().join("manifest.csv"))?;
    let ovl: usize = items.iter().map(|(_, l)| l.count(1)).sum();
    let total: usize = items.iter().map(|(_, l)| l.len()).sum();
    let n_train = items.len() * 8 / 10;
    let n_dev = items.len() / 10;
    let w = WindowingConfig::default();
    let train_w = window_set(&items[..n_train], &w).map_err(err)?;
    let dev_w = window_set(&items[n_train..n_train + n_dev], &w).map_err(err)?;
    let test = items[n_train + n_dev..].to_vec();
    let train_cfg = TrainConfig {
        max_epochs: 120,
        patience: 3,
        min_delta: 1e-3,
        seed: 5,
        ..TrainConfig::default()
    };
    let detect = DetectConfig::default();

    let stub = StubProjector::new(1024, 13).map_err(err)?;
    let (stub_model, stub_hist) = train_osd(
        Arch::Tcn,
        &FeatureSet::projected(train_w.clone(), stub.clone()),
        Some(&FeatureSet::projected(dev_w.clone(), stub.clone())),
        &train_cfg,
    )
    .map_err(err)?;
    let stub_report = evaluate_osd(&stub_model, &FeatureSet::projected(test.clone(), stub), &detect).map_err(err)?;

    let (mfcc_model, mfcc_hist) = train_osd(
        Arch::Tcn,
        &FeatureSet::new(train_w),
        Some(&FeatureSet::new(dev_w)),
        &train_cfg,
    )
    .map_err(err)?;
    let mfcc_report = evaluate_osd(&mfcc_model, &FeatureSet::new(test), &detect).map_err(err)?;

    let f_stub = rate(stub_report.osd().ok_or("missing metrics")?.f1);
    let f_mfcc = rate(mfcc_report.osd().ok_or("missing metrics")?.f1);
    let detail = format!(
        "{} mixtures, overlap {:.3}; stub-1024 F1 {:.3} ({} epochs), MFCC F1 {:.3} ({} epochs), {:.0} s",
        items.len(),
        ovl as f64 / total as f64,
        f_stub,
        stub_hist.len(),
        f_mfcc,
        mfcc_hist.len(),
        t.elapsed().as_secs_f64()
    );
    ensure(f_stub >= 0.85, format!("stub F1 below 0.85: {detail}"))?;
    ensure(f_stub >= f_mfcc, format!("stub F1 below MFCC F1: {detail}"))?;
    within(t.elapsed(), 900.0)?;
    Ok(detail)
}

fn c6_synthetic_gd() -> Outcome {
    let t = Instant::now();
    let cfg = SynthConfig::speaker_pool(300, 100, 3);
    let speakers = synth_speakers(&cfg);
    let plans = plan_shows(&cfg, &speakers).map_err(err)?;
    let segments: Vec<_> = plans.iter().flat_map(|p| p.segments(&speakers)).collect();
    let rules = SubsetRules {
        n_test_segments: 1000,
        n_train_segments: 10_000,
        seed: 5,
        ..SubsetRules::default()
    };
    let subset = select_balanced_subset(&segments, &rules).map_err(err)?;
    let stub = StubProjector::new(768, 11).map_err(err)?;
    let load = |ex: &[SegmentAnnotation]| -> Result<FeatureSet<Gender>, String> {
        let audio = render_excerpts(&cfg, &speakers, &plans, ex).map_err(err)?;
        let mut items = Vec::with_capacity(ex.len());
        for (a, e) in audio.iter().zip(ex) {
            let f = extract_mfcc(a, &MfccConfig::default()).map_err(err)?;
            items.push((f, e.gender.ok_or("unlabeled excerpt")?));
        }
        Ok(FeatureSet::projected(items, stub.clone()))
    };
    let train_set = load(&subset.train)?;
    let test_set = load(&subset.test)?;
    let gd_cfg = gd_train_config();
    ensure(gd_cfg.max_epochs == 2, "gender training must run 2 epochs")?;
    let gd1 = GdSystem::Gd1(train_gd1(&train_set, &gd_cfg).map_err(err)?);
    let (female, male) = train_gd2(&train_set, &gd_cfg).map_err(err)?;
    let gd2 = GdSystem::Gd2 { female, male };
    let (r1, _) = evaluate_gd(&gd1, &test_set, 0.0).map_err(err)?;
    let (r2, raw) = evaluate_gd(&gd2, &test_set, 0.0).map_err(err)?;
    let a1 = rate(r1.gd().ok_or("missing metrics")?.acc);
    let a2 = rate(r2.gd().ok_or("missing metrics")?.acc);

    let females_at = |offset: f64| raw.iter().filter(|d| decide_gd2(d.score_female, d.score_male, offset).label == Gender::Female).count();
    for offset in [-3.0, 3.0] {
        let (_, direct) = evaluate_gd(&gd2, &test_set, offset).map_err(err)?;
        let n = direct.iter().filter(|d| d.label == Gender::Female).count();
        ensure(n == females_at(offset), format!("rescored sweep disagrees with evaluation at offset {offset}"))?;
    }
    let mut previous = 0usize;
    let mut sweep = Vec::new();
    for k in -12..=12 {
        let offset = k as f64 * 0.25;
        let n_female = females_at(offset);
        ensure(
            n_female >= previous,
            format!("female decisions drop from {previous} to {n_female} at offset {offset}"),
        )?;
        previous = n_female;
        sweep.push(n_female);
    }
    let detail = format!(
        "{}/{} segments; GD1 {:.4}, GD2 {:.4}; female decisions over offsets -3..3: {}..{}, {:.0} s",
        train_set.len(),
        test_set.len(),
        a1,
        a2,
        sweep[0],
        sweep[sweep.len() - 1],
        t.elapsed().as_secs_f64()
    );
    ensure(a1 >= 0.95, format!("GD1 below 0.95: {detail}"))?;
    ensure((a1 - a2).abs() <= 0.02, format!("|GD1 - GD2| above 2 points: {detail}"))?;
    within(t.elapsed(), 600.0)?;
    Ok(detail)
}

fn sine(f0: f64, seconds: f64) -> AudioBuffer {
    let n = (seconds * 16_000.0) as usize;
    let samples = (0..n)
        .map(|i| (0.5 * (2.0 * std::f64::consts::PI * f0 * i as f64 / 16_000.0).sin()) as f32)
        .collect();
    AudioBuffer::new(samples, 16_000).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn c7_pitch() -> Outcome {
    let t = Instant::now();
    let yin = YinConfig::default();
    let mut worst = 0.0f64;
    for k in 0..20 {
        let f0 = 60.0 * (500.0f64 / 60.0).powf(k as f64 / 19.0);
        let track = yin_f0(&sine(f0, 0.5), &yin).map_err(err)?;
        let voiced: Vec<f64> = track.f0_hz.iter().zip(&track.voiced).filter(|(_, &v)| v).map(|(&f, _)| f).collect();
        ensure(!voiced.is_empty(), format!("{f0:.1} Hz sine unvoiced"))?;
        let est = median(voiced);
        let rel = (est - f0).abs() / f0;
        ensure(rel <= 0.01, format!("{f0:.1} Hz estimated as {est:.2} Hz"))?;
        worst = worst.max(rel);
    }

    let speakers = synth_speakers(&SynthConfig {
        speakers_per_gender: 10,
        ..SynthConfig::default()
    });
    let mut logs: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for s in &speakers {
        let audio = synth_voice(s.f0_hz, 1.0, s.seed).map_err(err)?;
        match segment_log_f0(&yin_f0(&audio, &yin).map_err(err)?) {
            SegmentPitch::LogF0(v) => logs[s.gender.index()].push(v),
            SegmentPitch::Unvoiced => return Err(format!("voice of {} unvoiced", s.id)),
        }
    }
    let (fmin, mmax) = (
        logs[0].iter().copied().fold(f64::INFINITY, f64::min),
        logs[1].iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let (fmed, mmed) = (median(logs[0].clone()), median(logs[1].clone()));
    ensure(mmax < fmin, format!("log-F0 ranges overlap: male max {mmax:.3}, female min {fmin:.3}"))?;

    // Cohort with errors injected into the lowest 5% of female pitches.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut cohort = Vec::new();
    for (g, other, lo, hi) in [(Gender::Female, Gender::Male, 5.2, 5.6), (Gender::Male, Gender::Female, 4.5, 5.0)] {
        for i in 0..1000 {
            let v = lo + (hi - lo) * (i as f64 + 0.5) / 1000.0;
            let wrong = if g == Gender::Female && i < 50 { rng.random_bool(0.6) } else { rng.random_bool(0.02) };
            cohort.push((g, if wrong { other } else { g }, SegmentPitch::LogF0(v)));
        }
    }
    cohort.shuffle(&mut rng);
    let hist = error_pitch_histogram(&cohort, 0.05).map_err(err)?;
    let worst_slice = hist
        .slices
        .iter()
        .min_by(|a, b| a.accuracy.total_cmp(&b.accuracy))
        .ok_or("no slices")?;
    ensure(
        worst_slice.gender == Gender::Female && worst_slice.slice == Slice::Lowest,
        format!("minimum accuracy in {:?} {:?}", worst_slice.gender, worst_slice.slice),
    )?;
    within(t.elapsed(), 60.0)?;
    Ok(format!(
        "20 sines within {:.3}%; median log-F0 F {fmed:.3} / M {mmed:.3}, ranges disjoint; \
         accuracy minimum {:.3} in the female lowest slice",
        100.0 * worst,
        worst_slice.accuracy
    ))
}

fn c8_round_trips() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let data: Vec<f32> = (0..37 * 1024).map(|_| rng.random_range(-4.0f32..4.0)).collect();
    let feats = FeatureMatrix::new(data, 1024, 20, FeatureSource::External).map_err(err)?;
    let feat_path = dir.path().join("x.feat");
    save_feature_file(&feat_path, &feats).map_err(err)?;
    let written = fs::read(&feat_path).map_err(err)?;
    let loaded = load_feature_file(&feat_path).map_err(err)?;
    let again = encode_feature_file(&loaded);
    ensure(crc32fast::hash(&written) == crc32fast::hash(&again), "FEAT CRC changed")?;
    ensure(written == again && decode_feature_file(&again).map_err(err)? == feats, "FEAT not bit-exact")?;

    let model = build_tcn_seeded(59, 2, 4);
    let ck_path = dir.path().join("m.nnck");
    save_checkpoint(&model, &ck_path).map_err(err)?;
    let bytes = fs::read(&ck_path).map_err(err)?;
    let stored = checkpoint_crc(&bytes).ok_or("truncated checkpoint")?;
    ensure(stored == crc32fast::hash(&bytes[..bytes.len() - 4]), "stored CRC does not match contents")?;
    let reloaded = encode_checkpoint(&load_checkpoint(&ck_path).map_err(err)?);
    ensure(reloaded == bytes, "NNCK not bit-exact")?;

    let segs = vec![
        SegmentAnnotation {
            file: "show".into(),
            start_s: 0.0,
            end_s: 1.25,
            speaker: "a".into(),
            gender: Some(Gender::Female),
        },
        SegmentAnnotation {
            file: "show".into(),
            start_s: 1.0,
            end_s: 3.333,
            speaker: "b".into(),
            gender: Some(Gender::Male),
        },
        SegmentAnnotation {
            file: "other".into(),
            start_s: 2.5,
            end_s: 2.75,
            speaker: "c".into(),
            gender: None,
        },
    ];
    for (format, emit) in [
        (SegmentFormat::Csv, emit_csv as fn(&[SegmentAnnotation]) -> String),
        (SegmentFormat::Rttm, emit_rttm),
    ] {
        let first = parse_segments_str(&emit(&segs), format).map_err(err)?;
        let text = emit(&first);
        let second = parse_segments_str(&text, format).map_err(err)?;
        ensure(first == second && emit(&second) == text, format!("{format:?} not a fixpoint"))?;
    }

    let audio = AudioBuffer::new((0..16_000).map(|_| rng.random_range(-1.0f32..1.0)).collect(), 16_000).map_err(err)?;
    let wav = encode_wav(&audio);
    ensure(encode_wav(&decode_wav(&wav).map_err(err)?) == wav, "WAV not byte-identical")?;
    within(t.elapsed(), 1.0)?;
    Ok(format!(
        "FEAT {} B, NNCK {} B (CRC {stored:08x}), CSV/RTTM fixpoints, WAV {} B",
        written.len(),
        bytes.len(),
        wav.len()
    ))
}

enum PoolKind {
    Feasible,
    FewSpeakers,
    FewSegments,
}

/// Speakers in their own files with whole-second turns, plus overlapping
/// intrusions that must not yield slices.
fn random_pool(rng: &mut ChaCha8Rng, n_f: usize, n_m: usize, slices: (usize, usize)) -> Vec<SegmentAnnotation> {
    let mut out = Vec::new();
    for (g, n) in [(Gender::Female, n_f), (Gender::Male, n_m)] {
        for k in 0..n {
            let speaker = format!("{}{k}", g.as_str());
            let total = rng.random_range(slices.0..=slices.1);
            let mut t = 0.0;
            let mut left = total;
            while left > 0 {
                let len = rng.random_range(1..=left.min(4));
                out.push(SegmentAnnotation {
                    file: speaker.clone(),
                    start_s: t,
                    end_s: t + len as f64,
                    speaker: speaker.clone(),
                    gender: Some(g),
                });
                t += len as f64 + 0.5;
                left -= len;
            }
            let other = if g == Gender::Female { "intruder_m" } else { "intruder_f" };
            out.push(SegmentAnnotation {
                file: speaker.clone(),
                start_s: t,
                end_s: t + 2.0,
                speaker: speaker.clone(),
                gender: Some(g),
            });
            out.push(SegmentAnnotation {
                file: speaker,
                start_s: t,
                end_s: t + 2.0,
                speaker: other.into(),
                gender: Some(if g == Gender::Female { Gender::Male } else { Gender::Female }),
            });
        }
    }
    out
}

fn check_subset(segs: &[SegmentAnnotation], rules: &SubsetRules) -> Result<(), String> {
    let s = select_balanced_subset(segs, rules).map_err(err)?;
    let train: BTreeSet<&str> = s.train_speakers.iter().map(String::as_str).collect();
    let test: BTreeSet<&str> = s.test_speakers.iter().map(String::as_str).collect();
    ensure(train.is_disjoint(&test), "train and test speakers overlap")?;
    ensure(s.test.iter().all(|x| test.contains(x.speaker.as_str())), "test slice from a non-test speaker")?;
    ensure(s.train.iter().all(|x| train.contains(x.speaker.as_str())), "train slice from a non-train speaker")?;
    let count = |v: &[SegmentAnnotation], g| v.iter().filter(|x| x.gender == Some(g)).count();
    let need = rules.n_test_speakers_per_gender;
    let test_f = test.iter().filter(|x| x.starts_with('f')).count();
    ensure(test_f == need && test.len() == 2 * need, "wrong test speakers per gender")?;
    let half = rules.n_test_segments / 2;
    ensure(
        count(&s.test, Gender::Female) == rules.n_test_segments - half && count(&s.test, Gender::Male) == half,
        "wrong test counts per gender",
    )?;
    let (tf, tm) = (count(&s.train, Gender::Female), count(&s.train, Gender::Male));
    ensure(tf + tm == rules.n_train_segments && tf.abs_diff(tm) <= 1, format!("train unbalanced: {tf}/{tm}"))?;
    ensure(
        s.test.iter().chain(&s.train).all(|x| (x.duration_s() - rules.segment_s).abs() < 1e-9),
        "slice of wrong length",
    )?;
    let mut seen = BTreeSet::new();
    for x in s.test.iter().chain(&s.train) {
        ensure(
            seen.insert((x.file.clone(), (x.start_s * 1000.0).round() as i64)),
            "slice used twice",
        )?;
        ensure(!x.speaker.starts_with("intruder"), "slice taken from an overlap")?;
    }
    Ok(())
}

fn c9_subsets() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tally = BTreeMap::new();
    for trial in 0..100 {
        let kind = match trial % 3 {
            0 => PoolKind::Feasible,
            1 => PoolKind::FewSpeakers,
            _ => PoolKind::FewSegments,
        };
        let need = rng.random_range(2..6);
        let n_test = 2 * need * rng.random_range(1..4);
        let extra = rng.random_range(1..10);
        let n_train = rng.random_range(10..200);
        let rules = SubsetRules {
            n_test_speakers_per_gender: need,
            n_test_segments: n_test,
            n_train_segments: n_train,
            segment_s: 1.0,
            seed: rng.random(),
        };
        // Per-speaker caps bound what any selected speaker must supply.
        let test_cap = n_test.div_ceil(2 * need);
        let train_cap = n_train.div_ceil(2 * extra);
        let result = match kind {
            PoolKind::Feasible => {
                let n_m = need + extra + rng.random_range(0..5);
                let pool = random_pool(&mut rng, need + extra, n_m, (test_cap + train_cap, test_cap + train_cap + 6));
                check_subset(&pool, &rules).map_err(|e| format!("trial {trial}: {e}"))?;
                "feasible"
            }
            PoolKind::FewSpeakers => {
                let pool = random_pool(&mut rng, need - 1, need + extra, (1, 5));
                match select_balanced_subset(&pool, &rules) {
                    Err(CorpusError::InsufficientSpeakers { .. }) => "few speakers",
                    other => return Err(format!("trial {trial}: expected InsufficientSpeakers, got {other:?}")),
                }
            }
            PoolKind::FewSegments => {
                // One slice per speaker cannot cover one more than a slice per test speaker.
                let pool = random_pool(&mut rng, need + extra, need + extra, (1, 1));
                let rules = SubsetRules {
                    n_test_segments: 2 * need + 2,
                    ..rules
                };
                match select_balanced_subset(&pool, &rules) {
                    Err(CorpusError::InsufficientSegments { .. }) => "few segments",
                    other => return Err(format!("trial {trial}: expected InsufficientSegments, got {other:?}")),
                }
            }
        };
        *tally.entry(result).or_insert(0) += 1;
    }
    Ok(format!("100 randomized pools: {tally:?}"))
}

fn c10_determinism() -> Outcome {
    let t = Instant::now();
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    let cfg = SynthConfig {
        n_shows: 3,
        show_s: 8.0,
        ..SynthConfig::default()
    };
    build_synthetic_corpus(&cfg, a.path()).map_err(err)?;
    build_synthetic_corpus(&cfg, b.path()).map_err(err)?;
    let mut files = 0;
    for entry in fs::read_dir(a.path()).map_err(err)? {
        let name = entry.map_err(err)?.file_name();
        let x = fs::read(a.path().join(&name)).map_err(err)?;
        let y = fs::read(b.path().join(&name)).map_err(err)?;
        ensure(x == y, format!("synth output {name:?} differs"))?;
        files += 1;
    }

    let items = load_overlap_corpus(&a.path().join("manifest.csv"))?;
    let windows = window_set(&items, &WindowingConfig::default()).map_err(err)?;
    let set = FeatureSet::projected(windows, StubProjector::new(768, 1).map_err(err)?);
    let cfg_t = TrainConfig {
        max_epochs: 2,
        seed: 7,
        ..TrainConfig::default()
    };
    let run_osd = || -> Result<(Vec<u8>, String, String), String> {
        let (m, _) = train_osd(Arch::Tcn, &set, None, &cfg_t).map_err(err)?;
        let f = StubProjector::new(768, 1).map_err(err)?.project(&items[0].0);
        let (labels, scores) = detect_overlap(&m, &f, &DetectConfig::default()).map_err(err)?;
        Ok((encode_checkpoint(&m), scores_csv(&scores), segments_csv(&labels)))
    };
    ensure(run_osd()? == run_osd()?, "OSD training or detection not reproducible")?;

    let gset = FeatureSet::new(
        (0..6)
            .map(|k| {
                let g = if k % 2 == 0 { Gender::Female } else { Gender::Male };
                (items[k % items.len()].0.slice_frames(0, 100), g)
            })
            .collect(),
    );
    let run_gd = || -> Result<(Vec<u8>, Vec<u8>, Vec<u8>, String), String> {
        let g1 = train_gd1(&gset, &gd_train_config()).map_err(err)?;
        let (f, m) = train_gd2(&gset, &gd_train_config()).map_err(err)?;
        let track = sliding_gender_scores(&f, &m, &items[0].0).map_err(err)?;
        Ok((encode_checkpoint(&g1), encode_checkpoint(&f), encode_checkpoint(&m), gender_track_csv(&track)))
    };
    ensure(run_gd()? == run_gd()?, "GD training or show analysis not reproducible")?;
    Ok(format!(
        "{files} synth files, OSD checkpoint/scores/segments and GD checkpoints/track identical across runs, {:.1} s",
        t.elapsed().as_secs_f64()
    ))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "metric oracle", c1_metric_oracle),
        (2, "parameter counts", c2_param_counts),
        (3, "accuracy identity", c3_accuracy_identity),
        (4, "gradient suite", c4_gradients),
        (5, "synthetic OSD end-to-end", c5_synthetic_osd),
        (6, "synthetic GD end-to-end", c6_synthetic_gd),
        (7, "pitch suite", c7_pitch),
        (8, "format round trips", c8_round_trips),
        (9, "subset constraints", c9_subsets),
        (10, "determinism", c10_determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {n:>2} {name} [{secs:.1} s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {n:>2} {name} [{secs:.1} s]: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

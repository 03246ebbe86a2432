//! End-to-end runs of the `osdgd` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use osdgd::corpus::{parse_manifest, parse_segments, rasterize, resolve, RasterMode, SegmentFormat};
use osdgd::dataset::FeatureSet;
use osdgd::features::stub_features;
use osdgd::neural::load_checkpoint;
use osdgd::osd::{evaluate_osd, DetectConfig};

fn osdgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osdgd"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = osdgd(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    osdgd(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let name = e.file_name().to_string_lossy().into_owned();
            let mut bytes = fs::read(e.path()).unwrap();
            if name == "config.resolved" {
                let text = String::from_utf8(bytes).unwrap();
                bytes = text.lines().filter(|l| !l.starts_with("out=")).collect::<Vec<_>>().join("\n").into_bytes();
            }
            (name, bytes)
        })
        .collect();
    v.sort();
    v
}

#[test]
fn version_names_format_versions() {
    let v = ok(&["--version"]);
    assert!(v.contains("FEAT v1") && v.contains("NNCK v1"), "{v}");
    let help = ok(&["train-osd", "--help"]);
    for flag in ["--arch", "--features", "--max-epochs", "--seed", "--config", "--window-frames"] {
        assert!(help.contains(flag), "help lacks {flag}");
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["no-such-command"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&["stats", "--set", "bogus=1", "--out", s(&out)]), 1);
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "hours=0.01\nunknown_key=3\n").unwrap();
    assert_eq!(code(&["synth", "--config", s(&cfg), "--out", s(&out)]), 1);
    assert_eq!(code(&["synth", "--hours", "lots", "--out", s(&out)]), 1);
    assert_eq!(code(&["eval-osd", "--out", s(&out)]), 1);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.nnck");
    fs::write(&bad, b"not a checkpoint").unwrap();
    let wav = dir.path().join("missing.wav");
    assert_eq!(code(&["detect", "--model", s(&bad), s(&wav), "--out", s(dir.path())]), 2);
    let r = dir.path().join("r.csv");
    fs::write(&r, "file,start_s,end_s,speaker,gender\na,2.0,1.0,s,f\n").unwrap();
    assert_eq!(code(&["eval-osd", "--ref", s(&r), "--hyp", s(&r), "--out", s(dir.path())]), 2);
}

#[test]
fn synth_then_stats_reports_the_overlap_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    ok(&["synth", "--hours", "0.5", "--overlap", "0.1", "--seed", "1", "--out", s(&out)]);
    let table = ok(&["stats", s(&out.join("manifest.csv"))]);
    let line = table.lines().find(|l| l.starts_with("overlap / timeline")).unwrap();
    let pct: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!((pct - 10.0).abs() <= 2.0, "overlap {pct}%");
    assert!(table.contains("total duration (h)       0.500"), "{table}");
}

#[test]
fn identical_reference_and_hypothesis_score_100() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("r.csv");
    fs::write(&r, "file,start_s,end_s,speaker,gender\na,0.0,2.0,s1,f\na,1.0,3.0,s2,m\n").unwrap();
    let table = ok(&["eval-osd", "--ref", s(&r), "--hyp", s(&r), "--out", s(dir.path())]);
    let f1 = table.lines().find(|l| l.starts_with("f1")).unwrap();
    assert!(f1.contains("100.0"), "{table}");
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "synth_kind=mixtures\ncount=3\nseed=4\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    ok(&["synth", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["synth", "--synth-kind", "mixtures", "--count", "3", "--seed", "4", "--out", s(&b)]);
    ok(&["synth", "--config", s(&cfg), "--seed", "5", "--out", s(&c)]);
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
    assert_ne!(dir_bytes(&a), dir_bytes(&c));
}

#[test]
fn commands_are_reproducible_and_detect_matches_in_process_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let corpus = d("corpus");
    ok(&["synth", "--synth-kind", "mixtures", "--count", "12", "--seed", "3", "--out", s(&corpus)]);
    let manifest = corpus.join("manifest.csv");

    for run in ["f1", "f2"] {
        ok(&["features", "--manifest", s(&manifest), "--features", "stub1024", "--jobs", "2", "--out", s(&d(run))]);
    }
    assert_eq!(dir_bytes(&d("f1")), dir_bytes(&d("f2")));

    for run in ["m1", "m2"] {
        ok(&[
            "train-osd", "--manifest", s(&manifest), "--arch", "tcn", "--features", "stub1024", "--max-epochs", "2",
            "--seed", "7", "--out", s(&d(run)),
        ]);
    }
    assert_eq!(fs::read(d("m1/osd.nnck")).unwrap(), fs::read(d("m2/osd.nnck")).unwrap());

    let model = d("m1/osd.nnck");
    for run in ["p1", "p2"] {
        ok(&[
            "detect", "--model", s(&model), "--manifest", s(&manifest), "--features", "stub1024", "--jobs", "2", "--out",
            s(&d(run)),
        ]);
    }
    assert_eq!(dir_bytes(&d("p1")), dir_bytes(&d("p2")));

    // detect + eval-osd against the in-process evaluation.
    let rows = parse_manifest(&fs::read_to_string(&manifest).unwrap()).unwrap();
    let mut items = Vec::new();
    let (mut refs, mut hyps) = (Vec::new(), Vec::new());
    for r in &rows {
        let audio = osdgd::audio::read_wav(resolve(&manifest, &r.wav_path)).unwrap();
        let segs = parse_segments(resolve(&manifest, &r.csv_path), SegmentFormat::Csv).unwrap();
        let labels = rasterize(&segs, r.duration_s, RasterMode::Overlap).unwrap();
        items.push((stub_features(&audio, 1024, 0).unwrap(), labels));
        refs.push(s(&resolve(&manifest, &r.csv_path)).to_string());
        hyps.push(s(&d("p1").join(format!("{}.segments.csv", r.show))).to_string());
    }
    let m = load_checkpoint(&model).unwrap();
    let expected = evaluate_osd(&m, &FeatureSet::new(items), &DetectConfig::default()).unwrap();
    let (refs, hyps) = (refs.join(","), hyps.join(","));
    ok(&["eval-osd", "--ref", &refs, "--hyp", &hyps, "--out", s(&d("e"))]);
    let got = fs::read_to_string(d("e/eval_osd.csv")).unwrap();
    assert_eq!(got, expected.to_csv());
}

#[test]
fn gender_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let corpus = d("pool");
    ok(&[
        "synth", "--synth-kind", "pool", "--count", "4", "--speakers-per-gender", "3", "--seed", "2", "--out",
        s(&corpus),
    ]);
    let manifest = corpus.join("manifest.csv");
    let small = [
        "--test-speakers", "1", "--test-segments", "10", "--train-segments", "40", "--gd-epochs", "1",
    ];
    for run in ["g1", "g2"] {
        let mut args = vec!["train-gd", "--manifest", s(&manifest), "--seed", "7", "--out"];
        let out = d(run);
        let out = out.to_str().unwrap().to_string();
        args.push(&out);
        args.extend(small);
        ok(&args);
    }
    assert_eq!(dir_bytes(&d("g1")), dir_bytes(&d("g2")));

    let test = d("g1/test.csv");
    for run in ["c1", "c2"] {
        let table = ok(&[
            "classify-gender", "--female-model", s(&d("g1/gd2_female.nnck")), "--male-model",
            s(&d("g1/gd2_male.nnck")), "--segments", s(&test), "--manifest", s(&manifest), "--out", s(&d(run)),
        ]);
        assert!(table.contains("acc"), "{table}");
    }
    assert_eq!(dir_bytes(&d("c1")), dir_bytes(&d("c2")));
    ok(&["classify-gender", "--model", s(&d("g1/gd1.nnck")), "--segments", s(&test), "--manifest", s(&manifest), "--out", s(&d("c3"))]);

    let decisions = d("c1/decisions.csv");
    let from_file = ok(&["eval-gd", "--decisions", s(&decisions), "--out", s(&d("e1"))]);
    let from_ref = ok(&["eval-gd", "--decisions", s(&decisions), "--ref", s(&test), "--out", s(&d("e2"))]);
    assert_eq!(from_file, from_ref);

    let quantiles = ok(&["pitch-analysis", "--decisions", s(&decisions), "--manifest", s(&manifest), "--out", s(&d("pa"))]);
    assert!(quantiles.contains("lowest"), "{quantiles}");
    let hist = fs::read_to_string(d("pa/pitch_histogram.csv")).unwrap();
    assert!(hist.starts_with("bin_lo,"));

    let wav = corpus.join("show0.wav");
    for run in ["a1", "a2"] {
        ok(&[
            "analyze-show", "--female-model", s(&d("g1/gd2_female.nnck")), "--male-model", s(&d("g1/gd2_male.nnck")),
            s(&wav), "--out", s(&d(run)),
        ]);
    }
    assert_eq!(dir_bytes(&d("a1")), dir_bytes(&d("a2")));
    let track = fs::read_to_string(d("a1/show0.gender_track.csv")).unwrap();
    assert!(track.starts_with("time_s,score_female,score_male\n0.500000,"), "{}", &track[..60]);

    for run in ["s1", "s2"] {
        ok(&[
            "subset", "--manifest", s(&manifest), "--test-speakers", "1", "--test-segments", "10", "--train-segments",
            "20", "--seed", "3", "--out", s(&d(run)),
        ]);
    }
    assert_eq!(dir_bytes(&d("s1")), dir_bytes(&d("s2")));
}

#[test]
fn diverging_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    ok(&["synth", "--synth-kind", "mixtures", "--count", "4", "--seed", "1", "--out", s(&corpus)]);
    let c = code(&[
        "train-osd", "--manifest", s(&corpus.join("manifest.csv")), "--arch", "rosd", "--learning-rate", "1e38",
        "--max-epochs", "3", "--out", s(&dir.path().join("m")),
    ]);
    assert_eq!(c, 3);
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emoser_core::audio::{write_wav, AudioClip};
use emoser_core::nn::SplitMix64;
use emoser_core::ravdess::{Emotion, Intensity, Modality, RavdessMeta, Statement, VocalChannel};

fn emoser(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emoser"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Two actors, every emotion, both statements; 32 short clips.
fn synthetic_corpus(root: &Path) {
    let mut rng = SplitMix64::new(1);
    for actor in 1..=2u8 {
        for &emotion in Emotion::ALL {
            for statement in [Statement::Kids, Statement::Dogs] {
                let meta = RavdessMeta {
                    modality: Modality::AudioOnly,
                    channel: VocalChannel::Speech,
                    emotion,
                    intensity: Intensity::Normal,
                    statement,
                    repetition: 1,
                    actor,
                };
                let freq = 120.0 * emotion.code() as f32;
                let samples = (0..12_000)
                    .map(|i| {
                        0.3 * (2.0 * std::f32::consts::PI * freq * i as f32 / 16_000.0).sin()
                            + 0.02 * rng.uniform(-1.0, 1.0) as f32
                    })
                    .collect();
                let dir = root.join(format!("Actor_{actor:02}"));
                fs::create_dir_all(&dir).unwrap();
                fs::write(
                    dir.join(meta.file_name()),
                    write_wav(&AudioClip::new(samples, 16_000).unwrap()),
                )
                .unwrap();
            }
        }
    }
}

struct Workspace {
    _tmp: tempfile::TempDir,
    dir: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().to_path_buf();
        synthetic_corpus(&dir.join("corpus"));
        fs::write(
            dir.join("cfg.json"),
            r#"{"pipeline": {"height": 16, "width": 16}, "train": {"epochs": 2, "batch_size": 8, "seed": 3}}"#,
        )
        .unwrap();
        Self { _tmp: tmp, dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn prepare(&self) -> Output {
        emoser(&[
            "prepare",
            "--corpus",
            p(&self.path("corpus")),
            "--out",
            p(&self.path("cache.bin")),
            "--config",
            p(&self.path("cfg.json")),
        ])
    }
}

#[test]
fn help_lists_flags_for_every_subcommand() {
    let cases: &[(&str, &[&str])] = &[
        ("prepare", &["--corpus", "--out", "--archive"]),
        ("split", &["--cache", "--ratio", "--seed", "--strategy"]),
        (
            "train",
            &["--cache", "--split", "--config", "--checkpoint-out", "--history-out"],
        ),
        ("eval", &["--checkpoint", "--cache", "--split", "--report-out"]),
        ("compare", &["--cache", "--split", "--config", "--report-out"]),
        ("predict", &["--checkpoint", "--wav"]),
        ("gradcheck", &["--seed"]),
        ("serve", &["--checkpoint", "--addr", "--static-dir"]),
    ];
    for (cmd, flags) in cases {
        let out = emoser(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        let text = stdout(&out);
        for flag in *flags {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
    assert_eq!(emoser(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(emoser(&[]).status.code(), Some(2));
    assert_eq!(emoser(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(emoser(&["split", "--ratio", "abc"]).status.code(), Some(2));
    assert_eq!(emoser(&["split", "--strategy", "random"]).status.code(), Some(2));
    assert_eq!(emoser(&["train", "--cache", "x.bin"]).status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"train": {"epochs": 3, "learning_rate": 0.1}}"#).unwrap();
    let out = emoser(&[
        "train",
        "--cache",
        "x.bin",
        "--checkpoint-out",
        "m.bin",
        "--config",
        p(&cfg),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("learning_rate"));

    let out = Command::new(env!("CARGO_BIN_EXE_emoser"))
        .args(["gradcheck", "--seeds", "1"])
        .env("EMOSER_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_1_and_name_the_path() {
    let out = emoser(&[
        "train",
        "--cache",
        "/definitely/absent/cache.bin",
        "--checkpoint-out",
        "/tmp/never.bin",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/definitely/absent/cache.bin"));

    let out = emoser(&["prepare", "--corpus", "/definitely/absent", "--out", "/tmp/never.bin"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/definitely/absent"));

    let tmp = tempfile::tempdir().unwrap();
    let out = emoser(&[
        "prepare",
        "--corpus",
        p(tmp.path()),
        "--out",
        p(&tmp.path().join("c.bin")),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = emoser(&["predict", "--checkpoint", "/absent/model.bin", "--wav", "/absent/a.wav"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gradcheck_passes() {
    let out = emoser(&["gradcheck", "--seed", "7", "--seeds", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    for name in [
        "dense",
        "conv2d",
        "relu",
        "maxpool2d",
        "dropout",
        "flatten",
        "softmax_xent",
        "cnn_end_to_end",
    ] {
        let line = text
            .lines()
            .find(|l| l.starts_with(name))
            .unwrap_or_else(|| panic!("{name} missing"));
        assert!(line.ends_with("PASS"), "{line}");
    }
}

#[test]
fn full_pipeline_is_replayable() {
    let ws = Workspace::new();
    let out = ws.prepare();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("32"), "{}", stdout(&out));
    assert!(stdout(&out).contains("wrote 32 examples (16x16)"));
    let cache_bytes = fs::read(ws.path("cache.bin")).unwrap();
    assert_eq!(ws.prepare().status.code(), Some(0));
    assert_eq!(fs::read(ws.path("cache.bin")).unwrap(), cache_bytes);

    let split = ws.path("split.json");
    let out = emoser(&[
        "split",
        "--cache",
        p(&ws.path("cache.bin")),
        "--ratio",
        "0.75",
        "--seed",
        "5",
        "--strategy",
        "stratified",
        "--out",
        p(&split),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("train 24 / test 8"));
    let speaker = ws.path("speaker.json");
    let out = emoser(&[
        "split",
        "--cache",
        p(&ws.path("cache.bin")),
        "--strategy",
        "speaker",
        "--ratio",
        "0.5",
        "--out",
        p(&speaker),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("train 16 / test 16"), "{}", stdout(&out));

    let train = |tag: &str| {
        let out = emoser(&[
            "train",
            "--cache",
            p(&ws.path("cache.bin")),
            "--split",
            p(&split),
            "--config",
            p(&ws.path("cfg.json")),
            "--checkpoint-out",
            p(&ws.path(&format!("model{tag}.bin"))),
            "--history-out",
            p(&ws.path(&format!("history{tag}.csv"))),
            "--curves-out",
            p(&ws.path(&format!("curves{tag}.svg"))),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert!(stderr(&out).contains("epoch   2/2"));
    };
    train("a");
    train("b");
    for name in ["model", "history", "curves"] {
        let ext = match name {
            "model" => "bin",
            "history" => "csv",
            _ => "svg",
        };
        let a = fs::read(ws.path(&format!("{name}a.{ext}"))).unwrap();
        let b = fs::read(ws.path(&format!("{name}b.{ext}"))).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let csv = fs::read_to_string(ws.path("historya.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("epoch,train_loss,train_acc,val_loss,val_acc\n"));

    let report = ws.path("reports/eval.json");
    let out = emoser(&[
        "eval",
        "--checkpoint",
        p(&ws.path("modela.bin")),
        "--cache",
        p(&ws.path("cache.bin")),
        "--split",
        p(&split),
        "--report-out",
        p(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["n_examples"], 8);
    assert_eq!(json["labels"].as_array().unwrap().len(), 8);

    let wav = fs::read_dir(ws.path("corpus/Actor_01"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let out = emoser(&["predict", "--checkpoint", p(&ws.path("modela.bin")), "--wav", p(&wav)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let scores: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(scores["scores"].as_array().unwrap().len(), 8);
    assert_eq!(scores["scores"][0]["label"], "neutral");

    let compare = ws.path("compare.json");
    let out = emoser(&[
        "compare",
        "--cache",
        p(&ws.path("cache.bin")),
        "--split",
        p(&split),
        "--config",
        p(&ws.path("cfg.json")),
        "--report-out",
        p(&compare),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Model") && text.contains("F1-Score"));
    assert!(text.contains("not implemented (out of scope)"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&compare).unwrap()).unwrap();
    let names: Vec<&str> = json["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["CNN", "LSTM", "DNN"]);

    let mismatched = ws.path("other.json");
    fs::write(
        &mismatched,
        r#"{"seed":0,"ratio":0.5,"strategy":"stratified_by_emotion","train":[0,1],"test":[2]}"#,
    )
    .unwrap();
    let out = emoser(&[
        "train",
        "--cache",
        p(&ws.path("cache.bin")),
        "--split",
        p(&mismatched),
        "--checkpoint-out",
        p(&ws.path("never.bin")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("does not cover"));
}

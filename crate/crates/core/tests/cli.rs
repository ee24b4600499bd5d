// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::Parser;
use prvnet::channel::ChannelDataset;
use prvnet::cli::{resolve_eval, resolve_sweep, resolve_train, Cli, Command as Sub, RunManifest};
use prvnet::evaluator::{NmseReport, Snr};

fn prvnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prvnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 150-sample dataset written by `gen-data` into `dir`.
fn gen(dir: &Path) -> PathBuf {
    let data = dir.join("data/indoor.bin");
    let o = prvnet(&["gen-data", "--count", "150", "--seed", "3", "--out", s(&data)]);
    assert!(o.status.success(), "{}", text(&o));
    data
}

fn parse(args: &[&str]) -> Sub {
    Cli::try_parse_from(std::iter::once("prvnet").chain(args.iter().copied()))
        .unwrap()
        .command
}

#[test]
fn exit_codes() {
    assert_eq!(prvnet(&[]).status.code(), Some(2));
    assert_eq!(prvnet(&["train", "--bogus"]).status.code(), Some(2));
    let o = prvnet(&["eval", "--checkpoint", "/nonexistent/m.ckpt", "--data", "/nonexistent/d.bin"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("error:"), "{}", text(&o));
    assert!(prvnet(&["--help"]).status.success());
}

#[test]
fn gen_data_reports_splits_and_writes_a_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data/indoor.bin");
    let o = prvnet(&["gen-data", "--count", "150", "--seed", "3", "--out", s(&data)]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("splits: train 100, val 30, test 20"), "{}", text(&o));
    assert!(ChannelDataset::sidecar_path(&data).exists());
    let again = dir.path().join("again.bin");
    prvnet(&["gen-data", "--count", "150", "--seed", "3", "--out", s(&again)]);
    assert_eq!(fs::read(&data).unwrap(), fs::read(&again).unwrap());
    let bad = prvnet(&["gen-data", "--count", "3", "--out", s(&dir.path().join("x.bin"))]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn flags_override_config_files_which_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "seed = 4\n[train]\nepochs = 7\nlearning_rate = 0.01\n").unwrap();
    let c = s(&cfg);

    let Sub::Train(a) = parse(&["train", "--data", "d.bin"]) else { unreachable!() };
    let d = resolve_train(&a).unwrap();
    assert_eq!((d.train.epochs, d.train.learning_rate, d.seed), (200, 1e-3, 0));

    let Sub::Train(a) = parse(&["train", "--data", "d.bin", "--config", c]) else { unreachable!() };
    let f = resolve_train(&a).unwrap();
    assert_eq!((f.train.epochs, f.train.learning_rate, f.seed, f.train.seed), (7, 0.01, 4, 4));

    let Sub::Train(a) = parse(&["train", "--data", "d.bin", "--config", c, "--epochs", "9", "--gamma", "1/16"])
    else { unreachable!() };
    let g = resolve_train(&a).unwrap();
    assert_eq!((g.train.epochs, g.train.learning_rate, g.train.gamma), (9, 0.01, 1.0 / 16.0));

    let Sub::Train(a) = parse(&["train", "--data", "d.bin", "--paper-hyperparams"]) else { unreachable!() };
    let p = resolve_train(&a).unwrap();
    assert_eq!((p.train.epochs, p.train.learning_rate, p.train.batch_size), (1000, 0.1, 128));
    let Sub::Train(a) = parse(&["train", "--data", "d.bin", "--paper-hyperparams", "--epochs", "5"])
    else { unreachable!() };
    assert_eq!(resolve_train(&a).unwrap().train.epochs, 5);

    let Sub::Sweep(a) = parse(&["sweep", "--data", "d.bin", "--config", c, "--gammas", "1/4,1/32"])
    else { unreachable!() };
    let w = resolve_sweep(&a).unwrap();
    assert_eq!((w.sweep.gammas.clone(), w.train.epochs), (vec![0.25, 1.0 / 32.0], 7));

    let Sub::Eval(a) = parse(&["eval", "--checkpoint", "m", "--data", "d", "--snr-sweep"]) else { unreachable!() };
    let e = resolve_eval(&a).unwrap();
    assert_eq!(e.eval.snrs, vec![35.0, 32.0, 29.0, 26.0, 23.0]);
    assert!(!e.eval.include_clean);

    fs::write(&cfg, "[train]\nepoch = 7\n").unwrap();
    let Sub::Train(a) = parse(&["train", "--data", "d.bin", "--config", c]) else { unreachable!() };
    assert!(resolve_train(&a).is_err(), "misspelled keys are rejected");
}

#[test]
fn train_eval_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path());
    let run = dir.path().join("run");
    let o = prvnet(&["train", "--data", s(&data), "--epochs", "2", "--batch-size", "32", "--out-dir", s(&run)]);
    assert!(o.status.success(), "{}", text(&o));
    for f in ["model.ckpt", "best.ckpt", "phase1_trace.csv", "phase2_trace.csv", "report.csv", "config.toml", "manifest.json"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let m = RunManifest::load(&run).unwrap();
    assert!(m.complete && m.beta_star.is_some());
    assert_eq!(m.artifact_hashes.len(), 5);

    let ev = dir.path().join("eval");
    let ckpt = run.join("model.ckpt");
    let o = prvnet(&["eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--snr-sweep", "--out-dir", s(&ev)]);
    assert!(o.status.success(), "{}", text(&o));
    let report = NmseReport::from_csv(&fs::read_to_string(ev.join("report.csv")).unwrap()).unwrap();
    let snrs: Vec<Snr> = report.rows.iter().map(|r| r.snr).collect();
    assert_eq!(snrs, [35.0, 32.0, 29.0, 26.0, 23.0].map(Snr::Db).to_vec());

    for (src, name) in [(&run, "replay-train"), (&ev, "replay-eval")] {
        let again = dir.path().join(name);
        let o = prvnet(&["show-manifest", s(src), "--replay", s(&again)]);
        assert!(o.status.success(), "{}", text(&o));
        assert!(text(&o).contains("replay identical"), "{}", text(&o));
    }
}

#[test]
fn parallel_sweep_matches_serial() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path());
    let mut reports = Vec::new();
    for p in ["1", "2"] {
        let out = dir.path().join(format!("sweep{p}"));
        let o = prvnet(&[
            "sweep", "--data", s(&data), "--gammas", "1/4,1/16", "--epochs", "1", "--batch-size", "50",
            "--parallel", p, "--out-dir", s(&out),
        ]);
        assert!(o.status.success(), "{}", text(&o));
        assert!(out.join("M512").join("model.ckpt").exists());
        reports.push(fs::read_to_string(out.join("report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0].lines().count(), 3);
}

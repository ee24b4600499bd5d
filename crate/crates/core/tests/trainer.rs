// SPDX-License-Identifier: Apache-2.0

use prvnet::channel::{build_dataset, ChannelDataset, DatasetParams, Scenario, Split};
use prvnet::evaluator::Snr;
use prvnet::model::{Architecture, Mode, ModelParams};
use prvnet::trainer::{anneal_and_retrain, beta_at, train, AnnealSchedule, TrainConfig};
use prvnet::Error;

fn small_dataset(count: usize, seed: u64) -> ChannelDataset {
    let mut p = DatasetParams::for_scenario(Scenario::Indoor);
    p.multipath.n_c = 32;
    p.multipath.n_t = 8;
    p.n_a = 8;
    build_dataset(&p, count, seed).unwrap()
}

fn small_arch(ds: &ChannelDataset) -> Architecture {
    Architecture {
        encoder_channels: vec![4, 2],
        decoder_channels: vec![4],
        ..Architecture::for_dataset(ds, 0.25).unwrap()
    }
}

fn quick(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_same_run() {
    let ds = small_dataset(60, 1);
    let arch = small_arch(&ds);
    let run = |seed| {
        let model = ModelParams::init(arch.clone(), Mode::Variational, seed).unwrap();
        train(model, &ds, &quick(3, seed), &AnnealSchedule::linear(1.0, 6)).unwrap()
    };
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a.params, b.params);
    assert_eq!(a.trace.to_csv(), b.trace.to_csv());
    assert_ne!(a.params, c.params);
}

#[test]
fn trace_follows_the_schedule() {
    let ds = small_dataset(60, 1);
    let cfg = quick(4, 0);
    let n_train = ds.range(Split::Train).len();
    let schedule = AnnealSchedule::over_fraction(1.0, &cfg, n_train);
    assert_eq!(schedule.anneal_updates, cfg.total_updates(n_train) / 2);
    let model = ModelParams::init(small_arch(&ds), Mode::Variational, 0).unwrap();
    let run = train(model, &ds, &cfg, &schedule).unwrap();
    assert_eq!(run.trace.len(), 4);
    for r in &run.trace.records {
        // β is recorded at the last update of the epoch
        assert_eq!(r.beta, beta_at(&schedule, r.update - 1));
        assert!(r.kl >= 0.0 && r.recon > 0.0 && r.val_nmse_db.is_finite());
    }
    assert_eq!(run.trace.last().unwrap().beta, 1.0);
}

#[test]
fn noisy_training_adds_noise_at_the_requested_snr() {
    let ds = small_dataset(60, 2);
    let cfg = TrainConfig {
        train_snr: Snr::Db(10.0),
        ..quick(3, 1)
    };
    let model = ModelParams::init(small_arch(&ds), Mode::PointEstimate, 1).unwrap();
    let run = train(model, &ds, &cfg, &AnnealSchedule::fixed(0.0)).unwrap();
    assert_eq!(run.noise_log.len() as u64, cfg.total_updates(ds.range(Split::Train).len()));
    let signal: f64 = run.noise_log.iter().map(|p| p.signal).sum();
    let noise: f64 = run.noise_log.iter().map(|p| p.noise).sum();
    let want = 10f64.powf(-1.0);
    assert!((noise / signal / want - 1.0).abs() < 0.1, "{}", noise / signal);
}

#[test]
fn divergence_is_reported_with_its_position() {
    let ds = small_dataset(60, 3);
    let cfg = TrainConfig {
        learning_rate: 1e30,
        weight_decay: 0.0,
        ..quick(5, 0)
    };
    let model = ModelParams::init(small_arch(&ds), Mode::Variational, 0).unwrap();
    match train(model, &ds, &cfg, &AnnealSchedule::fixed(1.0)) {
        Err(Error::NonFinite { epoch, detail, .. }) => {
            assert!(epoch >= 1, "{detail}");
        }
        other => panic!("expected a non-finite error, got {:?}", other.map(|r| r.trace)),
    }
}

#[test]
fn shape_mismatch_and_bad_config_are_rejected() {
    let ds = small_dataset(60, 1);
    let other = Architecture::new(4, 4, 0.25).unwrap();
    let model = ModelParams::init(other, Mode::Variational, 0).unwrap();
    assert!(train(model, &ds, &quick(1, 0), &AnnealSchedule::fixed(0.0)).is_err());
    let model = ModelParams::init(small_arch(&ds), Mode::Variational, 0).unwrap();
    let bad = TrainConfig { batch_size: 0, ..quick(1, 0) };
    assert!(matches!(
        train(model, &ds, &bad, &AnnealSchedule::fixed(0.0)),
        Err(Error::Config(_))
    ));
}

#[test]
fn point_estimate_overfits_ten_samples() {
    let ds = small_dataset(15, 4);
    assert_eq!(ds.range(Split::Train).len(), 10);
    let model = ModelParams::init(small_arch(&ds), Mode::PointEstimate, 0).unwrap();
    let cfg = TrainConfig {
        batch_size: 10,
        weight_decay: 0.0,
        ..quick(500, 0)
    };
    let run = train(model, &ds, &cfg, &AnnealSchedule::fixed(0.0)).unwrap();
    let first = run.trace.records[0].recon;
    let last = run.trace.last().unwrap().recon;
    assert!(last < 0.01 * first, "{first} -> {last}");
}

#[test]
fn patience_stops_early_and_best_is_kept() {
    let ds = small_dataset(60, 5);
    let cfg = TrainConfig {
        patience: Some(1),
        learning_rate: 0.05,
        ..quick(40, 2)
    };
    let model = ModelParams::init(small_arch(&ds), Mode::PointEstimate, 2).unwrap();
    let run = train(model, &ds, &cfg, &AnnealSchedule::fixed(0.0)).unwrap();
    assert!(run.trace.len() < 40);
    let best = run.trace.records.iter().map(|r| r.val_nmse_db).fold(f64::INFINITY, f64::min);
    assert_eq!(run.trace.records[run.best_epoch - 1].val_nmse_db, best);
}

#[test]
fn retrain_uses_the_selected_beta() {
    let ds = small_dataset(60, 6);
    let arch = small_arch(&ds);
    let out = anneal_and_retrain(
        || ModelParams::init(arch.clone(), Mode::Variational, 3),
        &ds,
        &quick(6, 3),
    )
    .unwrap();
    let best = out
        .phase1
        .trace
        .records
        .iter()
        .min_by(|a, b| a.val_nmse_db.total_cmp(&b.val_nmse_db))
        .unwrap();
    assert_eq!(out.beta_star, best.beta);
    assert_eq!(out.phase2_schedule.beta_end, out.beta_star.max(0.0));
    assert_eq!(out.phase2_schedule.beta_star, Some(out.beta_star));
    let last = out.phase2.trace.last().unwrap();
    assert!((last.beta - out.beta_star).abs() < 1e-12);
    assert_eq!(out.phase2.trace.len(), 6);
}

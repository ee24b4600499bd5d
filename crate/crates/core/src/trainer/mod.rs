// SPDX-License-Identifier: Apache-2.0

//! Minibatch training with a linearly annealed KL weight, β* selection, and
//! the anneal-then-retrain procedure.

mod trace;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelDataset, Split};
use crate::error::{Error, Result};
use crate::evaluator::{add_awgn_in_place, evaluate, EvalOptions, EvalSplit, Snr};
use crate::model::{apply_input_dropout, dropout_mask, kl_var, reparameterize_var, sse_var, Mode, ModelParams};
use crate::numerics::{adam_step, AdamConfig, AdamState, Graph, Tensor};
use crate::rng::{self, stream, Purpose};

pub use trace::{EpochRecord, TrainTrace, TRACE_HEADER};

/// Optimization budget and hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub weight_decay: f32,
    /// Set from the run's single master seed rather than stored per section.
    #[serde(skip)]
    pub seed: u64,
    /// Feedback-channel SNR applied to codewords during training.
    pub train_snr: Snr,
    pub gamma: f64,
    /// Input dropout rate for the point-estimate baseline.
    pub dropout: f32,
    /// Share of all updates spent ramping β.
    pub anneal_fraction: f64,
    /// Stop phase 1 once validation NMSE has not improved for this many epochs.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            epochs: 200,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            seed: 0,
            train_snr: Snr::Clean,
            gamma: 0.25,
            dropout: 0.0,
            anneal_fraction: 0.5,
            patience: None,
        }
    }
}

impl TrainConfig {
    /// Learning rate 0.1 for 1000 epochs at batch size 128.
    pub fn paper() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 1000,
            batch_size: 128,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if !(0.0..=1.0).contains(&self.anneal_fraction) {
            return Err(Error::Config(format!(
                "anneal fraction {} not in [0, 1]",
                self.anneal_fraction
            )));
        }
        Ok(())
    }

    /// Gradient updates in a full run over `n_train` samples.
    pub fn total_updates(&self, n_train: usize) -> u64 {
        (self.epochs * n_train.div_ceil(self.batch_size)) as u64
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

/// Linear KL-weight ramp from 0 to `beta_end` over `anneal_updates` updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub beta_start: f64,
    pub beta_end: f64,
    /// `T`; zero means β is `beta_end` from the first update.
    pub anneal_updates: u64,
    /// Keep training at `beta_end` after the ramp; otherwise stop at `T`.
    pub hold_after_anneal: bool,
    pub beta_star: Option<f64>,
    pub beta_star_nmse_db: Option<f64>,
}

impl AnnealSchedule {
    pub fn linear(beta_end: f64, anneal_updates: u64) -> Self {
        AnnealSchedule {
            beta_start: 0.0,
            beta_end,
            anneal_updates,
            hold_after_anneal: true,
            beta_star: None,
            beta_star_nmse_db: None,
        }
    }

    pub fn fixed(beta: f64) -> Self {
        AnnealSchedule::linear(beta, 0)
    }

    /// Ramp over `cfg.anneal_fraction` of all updates.
    pub fn over_fraction(beta_end: f64, cfg: &TrainConfig, n_train: usize) -> Self {
        let t = (cfg.total_updates(n_train) as f64 * cfg.anneal_fraction).round() as u64;
        AnnealSchedule::linear(beta_end, t)
    }

    pub fn increment(&self) -> f64 {
        if self.anneal_updates == 0 {
            0.0
        } else {
            self.beta_end / self.anneal_updates as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_end >= 0.0) || !self.beta_end.is_finite() || self.beta_start != 0.0 {
            return Err(Error::Config(format!(
                "schedule must ramp from 0 to a finite non-negative β, got {} → {}",
                self.beta_start, self.beta_end
            )));
        }
        Ok(())
    }
}

/// `min(β_end, β_end·t/T)`, or `β_end` when `T = 0`.
pub fn beta_at(schedule: &AnnealSchedule, update_index: u64) -> f64 {
    if schedule.anneal_updates == 0 {
        return schedule.beta_end;
    }
    if update_index >= schedule.anneal_updates {
        return schedule.beta_end;
    }
    (schedule.beta_end * update_index as f64 / schedule.anneal_updates as f64).min(schedule.beta_end)
}

/// Power of the signal and of the noise actually added in one noisy batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisePower {
    pub signal: f64,
    pub noise: f64,
}

/// Result of one training run.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub params: ModelParams,
    /// Parameters at the epoch with the lowest validation NMSE.
    pub best_params: ModelParams,
    pub best_epoch: usize,
    pub trace: TrainTrace,
    /// One entry per update when training through a noisy channel.
    pub noise_log: Vec<NoisePower>,
}

impl TrainRun {
    pub fn final_val_nmse_db(&self) -> f64 {
        self.trace.records.last().map_or(f64::NAN, |r| r.val_nmse_db)
    }
}

fn check_shapes(model: &ModelParams, dataset: &ChannelDataset) -> Result<()> {
    if model.arch.n_a != dataset.n_a() || model.arch.n_t != dataset.n_t() {
        return Err(Error::dim(
            "train",
            &[2, model.arch.n_a, model.arch.n_t],
            &[2, dataset.n_a(), dataset.n_t()],
        ));
    }
    for split in [Split::Train, Split::Val] {
        if dataset.range(split).is_empty() {
            return Err(Error::Config(format!("{split:?} split is empty")));
        }
    }
    Ok(())
}

struct StepLoss {
    recon: f64,
    kl: f64,
    total: f64,
}

/// Minibatch Adam training of `model` under `schedule`.
pub fn train(
    model: ModelParams,
    dataset: &ChannelDataset,
    cfg: &TrainConfig,
    schedule: &AnnealSchedule,
) -> Result<TrainRun> {
    cfg.validate()?;
    schedule.validate()?;
    model.arch.validate()?;
    check_shapes(&model, dataset)?;

    let mut model = model;
    let mut adam = AdamState::new(cfg.adam(), &model.tensors);
    let mut order: Vec<usize> = dataset.range(Split::Train).collect();
    let mut trace = TrainTrace::default();
    let mut noise_log = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.clone());
    let mut since_best = 0usize;
    let mut t: u64 = 0;

    'epochs: for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut stream(cfg.seed, Purpose::Shuffle, epoch as u64));
        let (mut recon, mut kl, mut seen) = (0.0, 0.0, 0usize);
        let mut beta = beta_at(schedule, t);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            beta = beta_at(schedule, t);
            let loss = step(&mut model, &mut adam, dataset, chunk, cfg, beta, t, &mut noise_log)
                .map_err(|e| match e {
                    Error::NonFinite { detail, .. } => Error::NonFinite {
                        epoch,
                        batch: b,
                        detail,
                    },
                    e => e,
                })?;
            recon += loss.recon * chunk.len() as f64;
            kl += loss.kl * chunk.len() as f64;
            seen += chunk.len();
            debug_assert!(loss.total.is_finite());
            t += 1;
            if !schedule.hold_after_anneal && t >= schedule.anneal_updates {
                break;
            }
        }
        let val = evaluate(
            &model,
            dataset,
            &EvalOptions {
                split: EvalSplit::Val,
                ..EvalOptions::default()
            },
        )?;
        trace.push(EpochRecord::new(
            epoch,
            t,
            beta,
            recon / seen as f64,
            kl / seen as f64,
            val.nmse_db,
        ));
        if val.nmse_db < best.0 {
            best = (val.nmse_db, epoch, model.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        let stalled = cfg.patience.is_some_and(|p| since_best >= p);
        if stalled || (!schedule.hold_after_anneal && t >= schedule.anneal_updates) {
            break 'epochs;
        }
    }
    Ok(TrainRun {
        params: model,
        best_params: best.2,
        best_epoch: best.1,
        trace,
        noise_log,
    })
}

#[allow(clippy::too_many_arguments)]
fn step(
    model: &mut ModelParams,
    adam: &mut AdamState,
    dataset: &ChannelDataset,
    batch: &[usize],
    cfg: &TrainConfig,
    beta: f64,
    t: u64,
    noise_log: &mut Vec<NoisePower>,
) -> Result<StepLoss> {
    let arch = model.arch.clone();
    let bsz = batch.len();
    let n = arch.input_len();
    let m = arch.latent_dim;

    let mut x = Vec::with_capacity(bsz * n);
    for &i in batch {
        x.extend_from_slice(dataset.record(i));
    }
    let shape = [bsz, 2, arch.n_a, arch.n_t];
    let mut g = Graph::new();
    let params = model.bind(&mut g);
    let target = g.constant(Tensor::new(&shape, x.clone())?);
    let input = if model.mode == Mode::PointEstimate && cfg.dropout > 0.0 {
        let mask = dropout_mask(x.len(), cfg.dropout, &mut stream(cfg.seed, Purpose::Dropout, t));
        let dropped = apply_input_dropout(&x, &mask, arch.input_center);
        g.constant(Tensor::new(&shape, dropped)?)
    } else {
        target
    };

    let lat = model.encoder(&mut g, &params, input)?;
    let (mut z, kl) = match lat.log_sigma {
        Some(ls) => {
            let mut r = stream(cfg.seed, Purpose::Epsilon, t);
            let eps: Vec<f32> = (0..bsz * m).map(|_| rng::normal(&mut r)).collect();
            let eps = g.constant(Tensor::new(&[bsz, m], eps)?);
            let z = reparameterize_var(&mut g, lat.mu, ls, eps)?;
            let kl = kl_var(&mut g, lat.mu, ls)?;
            (z, Some(g.scale(kl, 1.0 / bsz as f32)))
        }
        None => (lat.mu, None),
    };
    if let Snr::Db(db) = cfg.train_snr {
        let clean = g.value(z).data().to_vec();
        let mut noisy = clean.clone();
        add_awgn_in_place(&mut noisy, db, &mut stream(cfg.seed, Purpose::ChannelNoise, t))?;
        let noise: Vec<f32> = noisy.iter().zip(&clean).map(|(a, b)| a - b).collect();
        noise_log.push(NoisePower {
            signal: clean.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / clean.len() as f64,
            noise: noise.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / noise.len() as f64,
        });
        let noise = g.constant(Tensor::new(&[bsz, m], noise)?);
        z = g.add(z, noise)?;
    }
    let x_hat = model.decoder(&mut g, &params, z)?;
    let sse = sse_var(&mut g, target, x_hat)?;
    let recon = g.scale(sse, 1.0 / bsz as f32);
    let total = match kl {
        Some(kl) if beta > 0.0 => {
            let weighted = g.scale(kl, beta as f32);
            g.add(recon, weighted)?
        }
        _ => recon,
    };

    let recon_v = g.value(recon).item() as f64;
    let kl_v = kl.map_or(0.0, |k| g.value(k).item() as f64);
    let total_v = g.value(total).item() as f64;
    if !total_v.is_finite() {
        return Err(Error::NonFinite {
            epoch: 0,
            batch: 0,
            detail: format!("loss is {total_v} (recon {recon_v}, kl {kl_v}, β {beta})"),
        });
    }
    g.backward(total)?;
    let grads: Vec<Tensor> = params.vars.iter().map(|&v| g.grad_or_zeros(v)).collect();
    adam_step(&mut model.tensors, &grads, adam)?;
    Ok(StepLoss {
        recon: recon_v,
        kl: kl_v,
        total: total_v,
    })
}

/// Train through an AWGN feedback channel at `cfg.train_snr`.
pub fn train_with_channel_noise(
    model: ModelParams,
    dataset: &ChannelDataset,
    cfg: &TrainConfig,
    schedule: &AnnealSchedule,
) -> Result<TrainRun> {
    train(model, dataset, cfg, schedule)
}

/// β at the epoch with the lowest validation NMSE, ties going to the smaller β.
pub fn select_beta_star(trace: &TrainTrace) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for r in &trace.records {
        let better = match best {
            None => true,
            Some((b, n)) => r.val_nmse_db < n || (r.val_nmse_db == n && r.beta < b),
        };
        if better {
            best = Some((r.beta, r.val_nmse_db));
        }
    }
    best.ok_or_else(|| Error::Contract("cannot select β* from an empty trace".into()))
}

/// Both phases of the annealing procedure.
#[derive(Clone, Debug)]
pub struct AnnealOutcome {
    pub beta_star: f64,
    pub beta_star_nmse_db: f64,
    /// Fresh model annealed 0 → 1.
    pub phase1: TrainRun,
    /// Fresh model annealed 0 → β* then held.
    pub phase2: TrainRun,
    pub phase2_schedule: AnnealSchedule,
}

/// Anneal a fresh model 0 → 1 to find β*, then retrain another fresh model
/// annealed 0 → β*.
pub fn anneal_and_retrain(
    model_factory: impl Fn() -> Result<ModelParams>,
    dataset: &ChannelDataset,
    cfg: &TrainConfig,
) -> Result<AnnealOutcome> {
    let n_train = dataset.range(Split::Train).len();
    let phase1 = train(
        model_factory()?,
        dataset,
        cfg,
        &AnnealSchedule::over_fraction(1.0, cfg, n_train),
    )?;
    let (beta_star, nmse) = select_beta_star(&phase1.trace)?;
    let mut schedule = if beta_star > 0.0 {
        AnnealSchedule::over_fraction(beta_star, cfg, n_train)
    } else {
        AnnealSchedule::fixed(0.0)
    };
    schedule.beta_star = Some(beta_star);
    schedule.beta_star_nmse_db = Some(nmse);
    let retrain_cfg = TrainConfig {
        patience: None,
        ..cfg.clone()
    };
    let phase2 = train(model_factory()?, dataset, &retrain_cfg, &schedule)?;
    Ok(AnnealOutcome {
        beta_star,
        beta_star_nmse_db: nmse,
        phase1,
        phase2,
        phase2_schedule: schedule,
    })
}

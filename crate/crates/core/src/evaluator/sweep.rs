// SPDX-License-Identifier: Apache-2.0

use super::{evaluate, EvalOptions, NmseReport, NmseRow, ReportMeta, Snr};
use crate::channel::{ChannelDataset, Split};
use crate::error::Result;
use crate::model::{Architecture, Mode, ModelParams};
use crate::trainer::{anneal_and_retrain, train, AnnealOutcome, AnnealSchedule, TrainConfig};

pub const DEFAULT_SNRS_DB: [f64; 5] = [35.0, 32.0, 29.0, 26.0, 23.0];
pub const DEFAULT_GAMMAS: [f64; 4] = [1.0 / 4.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];

/// Label used in report rows, e.g. `prvnet/M=512`.
pub fn model_id(model: &ModelParams) -> String {
    let kind = match model.mode {
        Mode::Variational => "prvnet",
        Mode::PointEstimate => "point-estimate",
    };
    format!("{kind}/M={}", model.arch.latent_dim)
}

/// Score `model` on the test split at `snr`.
pub fn eval_row(model: &ModelParams, dataset: &ChannelDataset, snr: Snr, seed: u64) -> Result<NmseRow> {
    let s = evaluate(
        model,
        dataset,
        &EvalOptions {
            snr,
            seed,
            ..EvalOptions::default()
        },
    )?;
    Ok(NmseRow {
        gamma: model.arch.gamma(),
        scenario: dataset.params.scenario,
        snr,
        nmse_db: s.nmse_db,
        n_samples: dataset.range(Split::Test).len(),
        model_id: model_id(model),
        seed,
    })
}

fn meta(dataset: &ChannelDataset, seed: u64) -> ReportMeta {
    ReportMeta {
        seed,
        dataset_hash: dataset.hash(),
    }
}

/// Whether a sequence expected to be non-decreasing is, up to `tolerance_db`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monotonicity {
    pub holds: bool,
    /// Largest drop between consecutive entries (positive means a violation).
    pub worst_drop_db: f64,
    /// Indices `i` where `values[i+1] < values[i] - tolerance`.
    pub violations: Vec<usize>,
}

pub fn check_monotone(values: &[f64], tolerance_db: f64) -> Monotonicity {
    let mut worst = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for (i, w) in values.windows(2).enumerate() {
        let drop = w[0] - w[1];
        worst = worst.max(drop);
        if drop > tolerance_db {
            violations.push(i);
        }
    }
    Monotonicity {
        holds: violations.is_empty(),
        worst_drop_db: if values.len() < 2 { 0.0 } else { worst },
        violations,
    }
}

#[derive(Clone, Debug)]
pub struct SnrSweep {
    pub report: NmseReport,
    /// NMSE along the grid, from the highest SNR to the lowest.
    pub monotonicity: Monotonicity,
    pub clean_nmse_db: Option<f64>,
}

/// Evaluate one model at each SNR (dB) of `snrs`, optionally adding a clean row.
/// Every row uses the same noise seed.
pub fn snr_sweep(
    model: &ModelParams,
    dataset: &ChannelDataset,
    snrs: &[f64],
    include_clean: bool,
    seed: u64,
) -> Result<SnrSweep> {
    let mut report = NmseReport::new(meta(dataset, seed));
    let clean = if include_clean {
        let row = eval_row(model, dataset, Snr::Clean, seed)?;
        let v = row.nmse_db;
        report.rows.push(row);
        Some(v)
    } else {
        None
    };
    let mut grid = snrs.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    let mut along = Vec::with_capacity(grid.len());
    for &db in &grid {
        let row = eval_row(model, dataset, Snr::Db(db), seed)?;
        along.push(row.nmse_db);
        report.rows.push(row);
    }
    Ok(SnrSweep {
        report,
        monotonicity: check_monotone(&along, 0.2),
        clean_nmse_db: clean,
    })
}

/// Train one model per compression ratio with `train_one` and evaluate each
/// on the clean test split.
pub fn cr_sweep(
    mut train_one: impl FnMut(f64) -> Result<ModelParams>,
    dataset: &ChannelDataset,
    gammas: &[f64],
    seed: u64,
) -> Result<NmseReport> {
    let mut report = NmseReport::new(meta(dataset, seed));
    for &gamma in gammas {
        let model = train_one(gamma)?;
        report.rows.push(eval_row(&model, dataset, Snr::Clean, seed)?);
    }
    Ok(report)
}

/// Paired point-estimate and annealed PRVNet runs.
#[derive(Clone, Debug)]
pub struct BaselineComparison {
    pub report: NmseReport,
    pub prvnet: AnnealOutcome,
    pub baseline: ModelParams,
}

impl BaselineComparison {
    /// `(prvnet, point-estimate)` NMSE at `snr`.
    pub fn pair(&self, snr: Snr) -> Option<(f64, f64)> {
        let find = |kind: &str| {
            self.report
                .rows
                .iter()
                .find(|r| r.snr == snr && r.model_id.starts_with(kind))
                .map(|r| r.nmse_db)
        };
        Some((find("prvnet/")?, find("point-estimate/")?))
    }
}

/// Train the point-estimate autoencoder and the annealed PRVNet with the same
/// seed and budget, then evaluate both clean and at each SNR in `snrs`.
pub fn baseline_compare(
    dataset: &ChannelDataset,
    cfg: &TrainConfig,
    snrs: &[f64],
) -> Result<BaselineComparison> {
    let arch = Architecture::for_dataset(dataset, cfg.gamma)?;
    let baseline = train(
        ModelParams::init(arch.clone(), Mode::PointEstimate, cfg.seed)?,
        dataset,
        cfg,
        &AnnealSchedule::fixed(0.0),
    )?
    .params;
    let prvnet = anneal_and_retrain(
        || ModelParams::init(arch.clone(), Mode::Variational, cfg.seed),
        dataset,
        cfg,
    )?;
    let mut report = NmseReport::new(meta(dataset, cfg.seed));
    let grid = std::iter::once(Snr::Clean).chain(snrs.iter().map(|&d| Snr::Db(d)));
    for snr in grid {
        report.rows.push(eval_row(&prvnet.phase2.params, dataset, snr, cfg.seed)?);
        report.rows.push(eval_row(&baseline, dataset, snr, cfg.seed)?);
    }
    Ok(BaselineComparison {
        report,
        prvnet,
        baseline,
    })
}

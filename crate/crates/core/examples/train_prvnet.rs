// SPDX-License-Identifier: Apache-2.0

//! Train PRVNet with a fixed KL weight, save the checkpoint, and score it.
//!
//! ```text
//! cargo run --release --example train_prvnet -- [samples] [epochs] [beta]
//! ```

use prvnet::channel::{build_dataset, DatasetParams, Scenario};
use prvnet::evaluator::{eval_row, Snr};
use prvnet::model::{decode, encode, Architecture, Codeword, Mode, ModelParams};
use prvnet::trainer::{train, AnnealSchedule, TrainConfig};

fn main() -> prvnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(300, |s| s.parse().expect("samples"));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));
    let beta: f64 = args.next().map_or(1e-3, |s| s.parse().expect("beta"));

    let ds = build_dataset(&DatasetParams::for_scenario(Scenario::Indoor), count, 0)?;
    let arch = Architecture::for_dataset(&ds, 0.25)?;
    println!("codeword length {} for {} inputs", arch.latent_dim, arch.input_len());

    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let run = train(ModelParams::init(arch, Mode::Variational, 0)?, &ds, &cfg, &AnnealSchedule::fixed(beta))?;
    for r in run.trace.records.iter().step_by((epochs / 10).max(1)) {
        println!("epoch {:>4}  recon {:.4}  kl {:>8.2}  val {:>7.3} dB", r.epoch, r.recon, r.kl, r.val_nmse_db);
    }

    let path = std::env::temp_dir().join("prvnet-example.ckpt");
    run.params.save(&path)?;
    let model = ModelParams::load(&path)?;
    println!("best epoch {}, checkpoint {}", run.best_epoch, path.display());

    let x = ds.sample(0);
    let d = encode(&x, &model)?;
    let z = Codeword { z: d.mu.clone(), gamma: model.arch.gamma() };
    let x_hat = decode(&z, &model, None)?;
    let err: f32 = x.data.iter().zip(&x_hat.data).map(|(a, b)| (a - b).powi(2)).sum();
    println!("sample 0: mean σ {:.3}, squared error {err:.5}", d.log_sigma.iter().map(|l| l.exp()).sum::<f32>() / d.dim() as f32);

    for snr in [Snr::Clean, Snr::Db(23.0)] {
        println!("test NMSE at {snr}: {:.3} dB", eval_row(&model, &ds, snr, 0)?.nmse_db);
    }
    Ok(())
}

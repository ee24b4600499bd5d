// SPDX-License-Identifier: Apache-2.0

//! Anneal β from 0 to 1, pick the β with the best validation NMSE, and
//! retrain a fresh model annealed only up to that value.
//!
//! ```text
//! cargo run --release --example anneal_beta -- [samples] [epochs]
//! ```

use prvnet::channel::{build_dataset, DatasetParams, Scenario};
use prvnet::model::{Architecture, Mode, ModelParams};
use prvnet::trainer::{anneal_and_retrain, TrainConfig};

fn main() -> prvnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(300, |s| s.parse().expect("samples"));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));

    let ds = build_dataset(&DatasetParams::for_scenario(Scenario::Indoor), count, 0)?;
    let arch = Architecture::for_dataset(&ds, 0.25)?;
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let out = anneal_and_retrain(|| ModelParams::init(arch.clone(), Mode::Variational, 0), &ds, &cfg)?;

    println!("phase 1, β ramped 0 → 1 over the first half:");
    for r in &out.phase1.trace.records {
        println!("  epoch {:>3}  β {:.4}  kl {:>9.2}  val {:>7.3} dB", r.epoch, r.beta, r.kl, r.val_nmse_db);
    }
    println!("β* = {} (val {:.3} dB)", out.beta_star, out.beta_star_nmse_db);
    println!(
        "phase 2 ends at β {:.4}: val {:.3} dB, against {:.3} dB after phase 1",
        out.phase2.trace.last().map_or(0.0, |r| r.beta),
        out.phase2.final_val_nmse_db(),
        out.phase1.final_val_nmse_db()
    );
    Ok(())
}

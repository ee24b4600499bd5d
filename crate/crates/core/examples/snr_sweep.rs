// SPDX-License-Identifier: Apache-2.0

//! Evaluate one trained model through the AWGN feedback link at each SNR of
//! the default grid.
//!
//! ```text
//! cargo run --release --example snr_sweep -- [samples] [epochs]
//! ```

use prvnet::channel::{build_dataset, DatasetParams, Scenario};
use prvnet::evaluator::{snr_sweep, DEFAULT_SNRS_DB};
use prvnet::model::{Architecture, Mode, ModelParams};
use prvnet::trainer::{train, AnnealSchedule, TrainConfig};

fn main() -> prvnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(300, |s| s.parse().expect("samples"));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));

    let ds = build_dataset(&DatasetParams::for_scenario(Scenario::Indoor), count, 0)?;
    let arch = Architecture::for_dataset(&ds, 0.25)?;
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let model = train(ModelParams::init(arch, Mode::Variational, 0)?, &ds, &cfg, &AnnealSchedule::fixed(1e-3))?.params;

    let sweep = snr_sweep(&model, &ds, &DEFAULT_SNRS_DB, true, 0)?;
    print!("{}", sweep.report.summary_table());
    let m = &sweep.monotonicity;
    println!("non-decreasing as SNR drops (0.2 dB slack): {} (worst drop {:.3} dB)", m.holds, m.worst_drop_db);
    let path = std::env::temp_dir().join("prvnet-nmse-vs-snr.svg");
    std::fs::write(&path, sweep.report.svg_vs_snr()).expect("write svg");
    println!("plot: {}", path.display());
    Ok(())
}

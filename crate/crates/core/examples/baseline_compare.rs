// SPDX-License-Identifier: Apache-2.0

//! Paired runs of the point-estimate autoencoder and annealed PRVNet with the
//! same seed and budget, scored clean and through noisy feedback.
//!
//! ```text
//! cargo run --release --example baseline_compare -- [samples] [epochs]
//! ```

use prvnet::channel::{build_dataset, DatasetParams, Scenario};
use prvnet::evaluator::{baseline_compare, Snr, DEFAULT_SNRS_DB};
use prvnet::trainer::TrainConfig;

fn main() -> prvnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(300, |s| s.parse().expect("samples"));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));

    let ds = build_dataset(&DatasetParams::for_scenario(Scenario::Indoor), count, 0)?;
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let cmp = baseline_compare(&ds, &cfg, &DEFAULT_SNRS_DB)?;
    print!("{}", cmp.report.summary_table());
    println!("β* = {}", cmp.prvnet.beta_star);
    for snr in std::iter::once(Snr::Clean).chain(DEFAULT_SNRS_DB.map(Snr::Db)) {
        if let Some((p, b)) = cmp.pair(snr) {
            println!("{snr:>6}: prvnet {p:>8.3} dB  point-estimate {b:>8.3} dB  gap {:+.3}", p - b);
        }
    }
    Ok(())
}

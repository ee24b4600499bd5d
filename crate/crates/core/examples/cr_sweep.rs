// SPDX-License-Identifier: Apache-2.0

//! Train one model per compression ratio and compare clean test NMSE.
//!
//! ```text
//! cargo run --release --example cr_sweep -- [samples] [epochs]
//! ```

use prvnet::channel::{build_dataset, DatasetParams, Scenario};
use prvnet::evaluator::{check_monotone, cr_sweep, DEFAULT_GAMMAS};
use prvnet::model::{Architecture, Mode, ModelParams};
use prvnet::trainer::{train, AnnealSchedule, TrainConfig};

fn main() -> prvnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(300, |s| s.parse().expect("samples"));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));

    let ds = build_dataset(&DatasetParams::for_scenario(Scenario::Indoor), count, 0)?;
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let report = cr_sweep(
        |gamma| {
            eprintln!("training γ = {gamma}");
            let arch = Architecture::for_dataset(&ds, gamma)?;
            let model = ModelParams::init(arch, Mode::Variational, 0)?;
            Ok(train(model, &ds, &cfg, &AnnealSchedule::fixed(1e-3))?.params)
        },
        &ds,
        &DEFAULT_GAMMAS,
        0,
    )?;
    print!("{}", report.summary_table());
    let nmse: Vec<f64> = report.rows.iter().map(|r| r.nmse_db).collect();
    println!("worse as γ shrinks (0.3 dB slack): {}", check_monotone(&nmse, 0.3).holds);
    Ok(())
}

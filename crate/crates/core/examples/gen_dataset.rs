// SPDX-License-Identifier: Apache-2.0

//! Generate a synthetic indoor dataset, save it, and reload it.
//!
//! ```text
//! cargo run --release --example gen_dataset -- [count] [out.bin]
//! ```

use std::path::PathBuf;

use prvnet::channel::{
    build_dataset, generate_channel, to_angular_delay, ChannelDataset, DatasetParams,
    MultipathParams, Scenario, Split,
};
use prvnet::rng::{stream, Purpose};

fn main() -> prvnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(300, |s| s.parse().expect("count"));
    let out = args
        .next()
        .map_or_else(|| std::env::temp_dir().join("prvnet-indoor.bin"), PathBuf::from);

    // how much energy survives keeping the first 32 delay taps
    let mp = MultipathParams::indoor();
    let h = generate_channel(&mp, Scenario::Indoor, &mut stream(0, Purpose::Dataset, 0));
    let kept = to_angular_delay(&h, 32)?.energy() / h.energy();
    println!("one channel: {} subcarriers x {} antennas, {:.5} of its energy kept", h.n_c, h.n_t, kept);

    let ds = build_dataset(&DatasetParams::for_scenario(Scenario::Indoor), count, 0)?;
    let [tr, va, te] = ds.split_counts();
    println!("{count} samples: train {tr}, val {va}, test {te}");
    println!("normalization fitted on train: [{:.4}, {:.4}], zero maps to {:.4}", ds.norm.min, ds.norm.max, ds.norm.zero_level());

    ds.save(&out)?;
    let back = ChannelDataset::load(&out)?;
    assert_eq!(back, ds);
    println!("saved {} (sha256 {})", out.display(), ds.hash());
    println!("sidecar {}", ChannelDataset::sidecar_path(&out).display());

    let first_test = back.sample(back.range(Split::Test).start);
    println!("first test sample: {} x {} x 2 values", first_test.n_a, first_test.n_t);
    Ok(())
}

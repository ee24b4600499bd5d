// SPDX-License-Identifier: Apache-2.0

//! Compare reverse-mode gradients against finite differences, on a hand-built
//! graph and on the PRVNet encoder.
//!
//! ```text
//! cargo run --release --example autodiff_check
//! ```

use prvnet::model::{sse_var, Architecture, Mode, ModelParams};
use prvnet::numerics::{gradcheck, Activation, Tensor};
use prvnet::rng::{self, stream, Purpose};

fn random(shape: &[usize], scale: f64, seed: u64) -> Tensor {
    let mut r = stream(seed, Purpose::Init, 0);
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng::uniform(&mut r, -scale, scale) as f32).collect();
    Tensor::new(shape, data).unwrap()
}

fn main() -> prvnet::Result<()> {
    // y = sum(tanh(conv(x, k) + b)²)
    let inputs = [random(&[2, 3, 4, 4], 1.0, 1), random(&[2, 3, 3, 3], 0.3, 2), random(&[2], 0.5, 3)];
    let r = gradcheck(
        |g, v| {
            let y = g.conv2d(v[0], v[1])?;
            let y = g.add_bias(y, v[2])?;
            let y = g.activation(y, Activation::Tanh);
            let y = g.square(y);
            Ok(g.sum(y))
        },
        &inputs,
        5e-2,
    )?;
    let per: Vec<String> = r.per_input.iter().map(|e| format!("{e:.1e}")).collect();
    println!("conv/tanh graph: relative error {:.2e} (per input {})", r.rel_error, per.join(", "));

    // gradient of the reconstruction error with respect to a small encoder's input
    let arch = Architecture {
        encoder_channels: vec![3, 2],
        decoder_channels: vec![3],
        ..Architecture::new(4, 4, 0.25)?
    };
    let model = ModelParams::init(arch.clone(), Mode::PointEstimate, 0)?;
    let x = random(&[1, 2, 4, 4], 0.5, 4);
    let r = gradcheck(
        |g, v| {
            let b = model.bind_frozen(g);
            let lat = model.encoder(g, &b, v[0])?;
            let y = model.decoder(g, &b, lat.mu)?;
            let t = g.constant(g.value(v[0]).clone());
            sse_var(g, t, y)
        },
        &[x],
        5e-3,
    )?;
    println!("autoencoder wrt input: relative error {:.2e}, loss {:.4}", r.rel_error, r.loss);
    Ok(())
}

// SPDX-License-Identifier: Apache-2.0

//! Convolutional encoder/decoder with a Gaussian codeword.
//!
//! ```text
//! x [2×Na×Nt] → standardize → conv3×3 → … → flatten → dense → (μ, log σ)   (variational)
//!                                                          → g(x)           (point estimate)
//! z = μ + ε ⊙ exp(log σ)
//! z [M] → dense → reshape → h;  u = h + refine(h);  x̂ = sigmoid(a + b·u)
//! ```
//!
//! Min/max-normalized inputs sit on a large constant offset (the normalized
//! value of a zero entry) with small deviations, which conditions gradient
//! descent very badly. The encoder therefore subtracts that offset and divides
//! by the training RMS deviation, and the decoder works in the same units: the
//! fixed affine map `a + b·u` before the sigmoid is chosen so that `u = 0`
//! decodes to the zero level and a unit step in `u` moves the output by about
//! one RMS deviation. Both constants live in [`Architecture`], not in the
//! trained parameters.
//!
//! The loss is `Σ (x − x̂)² + β · KL(N(μ, σ²) ‖ N(0, I))`; `β = 0` is the
//! point-estimate autoencoder objective.

mod checkpoint;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::channel::{AngularDelayCsi, ChannelDataset, Split};
use crate::error::{Error, Result};
use crate::numerics::{he_init, lecun_init, Activation, Graph, Tensor, Var};
use crate::rng::{stream, Purpose, Rng};

/// Layer sizes of the encoder and decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub n_a: usize,
    pub n_t: usize,
    /// Codeword length `M`.
    pub latent_dim: usize,
    /// Output channels of each encoder convolution.
    pub encoder_channels: Vec<usize>,
    /// Output channels of each decoder refinement convolution.
    pub decoder_channels: Vec<usize>,
    pub kernel_size: usize,
    pub leaky_slope: f32,
    /// Normalized input value of a zero CSI entry.
    pub input_center: f32,
    /// RMS deviation of training inputs from `input_center`.
    pub input_scale: f32,
}

impl Architecture {
    /// Default layer stack for an `n_a × n_t` input compressed by `gamma`.
    pub fn new(n_a: usize, n_t: usize, gamma: f64) -> Result<Self> {
        let n = 2 * n_a * n_t;
        let m = gamma * n as f64;
        if !(gamma > 0.0 && gamma <= 1.0) || (m - m.round()).abs() > 1e-6 || m.round() < 1.0 {
            return Err(Error::Config(format!(
                "compression ratio {gamma} does not give a whole codeword length for N = {n}"
            )));
        }
        Ok(Architecture {
            n_a,
            n_t,
            latent_dim: m.round() as usize,
            encoder_channels: vec![8, 2],
            decoder_channels: vec![8, 8],
            kernel_size: 3,
            leaky_slope: 0.3,
            input_center: 0.5,
            input_scale: 1.0,
        })
    }

    /// Default layer stack for `dataset`, with the input standardization
    /// fitted on its training split.
    pub fn for_dataset(dataset: &ChannelDataset, gamma: f64) -> Result<Self> {
        let mut a = Self::new(dataset.n_a(), dataset.n_t(), gamma)?;
        a.fit_input(dataset);
        Ok(a)
    }

    /// Set `input_center` and `input_scale` from the training split.
    pub fn fit_input(&mut self, dataset: &ChannelDataset) {
        let c = dataset.norm.zero_level();
        let (mut ss, mut n) = (0.0f64, 0usize);
        for i in dataset.range(Split::Train) {
            for &v in dataset.record(i) {
                ss += (v as f64 - c as f64).powi(2);
                n += 1;
            }
        }
        let rms = (ss / n.max(1) as f64).sqrt() as f32;
        self.input_center = c;
        self.input_scale = if rms > 0.0 && rms.is_finite() { rms } else { 1.0 };
    }

    /// `(a, b)` of the pre-sigmoid map `a + b·u`.
    fn output_affine(&self) -> (f32, f32) {
        let c = self.input_center as f64;
        let a = (c / (1.0 - c)).ln();
        let b = self.input_scale as f64 / (c * (1.0 - c));
        (a as f32, b as f32)
    }

    /// Flattened input length `N = 2·n_a·n_t`.
    pub fn input_len(&self) -> usize {
        2 * self.n_a * self.n_t
    }

    pub fn gamma(&self) -> f64 {
        self.latent_dim as f64 / self.input_len() as f64
    }

    fn pixels(&self) -> usize {
        self.n_a * self.n_t
    }

    fn activation(&self) -> Activation {
        Activation::LeakyRelu(self.leaky_slope)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.kernel_size;
        if k % 2 == 0 {
            return Err(Error::Config(format!("kernel size {k} must be odd")));
        }
        if self.n_a == 0 || self.n_t == 0 || self.latent_dim == 0 {
            return Err(Error::Config("architecture sizes must be positive".into()));
        }
        if self.encoder_channels.contains(&0) || self.decoder_channels.contains(&0) {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if !(self.input_center > 0.0 && self.input_center < 1.0) {
            return Err(Error::Config(format!(
                "input center {} must lie strictly inside (0, 1)",
                self.input_center
            )));
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return Err(Error::Config(format!(
                "input scale {} must be positive",
                self.input_scale
            )));
        }
        Ok(())
    }
}

/// Whether the encoder emits a distribution or a single point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Variational,
    PointEstimate,
}

/// Name and shape of one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    init: Init,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Init {
    Zero,
    /// Feeds a leaky ReLU.
    He(usize),
    /// Feeds a linear output.
    Lecun(usize),
}

/// Canonical parameter order. Checkpoints store tensors in this order.
///
/// Per encoder conv `i`: `enc.conv{i}.kernel [c_out, c_in, k, k]`,
/// `enc.conv{i}.bias [c_out]`; then `enc.head.weight [F, H]`,
/// `enc.head.bias [H]` with `H = 2M` (variational) or `M`; then
/// `dec.dense.weight [M, N]`, `dec.dense.bias [N]`, the decoder refinement
/// convs `dec.conv{i}.*`, and `dec.out.kernel [2, c, k, k]`, `dec.out.bias [2]`.
pub fn layout(arch: &Architecture, mode: Mode) -> Vec<ParamSpec> {
    let k = arch.kernel_size;
    let mut specs = Vec::new();
    let conv = |specs: &mut Vec<ParamSpec>, name: String, c_in: usize, c_out: usize, rect: bool| {
        let fan_in = c_in * k * k;
        specs.push(ParamSpec {
            name: format!("{name}.kernel"),
            shape: vec![c_out, c_in, k, k],
            init: if rect { Init::He(fan_in) } else { Init::Lecun(fan_in) },
        });
        specs.push(ParamSpec {
            name: format!("{name}.bias"),
            shape: vec![c_out],
            init: Init::Zero,
        });
    };
    let mut c_in = 2;
    for (i, &c) in arch.encoder_channels.iter().enumerate() {
        conv(&mut specs, format!("enc.conv{i}"), c_in, c, true);
        c_in = c;
    }
    let flat = c_in * arch.pixels();
    let head = match mode {
        Mode::Variational => 2 * arch.latent_dim,
        Mode::PointEstimate => arch.latent_dim,
    };
    specs.push(ParamSpec {
        name: "enc.head.weight".into(),
        shape: vec![flat, head],
        init: Init::Lecun(flat),
    });
    specs.push(ParamSpec {
        name: "enc.head.bias".into(),
        shape: vec![head],
        init: Init::Zero,
    });
    specs.push(ParamSpec {
        name: "dec.dense.weight".into(),
        shape: vec![arch.latent_dim, arch.input_len()],
        init: Init::Lecun(arch.latent_dim),
    });
    specs.push(ParamSpec {
        name: "dec.dense.bias".into(),
        shape: vec![arch.input_len()],
        init: Init::Zero,
    });
    let mut c_in = 2;
    for (i, &c) in arch.decoder_channels.iter().enumerate() {
        conv(&mut specs, format!("dec.conv{i}"), c_in, c, true);
        c_in = c;
    }
    conv(&mut specs, "dec.out".into(), c_in, 2, false);
    specs
}

/// Encoder and decoder weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    pub mode: Mode,
    pub tensors: Vec<Tensor>,
}

/// Parameter handles on a graph, in [`layout`] order.
#[derive(Clone, Debug)]
pub struct Bound {
    pub vars: Vec<Var>,
}

/// Encoder output on a graph.
#[derive(Clone, Copy, Debug)]
pub struct Latent {
    pub mu: Var,
    /// `None` in point-estimate mode.
    pub log_sigma: Option<Var>,
}

impl ModelParams {
    /// Gaussian weights (He before rectifiers, LeCun before linear outputs)
    /// and zero biases, drawn from the `Init` stream of `seed`.
    pub fn init(arch: Architecture, mode: Mode, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = stream(seed, Purpose::Init, 0);
        let tensors = layout(&arch, mode)
            .into_iter()
            .map(|s| match s.init {
                Init::He(fan_in) => he_init(&s.shape, fan_in, &mut rng),
                Init::Lecun(fan_in) => lecun_init(&s.shape, fan_in, &mut rng),
                Init::Zero => Tensor::zeros(&s.shape),
            })
            .collect();
        Ok(ModelParams {
            arch,
            mode,
            tensors,
        })
    }

    pub fn from_tensors(arch: Architecture, mode: Mode, tensors: Vec<Tensor>) -> Result<Self> {
        arch.validate()?;
        let specs = layout(&arch, mode);
        if specs.len() != tensors.len() {
            return Err(Error::dim("model params", &[specs.len()], &[tensors.len()]));
        }
        for (s, t) in specs.iter().zip(&tensors) {
            if s.shape != t.shape() {
                return Err(Error::dim("model params", &s.shape, t.shape()));
            }
        }
        Ok(ModelParams {
            arch,
            mode,
            tensors,
        })
    }

    pub fn layout(&self) -> Vec<ParamSpec> {
        layout(&self.arch, self.mode)
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Width of the encoder output head: `2M` or `M`.
    pub fn head_width(&self) -> usize {
        self.tensors[2 * self.arch.encoder_channels.len()].shape()[1]
    }

    /// Put the parameters on `g` as differentiable leaves.
    pub fn bind(&self, g: &mut Graph) -> Bound {
        Bound {
            vars: self.tensors.iter().map(|t| g.leaf(t.clone())).collect(),
        }
    }

    /// Put the parameters on `g` as constants (inference only).
    pub fn bind_frozen(&self, g: &mut Graph) -> Bound {
        Bound {
            vars: self.tensors.iter().map(|t| g.constant(t.clone())).collect(),
        }
    }

    fn conv_block(
        &self,
        g: &mut Graph,
        x: Var,
        kernel: Var,
        bias: Var,
        act: Activation,
    ) -> Result<Var> {
        let y = g.conv2d(x, kernel)?;
        let y = g.add_bias(y, bias)?;
        Ok(g.activation(y, act))
    }

    /// Encode a `[batch, 2, n_a, n_t]` input.
    pub fn encoder(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Latent> {
        let a = &self.arch;
        let shape = g.value(x).shape().to_vec();
        if shape.len() != 4 || shape[1..] != [2, a.n_a, a.n_t] {
            return Err(Error::dim("encode", &shape, &[2, a.n_a, a.n_t]));
        }
        let batch = shape[0];
        let h = g.add_scalar(x, -a.input_center);
        let mut h = g.scale(h, 1.0 / a.input_scale);
        let mut idx = 0;
        for _ in &a.encoder_channels {
            h = self.conv_block(g, h, p.vars[idx], p.vars[idx + 1], a.activation())?;
            idx += 2;
        }
        let flat = g.value(h).len() / batch;
        let h = g.reshape(h, &[batch, flat])?;
        let h = g.matmul(h, p.vars[idx])?;
        let out = g.add_bias(h, p.vars[idx + 1])?;
        let m = a.latent_dim;
        Ok(match self.mode {
            Mode::Variational => Latent {
                mu: g.slice_cols(out, 0, m)?,
                log_sigma: Some(g.slice_cols(out, m, m)?),
            },
            Mode::PointEstimate => Latent {
                mu: out,
                log_sigma: None,
            },
        })
    }

    /// Decode a `[batch, M]` codeword batch into `[batch, 2, n_a, n_t]`.
    pub fn decoder(&self, g: &mut Graph, p: &Bound, z: Var) -> Result<Var> {
        let a = &self.arch;
        let shape = g.value(z).shape().to_vec();
        if shape.len() != 2 || shape[1] != a.latent_dim {
            return Err(Error::dim("decode", &shape, &[a.latent_dim]));
        }
        let batch = shape[0];
        let mut idx = 2 * a.encoder_channels.len() + 2;
        let h = g.matmul(z, p.vars[idx])?;
        let h = g.add_bias(h, p.vars[idx + 1])?;
        idx += 2;
        let base = g.reshape(h, &[batch, 2, a.n_a, a.n_t])?;
        let mut h = base;
        for _ in &a.decoder_channels {
            h = self.conv_block(g, h, p.vars[idx], p.vars[idx + 1], a.activation())?;
            idx += 2;
        }
        let r = g.conv2d(h, p.vars[idx])?;
        let r = g.add_bias(r, p.vars[idx + 1])?;
        let u = g.add(base, r)?;
        let (off, gain) = a.output_affine();
        let u = g.scale(u, gain);
        let u = g.add_scalar(u, off);
        Ok(g.activation(u, Activation::Sigmoid))
    }

    /// Inference-mode encoder over a batch of flattened records.
    /// Returns `(μ, log σ)` as `[batch × M]` row-major arrays.
    pub fn encode_batch(&self, records: &[&[f32]]) -> Result<(Vec<f32>, Option<Vec<f32>>)> {
        let mut g = Graph::new();
        let p = self.bind_frozen(&mut g);
        let x = g.constant(stack_inputs(&self.arch, records)?);
        let lat = self.encoder(&mut g, &p, x)?;
        let mu = g.value(lat.mu).data().to_vec();
        let ls = lat.log_sigma.map(|v| g.value(v).data().to_vec());
        Ok((mu, ls))
    }

    /// Inference-mode decoder over `[batch × M]` codewords.
    pub fn decode_batch(&self, codewords: &[f32]) -> Result<Vec<f32>> {
        let m = self.arch.latent_dim;
        if codewords.is_empty() || codewords.len() % m != 0 {
            return Err(Error::dim("decode", &[codewords.len()], &[m]));
        }
        let mut g = Graph::new();
        let p = self.bind_frozen(&mut g);
        let z = g.constant(Tensor::new(&[codewords.len() / m, m], codewords.to_vec())?);
        let out = self.decoder(&mut g, &p, z)?;
        Ok(g.value(out).data().to_vec())
    }
}

/// Stack flattened records into a `[batch, 2, n_a, n_t]` tensor.
pub fn stack_inputs(arch: &Architecture, records: &[&[f32]]) -> Result<Tensor> {
    let n = arch.input_len();
    let mut data = Vec::with_capacity(records.len() * n);
    for r in records {
        if r.len() != n {
            return Err(Error::dim("encode", &[r.len()], &[2, arch.n_a, arch.n_t]));
        }
        data.extend_from_slice(r);
    }
    Tensor::new(&[records.len(), 2, arch.n_a, arch.n_t], data)
}

/// Variational parameters of one codeword.
#[derive(Clone, Debug, PartialEq)]
pub struct CodewordDistribution {
    pub mu: Vec<f32>,
    pub log_sigma: Vec<f32>,
}

impl CodewordDistribution {
    pub fn new(mu: Vec<f32>, log_sigma: Vec<f32>) -> Result<Self> {
        if mu.len() != log_sigma.len() || mu.is_empty() {
            return Err(Error::dim("codeword distribution", &[mu.len()], &[log_sigma.len()]));
        }
        Ok(CodewordDistribution { mu, log_sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self) -> Vec<f32> {
        self.log_sigma.iter().map(|l| l.exp()).collect()
    }
}

/// A compressed CSI vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Codeword {
    pub z: Vec<f32>,
    /// Compression ratio `M / N` of the model that produced it.
    pub gamma: f64,
}

fn check_input(arch: &Architecture, x: &AngularDelayCsi) -> Result<()> {
    if x.n_a != arch.n_a || x.n_t != arch.n_t || x.data.len() != arch.input_len() {
        return Err(Error::dim("encode", &x.shape(), &[2, arch.n_a, arch.n_t]));
    }
    Ok(())
}

/// Variational parameters for one input.
pub fn encode(x: &AngularDelayCsi, params: &ModelParams) -> Result<CodewordDistribution> {
    if params.mode != Mode::Variational {
        return Err(Error::Contract("encode needs a variational model".into()));
    }
    check_input(&params.arch, x)?;
    let (mu, ls) = params.encode_batch(&[&x.data])?;
    CodewordDistribution::new(mu, ls.expect("variational head"))
}

/// `z = μ + ε ⊙ exp(log σ)`.
pub fn reparameterize(d: &CodewordDistribution, eps: &[f32], gamma: f64) -> Result<Codeword> {
    if eps.len() != d.dim() {
        return Err(Error::dim("reparameterize", &[d.dim()], &[eps.len()]));
    }
    let z = d
        .mu
        .iter()
        .zip(&d.log_sigma)
        .zip(eps)
        .map(|((m, l), e)| m + e * l.exp())
        .collect();
    Ok(Codeword { z, gamma })
}

/// Reconstruct one input from a codeword. The result carries the
/// normalization record `norm` when given.
pub fn decode(
    z: &Codeword,
    params: &ModelParams,
    norm: Option<crate::channel::Normalization>,
) -> Result<AngularDelayCsi> {
    if z.z.len() != params.arch.latent_dim {
        return Err(Error::dim("decode", &[z.z.len()], &[params.arch.latent_dim]));
    }
    let data = params.decode_batch(&z.z)?;
    AngularDelayCsi::new(params.arch.n_a, params.arch.n_t, data, norm)
}

/// `KL(N(μ, σ²) ‖ N(0, I)) = Σ ½(μ² + σ² − 1 − ln σ²)`.
pub fn kl_term(d: &CodewordDistribution) -> f64 {
    d.mu.iter()
        .zip(&d.log_sigma)
        .map(|(&m, &l)| {
            let (m, l) = (m as f64, l as f64);
            0.5 * (m * m + (2.0 * l).exp() - 1.0 - 2.0 * l)
        })
        .sum()
}

/// Reconstruction and KL terms of one evaluation of the objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub kl: f64,
    pub beta: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(recon: f64, kl: f64, beta: f64) -> Self {
        LossBreakdown {
            recon,
            kl,
            beta,
            total: recon + beta * kl,
        }
    }
}

/// Sum of squared errors plus `beta` times the KL term. Without a
/// distribution (point estimate) the KL term is zero.
pub fn prvnet_loss(
    x: &AngularDelayCsi,
    x_hat: &AngularDelayCsi,
    d: Option<&CodewordDistribution>,
    beta: f64,
) -> Result<LossBreakdown> {
    if x.shape() != x_hat.shape() {
        return Err(Error::dim("prvnet_loss", &x.shape(), &x_hat.shape()));
    }
    if beta < 0.0 {
        return Err(Error::Contract(format!("beta must be non-negative, got {beta}")));
    }
    let recon = x
        .data
        .iter()
        .zip(&x_hat.data)
        .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
        .sum();
    Ok(LossBreakdown::new(recon, d.map_or(0.0, kl_term), beta))
}

/// Apply an input dropout mask around `center`, so a dropped entry reads as
/// a zero CSI value rather than as the bottom of the normalized range.
pub fn apply_input_dropout(x: &[f32], mask: &[f32], center: f32) -> Vec<f32> {
    x.iter().zip(mask).map(|(v, k)| center + (v - center) * k).collect()
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f32, rng: &mut Rng) -> Vec<f32> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f32>() < rate { 0.0 } else { keep })
        .collect()
}

/// Deterministic codeword and reconstruction of the point-estimate
/// autoencoder. Passing `dropout` applies input dropout (training mode).
pub fn point_estimate_forward(
    x: &AngularDelayCsi,
    params: &ModelParams,
    dropout: Option<(f32, &mut Rng)>,
) -> Result<(Codeword, AngularDelayCsi)> {
    if params.mode != Mode::PointEstimate {
        return Err(Error::Contract(
            "point_estimate_forward needs a point-estimate model".into(),
        ));
    }
    check_input(&params.arch, x)?;
    let input: Vec<f32> = match dropout {
        Some((rate, rng)) => {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("dropout rate {rate} not in [0, 1)")));
            }
            let mask = dropout_mask(x.data.len(), rate, rng);
            apply_input_dropout(&x.data, &mask, params.arch.input_center)
        }
        None => x.data.clone(),
    };
    let (z, _) = params.encode_batch(&[&input])?;
    let recon = params.decode_batch(&z)?;
    Ok((
        Codeword {
            z,
            gamma: params.arch.gamma(),
        },
        AngularDelayCsi::new(params.arch.n_a, params.arch.n_t, recon, x.norm)?,
    ))
}

/// `μ + ε ⊙ exp(log σ)` on a graph; `eps` is a constant of the same shape.
pub fn reparameterize_var(g: &mut Graph, mu: Var, log_sigma: Var, eps: Var) -> Result<Var> {
    let sigma = g.exp(log_sigma);
    let noise = g.mul(eps, sigma)?;
    g.add(mu, noise)
}

/// Summed KL term on a graph.
pub fn kl_var(g: &mut Graph, mu: Var, log_sigma: Var) -> Result<Var> {
    let mu2 = g.square(mu);
    let two_ls = g.scale(log_sigma, 2.0);
    let var = g.exp(two_ls);
    let a = g.add(mu2, var)?;
    let b = g.sub(a, two_ls)?;
    let c = g.add_scalar(b, -1.0);
    let s = g.sum(c);
    Ok(g.scale(s, 0.5))
}

/// Summed squared error on a graph.
pub fn sse_var(g: &mut Graph, x: Var, x_hat: Var) -> Result<Var> {
    let d = g.sub(x, x_hat)?;
    let d2 = g.square(d);
    Ok(g.sum(d2))
}

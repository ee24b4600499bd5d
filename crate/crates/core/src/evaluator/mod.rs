// SPDX-License-Identifier: Apache-2.0

//! AWGN feedback channel, NMSE, and evaluation of trained models.

mod report;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::channel::{AngularDelayCsi, ChannelDataset, Split};
use crate::error::{Error, Result};
use crate::model::{Codeword, Mode, ModelParams};
use crate::rng::{self, stream, Purpose, Rng};

pub use report::{svg_line_plot, NmseReport, NmseRow, ReportMeta, CSV_HEADER};
pub use sweep::{
    baseline_compare, check_monotone, cr_sweep, eval_row, model_id, snr_sweep, BaselineComparison, Monotonicity,
    SnrSweep, DEFAULT_GAMMAS, DEFAULT_SNRS_DB,
};

/// NMSE reported for a perfect reconstruction instead of −∞.
pub const PERFECT_DB: f64 = -300.0;

/// Feedback-link signal-to-noise ratio. Serialized as `"clean"` or the dB value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Snr {
    Clean,
    Db(f64),
}

impl Snr {
    pub fn is_clean(self) -> bool {
        matches!(self, Snr::Clean)
    }
}

impl std::fmt::Display for Snr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Snr::Clean => f.write_str("clean"),
            Snr::Db(db) => write!(f, "{db}"),
        }
    }
}

impl From<Snr> for String {
    fn from(s: Snr) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Snr {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl std::str::FromStr for Snr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("clean") || s.eq_ignore_ascii_case("inf") {
            return Ok(Snr::Clean);
        }
        let db: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("invalid SNR {s:?}")))?;
        if !db.is_finite() {
            return Err(Error::Config(format!("invalid SNR {s:?}")));
        }
        Ok(Snr::Db(db))
    }
}

/// AWGN applied to codewords in transit. The noise variance is referenced to
/// the mean squared codeword element of the batch being sent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AwgnChannelConfig {
    pub snr: Snr,
    pub seed: u64,
}

/// Add `N(0, σ²)` noise to every element of `z`, with
/// `σ² = mean(z²) / 10^(snr/10)`. Returns `σ²`.
pub fn add_awgn_in_place(z: &mut [f32], snr_db: f64, rng: &mut Rng) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::Contract("cannot send an empty codeword batch".into()));
    }
    let power = z.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / z.len() as f64;
    if !(power > 0.0) {
        return Err(Error::Config(
            "codeword batch has zero power; SNR is undefined".into(),
        ));
    }
    let var = power / 10f64.powf(snr_db / 10.0);
    let std = var.sqrt();
    for v in z.iter_mut() {
        *v += (std * rng::normal_f64(rng)) as f32;
    }
    Ok(var)
}

/// Pass a batch of codewords through the feedback channel.
pub fn add_awgn(codewords: &[Codeword], cfg: &AwgnChannelConfig) -> Result<Vec<Codeword>> {
    if codewords.is_empty() {
        return Err(Error::Contract("cannot send an empty codeword batch".into()));
    }
    let Snr::Db(db) = cfg.snr else {
        return Ok(codewords.to_vec());
    };
    let mut flat: Vec<f32> = codewords.iter().flat_map(|c| c.z.iter().copied()).collect();
    add_awgn_in_place(&mut flat, db, &mut stream(cfg.seed, Purpose::ChannelNoise, 0))?;
    let mut rest = flat.as_slice();
    Ok(codewords
        .iter()
        .map(|c| {
            let (head, tail) = rest.split_at(c.z.len());
            rest = tail;
            Codeword {
                z: head.to_vec(),
                gamma: c.gamma,
            }
        })
        .collect())
}

/// How per-sample error ratios are combined into one dB figure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NmseConvention {
    /// `10·log10(mean(ratio))`.
    #[default]
    MeanRatio,
    /// `mean(10·log10(ratio))`.
    MeanDb,
}

/// NMSE over a set of samples, with the count of zero-norm targets skipped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NmseSummary {
    pub nmse_db: f64,
    pub n_used: usize,
    pub n_excluded: usize,
}

fn to_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(PERFECT_DB)
    } else {
        PERFECT_DB
    }
}

/// Combine per-sample `‖H − Ĥ‖² / ‖H‖²` ratios; `None` marks a zero-norm target.
pub fn combine_ratios(
    ratios: impl IntoIterator<Item = Option<f64>>,
    convention: NmseConvention,
) -> Result<NmseSummary> {
    let (mut acc, mut used, mut excluded) = (0.0, 0usize, 0usize);
    for r in ratios {
        match r {
            Some(r) => {
                acc += match convention {
                    NmseConvention::MeanRatio => r,
                    NmseConvention::MeanDb => to_db(r),
                };
                used += 1;
            }
            None => excluded += 1,
        }
    }
    if used == 0 {
        return Err(Error::Contract("no sample with a non-zero target norm".into()));
    }
    let mean = acc / used as f64;
    let nmse_db = match convention {
        NmseConvention::MeanRatio => to_db(mean),
        NmseConvention::MeanDb => mean,
    };
    Ok(NmseSummary {
        nmse_db,
        n_used: used,
        n_excluded: excluded,
    })
}

fn ratio(h: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut err, mut energy) = (0.0, 0.0);
    for (a, b) in h {
        err += (a - b).powi(2);
        energy += a * a;
    }
    (energy > 0.0).then(|| err / energy)
}

/// NMSE in dB between targets and reconstructions, on denormalized values.
pub fn nmse_summary(
    h: &[AngularDelayCsi],
    h_hat: &[AngularDelayCsi],
    convention: NmseConvention,
) -> Result<NmseSummary> {
    if h.len() != h_hat.len() {
        return Err(Error::dim("nmse_db", &[h.len()], &[h_hat.len()]));
    }
    let mut ratios = Vec::with_capacity(h.len());
    for (a, b) in h.iter().zip(h_hat) {
        if a.shape() != b.shape() {
            return Err(Error::dim("nmse_db", &a.shape(), &b.shape()));
        }
        let (a, b) = (crate::channel::denormalize(a), crate::channel::denormalize(b));
        ratios.push(ratio(
            a.data
                .iter()
                .zip(&b.data)
                .map(|(&x, &y)| (x as f64, y as f64)),
        ));
    }
    combine_ratios(ratios, convention)
}

/// `10·log10(mean ‖H − Ĥ‖² / ‖H‖²)`.
pub fn nmse_db(h: &[AngularDelayCsi], h_hat: &[AngularDelayCsi]) -> Result<f64> {
    Ok(nmse_summary(h, h_hat, NmseConvention::MeanRatio)?.nmse_db)
}

/// Which codeword the encoder transmits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transmit {
    /// The distribution mean `μ`.
    #[default]
    Mean,
    /// A fresh reparameterized sample `μ + ε ⊙ σ`.
    Sample,
}

/// Evaluation settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub split: EvalSplit,
    pub snr: Snr,
    /// Seed of the feedback-noise and sampling streams.
    pub seed: u64,
    pub transmit: Transmit,
    pub convention: NmseConvention,
    pub batch_size: usize,
}

/// Serializable mirror of [`Split`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Val,
    Test,
}

impl From<EvalSplit> for Split {
    fn from(s: EvalSplit) -> Split {
        match s {
            EvalSplit::Val => Split::Val,
            EvalSplit::Test => Split::Test,
        }
    }
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            split: EvalSplit::Test,
            snr: Snr::Clean,
            seed: 0,
            transmit: Transmit::Mean,
            convention: NmseConvention::MeanRatio,
            batch_size: 256,
        }
    }
}

/// Encode → (AWGN) → decode every sample of a split and score the result.
pub fn evaluate(
    model: &ModelParams,
    dataset: &ChannelDataset,
    opts: &EvalOptions,
) -> Result<NmseSummary> {
    let arch = &model.arch;
    if arch.n_a != dataset.n_a() || arch.n_t != dataset.n_t() {
        return Err(Error::dim(
            "evaluate",
            &[2, arch.n_a, arch.n_t],
            &[2, dataset.n_a(), dataset.n_t()],
        ));
    }
    let range = dataset.range(opts.split.into());
    if range.is_empty() {
        return Err(Error::Config("evaluation split is empty".into()));
    }
    let bs = opts.batch_size.max(1);
    let m = arch.latent_dim;
    let indices: Vec<usize> = range.collect();

    let mut codes = Vec::with_capacity(indices.len() * m);
    let mut eps_rng = stream(opts.seed, Purpose::Epsilon, u64::MAX);
    for chunk in indices.chunks(bs) {
        let records: Vec<&[f32]> = chunk.iter().map(|&i| dataset.record(i)).collect();
        let (mu, log_sigma) = model.encode_batch(&records)?;
        match (opts.transmit, log_sigma, model.mode) {
            (Transmit::Sample, Some(ls), Mode::Variational) => {
                codes.extend(
                    mu.iter()
                        .zip(&ls)
                        .map(|(mu, ls)| mu + rng::normal(&mut eps_rng) * ls.exp()),
                );
            }
            _ => codes.extend(mu),
        }
    }
    if let Snr::Db(db) = opts.snr {
        add_awgn_in_place(&mut codes, db, &mut stream(opts.seed, Purpose::ChannelNoise, 0))?;
    }

    let span = (dataset.norm.max - dataset.norm.min) as f64;
    let min = dataset.norm.min as f64;
    let mut ratios = Vec::with_capacity(indices.len());
    for (chunk, z) in indices.chunks(bs).zip(codes.chunks(bs * m)) {
        let recon = model.decode_batch(z)?;
        for (&i, out) in chunk.iter().zip(recon.chunks_exact(arch.input_len())) {
            let target = dataset.record(i);
            ratios.push(ratio(target.iter().zip(out).map(|(&x, &y)| {
                (x as f64 * span + min, y as f64 * span + min)
            })));
        }
    }
    combine_ratios(ratios, opts.convention)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csi(data: Vec<f32>) -> AngularDelayCsi {
        AngularDelayCsi::new(1, data.len() / 2, data, None).unwrap()
    }

    #[test]
    fn clean_channel_is_identity() {
        let cw = vec![Codeword {
            z: vec![0.1, -0.2, 0.3],
            gamma: 0.25,
        }];
        let cfg = AwgnChannelConfig {
            snr: Snr::Clean,
            seed: 1,
        };
        assert_eq!(add_awgn(&cw, &cfg).unwrap(), cw);
    }

    #[test]
    fn zero_power_and_empty_batches_are_rejected() {
        let cfg = AwgnChannelConfig {
            snr: Snr::Db(10.0),
            seed: 1,
        };
        let zero = vec![Codeword {
            z: vec![0.0; 4],
            gamma: 0.25,
        }];
        assert!(matches!(add_awgn(&zero, &cfg), Err(Error::Config(_))));
        assert!(add_awgn(&[], &cfg).is_err());
    }

    #[test]
    fn zero_db_noise_matches_signal_power() {
        let mut r = stream(3, Purpose::Dataset, 0);
        let clean: Vec<f32> = (0..100_000).map(|_| rng::normal(&mut r) * 0.7).collect();
        let mut noisy = clean.clone();
        let var = add_awgn_in_place(&mut noisy, 0.0, &mut stream(3, Purpose::ChannelNoise, 0)).unwrap();
        let p_sig = clean.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / clean.len() as f64;
        let p_noise = noisy
            .iter()
            .zip(&clean)
            .map(|(a, b)| ((a - b) as f64).powi(2))
            .sum::<f64>()
            / clean.len() as f64;
        assert!((var - p_sig).abs() < 1e-9 * p_sig);
        let r = p_noise / p_sig;
        assert!((0.95..=1.05).contains(&r), "{r}");
    }

    #[test]
    fn nmse_reference_values() {
        let h = csi(vec![1.0, -2.0, 0.5, 3.0]);
        let zero = csi(vec![0.0; 4]);
        assert!(nmse_db(&[h.clone()], &[zero]).unwrap().abs() < 1e-12);
        let double = csi(h.data.iter().map(|v| 2.0 * v).collect());
        assert!(nmse_db(&[h.clone()], &[double]).unwrap().abs() < 1e-12);
        let tenth = csi(h.data.iter().map(|v| 1.1 * v).collect());
        assert!((nmse_db(&[h.clone()], &[tenth]).unwrap() + 20.0).abs() < 1e-4);
        assert_eq!(nmse_db(&[h.clone()], &[h.clone()]).unwrap(), PERFECT_DB);
    }

    #[test]
    fn zero_norm_targets_are_excluded() {
        let h = csi(vec![1.0, 1.0]);
        let z = csi(vec![0.0, 0.0]);
        let s = nmse_summary(&[h.clone(), z.clone()], &[z.clone(), h], NmseConvention::MeanRatio)
            .unwrap();
        assert_eq!((s.n_used, s.n_excluded), (1, 1));
        assert!(s.nmse_db.abs() < 1e-12);
        assert!(nmse_summary(&[z.clone()], &[z], NmseConvention::MeanRatio).is_err());
    }

    #[test]
    fn conventions_differ_only_when_ratios_spread() {
        let same = [Some(0.01), Some(0.01)];
        let a = combine_ratios(same, NmseConvention::MeanRatio).unwrap();
        let b = combine_ratios(same, NmseConvention::MeanDb).unwrap();
        assert!((a.nmse_db - b.nmse_db).abs() < 1e-9);
        let spread = [Some(0.1), Some(0.001)];
        let a = combine_ratios(spread, NmseConvention::MeanRatio).unwrap();
        let b = combine_ratios(spread, NmseConvention::MeanDb).unwrap();
        assert!(a.nmse_db > b.nmse_db);
    }

    #[test]
    fn snr_parses() {
        assert_eq!("clean".parse::<Snr>().unwrap(), Snr::Clean);
        assert_eq!("23".parse::<Snr>().unwrap(), Snr::Db(23.0));
        assert!("loud".parse::<Snr>().is_err());
        assert_eq!(Snr::Db(23.0).to_string(), "23");
    }
}

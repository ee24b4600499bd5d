// SPDX-License-Identifier: Apache-2.0

//! Synthetic spatial-frequency channels and the angular-delay representation
//! the network consumes.
//!
//! A channel is an `n_c × n_t` complex matrix (subcarriers × ULA antennas)
//! built from `L` geometric paths. [`to_angular_delay`] applies unitary DFTs
//! along both axes, keeps the first `n_a` delay rows, and splits real and
//! imaginary parts into two image channels. Both transforms use the
//! `e^{+j2πkn/N}` kernel, so a path with delay `τ` samples lands in delay
//! row `τ` and a broadside path lands in angle column 0.

mod dataset;

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub use dataset::{build_dataset, split_counts, ChannelDataset, DatasetParams, Split};
pub(crate) use dataset::hex_digest;

/// Propagation environment preset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Indoor,
    Outdoor,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Indoor => "indoor",
            Scenario::Outdoor => "outdoor",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indoor" => Ok(Scenario::Indoor),
            "outdoor" => Ok(Scenario::Outdoor),
            other => Err(Error::Config(format!(
                "unknown scenario {other:?} (expected indoor or outdoor)"
            ))),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Geometric multipath model parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipathParams {
    pub n_paths: usize,
    /// RMS amplitude of the summed path gains.
    pub gain_scale: f64,
    /// Angle-of-departure range in radians, measured from broadside.
    pub aod_range: (f64, f64),
    /// Delay range in samples, half-open.
    pub delay_range: (f64, f64),
    /// Round delays down to whole samples. Fractional delays leak energy
    /// across every delay bin, so truncation is only lossless when set.
    pub integer_delays: bool,
    pub n_t: usize,
    pub n_c: usize,
}

impl MultipathParams {
    /// Few paths with short delays.
    pub fn indoor() -> Self {
        MultipathParams {
            n_paths: 4,
            gain_scale: 1.0,
            aod_range: (-PI / 2.0, PI / 2.0),
            delay_range: (0.0, 8.0),
            integer_delays: true,
            n_t: 32,
            n_c: 256,
        }
    }

    /// More paths spread over the whole retained delay window.
    pub fn outdoor() -> Self {
        MultipathParams {
            n_paths: 12,
            gain_scale: 1.0,
            aod_range: (-PI / 3.0, PI / 3.0),
            delay_range: (0.0, 32.0),
            integer_delays: true,
            n_t: 32,
            n_c: 256,
        }
    }

    pub fn for_scenario(scenario: Scenario) -> Self {
        match scenario {
            Scenario::Indoor => Self::indoor(),
            Scenario::Outdoor => Self::outdoor(),
        }
    }

    pub fn validate(&self, n_a: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_paths == 0 {
            return bad("at least one path is required".into());
        }
        if self.n_t == 0 || self.n_c == 0 {
            return bad("antenna and subcarrier counts must be positive".into());
        }
        if n_a == 0 || n_a > self.n_c {
            return bad(format!("n_a = {n_a} must lie in 1..={}", self.n_c));
        }
        let (lo, hi) = self.delay_range;
        if !(lo >= 0.0 && lo < hi && hi <= n_a as f64) {
            return bad(format!("delay range {lo}..{hi} must lie within [0, {n_a})"));
        }
        let (a, b) = self.aod_range;
        if !(a <= b && a >= -PI / 2.0 && b <= PI / 2.0) {
            return bad(format!("angle range {a}..{b} must lie within [-pi/2, pi/2]"));
        }
        if !(self.gain_scale > 0.0) {
            return bad("gain scale must be positive".into());
        }
        Ok(())
    }
}

/// One propagation path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    pub delay: f64,
    pub aod: f64,
}

/// Complex channel matrix, row `n` is subcarrier `n`, column `t` antenna `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialFrequencyChannel {
    pub n_c: usize,
    pub n_t: usize,
    pub data: Vec<Complex64>,
    pub scenario: Scenario,
}

impl SpatialFrequencyChannel {
    pub fn at(&self, n: usize, t: usize) -> Complex64 {
        self.data[n * self.n_t + t]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Sum of the steering responses of the given paths.
    pub fn from_paths(n_c: usize, n_t: usize, paths: &[Path], scenario: Scenario) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); n_c * n_t];
        for p in paths {
            let spatial = PI * p.aod.sin();
            let steer: Vec<Complex64> = (0..n_t)
                .map(|t| Complex64::from_polar(1.0, -spatial * t as f64))
                .collect();
            for n in 0..n_c {
                let phase = -2.0 * PI * n as f64 * p.delay / n_c as f64;
                let g = p.gain * Complex64::from_polar(1.0, phase);
                for (cell, s) in data[n * n_t..(n + 1) * n_t].iter_mut().zip(&steer) {
                    *cell += g * s;
                }
            }
        }
        SpatialFrequencyChannel {
            n_c,
            n_t,
            data,
            scenario,
        }
    }
}

/// Draw random paths for `params` from `rng`.
pub fn draw_paths(params: &MultipathParams, rng: &mut Rng) -> Vec<Path> {
    let amp = params.gain_scale / (2.0 * params.n_paths as f64).sqrt();
    (0..params.n_paths)
        .map(|_| {
            let gain = Complex64::new(amp * rng::normal_f64(rng), amp * rng::normal_f64(rng));
            let mut delay = rng::uniform(rng, params.delay_range.0, params.delay_range.1);
            if params.integer_delays {
                delay = delay.floor();
            }
            let aod = rng::uniform(rng, params.aod_range.0, params.aod_range.1);
            Path { gain, delay, aod }
        })
        .collect()
}

/// Generate one channel realization; a pure function of `(params, rng state)`.
pub fn generate_channel(
    params: &MultipathParams,
    scenario: Scenario,
    rng: &mut Rng,
) -> SpatialFrequencyChannel {
    let paths = draw_paths(params, rng);
    SpatialFrequencyChannel::from_paths(params.n_c, params.n_t, &paths, scenario)
}

/// Affine map used to bring angular-delay values into `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f32,
    pub max: f32,
}

impl Normalization {
    pub fn new(min: f32, max: f32) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::Config(format!(
                "degenerate normalization range [{min}, {max}]"
            )));
        }
        Ok(Normalization { min, max })
    }

    /// Global min/max over every value of `records`.
    pub fn fit<'a>(records: impl IntoIterator<Item = &'a [f32]>) -> Result<Self> {
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        for r in records {
            for &v in r {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Self::new(lo, hi)
    }

    pub fn forward(&self, v: f32) -> f32 {
        ((v as f64 - self.min as f64) / self.span()) as f32
    }

    pub fn inverse(&self, v: f32) -> f32 {
        (v as f64 * self.span() + self.min as f64) as f32
    }

    /// Normalized value of a raw zero.
    pub fn zero_level(&self) -> f32 {
        self.forward(0.0)
    }

    fn span(&self) -> f64 {
        self.max as f64 - self.min as f64
    }
}

/// Truncated angular-delay CSI as a `2 × n_a × n_t` real image
/// (channel 0 real part, channel 1 imaginary part).
#[derive(Clone, Debug, PartialEq)]
pub struct AngularDelayCsi {
    pub n_a: usize,
    pub n_t: usize,
    pub data: Vec<f32>,
    /// Present when `data` holds normalized values.
    pub norm: Option<Normalization>,
}

impl AngularDelayCsi {
    pub fn new(n_a: usize, n_t: usize, data: Vec<f32>, norm: Option<Normalization>) -> Result<Self> {
        if data.len() != 2 * n_a * n_t {
            return Err(Error::dim("angular-delay csi", &[2, n_a, n_t], &[data.len()]));
        }
        Ok(AngularDelayCsi {
            n_a,
            n_t,
            data,
            norm,
        })
    }

    pub fn zeros(n_a: usize, n_t: usize) -> Self {
        AngularDelayCsi {
            n_a,
            n_t,
            data: vec![0.0; 2 * n_a * n_t],
            norm: None,
        }
    }

    /// Flattened length `N = 2·n_a·n_t`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> [usize; 3] {
        [2, self.n_a, self.n_t]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64).powi(2)).sum()
    }
}

/// Map values into `[0, 1]` with `norm`. Values outside the fitted range are
/// not clamped.
pub fn normalize(csi: &AngularDelayCsi, norm: Normalization) -> Result<AngularDelayCsi> {
    if csi.norm.is_some() {
        return Err(Error::Contract("csi is already normalized".into()));
    }
    Ok(AngularDelayCsi {
        data: csi.data.iter().map(|&v| norm.forward(v)).collect(),
        norm: Some(norm),
        ..*csi
    })
}

/// Undo [`normalize`]; a raw input is returned unchanged.
pub fn denormalize(csi: &AngularDelayCsi) -> AngularDelayCsi {
    match csi.norm {
        None => csi.clone(),
        Some(norm) => AngularDelayCsi {
            data: csi.data.iter().map(|&v| norm.inverse(v)).collect(),
            norm: None,
            ..*csi
        },
    }
}

fn fft_columns(data: &mut [Complex64], rows: usize, cols: usize, dir: FftDirection) {
    let fft = FftPlanner::new().plan_fft(rows, dir);
    let mut buf = vec![Complex64::new(0.0, 0.0); rows];
    let scale = 1.0 / (rows as f64).sqrt();
    for c in 0..cols {
        for r in 0..rows {
            buf[r] = data[r * cols + c];
        }
        fft.process(&mut buf);
        for r in 0..rows {
            data[r * cols + c] = buf[r] * scale;
        }
    }
}

fn fft_rows(data: &mut [Complex64], cols: usize, dir: FftDirection) {
    let fft = FftPlanner::new().plan_fft(cols, dir);
    let scale = 1.0 / (cols as f64).sqrt();
    for row in data.chunks_exact_mut(cols) {
        fft.process(row);
        row.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Full `n_c × n_t` angular-delay matrix before truncation.
pub fn angular_delay_full(h: &SpatialFrequencyChannel) -> Vec<Complex64> {
    let mut data = h.data.clone();
    fft_columns(&mut data, h.n_c, h.n_t, FftDirection::Inverse);
    fft_rows(&mut data, h.n_t, FftDirection::Inverse);
    data
}

/// Inverse of [`angular_delay_full`].
pub fn spatial_frequency_full(
    data: &[Complex64],
    n_c: usize,
    n_t: usize,
    scenario: Scenario,
) -> SpatialFrequencyChannel {
    let mut data = data.to_vec();
    fft_rows(&mut data, n_t, FftDirection::Forward);
    fft_columns(&mut data, n_c, n_t, FftDirection::Forward);
    SpatialFrequencyChannel {
        n_c,
        n_t,
        data,
        scenario,
    }
}

/// Sparsify into the angular-delay domain and keep the first `n_a` delay rows.
pub fn to_angular_delay(h: &SpatialFrequencyChannel, n_a: usize) -> Result<AngularDelayCsi> {
    if n_a == 0 || n_a > h.n_c {
        return Err(Error::Config(format!(
            "n_a = {n_a} must lie in 1..={}",
            h.n_c
        )));
    }
    let full = angular_delay_full(h);
    let plane = n_a * h.n_t;
    let mut data = vec![0.0f32; 2 * plane];
    for (i, c) in full[..plane].iter().enumerate() {
        data[i] = c.re as f32;
        data[plane + i] = c.im as f32;
    }
    AngularDelayCsi::new(n_a, h.n_t, data, None)
}

/// Denormalize, zero-pad the delay rows back to `n_c`, and invert both DFTs.
pub fn from_angular_delay(
    csi: &AngularDelayCsi,
    n_c: usize,
    scenario: Scenario,
) -> Result<SpatialFrequencyChannel> {
    if csi.n_a > n_c {
        return Err(Error::Config(format!(
            "n_a = {} exceeds the subcarrier count {n_c}",
            csi.n_a
        )));
    }
    let raw = denormalize(csi);
    let plane = csi.n_a * csi.n_t;
    let mut full = vec![Complex64::new(0.0, 0.0); n_c * csi.n_t];
    for i in 0..plane {
        full[i] = Complex64::new(raw.data[i] as f64, raw.data[plane + i] as f64);
    }
    Ok(spatial_frequency_full(&full, n_c, csi.n_t, scenario))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn single_path(delay: f64, aod: f64, n_c: usize) -> SpatialFrequencyChannel {
        let p = Path {
            gain: Complex64::new(1.0, 0.0),
            delay,
            aod,
        };
        SpatialFrequencyChannel::from_paths(n_c, 32, &[p], Scenario::Indoor)
    }

    /// Direct O(N^2) evaluation of the unitary transform pair used by
    /// `to_angular_delay`, independent of the FFT path.
    fn naive_angular_delay(h: &SpatialFrequencyChannel) -> Vec<Complex64> {
        let (nc, nt) = (h.n_c, h.n_t);
        let mut out = vec![Complex64::new(0.0, 0.0); nc * nt];
        let s = 1.0 / ((nc * nt) as f64).sqrt();
        for k in 0..nc {
            for a in 0..nt {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..nc {
                    for t in 0..nt {
                        let ph = 2.0 * PI * ((k * n) as f64 / nc as f64 + (a * t) as f64 / nt as f64);
                        acc += h.at(n, t) * Complex64::from_polar(1.0, ph);
                    }
                }
                out[k * nt + a] = acc * s;
            }
        }
        out
    }

    #[test]
    fn broadside_zero_delay_path_is_all_ones() {
        let h = single_path(0.0, 0.0, 16);
        assert!(h
            .data
            .iter()
            .all(|c| (c.re - 1.0).abs() < 1e-12 && c.im.abs() < 1e-12));
    }

    #[test]
    fn constant_channel_is_an_impulse_in_row_zero() {
        let h = single_path(0.0, 0.0, 64);
        let csi = to_angular_delay(&h, 8).unwrap();
        let e0: f64 = (0..32)
            .map(|t| (csi.data[t] as f64).powi(2) + (csi.data[8 * 32 + t] as f64).powi(2))
            .sum();
        assert!((e0 - h.energy()).abs() < 1e-6 * h.energy());
    }

    #[test]
    fn integer_delay_lands_in_its_row() {
        let h = single_path(3.0, 0.0, 64);
        let csi = to_angular_delay(&h, 8).unwrap();
        let plane = 8 * 32;
        let row3: f64 = (3 * 32..4 * 32)
            .map(|i| (csi.data[i] as f64).powi(2) + (csi.data[plane + i] as f64).powi(2))
            .sum();
        assert!(row3 > 0.99 * h.energy());
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let params = MultipathParams {
            n_c: 16,
            n_t: 8,
            delay_range: (0.0, 4.0),
            integer_delays: false,
            ..MultipathParams::indoor()
        };
        let h = generate_channel(&params, Scenario::Indoor, &mut stream(5, Purpose::Dataset, 0));
        let fast = angular_delay_full(&h);
        let slow = naive_angular_delay(&h);
        let err = fast
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "max error {err}");
    }

    #[test]
    fn untruncated_round_trip_is_exact() {
        let params = MultipathParams::outdoor();
        let h = generate_channel(&params, Scenario::Outdoor, &mut stream(9, Purpose::Dataset, 3));
        let full = angular_delay_full(&h);
        let norm_in: f64 = h.energy();
        let norm_ad: f64 = full.iter().map(|c| c.norm_sqr()).sum();
        assert!((norm_in - norm_ad).abs() < 1e-5 * norm_in);
        let back = spatial_frequency_full(&full, h.n_c, h.n_t, h.scenario);
        let err = back
            .data
            .iter()
            .zip(&h.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "max error {err}");

        let csi = to_angular_delay(&h, h.n_c).unwrap();
        let back = from_angular_delay(&csi, h.n_c, h.scenario).unwrap();
        let err = back
            .data
            .iter()
            .zip(&h.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "max error {err}");
    }

    #[test]
    fn zero_csi_gives_zero_channel() {
        let h = from_angular_delay(&AngularDelayCsi::zeros(32, 32), 256, Scenario::Indoor).unwrap();
        assert!(h.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn symmetric_range_maps_zero_to_half() {
        let n = Normalization::new(-3.0, 3.0).unwrap();
        assert_eq!(n.forward(0.0), 0.5);
        assert!(Normalization::new(1.0, 1.0).is_err());
        let out_of_range = n.forward(4.5);
        assert!(out_of_range > 1.0, "no clamping: {out_of_range}");
    }

    #[test]
    fn normalize_round_trip() {
        let csi = AngularDelayCsi::new(2, 2, vec![-1.5, 0.25, 3.0, 0.0, 1e-3, -0.7, 2.2, 1.1], None)
            .unwrap();
        let norm = Normalization::fit([csi.data.as_slice()]).unwrap();
        let n = normalize(&csi, norm).unwrap();
        assert!(n.data.iter().all(|v| (0.0..=1.0).contains(v)));
        let back = denormalize(&n);
        let num: f64 = back.data.iter().zip(&csi.data).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
        assert!(num.sqrt() < 1e-6 * csi.energy().sqrt());
        assert!(normalize(&n, norm).is_err());
    }

    #[test]
    fn validate_rejects_out_of_window_delays() {
        let mut p = MultipathParams::indoor();
        assert!(p.validate(32).is_ok());
        p.delay_range = (0.0, 40.0);
        assert!(p.validate(32).is_err());
        p = MultipathParams::indoor();
        p.n_paths = 0;
        assert!(p.validate(32).is_err());
    }
}

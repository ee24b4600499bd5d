// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::evaluator::{NmseConvention, Transmit, DEFAULT_GAMMAS, DEFAULT_SNRS_DB};
use crate::model::Mode;
use crate::trainer::TrainConfig;

/// Merged configuration of one run. Every field has a default; a TOML file
/// overrides defaults and command-line flags override the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub anneal: AnnealSection,
    pub eval: EvalSection,
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub count: usize,
    pub scenario: Scenario,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub mode: Mode,
    pub encoder_channels: Vec<usize>,
    pub decoder_channels: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSection {
    /// Train once at this fixed β instead of annealing and retraining.
    pub beta_fixed: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// SNR grid in dB; empty means a single clean row.
    pub snrs: Vec<f64>,
    pub include_clean: bool,
    pub transmit: Transmit,
    pub convention: NmseConvention,
    pub svg: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub gammas: Vec<f64>,
    pub parallel: usize,
    pub baseline_compare: bool,
    pub snrs: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: None,
            dataset: DatasetSection::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            anneal: AnnealSection::default(),
            eval: EvalSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            count: 2000,
            scenario: Scenario::Indoor,
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            mode: Mode::Variational,
            encoder_channels: vec![8, 2],
            decoder_channels: vec![8, 8],
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            snrs: Vec::new(),
            include_clean: true,
            transmit: Transmit::Mean,
            convention: NmseConvention::MeanRatio,
            svg: false,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            gammas: DEFAULT_GAMMAS.to_vec(),
            parallel: 1,
            baseline_compare: false,
            snrs: DEFAULT_SNRS_DB.to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.sweep.parallel == 0 {
            return Err(Error::Config("--parallel must be at least 1".into()));
        }
        if let Some(b) = self.anneal.beta_fixed {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::Config(format!("fixed β must be non-negative, got {b}")));
            }
            if self.model.mode == Mode::PointEstimate && b != 0.0 {
                return Err(Error::Config(
                    "the point-estimate baseline has no KL term; use --beta-fixed 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Parse `1/4`, `0.25`, or `1`.
pub fn parse_gamma(s: &str) -> Result<f64> {
    let bad = || Error::Config(format!("invalid compression ratio {s:?}"));
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| bad())?;
            let d: f64 = d.trim().parse().map_err(|_| bad())?;
            n / d
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if !(v > 0.0 && v <= 1.0) {
        return Err(bad());
    }
    Ok(v)
}

/// Parse a comma-separated list of compression ratios.
pub fn parse_gamma_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_gamma).collect()
}

// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    generate_channel, normalize, to_angular_delay, AngularDelayCsi, MultipathParams,
    Normalization, Scenario,
};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

const MAGIC: &[u8; 4] = b"PRVC";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 7 + 4 * 2;

/// Everything needed to regenerate a dataset besides `count` and `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub scenario: Scenario,
    pub multipath: MultipathParams,
    /// Delay rows kept after truncation.
    pub n_a: usize,
}

impl DatasetParams {
    pub fn for_scenario(scenario: Scenario) -> Self {
        DatasetParams {
            scenario,
            multipath: MultipathParams::for_scenario(scenario),
            n_a: 32,
        }
    }

    pub fn input_len(&self) -> usize {
        2 * self.n_a * self.multipath.n_t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format_version: u32,
    count: usize,
    seed: u64,
    params: DatasetParams,
}

/// Normalized angular-delay samples split 10:3:2 into train/val/test.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDataset {
    pub params: DatasetParams,
    pub seed: u64,
    pub norm: Normalization,
    splits: [usize; 3],
    data: Vec<f32>,
}

/// Train/val/test sizes for `count` samples in a 10:3:2 ratio.
pub fn split_counts(count: usize) -> [usize; 3] {
    let train = count * 10 / 15;
    let val = count * 3 / 15;
    [train, val, count - train - val]
}

/// Generate `count` channels and normalize them with train-split statistics.
pub fn build_dataset(params: &DatasetParams, count: usize, seed: u64) -> Result<ChannelDataset> {
    if count < 15 {
        return Err(Error::Config(format!(
            "dataset needs at least 15 samples for a 10:3:2 split, got {count}"
        )));
    }
    params.multipath.validate(params.n_a)?;
    let raw: Vec<AngularDelayCsi> = (0..count)
        .map(|i| {
            let mut rng = stream(seed, Purpose::Dataset, i as u64);
            let h = generate_channel(&params.multipath, params.scenario, &mut rng);
            to_angular_delay(&h, params.n_a)
        })
        .collect::<Result<_>>()?;
    let splits = split_counts(count);
    let norm = Normalization::fit(raw[..splits[0]].iter().map(|c| c.data.as_slice()))?;
    let mut data = Vec::with_capacity(count * params.input_len());
    for csi in &raw {
        data.extend(normalize(csi, norm)?.data);
    }
    Ok(ChannelDataset {
        params: params.clone(),
        seed,
        norm,
        splits,
        data,
    })
}

impl ChannelDataset {
    pub fn len(&self) -> usize {
        self.splits.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_a(&self) -> usize {
        self.params.n_a
    }

    pub fn n_t(&self) -> usize {
        self.params.multipath.n_t
    }

    pub fn n_c(&self) -> usize {
        self.params.multipath.n_c
    }

    /// Flattened sample length `N`.
    pub fn input_len(&self) -> usize {
        self.params.input_len()
    }

    pub fn split_counts(&self) -> [usize; 3] {
        self.splits
    }

    pub fn range(&self, split: Split) -> Range<usize> {
        let [tr, va, te] = self.splits;
        match split {
            Split::Train => 0..tr,
            Split::Val => tr..tr + va,
            Split::Test => tr + va..tr + va + te,
        }
    }

    /// Normalized values of sample `i`.
    pub fn record(&self, i: usize) -> &[f32] {
        let n = self.input_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn sample(&self, i: usize) -> AngularDelayCsi {
        AngularDelayCsi {
            n_a: self.n_a(),
            n_t: self.n_t(),
            data: self.record(i).to_vec(),
            norm: Some(self.norm),
        }
    }

    /// Keep only the first `per_split[k]` samples of each split. Normalization
    /// is kept as fitted on the original training split.
    pub fn truncated(&self, per_split: [usize; 3]) -> Result<Self> {
        let mut data = Vec::new();
        for (split, &keep) in [Split::Train, Split::Val, Split::Test].iter().zip(&per_split) {
            let r = self.range(*split);
            if keep == 0 || keep > r.len() {
                return Err(Error::Config(format!(
                    "cannot keep {keep} of {} {split:?} samples",
                    r.len()
                )));
            }
            for i in r.start..r.start + keep {
                data.extend_from_slice(self.record(i));
            }
        }
        Ok(ChannelDataset {
            splits: per_split,
            data,
            ..self.clone()
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        let header = [
            VERSION,
            self.len() as u32,
            self.n_a() as u32,
            self.n_t() as u32,
            self.splits[0] as u32,
            self.splits[1] as u32,
            self.splits[2] as u32,
        ];
        for v in header {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.norm.min.to_le_bytes());
        out.extend_from_slice(&self.norm.max.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    fn from_parts(bytes: &[u8], sidecar: Sidecar) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            kind: "dataset",
            reason,
        };
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(bad("missing PRVC header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let float = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if word(0) != VERSION {
            return Err(bad(format!("unsupported version {}", word(0))));
        }
        let (count, n_a, n_t) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let splits = [word(4) as usize, word(5) as usize, word(6) as usize];
        if splits.iter().sum::<usize>() != count {
            return Err(bad(format!("split counts {splits:?} do not sum to {count}")));
        }
        let p = &sidecar.params;
        if count != sidecar.count || n_a != p.n_a || n_t != p.multipath.n_t {
            return Err(bad("header disagrees with sidecar".into()));
        }
        let norm = Normalization::new(float(HEADER_LEN - 8), float(HEADER_LEN - 4))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != 4 * count * 2 * n_a * n_t {
            return Err(bad(format!(
                "expected {} record bytes, found {}",
                4 * count * 2 * n_a * n_t,
                body.len()
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ChannelDataset {
            params: sidecar.params,
            seed: sidecar.seed,
            norm,
            splits,
            data,
        })
    }

    /// Where the JSON sidecar for a dataset file at `path` lives.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    pub fn sidecar_json(&self) -> Result<String> {
        let sidecar = Sidecar {
            format_version: VERSION,
            count: self.len(),
            seed: self.seed,
            params: self.params.clone(),
        };
        Ok(serde_json::to_string_pretty(&sidecar)?)
    }

    /// Write the binary file and its `<path>.json` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let side = Self::sidecar_path(path);
        fs::write(&side, self.sidecar_json()?).map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let side = Self::sidecar_path(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        Self::from_parts(&bytes, serde_json::from_str(&text)?)
    }

    /// Hex SHA-256 of the binary encoding.
    pub fn hash(&self) -> String {
        hex_digest(&self.to_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params() -> DatasetParams {
        let mut p = DatasetParams::for_scenario(Scenario::Indoor);
        p.multipath.n_c = 64;
        p.multipath.n_t = 8;
        p.n_a = 16;
        p
    }

    #[test]
    fn split_ratio_at_several_scales() {
        assert_eq!(split_counts(150), [100, 30, 20]);
        assert_eq!(split_counts(15), [10, 3, 2]);
        assert_eq!(split_counts(150_000), [100_000, 30_000, 20_000]);
        for n in 15..200 {
            assert_eq!(split_counts(n).iter().sum::<usize>(), n);
        }
    }

    #[test]
    fn too_small_is_a_config_error() {
        assert!(matches!(
            build_dataset(&small_params(), 14, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn train_split_is_inside_unit_interval() {
        let ds = build_dataset(&small_params(), 30, 4).unwrap();
        for i in ds.range(Split::Train) {
            assert!(ds.record(i).iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert_eq!(ds.split_counts(), [20, 6, 4]);
    }

    #[test]
    fn bytes_round_trip_and_are_deterministic() {
        let p = small_params();
        let a = build_dataset(&p, 15, 2).unwrap();
        let b = build_dataset(&p, 15, 2).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let side: Sidecar = serde_json::from_str(&a.sidecar_json().unwrap()).unwrap();
        let back = ChannelDataset::from_parts(&a.to_bytes(), side).unwrap();
        assert_eq!(back, a);
        let c = build_dataset(&p, 15, 3).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let a = build_dataset(&small_params(), 15, 2).unwrap();
        let side = || serde_json::from_str::<Sidecar>(&a.sidecar_json().unwrap()).unwrap();
        let mut bytes = a.to_bytes();
        bytes[0] = b'X';
        assert!(ChannelDataset::from_parts(&bytes, side()).is_err());
        let mut bytes = a.to_bytes();
        bytes.truncate(bytes.len() - 4);
        assert!(ChannelDataset::from_parts(&bytes, side()).is_err());
    }
}

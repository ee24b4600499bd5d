// SPDX-License-Identifier: Apache-2.0

//! Binary checkpoint encoding.
//!
//! Little-endian layout:
//!
//! ```text
//! "PRVW" | version u32 | arch_len u32 | arch JSON (arch_len bytes)
//!        | M u32 | mode u32 (0 variational, 1 point estimate)
//!        | tensor count u32 | f32 values of every tensor in layout order
//! ```

use std::fs;
use std::path::Path;

use super::{layout, Architecture, Mode, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &[u8; 4] = b"PRVW";
const VERSION: u32 = 1;

fn bad(reason: impl Into<String>) -> Error {
    Error::Format {
        kind: "checkpoint",
        reason: reason.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad("truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

impl ModelParams {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let arch = serde_json::to_vec(&self.arch)?;
        let mut out = Vec::with_capacity(32 + arch.len() + 4 * self.num_parameters());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(arch.len() as u32).to_le_bytes());
        out.extend_from_slice(&arch);
        out.extend_from_slice(&(self.arch.latent_dim as u32).to_le_bytes());
        let mode: u32 = match self.mode {
            Mode::Variational => 0,
            Mode::PointEstimate => 1,
        };
        out.extend_from_slice(&mode.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(bad("missing PRVW header"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let len = r.u32()? as usize;
        let arch: Architecture = serde_json::from_slice(r.take(len)?)?;
        if r.u32()? as usize != arch.latent_dim {
            return Err(bad("codeword length disagrees with architecture"));
        }
        let mode = match r.u32()? {
            0 => Mode::Variational,
            1 => Mode::PointEstimate,
            other => return Err(bad(format!("unknown mode flag {other}"))),
        };
        let specs = layout(&arch, mode);
        if r.u32()? as usize != specs.len() {
            return Err(bad("tensor count disagrees with architecture"));
        }
        let mut tensors = Vec::with_capacity(specs.len());
        for s in &specs {
            let n: usize = s.shape.iter().product();
            let raw = r.take(4 * n)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(Tensor::new(&s.shape, data)?);
        }
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        ModelParams::from_tensors(arch, mode, tensors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "epoch,beta,recon_loss,kl_loss,total_loss,val_nmse_db";

/// One completed epoch.
///
/// `recon` and `kl` are per-sample means over the epoch's batches and
/// `beta` is the weight of the epoch's last update, so
/// `total = recon + beta·kl` holds exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Gradient updates completed so far; the trace's logical clock.
    pub update: u64,
    pub beta: f64,
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
    pub val_nmse_db: f64,
}

impl EpochRecord {
    pub fn new(epoch: usize, update: u64, beta: f64, recon: f64, kl: f64, val_nmse_db: f64) -> Self {
        EpochRecord {
            epoch,
            update,
            beta,
            recon,
            kl,
            total: recon + beta * kl,
            val_nmse_db,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn push(&mut self, r: EpochRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.beta, r.recon, r.kl, r.total, r.val_nmse_db
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_one_line_per_epoch() {
        let mut t = TrainTrace::default();
        t.push(EpochRecord::new(1, 10, 0.0, 2.0, 3.0, -1.5));
        t.push(EpochRecord::new(2, 20, 0.5, 1.0, 2.0, -2.5));
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines[2], "2,0.5,1,2,2,-2.5");
        assert_eq!(lines.len(), 3);
    }
}

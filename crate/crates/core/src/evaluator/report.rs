// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Snr;
use crate::channel::Scenario;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "gamma,scenario,snr_db,nmse_db,n_samples,model_id,seed";

/// One evaluated configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmseRow {
    pub gamma: f64,
    pub scenario: Scenario,
    pub snr: Snr,
    pub nmse_db: f64,
    pub n_samples: usize,
    pub model_id: String,
    pub seed: u64,
}

impl NmseRow {
    fn fields(&self) -> [String; 7] {
        [
            format!("{}", self.gamma),
            self.scenario.to_string(),
            self.snr.to_string(),
            format!("{:.4}", self.nmse_db),
            self.n_samples.to_string(),
            self.model_id.clone(),
            self.seed.to_string(),
        ]
    }

    pub fn csv_line(&self) -> String {
        self.fields().join(",")
    }
}

/// Provenance shared by every row of a report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub dataset_hash: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NmseReport {
    pub rows: Vec<NmseRow>,
    pub meta: ReportMeta,
}

impl NmseReport {
    pub fn new(meta: ReportMeta) -> Self {
        NmseReport {
            rows: Vec::new(),
            meta,
        }
    }

    pub fn extend(&mut self, other: NmseReport) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parse a report written by [`NmseReport::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            kind: "report",
            reason,
        };
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(bad("unexpected header".into()));
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(format!("expected 7 fields in {line:?}")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
            rows.push(NmseRow {
                gamma: num(f[0])?,
                scenario: f[1].parse()?,
                snr: f[2].parse()?,
                nmse_db: num(f[3])?,
                n_samples: f[4].parse().map_err(|_| bad(format!("bad count {:?}", f[4])))?,
                model_id: f[5].to_string(),
                seed: f[6].parse().map_err(|_| bad(format!("bad seed {:?}", f[6])))?,
            });
        }
        Ok(NmseReport {
            rows,
            meta: ReportMeta::default(),
        })
    }

    /// Fixed-width table with the CSV column order.
    pub fn summary_table(&self) -> String {
        let header: Vec<&str> = CSV_HEADER.split(',').collect();
        let body: Vec<[String; 7]> = self.rows.iter().map(NmseRow::fields).collect();
        let widths: Vec<usize> = (0..7)
            .map(|c| {
                body.iter()
                    .map(|r| r[c].len())
                    .chain([header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let line = |cells: &[&str], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            out.push_str(parts.join("  ").trim_end());
            out.push('\n');
        };
        line(&header, &mut out);
        for r in &body {
            let cells: Vec<&str> = r.iter().map(String::as_str).collect();
            line(&cells, &mut out);
        }
        out
    }

    fn series_by_model(&self, keep: impl Fn(&NmseRow) -> Option<f64>) -> Vec<(String, Vec<(f64, f64)>)> {
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for r in &self.rows {
            let Some(x) = keep(r) else { continue };
            let label = r.model_id.split('/').next().unwrap_or(&r.model_id).to_string();
            match series.iter_mut().find(|(l, _)| *l == label) {
                Some((_, pts)) => pts.push((x, r.nmse_db)),
                None => series.push((label, vec![(x, r.nmse_db)])),
            }
        }
        for (_, pts) in &mut series {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        series
    }

    /// NMSE against compression factor `1/γ` for the clean rows.
    pub fn svg_vs_compression(&self) -> String {
        let series = self.series_by_model(|r| r.snr.is_clean().then(|| 1.0 / r.gamma));
        svg_line_plot("NMSE vs compression", "1/gamma", "NMSE (dB)", &series)
    }

    /// NMSE against SNR for the noisy rows.
    pub fn svg_vs_snr(&self) -> String {
        let series = self.series_by_model(|r| match r.snr {
            Snr::Db(db) => Some(db),
            Snr::Clean => None,
        });
        svg_line_plot("NMSE vs SNR", "SNR (dB)", "NMSE (dB)", &series)
    }
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal standalone SVG line chart.
pub fn svg_line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let (w, h, pad) = (640.0, 400.0, 60.0);
    let pts = || series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}" stroke="black"/>"#,
        b = h - pad,
        r = w - pad
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{fx:.3}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{fy:.2}</text>"#,
            sx(fx),
            h - pad + 16.0,
            pad - 6.0,
            sy(fy) + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, w / 2.0, h - 18.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (k, (label, p)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in p {
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{label}</text>"#,
            w - pad - 120.0,
            pad + 16.0 * (k as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

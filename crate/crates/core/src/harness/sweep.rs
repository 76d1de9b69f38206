//! Mean test AUC as a function of reference-set size.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, TOOL_VERSION};
use super::experiment::{run_experiment_on, EvalReport};
use crate::error::{Error, Result};
use crate::model::{FeatureStore, SuccessMatrix};

pub const SWEEP_COLUMNS: [&str; 5] = ["generic", "specific", "random_selector", "reference_only", "all_train_data"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_ref: usize,
    pub winner: String,
    /// Mean test AUC per assessor, in [`SWEEP_COLUMNS`] order.
    pub mean_test_auc: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub tool_version: String,
    pub config_digest: String,
    pub rows: Vec<SweepRow>,
}

impl SweepRow {
    fn from_report(report: &EvalReport) -> Self {
        Self {
            n_ref: report.n_ref,
            winner: report.winner.clone(),
            mean_test_auc: report.assessors().iter().map(|a| a.mean_test_auc).collect(),
        }
    }

    pub fn generic(&self) -> Option<f64> {
        self.mean_test_auc[0]
    }
}

/// One full run per `n_ref`, all with the config's seed.
pub fn sweep_n_ref(matrix: &SuccessMatrix, store: &FeatureStore, config: &RunConfig, n_refs: &[usize]) -> Result<SweepTable> {
    if n_refs.is_empty() {
        return Err(Error::Invalid("empty n_ref list".into()));
    }
    let rows = n_refs
        .iter()
        .map(|&n_ref| {
            let run = RunConfig {
                n_ref,
                ..config.clone()
            };
            log::info!("sweep: n_ref = {n_ref}");
            run_experiment_on(matrix, store, &run).map(|r| SweepRow::from_report(&r))
        })
        .collect::<Result<Vec<_>>>()?;
    let digest_config = RunConfig {
        sweep_n_ref: n_refs.to_vec(),
        ..config.clone()
    };
    Ok(SweepTable {
        tool_version: TOOL_VERSION.to_string(),
        config_digest: digest_config.digest(),
        rows,
    })
}

impl SweepTable {
    /// `n_ref,winner,generic,specific,...`; one row per swept size.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        let header: Vec<&str> = ["n_ref", "winner"].into_iter().chain(SWEEP_COLUMNS).collect();
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.n_ref.to_string(), r.winner.clone()];
            rec.extend(r.mean_test_auc.iter().map(|v| v.map(|a| a.to_string()).unwrap_or_default()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("utf-8 csv"))
    }

    /// Line chart of mean test AUC against n_ref (log-scaled x when sizes span a factor > 4).
    pub fn to_svg(&self) -> String {
        let (w, h, left, top, bottom, right) = (640.0, 380.0, 60.0, 40.0, 90.0, 20.0);
        let xs: Vec<f64> = self.rows.iter().map(|r| r.n_ref as f64).collect();
        let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        let log = hi / lo > 4.0;
        let tx = |x: f64| if log { x.ln() } else { x };
        let (tlo, thi) = (tx(lo), tx(hi));
        let span = if thi > tlo { thi - tlo } else { 1.0 };
        let px = |x: f64| left + (w - left - right) * (tx(x) - tlo) / span;
        let py = |v: f64| top + (h - top - bottom) * (1.0 - v.clamp(0.0, 1.0));
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
        let _ = writeln!(s, "<!-- refassess {} config {} -->", self.tool_version, self.config_digest);
        let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="14">Mean test AUC by reference-set size</text>"#);
        for t in 0..=5 {
            let v = t as f64 / 5.0;
            let _ = writeln!(
                s,
                r##"<line x1="{left}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
                w - right,
                left - 4.0,
                py(v) + 4.0,
                y = py(v)
            );
        }
        for &x in &xs {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x}</text>"#, px(x), py(0.0) + 14.0);
        }
        const COLORS: [&str; 5] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2"];
        for (k, name) in SWEEP_COLUMNS.iter().enumerate() {
            let points: Vec<String> = self
                .rows
                .iter()
                .filter_map(|r| r.mean_test_auc[k].map(|v| format!("{:.1},{:.1}", px(r.n_ref as f64), py(v))))
                .collect();
            if !points.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
                    COLORS[k],
                    points.join(" ")
                );
            }
            let lx = left + 115.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{name}</text>"#,
                h - 30.0,
                COLORS[k],
                lx + 14.0,
                h - 21.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> SweepTable {
        SweepTable {
            tool_version: "0".into(),
            config_digest: "d".into(),
            rows: [25, 100, 400]
                .iter()
                .map(|&n| SweepRow {
                    n_ref: n,
                    winner: "w".into(),
                    mean_test_auc: vec![Some(0.7), Some(0.8), None, Some(0.6), Some(0.5)],
                })
                .collect(),
        }
    }

    #[test]
    fn csv_has_header_and_one_row_per_size() {
        let csv = table().to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "n_ref,winner,generic,specific,random_selector,reference_only,all_train_data");
        assert_eq!(lines[1], "25,w,0.7,0.8,,0.6,0.5");
    }

    #[test]
    fn svg_draws_one_line_per_defined_series() {
        assert_eq!(table().to_svg().matches("<polyline").count(), 4);
    }
}

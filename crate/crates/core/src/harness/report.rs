//! Report artifacts: full JSON, a long-format CSV and SVG bar charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::experiment::{EvalReport, LlmAuc};
use crate::error::{Error, Result};
use crate::util::atomic_write;

/// `combo_id,llm_id,split,auc`; baselines appear as `baseline/<name>`, undefined AUCs as empty fields.
pub fn report_csv(report: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    w.write_record(["combo_id", "llm_id", "split", "auc"]).map_err(csv_err)?;
    let mut emit = |id: &str, split: &str, rows: &[LlmAuc]| -> Result<()> {
        for r in rows {
            let auc = r.auc.map(|a| a.to_string()).unwrap_or_default();
            w.write_record([id, r.llm.as_str(), split, &auc]).map_err(csv_err)?;
        }
        Ok(())
    };
    for c in &report.combinations {
        emit(&c.combo_id, "val", &c.val_auc)?;
        emit(&c.combo_id, "test", &c.test_auc)?;
    }
    for a in report.assessors() {
        let id = format!("baseline/{}", a.name);
        emit(&id, "val", &a.val_auc)?;
        emit(&id, "test", &a.test_auc)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped bars: one group per LLM, one bar per series, y axis over [0, 1].
pub fn grouped_bar_svg(title: &str, groups: &[String], series: &[(String, Vec<Option<f64>>)], comment: &str) -> String {
    let (w, h, left, top, bottom) = (120.0 + 90.0 * groups.len().max(1) as f64, 360.0, 50.0, 40.0, 80.0);
    let plot_h = h - top - bottom;
    let group_w = (w - left - 20.0) / groups.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let y = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 1.0));
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, "<!-- {} -->", escape(comment));
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="14">{}</text>"#, escape(title));
    for t in 0..=5 {
        let v = t as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" x2="{}" y1="{y0:.1}" y2="{y0:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
            w - 20.0,
            left - 4.0,
            y(v) + 4.0,
            y0 = y(v)
        );
    }
    for (g, name) in groups.iter().enumerate() {
        let x0 = left + g as f64 * group_w + group_w * 0.1;
        for (k, (_, values)) in series.iter().enumerate() {
            if let Some(v) = values.get(g).copied().flatten() {
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{bar_w:.1}" height="{:.1}" fill="{}"><title>{v:.4}</title></rect>"#,
                    x0 + k as f64 * bar_w,
                    y(v),
                    y(0.0) - y(v),
                    PALETTE[k % PALETTE.len()]
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + group_w * 0.4,
            y(0.0) + 14.0,
            escape(name)
        );
    }
    for (k, (label, _)) in series.iter().enumerate() {
        let lx = left + 130.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            h - 30.0,
            PALETTE[k % PALETTE.len()],
            lx + 14.0,
            h - 21.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn provenance(report: &EvalReport) -> String {
    format!("refassess {} config {}", report.tool_version, report.config_digest)
}

/// Bar chart of the chosen assessor and baselines for `split` ("val" or "test").
pub fn report_svg(report: &EvalReport, split: &str) -> String {
    let pick = |rows: &[LlmAuc], llm: &str| rows.iter().find(|r| r.llm.as_str() == llm).and_then(|r| r.auc);
    let llms: Vec<String> = match split {
        "val" => report.split.val_llms.iter().map(|l| l.as_str().to_string()).collect(),
        _ => report.split.test_llms.iter().map(|l| l.as_str().to_string()).collect(),
    };
    let series: Vec<(String, Vec<Option<f64>>)> = report
        .assessors()
        .iter()
        .map(|a| {
            let rows = if split == "val" { &a.val_auc } else { &a.test_auc };
            (a.name.clone(), llms.iter().map(|l| pick(rows, l)).collect())
        })
        .collect();
    grouped_bar_svg(&format!("AUC per {split} LLM"), &llms, &series, &provenance(report))
}

/// Write `report.json`, `report.csv`, `report_val.svg` and `report_test.svg` into `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("report.json", report.to_json() + "\n"),
        ("report.csv", report_csv(report)?),
        ("report_val.svg", report_svg(report, "val")),
        ("report_test.svg", report_svg(report, "test")),
    ];
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            atomic_write(&path, body.as_bytes())?;
            Ok(path)
        })
        .collect()
}

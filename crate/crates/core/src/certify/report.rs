//! CSV and JSON writers for estimator and certificate outputs. Every file
//! starts with the provenance stamp: `#` comment lines for CSV, a
//! `provenance` object for JSON.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::intertwined::CertificateReport;
use crate::error::{Error, Result};
use crate::linalg::ParameterGrid;
use crate::provenance::Provenance;
use crate::sketch::EstimateBundle;

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// A CSV table with a provenance header.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(columns: impl IntoIterator<Item = impl Into<String>>) -> Self {
        CsvTable {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn render(&self, prov: &Provenance) -> String {
        let mut s = prov.comment_lines("# ");
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path, prov: &Provenance) -> Result<()> {
        write_file(path, &self.render(prov))
    }
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.is_nan() {
        "nan".into()
    } else {
        let mut s = String::new();
        write!(s, "{v:e}").unwrap();
        s
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

pub fn to_json_string<T: Serialize>(body: &T, prov: &Provenance) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Stamped { provenance: prov, body })?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, body: &T, prov: &Provenance) -> Result<()> {
    write_file(path, &to_json_string(body, prov)?)
}

/// Per-point table: μ coordinates, Δ̃, Δ̃^rel, then any extra named columns.
pub fn estimates_table(grid: &ParameterGrid, bundle: &EstimateBundle, extra: &[(&str, &[f64])]) -> Result<CsvTable> {
    let mut cols: Vec<String> = grid.axes().iter().map(|a| a.name.clone()).collect();
    cols.push("delta".into());
    cols.push("delta_rel".into());
    for (name, vals) in extra {
        if vals.len() != bundle.points.len() {
            return Err(Error::dim("extra column length", bundle.points.len(), vals.len()));
        }
        cols.push((*name).to_string());
    }
    let mut t = CsvTable::new(cols);
    for (i, p) in bundle.points.iter().enumerate() {
        let mut row: Vec<f64> = grid.point(&p.index);
        row.push(p.delta);
        row.push(p.delta_rel);
        row.extend(extra.iter().map(|(_, v)| v[i]));
        t.push_f64(&row);
    }
    Ok(t)
}

#[derive(Serialize)]
struct EstimateSummary {
    k: usize,
    seed: u64,
    points: usize,
    rms: f64,
    rms_rel: f64,
}

pub fn write_estimates(dir: &Path, stem: &str, grid: &ParameterGrid, bundle: &EstimateBundle, extra: &[(&str, &[f64])], prov: &Provenance) -> Result<()> {
    estimates_table(grid, bundle, extra)?.write(&dir.join(format!("{stem}.csv")), prov)?;
    let summary = EstimateSummary {
        k: bundle.k,
        seed: bundle.seed,
        points: bundle.points.len(),
        rms: bundle.rms,
        rms_rel: bundle.rms_rel,
    };
    write_json(&dir.join(format!("{stem}.json")), &summary, prov)
}

/// Per-iteration history: M, L, Δ̃^rel, last α_{2,k}, α evaluations, objectives,
/// then baseline columns when present.
pub fn history_table(report: &CertificateReport) -> CsvTable {
    let mut cols = vec!["M", "L", "estimate", "alpha_2k", "alpha_evals", "primal_objective", "dual_objective"];
    let b = report.baselines.as_ref();
    if b.is_some() {
        cols.extend(["residual", "stagnation"]);
    }
    if b.is_some_and(|b| b.truth.is_some()) {
        cols.push("truth");
    }
    let mut t = CsvTable::new(cols);
    for h in &report.history {
        let mut row = vec![
            h.m.to_string(),
            h.l.to_string(),
            fmt_f64(h.estimate),
            fmt_f64(h.checks.last().map_or(f64::NAN, |c| c.alpha)),
            h.checks.len().to_string(),
            fmt_f64(h.primal_objective),
            fmt_f64(h.dual_objective),
        ];
        if let Some(b) = b {
            let at = b.m.iter().position(|&m| m == h.m);
            let get = |v: &[f64]| at.map_or("nan".to_string(), |j| fmt_f64(v[j]));
            row.push(get(&b.residual));
            row.push(get(&b.stagnation));
            if let Some(tr) = &b.truth {
                row.push(get(tr));
            }
        }
        t.push(row);
    }
    t
}

pub fn write_report(dir: &Path, report: &CertificateReport, prov: &Provenance) -> Result<()> {
    write_json(&dir.join("report.json"), report, prov)?;
    history_table(report).write(&dir.join("history.csv"), prov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Axis;
    use crate::sketch::PointEstimate;

    #[test]
    fn csv_has_provenance_and_round_trips_values() {
        let grid = ParameterGrid::new(vec![Axis::uniform("k2", 0.5, 1.2, 3).unwrap()]).unwrap();
        let b = EstimateBundle {
            points: (0..3).map(|i| PointEstimate { index: vec![i], delta: 0.1 * i as f64, delta_rel: f64::INFINITY }).collect(),
            rms: 0.1,
            rms_rel: 0.2,
            k: 4,
            seed: 9,
        };
        let prov = Provenance::new("abc", Some(9));
        let text = estimates_table(&grid, &b, &[("truth", &[1.0, 2.0, 3.0])]).unwrap().render(&prov);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# generator: "));
        assert_eq!(lines[3], "k2,delta,delta_rel,truth");
        let last: Vec<&str> = lines[6].split(',').collect();
        assert_eq!(last[0].parse::<f64>().unwrap(), 1.2);
        assert_eq!(last[2], "inf");
        assert!(estimates_table(&grid, &b, &[("bad", &[1.0])]).is_err());

        let dir = tempfile::tempdir().unwrap();
        write_estimates(dir.path(), "est", &grid, &b, &[], &prov).unwrap();
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("est.json")).unwrap()).unwrap();
        assert_eq!(json["provenance"]["seed"], 9);
        assert_eq!(json["k"], 4);
    }
}

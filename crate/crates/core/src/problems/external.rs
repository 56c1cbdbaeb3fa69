//! Problems on disk: a JSON manifest, one Matrix Market file per operator term,
//! one vector file per right-hand side term, a Gram matrix, and one CSV
//! coefficient table per axis. Paths in the manifest are relative to it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Problem;
use crate::certify::report::{write_json, CsvTable, fmt_f64};
use crate::error::{Error, Result};
use crate::linalg::mtx::{read_mtx, read_vector, write_mtx, write_vector};
use crate::linalg::{AffineOperator, AffineRhs, AffineTerm, Axis, AxisFactor, ClosedForm, GramPair, ParameterGrid};
use crate::provenance::Provenance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisEntry {
    pub name: String,
    /// CSV with a `value` column and one column per term name.
    pub table: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    pub name: String,
    pub file: String,
    /// Optional closed form per axis, for off-grid evaluation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub closed_forms: Vec<Option<ClosedForm>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub spd: bool,
    pub axes: Vec<AxisEntry>,
    pub operator: Vec<TermEntry>,
    pub rhs: Vec<TermEntry>,
    pub gram: String,
}

fn closed_forms<T>(t: &AffineTerm<T>) -> Vec<Option<ClosedForm>> {
    let forms: Vec<Option<ClosedForm>> = t
        .factors
        .iter()
        .map(|f| f.closed_form().filter(|c| !matches!(c, ClosedForm::Custom(_))).cloned())
        .collect();
    if forms.iter().all(Option::is_none) {
        Vec::new()
    } else {
        forms
    }
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes the problem under `dir` and returns the manifest path.
pub fn export_problem(dir: &Path, problem: &Problem, prov: &Provenance) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let op = &problem.op;
    let rhs = &problem.rhs;
    let op_names: Vec<String> = (0..op.n_terms()).map(|q| format!("A{q}")).collect();
    let rhs_names: Vec<String> = (0..rhs.n_terms()).map(|r| format!("f{r}")).collect();

    let mut operator = Vec::new();
    for (t, name) in op.terms().iter().zip(&op_names) {
        let file = format!("{name}.mtx");
        write_mtx(&dir.join(&file), &t.value, prov)?;
        operator.push(TermEntry { name: name.clone(), file, closed_forms: closed_forms(t) });
    }
    let mut rhs_entries = Vec::new();
    for (t, name) in rhs.terms().iter().zip(&rhs_names) {
        let file = format!("{name}.txt");
        write_vector(&dir.join(&file), &t.value, prov)?;
        rhs_entries.push(TermEntry { name: name.clone(), file, closed_forms: closed_forms(t) });
    }
    write_mtx(&dir.join("gram.mtx"), problem.gram.matrix(), prov)?;

    let mut axes = Vec::new();
    for (i, axis) in op.grid().axes().iter().enumerate() {
        let mut cols = vec!["value".to_string()];
        cols.extend(op_names.iter().cloned());
        cols.extend(rhs_names.iter().cloned());
        let mut table = CsvTable::new(cols);
        for (k, &v) in axis.points().iter().enumerate() {
            let mut row = vec![fmt_f64(v)];
            row.extend(op.terms().iter().map(|t| fmt_f64(t.factors[i].values()[k])));
            row.extend(rhs.terms().iter().map(|t| fmt_f64(t.factors[i].values()[k])));
            table.push(row);
        }
        let file = format!("axis_{i}_{}.csv", file_stem(&axis.name));
        table.write(&dir.join(&file), prov)?;
        axes.push(AxisEntry { name: axis.name.clone(), table: file });
    }

    let manifest = Manifest {
        name: problem.name.clone(),
        n: op.n(),
        spd: op.is_spd(),
        axes,
        operator,
        rhs: rhs_entries,
        gram: "gram.mtx".into(),
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest, prov)?;
    Ok(path)
}

struct AxisTable {
    values: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
}

fn read_axis_table(path: &Path) -> Result<AxisTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(Error::parse(path, format!("row {} has {} fields, expected {}", line + 1, rec.len(), headers.len())));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(path, format!("row {}: `{field}` is not a number", line + 1)))?;
            cols[c].push(v);
        }
    }
    let Some(vi) = headers.iter().position(|h| h == "value") else {
        return Err(Error::parse(path, "missing `value` column"));
    };
    let values = cols[vi].clone();
    let columns = headers.into_iter().zip(cols).enumerate().filter(|(c, _)| *c != vi).map(|(_, hc)| hc).collect();
    Ok(AxisTable { values, columns })
}

fn factors_for(name: &str, forms: &[Option<ClosedForm>], tables: &[(AxisTable, PathBuf)]) -> Result<Vec<AxisFactor>> {
    if !forms.is_empty() && forms.len() != tables.len() {
        return Err(Error::AxisCount { expected: tables.len(), got: forms.len() });
    }
    tables
        .iter()
        .enumerate()
        .map(|(i, (t, path))| {
            let col = t
                .columns
                .iter()
                .find(|(h, _)| h == name)
                .ok_or_else(|| Error::MissingColumn { axis: i, column: name.to_string(), path: path.clone() })?;
            let mut f = AxisFactor::table(col.1.clone());
            if let Some(Some(form)) = forms.get(i) {
                f = f.with_closed_form(form.clone());
            }
            Ok(f)
        })
        .collect()
}

pub fn load_external(manifest_path: &Path) -> Result<Problem> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(manifest_path, e.to_string()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut names: Vec<&str> = manifest.operator.iter().chain(&manifest.rhs).map(|t| t.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::parse(manifest_path, "term names must be unique"));
    }

    let tables = manifest
        .axes
        .iter()
        .map(|a| {
            let p = base.join(&a.table);
            read_axis_table(&p).map(|t| (t, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let axes = manifest
        .axes
        .iter()
        .zip(&tables)
        .map(|(a, (t, _))| Axis::from_points(a.name.clone(), t.values.clone()))
        .collect::<Result<Vec<_>>>()?;
    let grid = ParameterGrid::new(axes)?;

    let mut op_terms = Vec::new();
    for t in &manifest.operator {
        let m = read_mtx(&base.join(&t.file))?;
        if m.n_rows() != manifest.n || m.n_cols() != manifest.n {
            return Err(Error::dim("operator term size", manifest.n, m.n_rows().max(m.n_cols())));
        }
        op_terms.push(AffineTerm { value: m, factors: factors_for(&t.name, &t.closed_forms, &tables)? });
    }
    let mut rhs_terms = Vec::new();
    for t in &manifest.rhs {
        let v = read_vector(&base.join(&t.file))?;
        if v.len() != manifest.n {
            return Err(Error::dim("rhs term length", manifest.n, v.len()));
        }
        rhs_terms.push(AffineTerm { value: v, factors: factors_for(&t.name, &t.closed_forms, &tables)? });
    }
    let gram_m = read_mtx(&base.join(&manifest.gram))?;
    if gram_m.n_rows() != manifest.n {
        return Err(Error::dim("Gram size", manifest.n, gram_m.n_rows()));
    }
    let op = AffineOperator::new(grid.clone(), op_terms)?.with_spd(manifest.spd)?;
    let rhs = AffineRhs::new(grid, rhs_terms)?;
    let gram = GramPair::new(gram_m)?;
    Ok(Problem { name: manifest.name, op, rhs, gram, mesh: None })
}

//! Run configuration: a TOML file of `key = value` sections, then `--set`
//! overrides, then dedicated flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use randpgd::certify::{IncrementMode, IntertwinedConfig};
use randpgd::pgd::{Formulation, GreedyConfig};
use randpgd::problems::BenchmarkSizes;
use randpgd::provenance::{hash_bytes, Provenance};
use randpgd::sketch::SizingMode;

use crate::error::{CliError, CliResult};

/// Overrides the output root of the configuration file (flags still win).
pub const OUTPUT_ENV: &str = "RANDPGD_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Harmonic,
    Highdim,
    Synthetic,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub axis_sizes: Vec<usize>,
    pub extra_terms: usize,
    pub rhs_terms: usize,
    pub spd: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 30,
            axis_sizes: vec![8, 6],
            extra_terms: 2,
            rhs_terms: 2,
            spd: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub sizes: BenchmarkSizes,
    pub synthetic: SyntheticConfig,
    /// Manifest of an exported problem, for `kind = "external"`.
    pub manifest: Option<PathBuf>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            kind: ProblemKind::Harmonic,
            sizes: BenchmarkSizes::default(),
            synthetic: SyntheticConfig::default(),
            manifest: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKind {
    /// Σ = R_X: errors in the problem's solution norm.
    Gram,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SketchConfig {
    /// Fixed K; when absent K is sized from (delta, w, mode).
    pub k: Option<usize>,
    pub delta: f64,
    pub w: f64,
    pub mode: SizingMode,
    pub sigma: SigmaKind,
    /// Dual rank L for `estimate`.
    pub dual_rank: usize,
    /// Evaluation points when the grid cannot be enumerated.
    pub points: usize,
}

impl Default for SketchConfig {
    fn default() -> Self {
        SketchConfig {
            k: None,
            delta: 1e-2,
            w: 5.0,
            mode: SizingMode::Relative,
            sigma: SigmaKind::Gram,
            dual_rank: 8,
            points: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub tol: f64,
    pub m_max: usize,
    pub alpha: f64,
    pub k_lag: usize,
    pub l_max: Option<usize>,
    pub increment: IncrementMode,
    /// Compute residual, stagnation and (small grids) true-error curves.
    pub baselines: bool,
    pub stagnation_k: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        let d = IntertwinedConfig::default();
        CertifyConfig {
            tol: d.tol,
            m_max: d.m_max,
            alpha: d.alpha,
            k_lag: d.k_lag,
            l_max: None,
            increment: d.increment,
            baselines: false,
            stagnation_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed: ALS initialization and sketch draws derive from it.
    pub seed: u64,
    pub output: PathBuf,
    /// Accepted for interface compatibility; every code path is serial.
    pub serial: bool,
    pub problem: ProblemConfig,
    pub pgd: GreedyConfig,
    pub sketch: SketchConfig,
    pub certify: CertifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output: PathBuf::from("out"),
            serial: true,
            problem: ProblemConfig::default(),
            pgd: GreedyConfig::default(),
            sketch: SketchConfig::default(),
            certify: CertifyConfig::default(),
        }
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    // Parse as a TOML value; anything unparsable is taken as a bare string.
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies `a.b.c=value` to a TOML table.
pub fn apply_set(table: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("--set expects key=value, got `{assignment}`")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::usage(format!("bad key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::usage(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_scalar(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies `--set` assignments and the output-root
    /// environment variable.
    pub fn load(path: Option<&Path>, sets: &[String]) -> CliResult<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for s in sets {
            apply_set(&mut table, s)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::usage(format!("invalid configuration: {e}")))?;
        if let Some(root) = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
            cfg.output = PathBuf::from(root);
        }
        Ok(cfg)
    }

    pub fn primal(&self) -> GreedyConfig {
        GreedyConfig {
            seed: self.seed,
            ..self.pgd.clone()
        }
    }

    pub fn dual(&self, rank: usize) -> GreedyConfig {
        GreedyConfig {
            seed: self.seed.wrapping_add(1),
            max_rank: rank,
            ..self.pgd.clone()
        }
    }

    pub fn intertwined(&self) -> IntertwinedConfig {
        let c = &self.certify;
        IntertwinedConfig {
            tol: c.tol,
            delta: self.sketch.delta,
            m_max: c.m_max,
            w: self.sketch.w,
            alpha: c.alpha,
            k_lag: c.k_lag,
            primal: GreedyConfig {
                max_rank: usize::MAX,
                ..self.primal()
            },
            dual: GreedyConfig {
                max_rank: usize::MAX,
                ..self.dual(0)
            },
            seed: self.seed,
            k_override: self.sketch.k,
            l_max: c.l_max,
            increment: c.increment,
            eval_points: self.sketch.points,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let s = &self.sketch;
        if !(s.delta > 0.0 && s.delta < 1.0) {
            return Err(CliError::usage(format!(
                "sketch.delta must lie in (0, 1), got {}",
                s.delta
            )));
        }
        let floor = match s.mode {
            SizingMode::Relative => std::f64::consts::E,
            SizingMode::Absolute => 0.5f64.exp(),
        };
        if !(s.w > floor) {
            return Err(CliError::usage(format!(
                "sketch.w must exceed {floor:.4} in {:?} mode, got {}",
                s.mode, s.w
            )));
        }
        if s.k == Some(0) {
            return Err(CliError::usage("sketch.k must be positive"));
        }
        if self.problem.kind == ProblemKind::External && self.problem.manifest.is_none() {
            return Err(CliError::usage(
                "problem.kind = \"external\" needs problem.manifest",
            ));
        }
        if self.pgd.formulation == Formulation::Galerkin
            && self.problem.kind == ProblemKind::Harmonic
        {
            return Err(CliError::usage(
                "the harmonic problem is indefinite; use the min_residual formulation",
            ));
        }
        Ok(())
    }

    /// Stamp for outputs of `command`: hashes everything except the output root.
    pub fn provenance(&self, command: &str, args: &impl std::fmt::Debug) -> Provenance {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let body = format!(
            "{command}\n{}\n{args:?}",
            serde_json::to_string(&c).unwrap_or_default()
        );
        Provenance::new(hash_bytes(body.as_bytes()), Some(self.seed))
    }
}

use std::path::Path;

use randpgd::certify::{evaluation_points, TruthCache};
use randpgd::pgd::CanonicalTensor;
use randpgd::problems::{
    harmonic_default, highdim_default, load_external, random_affine, Problem, SyntheticSpec,
};
use randpgd::sketch::{sample_size_ln, GaussianSketch, PreparedSigma, SigmaSpec};

use crate::config::{ProblemKind, RunConfig, SigmaKind};
use crate::error::{CliError, CliResult};

pub fn build(cfg: &RunConfig) -> CliResult<Problem> {
    let p = &cfg.problem;
    Ok(match p.kind {
        ProblemKind::Harmonic => harmonic_default(&p.sizes)?,
        ProblemKind::Highdim => highdim_default(&p.sizes)?.0,
        ProblemKind::Synthetic => {
            let s = &p.synthetic;
            let (op, rhs, gram) = random_affine(&SyntheticSpec {
                n: s.n,
                axis_sizes: s.axis_sizes.clone(),
                extra_terms: s.extra_terms,
                rhs_terms: s.rhs_terms,
                spd: s.spd,
                seed: s.seed,
            })?;
            Problem {
                name: "synthetic".into(),
                op,
                rhs,
                gram,
                mesh: None,
            }
        }
        ProblemKind::External => {
            let path = p
                .manifest
                .as_deref()
                .ok_or_else(|| CliError::usage("external problem needs a manifest"))?;
            load_external(path)?
        }
    })
}

pub fn sigma(cfg: &RunConfig, p: &Problem) -> CliResult<PreparedSigma> {
    let spec = match cfg.sketch.sigma {
        SigmaKind::Gram => SigmaSpec::GramNatural(p.gram.clone()),
        SigmaKind::Identity => SigmaSpec::Identity(p.op.n()),
    };
    Ok(spec.prepare()?)
}

/// K from the configuration: fixed, or sized for #P points.
pub fn sample_count(cfg: &RunConfig, p: &Problem) -> CliResult<usize> {
    match cfg.sketch.k {
        Some(k) => Ok(k),
        None => Ok(sample_size_ln(
            cfg.sketch.delta,
            cfg.sketch.w,
            p.op.grid().cardinality().ln(),
            cfg.sketch.mode,
            None,
        )?),
    }
}

pub fn draw(cfg: &RunConfig, p: &Problem, k: usize, seed: u64) -> CliResult<GaussianSketch> {
    Ok(GaussianSketch::draw(&sigma(cfg, p)?, k, seed)?)
}

pub fn points(cfg: &RunConfig, p: &Problem) -> Vec<Vec<usize>> {
    evaluation_points(&p.op, cfg.sketch.points, cfg.seed)
}

/// Direct solutions, cached on disk under the output root.
pub fn truth(cfg: &RunConfig, p: &Problem, pts: &[Vec<usize>]) -> CliResult<Vec<Vec<f64>>> {
    Ok(TruthCache::on_disk(cfg.output.join("truth_cache")).solutions(&p.op, &p.rhs, pts)?)
}

pub fn check_tensor(t: &CanonicalTensor, p: &Problem, path: &Path) -> CliResult<()> {
    if t.n() != p.op.n() || t.sizes() != p.op.grid().sizes().as_slice() {
        return Err(CliError::usage(format!(
            "{} holds a tensor of size {} over {:?}, the problem has {} over {:?}",
            path.display(),
            t.n(),
            t.sizes(),
            p.op.n(),
            p.op.grid().sizes()
        )));
    }
    Ok(())
}

/// Parses `3,0,1` into a grid multi-index.
pub fn parse_index(s: &str, p: &Problem) -> CliResult<Vec<usize>> {
    let idx = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::usage(format!("bad grid index `{s}`: {e}")))?;
    p.op.grid()
        .check_index(&idx)
        .map_err(|e| CliError::usage(e.to_string()))?;
    Ok(idx)
}

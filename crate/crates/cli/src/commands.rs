use std::path::{Path, PathBuf};

use serde::Serialize;

use randpgd::certify::report::{fmt_f64, write_estimates, write_json, write_report, CsvTable};
use randpgd::certify::{
    baseline_curves, effectivity_report, extend_primal, intertwined_with_sketch, true_errors,
};
use randpgd::linalg::mtx::write_vector;
use randpgd::pgd::io::{read_tensor, write_tensor, TensorMeta};
use randpgd::pgd::{
    dual_greedy_solve, greedy_solve, run_to_max_rank, CanonicalTensor, GreedyResult,
};
use randpgd::problems::{export_problem, Problem};
use randpgd::provenance::Provenance;
use randpgd::sketch::{fast_estimators, GaussianSketch, SketchRecord};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::problem;

pub fn out_dir(cfg: &RunConfig, command: &str) -> CliResult<PathBuf> {
    let dir = cfg.output.join(command);
    std::fs::create_dir_all(&dir).map_err(|source| {
        CliError::Lib(randpgd::Error::Io {
            path: dir.clone(),
            source,
        })
    })?;
    Ok(dir)
}

pub fn save_tensor(
    path: &Path,
    t: &CanonicalTensor,
    objective: &[f64],
    seed: u64,
    prov: &Provenance,
) -> CliResult<()> {
    let mut meta = TensorMeta::describe(t, prov.clone());
    meta.objective_history = objective.to_vec();
    meta.seeds = vec![seed];
    Ok(write_tensor(path, t, &meta)?)
}

fn history_csv(run: &GreedyResult) -> CsvTable {
    let mut t = CsvTable::new(["rank", "objective", "delta", "als_sweeps", "restarts"]);
    t.push(vec![
        0.to_string(),
        fmt_f64(run.objective[0]),
        "nan".into(),
        "0".into(),
        "0".into(),
    ]);
    for s in &run.steps {
        t.push(vec![
            s.rank.to_string(),
            fmt_f64(s.objective),
            fmt_f64(s.delta),
            s.als_sweeps.len().to_string(),
            s.restarts.to_string(),
        ]);
    }
    t
}

#[derive(Debug)]
pub struct SolveArgs {
    pub rank: Option<usize>,
}

pub fn solve(cfg: &RunConfig, args: &SolveArgs) -> CliResult<()> {
    let p = problem::build(cfg)?;
    let mut g = cfg.primal();
    if let Some(r) = args.rank {
        g.max_rank = r;
    }
    let run = greedy_solve(&p.op, &p.rhs, g, run_to_max_rank)?;
    let prov = cfg.provenance("solve", args);
    let dir = out_dir(cfg, "solve")?;
    save_tensor(
        &dir.join("primal.rpgd"),
        &run.tensor,
        &run.objective,
        cfg.seed,
        &prov,
    )?;
    history_csv(&run).write(&dir.join("history.csv"), &prov)?;
    println!(
        "solve: {} (n = {}, #P = {}) rank {} objective {:.6e}; wrote {}",
        p.name,
        p.op.n(),
        p.op.grid().cardinality(),
        run.tensor.rank(),
        run.objective.last().unwrap(),
        dir.display()
    );
    Ok(())
}

fn load_or_solve(
    cfg: &RunConfig,
    p: &Problem,
    primal: Option<&Path>,
    rank: Option<usize>,
) -> CliResult<CanonicalTensor> {
    match primal {
        Some(path) => {
            let (t, _) = read_tensor(path)?;
            problem::check_tensor(&t, p, path)?;
            Ok(t)
        }
        None => {
            let mut g = cfg.primal();
            if let Some(r) = rank {
                g.max_rank = r;
            }
            Ok(greedy_solve(&p.op, &p.rhs, g, run_to_max_rank)?.tensor)
        }
    }
}

fn load_sketch(cfg: &RunConfig, p: &Problem, path: &Path) -> CliResult<GaussianSketch> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read sketch {}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let body = v.get("body").cloned().unwrap_or(v);
    let rec: SketchRecord = serde_json::from_value(body)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(GaussianSketch::from_record(&rec, &problem::sigma(cfg, p)?)?)
}

#[derive(Debug)]
pub struct EstimateArgs {
    pub primal: Option<PathBuf>,
    pub rank: Option<usize>,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub sketch: Option<PathBuf>,
    pub truth: bool,
}

#[derive(Serialize)]
struct EffectivitySummary {
    true_rms_rel: f64,
    estimate_rms_rel: f64,
    median_eta: Option<f64>,
    fraction_within_2: f64,
    excluded: usize,
}

pub fn estimate(cfg: &RunConfig, args: &EstimateArgs) -> CliResult<()> {
    let p = problem::build(cfg)?;
    let u = load_or_solve(cfg, &p, args.primal.as_deref(), args.rank)?;
    let sketch = match &args.sketch {
        Some(path) => load_sketch(cfg, &p, path)?,
        None => {
            let k = args.k.map_or_else(|| problem::sample_count(cfg, &p), Ok)?;
            problem::draw(cfg, &p, k, cfg.seed)?
        }
    };
    let l = args.l.unwrap_or(cfg.sketch.dual_rank);
    let op_t = p.op.transposed();
    let dual = dual_greedy_solve(&op_t, sketch.z_block(), cfg.dual(l), run_to_max_rank)?;
    let pts = problem::points(cfg, &p);
    let bundle = fast_estimators(&p.op, &p.rhs, &u, &dual.tensor, &sketch, &pts)?;

    let prov = cfg.provenance("estimate", args);
    let dir = out_dir(cfg, "estimate")?;
    write_json(&dir.join("sketch.json"), &sketch.record(), &prov)?;
    save_tensor(
        &dir.join("dual.rpgd"),
        &dual.tensor,
        &dual.objective,
        cfg.seed,
        &prov,
    )?;
    if args.truth {
        let sols = problem::truth(cfg, &p, &pts)?;
        let err = true_errors(&sols, &u, &p.gram, &pts)?;
        let eta = effectivity_report(&bundle, &err.per_point)?;
        let eta_col: Vec<f64> = bundle
            .points
            .iter()
            .zip(&err.per_point)
            .map(|(b, e)| b.delta_rel / e)
            .collect();
        write_estimates(
            &dir,
            "estimates",
            p.op.grid(),
            &bundle,
            &[("true_rel", &err.per_point), ("eta", &eta_col)],
            &prov,
        )?;
        let summary = EffectivitySummary {
            true_rms_rel: err.rms_rel,
            estimate_rms_rel: bundle.rms_rel,
            median_eta: eta.median(),
            fraction_within_2: eta.fraction_within(2.0),
            excluded: eta.excluded,
        };
        write_json(&dir.join("effectivity.json"), &summary, &prov)?;
        println!(
            "estimate: rank {} K {} L {}: Δ̃rel {:.4e}, true {:.4e}, median η {:.3}",
            u.rank(),
            sketch.k(),
            l,
            bundle.rms_rel,
            err.rms_rel,
            summary.median_eta.unwrap_or(f64::NAN)
        );
    } else {
        write_estimates(&dir, "estimates", p.op.grid(), &bundle, &[], &prov)?;
        println!(
            "estimate: rank {} K {} L {}: Δ̃rel {:.4e} over {} points",
            u.rank(),
            sketch.k(),
            l,
            bundle.rms_rel,
            pts.len()
        );
    }
    Ok(())
}

#[derive(Debug)]
pub struct CertifyArgs {
    pub baselines: bool,
}

pub fn certify(cfg: &RunConfig, args: &CertifyArgs) -> CliResult<()> {
    let p = problem::build(cfg)?;
    let icfg = cfg.intertwined();
    icfg.validate()?;
    let k = icfg.sample_count(p.op.grid().cardinality().ln())?;
    let sketch = problem::draw(cfg, &p, k, cfg.seed)?;
    let mut report = intertwined_with_sketch(&p.op, &p.rhs, sketch, &icfg)?;

    let prov = cfg.provenance("certify", args);
    let dir = out_dir(cfg, "certify")?;
    if args.baselines || cfg.certify.baselines {
        let sk = cfg.certify.stagnation_k;
        let full = extend_primal(
            &p.op,
            &p.rhs,
            &report.primal,
            report.final_rank() + sk,
            &icfg.primal,
        )?;
        let ms: Vec<usize> = (1..=report.final_rank()).collect();
        let enumerable = p.op.grid().len().is_some_and(|l| l == report.points.len());
        let sols = if enumerable {
            Some(problem::truth(cfg, &p, &report.points)?)
        } else {
            None
        };
        report.baselines = Some(baseline_curves(
            &p.op,
            &p.rhs,
            &p.gram,
            &full,
            &ms,
            sk,
            &report.points,
            sols.as_deref(),
        )?);
    }
    write_report(&dir, &report, &prov)?;
    let bundle = fast_estimators(
        &p.op,
        &p.rhs,
        &report.primal,
        &report.dual,
        &report.sketch,
        &report.points,
    )?;
    write_estimates(&dir, "estimates", p.op.grid(), &bundle, &[], &prov)?;
    write_json(&dir.join("sketch.json"), &report.sketch.record(), &prov)?;
    save_tensor(
        &dir.join("primal.rpgd"),
        &report.primal,
        &[],
        cfg.seed,
        &prov,
    )?;
    save_tensor(&dir.join("dual.rpgd"), &report.dual, &[], cfg.seed, &prov)?;
    println!(
        "certify: {:?} at M = {}, L = {}, K = {}: Δ̃rel {:.4e}",
        report.termination,
        report.final_rank(),
        report.dual_rank(),
        report.k,
        report.estimate
    );
    Ok(())
}

#[derive(Debug)]
pub struct ExportArgs {
    pub tensor: Option<PathBuf>,
    pub index: Option<String>,
}

pub fn export(cfg: &RunConfig, args: &ExportArgs) -> CliResult<()> {
    let p = problem::build(cfg)?;
    let prov = cfg.provenance("export", args);
    match (&args.tensor, &args.index) {
        (Some(path), Some(index)) => {
            let (t, _) = read_tensor(path)?;
            problem::check_tensor(&t, &p, path)?;
            let idx = problem::parse_index(index, &p)?;
            let v = t.evaluate_vec(&idx)?;
            let dir = out_dir(cfg, "export")?;
            let name = format!(
                "solution_{}.txt",
                idx.iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join("_")
            );
            write_vector(&dir.join(&name), &v, &prov)?;
            println!("export: wrote {}", dir.join(name).display());
        }
        (None, None) => {
            let dir = out_dir(cfg, "export")?.join(&p.name);
            let manifest = export_problem(&dir, &p, &prov)?;
            println!("export: wrote {}", manifest.display());
        }
        _ => return Err(CliError::usage("--tensor and --index go together")),
    }
    Ok(())
}

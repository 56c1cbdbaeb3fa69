//! Benchmark tables and figure data. Every target writes one CSV under
//! `<output>/bench/`.

use randpgd::certify::report::{fmt_f64, CsvTable};
use randpgd::certify::{
    baseline_curves, effectivity_report, extend_primal, intertwined_with_sketch, median,
    residual_estimator, stagnation_estimator, true_errors,
};
use randpgd::pgd::{dual_greedy_solve, greedy_solve, run_to_max_rank, Formulation, GreedySolver};
use randpgd::problems::{harmonic_default, highdim_default, Problem};
use randpgd::sketch::{exact_estimators, fast_estimators, sample_size, sqrt_f_pdf, SizingMode};

use crate::commands::out_dir;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    Table1,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

#[derive(Debug, Default)]
pub struct BenchArgs {
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub reps: Option<usize>,
    pub bins: usize,
    pub points: Option<usize>,
    pub rank: Option<usize>,
    pub stag_k: Option<usize>,
    pub m_max: Option<usize>,
}

pub fn run(cfg: &RunConfig, target: Target, args: &BenchArgs) -> CliResult<()> {
    let (name, table) = match target {
        Target::Table1 => ("table1", table1()?),
        Target::Fig3 => ("fig3", fig3(cfg, args)?),
        Target::Fig4 => ("fig4", fig4(cfg, args)?),
        Target::Fig5 => ("fig5", fig5(cfg, args)?),
        Target::Fig6 => ("fig6", fig6(cfg, args)?),
    };
    let prov = cfg.provenance("bench", &(target, args));
    let path = out_dir(cfg, "bench")?.join(format!("{name}.csv"));
    table.write(&path, &prov)?;
    println!(
        "bench {name}: {} rows -> {}",
        table.rows.len(),
        path.display()
    );
    Ok(())
}

fn table1() -> CliResult<CsvTable> {
    let mut t = CsvTable::new(["delta", "cardinality", "w", "K"]);
    for delta in [1e-2, 1e-4] {
        for card in [1.0, 1e3, 1e6, 1e9] {
            for w in [2.0, 4.0, 10.0] {
                let k = sample_size(delta, w, card, SizingMode::Absolute, None)?;
                t.push(vec![
                    fmt_f64(delta),
                    fmt_f64(card),
                    fmt_f64(w),
                    k.to_string(),
                ]);
            }
        }
    }
    Ok(t)
}

fn row(ints: &[u64], floats: &[f64]) -> Vec<String> {
    ints.iter()
        .map(|i| i.to_string())
        .chain(floats.iter().map(|&v| fmt_f64(v)))
        .collect()
}

fn harmonic(cfg: &RunConfig) -> CliResult<Problem> {
    Ok(harmonic_default(&cfg.problem.sizes)?)
}

fn primal_rank(cfg: &RunConfig, args: &BenchArgs, default: usize) -> randpgd::pgd::GreedyConfig {
    randpgd::pgd::GreedyConfig {
        max_rank: args.rank.unwrap_or(default),
        ..cfg.primal()
    }
}

/// Per-point comparison of all estimators on the one-parameter problem.
fn fig3(cfg: &RunConfig, args: &BenchArgs) -> CliResult<CsvTable> {
    let p = harmonic(cfg)?;
    let k = args.k.unwrap_or(6);
    let l = args.l.unwrap_or(3);
    let sk_k = args.stag_k.unwrap_or(l);
    let pts: Vec<Vec<usize>> = p.op.grid().iter().collect();
    let sols = problem::truth(cfg, &p, &pts)?;
    let g = primal_rank(cfg, args, 10);
    let u = greedy_solve(&p.op, &p.rhs, g.clone(), run_to_max_rank)?.tensor;
    let ref_u = extend_primal(&p.op, &p.rhs, &u, u.rank() + sk_k, &g)?;
    let sketch = problem::draw(cfg, &p, k, cfg.seed)?;
    let y = dual_greedy_solve(
        &p.op.transposed(),
        sketch.z_block(),
        cfg.dual(l),
        run_to_max_rank,
    )?
    .tensor;

    let truth = true_errors(&sols, &u, &p.gram, &pts)?;
    let res = residual_estimator(&p.op, &p.rhs, &u, &p.gram, &pts)?;
    let exact = exact_estimators(&sols, &pts, &u, &sketch)?;
    let fast = fast_estimators(&p.op, &p.rhs, &u, &y, &sketch, &pts)?;
    let stag = stagnation_estimator(&u, &ref_u, &p.gram, &pts)?;

    let mut t = CsvTable::new(["mu", "norm_u", "true", "res", "exact", "fast", "stag"]);
    for (i, idx) in pts.iter().enumerate() {
        t.push_f64(&[
            p.op.grid().point(idx)[0],
            p.gram.xnorm(&sols[i])?,
            truth.per_point[i],
            res.per_point[i],
            exact.points[i].delta_rel,
            fast.points[i].delta_rel,
            stag.per_point[i],
        ]);
    }
    Ok(t)
}

/// Histogram of η over `reps` sketches against the density of √F(K, K).
fn fig4(cfg: &RunConfig, args: &BenchArgs) -> CliResult<CsvTable> {
    let p = harmonic(cfg)?;
    let k = args.k.unwrap_or(20);
    let l = args.l.unwrap_or(8);
    let reps = args.reps.unwrap_or(100);
    let bins = args.bins.max(1);
    let pts: Vec<Vec<usize>> = p.op.grid().iter().collect();
    let sols = problem::truth(cfg, &p, &pts)?;
    let u = greedy_solve(&p.op, &p.rhs, primal_rank(cfg, args, 10), run_to_max_rank)?.tensor;
    let truth = true_errors(&sols, &u, &p.gram, &pts)?;
    let op_t = p.op.transposed();
    let mut etas = Vec::new();
    for r in 0..reps as u64 {
        let sketch = problem::draw(cfg, &p, k, cfg.seed.wrapping_add(r))?;
        let y = dual_greedy_solve(&op_t, sketch.z_block(), cfg.dual(l), run_to_max_rank)?.tensor;
        let b = fast_estimators(&p.op, &p.rhs, &u, &y, &sketch, &pts)?;
        etas.extend(effectivity_report(&b, &truth.per_point)?.values());
    }
    if etas.is_empty() {
        return Err(CliError::Lib(randpgd::Error::Domain(
            "no point with a nonzero true error".into(),
        )));
    }
    let hi = etas.iter().cloned().fold(0.0, f64::max).max(2.0);
    let width = hi / bins as f64;
    let mut counts = vec![0usize; bins];
    for &e in &etas {
        counts[((e / width) as usize).min(bins - 1)] += 1;
    }
    eprintln!(
        "fig4: {} samples, median η {:.4}",
        etas.len(),
        median(&etas).unwrap_or(f64::NAN)
    );
    let mut t = CsvTable::new(["lo", "hi", "density", "sqrt_f_pdf"]);
    for (b, c) in counts.iter().enumerate() {
        let lo = b as f64 * width;
        let density = *c as f64 / (etas.len() as f64 * width);
        t.push_f64(&[lo, lo + width, density, sqrt_f_pdf(lo + 0.5 * width, k)]);
    }
    Ok(t)
}

/// Intertwined runs over `reps` sketch seeds with truth and baseline curves.
fn fig5(cfg: &RunConfig, args: &BenchArgs) -> CliResult<CsvTable> {
    let p = harmonic(cfg)?;
    let reps = args.reps.unwrap_or(10);
    let sk_k = args.stag_k.unwrap_or(5);
    let mut icfg = cfg.intertwined();
    icfg.k_override = args.k.or(icfg.k_override).or(Some(10));
    if let Some(m) = args.m_max {
        icfg.m_max = m;
    }
    icfg.validate()?;
    let mut reports = Vec::with_capacity(reps);
    for r in 0..reps as u64 {
        let seed = cfg.seed.wrapping_add(r);
        let c = randpgd::certify::IntertwinedConfig {
            seed,
            ..icfg.clone()
        };
        let sketch = problem::draw(cfg, &p, c.k_override.unwrap(), seed)?;
        reports.push(intertwined_with_sketch(&p.op, &p.rhs, sketch, &c)?);
    }
    // The primal iterates do not depend on the sketch seed: one set of curves
    // up to the longest run serves every repetition.
    let longest = reports
        .iter()
        .max_by_key(|r| r.final_rank())
        .ok_or_else(|| CliError::usage("--reps must be positive"))?;
    let ms: Vec<usize> = (1..=longest.final_rank()).collect();
    let full = extend_primal(
        &p.op,
        &p.rhs,
        &longest.primal,
        longest.final_rank() + sk_k,
        &icfg.primal,
    )?;
    let sols = problem::truth(cfg, &p, &longest.points)?;
    let b = baseline_curves(
        &p.op,
        &p.rhs,
        &p.gram,
        &full,
        &ms,
        sk_k,
        &longest.points,
        Some(&sols),
    )?;
    let truth = b.truth.as_ref().unwrap();

    let mut t = CsvTable::new(["seed", "M", "L", "estimate", "true", "res", "stag"]);
    for report in &reports {
        for h in &report.history {
            let i = h.m - 1;
            t.push(row(
                &[report.seed, h.m as u64, h.l as u64],
                &[h.estimate, truth[i], b.residual[i], b.stagnation[i]],
            ));
        }
    }
    Ok(t)
}

/// Estimator curves over the rank on the 20-parameter problem, on a subsample.
fn fig6(cfg: &RunConfig, args: &BenchArgs) -> CliResult<CsvTable> {
    let (p, _) = highdim_default(&cfg.problem.sizes)?;
    let k = args.k.unwrap_or(3);
    let l = args.l.unwrap_or(5);
    let rank = args.rank.unwrap_or(15);
    let sk_k = args.stag_k.unwrap_or(5);
    let pts = p.op.grid().sample(args.points.unwrap_or(200), cfg.seed);
    let sols = problem::truth(cfg, &p, &pts)?;
    let g = randpgd::pgd::GreedyConfig {
        formulation: Formulation::Galerkin,
        max_rank: rank,
        ..cfg.primal()
    };
    let u = greedy_solve(&p.op, &p.rhs, g.clone(), run_to_max_rank)?.tensor;
    let full = extend_primal(&p.op, &p.rhs, &u, rank + sk_k, &g)?;
    let sketch = problem::draw(cfg, &p, k, cfg.seed)?;
    let op_t = p.op.transposed();
    let mut dual = GreedySolver::dual(
        &op_t,
        sketch.z_block(),
        randpgd::pgd::GreedyConfig {
            max_rank: l,
            ..cfg.dual(l)
        },
    )?;
    while dual.rank() < l {
        dual.step()?;
    }
    let y = dual.tensor().clone();
    let mut t = CsvTable::new(["M", "true", "exact", "fast", "res", "stag"]);
    for m in 1..=rank {
        let um = u.truncated(m);
        t.push(row(
            &[m as u64],
            &[
                true_errors(&sols, &um, &p.gram, &pts)?.rms_rel,
                exact_estimators(&sols, &pts, &um, &sketch)?.rms_rel,
                fast_estimators(&p.op, &p.rhs, &um, &y, &sketch, &pts)?.rms_rel,
                residual_estimator(&p.op, &p.rhs, &um, &p.gram, &pts)?.rms,
                stagnation_estimator(&um, &full.truncated(m + sk_k), &p.gram, &pts)?.rms,
            ],
        ));
    }
    Ok(t)
}

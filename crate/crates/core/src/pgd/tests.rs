use nalgebra::DMatrix;
use proptest::prelude::*;

use super::*;
use crate::error::Error;
use crate::linalg::{factorize, AffineOperator, AffineRhs, AffineTerm, Axis, AxisFactor, CscMatrix, FactorKind, ParameterGrid};
use crate::problems::synthetic::{random_affine, SyntheticSpec};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn mean_sq_residual(op: &AffineOperator, rhs: &AffineRhs, t: &CanonicalTensor) -> f64 {
    let pts: Vec<_> = op.grid().iter().collect();
    pts.iter()
        .map(|idx| norm(&residual(op, rhs, t, idx).unwrap()).powi(2))
        .sum::<f64>()
        / pts.len() as f64
}

/// mean_μ (ũᵀAũ − 2ũᵀf): the Galerkin objective up to its constant.
fn energy(op: &AffineOperator, rhs: &AffineRhs, t: &CanonicalTensor) -> f64 {
    let pts: Vec<_> = op.grid().iter().collect();
    pts.iter()
        .map(|idx| {
            let u = t.evaluate_vec(idx).unwrap();
            let au = op.apply_at(idx, &u).unwrap();
            let f = rhs.eval_at(idx).unwrap();
            let uau: f64 = u.iter().zip(&au).map(|(a, b)| a * b).sum();
            let uf: f64 = u.iter().zip(&f).map(|(a, b)| a * b).sum();
            uau - 2.0 * uf
        })
        .sum::<f64>()
        / pts.len() as f64
}

fn single_point_problem(n: usize) -> (AffineOperator, AffineRhs) {
    let grid = ParameterGrid::new(vec![Axis::uniform("mu", 1.0, 1.0, 1).unwrap()]).unwrap();
    let (op, _, _) = random_affine(&SyntheticSpec {
        n,
        axis_sizes: vec![1],
        extra_terms: 1,
        ..Default::default()
    })
    .unwrap();
    let a = op.assemble_at(&[0]).unwrap();
    let op = AffineOperator::new(grid.clone(), vec![AffineTerm { value: a, factors: vec![AxisFactor::ones(1)] }])
        .unwrap()
        .with_spd(true)
        .unwrap();
    let f: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).sqrt()).collect();
    (op, AffineRhs::constant(grid, f).unwrap())
}

#[test]
fn single_parameter_value_galerkin_recovers_direct_solve() {
    let (op, rhs) = single_point_problem(12);
    let cfg = GreedyConfig {
        formulation: Formulation::Galerkin,
        max_rank: 12,
        ..Default::default()
    };
    let res = greedy_solve(&op, &rhs, cfg, |_, t| t.rank() > 0 && norm(&residual(&op, &rhs, t, &[0]).unwrap()) <= 1e-8).unwrap();
    let f = rhs.eval_at(&[0]).unwrap();
    let exact = factorize(&op.assemble_at(&[0]).unwrap(), FactorKind::Cholesky).unwrap().solve(&f).unwrap();
    let u = res.tensor.evaluate_vec(&[0]).unwrap();
    let err: Vec<f64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
    assert!(norm(&err) <= 1e-10 * norm(&exact));
    assert_eq!(res.tensor.rank(), 1, "one correction solves a single-point problem");
}

#[test]
fn identity_operator_with_rank_one_data_is_solved_in_one_step() {
    let grid = ParameterGrid::new(vec![
        Axis::uniform("a", 0.0, 1.0, 5).unwrap(),
        Axis::uniform("b", 0.0, 1.0, 4).unwrap(),
    ])
    .unwrap();
    let op = AffineOperator::new(
        grid.clone(),
        vec![AffineTerm {
            value: CscMatrix::identity(6),
            factors: vec![AxisFactor::ones(5), AxisFactor::ones(4)],
        }],
    )
    .unwrap()
    .with_spd(true)
    .unwrap();
    let g: Vec<f64> = (0..6).map(|i| 1.0 - 0.3 * i as f64).collect();
    let rhs = AffineRhs::new(
        grid,
        vec![AffineTerm {
            value: g,
            factors: vec![
                AxisFactor::table(vec![1.0, -2.0, 0.5, 3.0, 0.1]),
                AxisFactor::table(vec![0.2, 0.4, -1.0, 2.0]),
            ],
        }],
    )
    .unwrap();
    for formulation in [Formulation::MinResidual, Formulation::Galerkin] {
        let cfg = GreedyConfig { formulation, max_rank: 1, ..Default::default() };
        let res = greedy_solve(&op, &rhs, cfg, run_to_max_rank).unwrap();
        for idx in op.grid().iter() {
            let r = residual(&op, &rhs, &res.tensor, &idx).unwrap();
            let f = rhs.eval_at(&idx).unwrap();
            assert!(norm(&r) <= 1e-10 * norm(&f).max(1e-300), "{formulation:?}");
        }
    }
}

#[test]
fn exactly_rank_two_data_is_recovered() {
    // One axis: greedy with converged ALS is deflation of the best rank-one term.
    let grid = ParameterGrid::new(vec![Axis::uniform("a", 0.0, 1.0, 7).unwrap()]).unwrap();
    let n = 9;
    let op = AffineOperator::new(
        grid.clone(),
        vec![AffineTerm { value: CscMatrix::identity(n), factors: vec![AxisFactor::ones(7)] }],
    )
    .unwrap();
    let u1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
    let u2: Vec<f64> = (0..n).map(|i| (i as f64 * 1.9).cos() * 0.2).collect();
    let rhs = AffineRhs::new(
        grid,
        vec![
            AffineTerm { value: u1, factors: vec![AxisFactor::table(vec![1.0, 0.5, -0.3, 2.0, 0.0, 1.2, -1.0])] },
            AffineTerm { value: u2, factors: vec![AxisFactor::table(vec![0.3, -1.0, 1.0, 0.2, 0.9, -0.4, 0.5])] },
        ],
    )
    .unwrap();
    let cfg = GreedyConfig { max_rank: 4, als_sweeps: 60, als_stagnation_tol: 0.0, ..Default::default() };
    let res = greedy_solve(&op, &rhs, cfg, |m, t| m >= 2 && mean_sq_residual(&op, &rhs, t).sqrt() <= 1e-8).unwrap();
    assert!(res.tensor.rank() <= 4);
    assert!(mean_sq_residual(&op, &rhs, &res.tensor).sqrt() <= 1e-8);
}

#[test]
fn tracked_objectives_match_direct_evaluation() {
    let (op, rhs, _) = random_affine(&SyntheticSpec { seed: 5, ..Default::default() }).unwrap();
    let cfg = GreedyConfig { max_rank: 5, ..Default::default() };
    let res = greedy_solve(&op, &rhs, cfg.clone(), run_to_max_rank).unwrap();
    for m in 0..=5 {
        let direct = mean_sq_residual(&op, &rhs, &res.tensor.truncated(m));
        assert!((res.objective[m] - direct).abs() <= 1e-10 * res.objective[0], "M={m}");
    }
    let gcfg = GreedyConfig { formulation: Formulation::Galerkin, ..cfg };
    let res = greedy_solve(&op, &rhs, gcfg, run_to_max_rank).unwrap();
    for m in 0..=5 {
        let direct = energy(&op, &rhs, &res.tensor.truncated(m));
        assert!((res.objective[m] - direct).abs() <= 1e-10 * (1.0 + direct.abs()), "M={m}");
    }
}

#[test]
fn galerkin_requires_spd() {
    let (op, rhs, _) = random_affine(&SyntheticSpec { spd: false, ..Default::default() }).unwrap();
    let cfg = GreedyConfig { formulation: Formulation::Galerkin, ..Default::default() };
    assert!(matches!(greedy_solve(&op, &rhs, cfg, run_to_max_rank), Err(Error::GalerkinNeedsSpd)));
}

#[test]
fn max_rank_zero_gives_rank_zero() {
    let (op, rhs, _) = random_affine(&SyntheticSpec::default()).unwrap();
    let cfg = GreedyConfig { max_rank: 0, ..Default::default() };
    let res = greedy_solve(&op, &rhs, cfg, run_to_max_rank).unwrap();
    assert_eq!(res.tensor.rank(), 0);
    assert_eq!(res.objective.len(), 1);
}

#[test]
fn dual_with_one_column_equals_primal_with_constant_rhs() {
    let (op, _, _) = random_affine(&SyntheticSpec { seed: 2, ..Default::default() }).unwrap();
    let z: Vec<f64> = (0..op.n()).map(|i| (i as f64).cos()).collect();
    let rhs = AffineRhs::constant(op.grid().clone(), z.clone()).unwrap();
    let zb = DMatrix::from_column_slice(op.n(), 1, &z);
    let cfg = GreedyConfig { max_rank: 3, ..Default::default() };
    let p = greedy_solve(&op, &rhs, cfg.clone(), run_to_max_rank).unwrap();
    let d = dual_greedy_solve(&op.transposed(), &zb, cfg, run_to_max_rank).unwrap();
    assert_eq!(p.tensor.rank(), d.tensor.rank());
    for idx in op.grid().iter() {
        let a = p.tensor.evaluate(&idx).unwrap();
        let b = d.tensor.evaluate(&idx).unwrap();
        assert!((a - b).abs().max() <= 1e-12);
    }
}

#[test]
fn dual_residual_decreases_with_rank() {
    let (op, _, _) = random_affine(&SyntheticSpec { seed: 8, n: 10, ..Default::default() }).unwrap();
    let z = DMatrix::from_fn(op.n(), 6, |i, j| ((i * 7 + j * 3) as f64).sin());
    let opt = op.transposed();
    let cfg = GreedyConfig { max_rank: 6, ..Default::default() };
    let d = dual_greedy_solve(&opt, &z, cfg, run_to_max_rank).unwrap();
    let mean_res = |l: usize| {
        let y = d.tensor.truncated(l);
        let pts: Vec<_> = op.grid().iter().collect();
        pts.iter().map(|idx| dual_residual(&opt, &z, &y, idx).unwrap().norm_squared()).sum::<f64>() / pts.len() as f64
    };
    for l in 1..=6 {
        assert!(mean_res(l) <= mean_res(l - 1) * (1.0 + 1e-12));
        assert!((d.objective[l] - mean_res(l)).abs() <= 1e-9 * d.objective[0]);
    }
}

#[test]
fn zero_first_term_is_neutral() {
    let (op, rhs, _) = random_affine(&SyntheticSpec { seed: 3, ..Default::default() }).unwrap();
    let cfg = GreedyConfig { max_rank: 3, seed: 11, ..Default::default() };
    let plain = greedy_solve(&op, &rhs, cfg.clone(), run_to_max_rank).unwrap();
    let mut s = GreedySolver::primal(&op, &rhs, cfg).unwrap();
    let zero = RankOne {
        block: DMatrix::zeros(op.n(), 1),
        factors: op.grid().sizes().iter().map(|&k| vec![1.0; k]).collect(),
    };
    s.push_term(zero).unwrap();
    assert_eq!(s.objective_history()[1], s.objective_history()[0]);
    for _ in 0..3 {
        s.step().unwrap();
    }
    assert!((s.objective_history()[4] - plain.objective[3]).abs() <= 1e-10 * plain.objective[0]);
}

#[test]
fn exact_minimizer_is_a_fixed_point() {
    // Single grid point: the rank-one minimizer is the direct solution.
    let (op, rhs) = single_point_problem(7);
    let cfg = GreedyConfig { formulation: Formulation::MinResidual, ..Default::default() };
    let mut s = GreedySolver::primal(&op, &rhs, cfg).unwrap();
    let f = rhs.eval_at(&[0]).unwrap();
    let x = factorize(&op.assemble_at(&[0]).unwrap(), FactorKind::Lu).unwrap().solve(&f).unwrap();
    let mut st = AlsState { u: DMatrix::from_column_slice(7, 1, &x), lambdas: vec![vec![1.0]] };
    let mut prob = s.correction_problem();
    let before = prob.objective(&st).unwrap();
    let after = prob.sweep(&mut st).unwrap();
    assert!((before - after).abs() <= 1e-12 * before.abs());
    let _ = s.random_state();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn greedy_and_als_are_monotone(seed in 0u64..1000, spd in any::<bool>(), galerkin in any::<bool>()) {
        let (op, rhs, _) = random_affine(&SyntheticSpec { seed, spd, n: 7, axis_sizes: vec![3, 4, 2], ..Default::default() }).unwrap();
        let formulation = if galerkin && spd { Formulation::Galerkin } else { Formulation::MinResidual };
        let cfg = GreedyConfig { formulation, max_rank: 4, seed, ..Default::default() };
        let mut s = GreedySolver::primal(&op, &rhs, cfg).unwrap();
        for _ in 0..4 {
            let mut prob = s.correction_problem();
            let mut st = AlsState::random(op.n(), 1, &op.grid().sizes(), &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed));
            let mut last: f64 = 0.0;
            for _ in 0..10 {
                for d in prob.sweep_half_steps(&mut st).unwrap() {
                    prop_assert!(d <= last + 1e-12 * (1.0 + last.abs()));
                    last = d;
                }
            }
            s.step().unwrap();
        }
        let h = s.objective_history();
        for w in h.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn evaluation_is_linear_under_concatenation(seed in 0u64..1000) {
        let (op, rhs, _) = random_affine(&SyntheticSpec { seed, ..Default::default() }).unwrap();
        let cfg = GreedyConfig { max_rank: 4, seed, ..Default::default() };
        let t = greedy_solve(&op, &rhs, cfg, run_to_max_rank).unwrap().tensor;
        let a = t.truncated(2);
        let b = CanonicalTensor::from_terms(t.n(), 1, t.sizes().to_vec(), t.terms()[2..].to_vec()).unwrap();
        let ab = a.concat(&b).unwrap();
        for idx in op.grid().iter() {
            let lhs = ab.evaluate(&idx).unwrap();
            let rhs_v = a.evaluate(&idx).unwrap() + b.evaluate(&idx).unwrap();
            prop_assert!((lhs - rhs_v).abs().max() <= 1e-13);
        }
    }
}

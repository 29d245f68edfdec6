//! Library building blocks against independent reference computations.

mod common;

use std::f64::consts::PI;

use bie2d::geometry::erf;
use bie2d::linsolve::{gmres, l2_scaling, solve, LinearOperator, Method, SolverConfig};
use bie2d::operators::{CapacitanceSystem, ElastanceOperator, MobilityOperator, ResistanceSystem};
use bie2d::quadrature::{eval_laplace_single, eval_stokes_single, Density, EvalPlan};
use bie2d::rules::gauss;
use bie2d::scenarios::two_disc_bodies;
use bie2d::{Discretization, Point, Scheme};
use common::*;
use nalgebra::{DMatrix, SymmetricEigen, Vector2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// erf by its alternating Maclaurin series.
fn erf_maclaurin(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut power = x;
    let mut factorial = 1.0;
    for n in 0..200 {
        let term = power / (factorial * (2 * n + 1) as f64);
        sum += if n % 2 == 0 { term } else { -term };
        if term.abs() < 1e-18 {
            break;
        }
        power *= x * x;
        factorial *= (n + 1) as f64;
    }
    2.0 / PI.sqrt() * sum
}

/// erfc by composite Simpson integration of the Gaussian tail.
fn erfc_simpson(x: f64) -> f64 {
    let (a, b, n) = (x, x + 9.0, 40_000);
    let h = (b - a) / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    2.0 / PI.sqrt() * s * h / 3.0
}

proptest! {
    #[test]
    fn erf_matches_maclaurin(x in -2.5..2.5f64) {
        prop_assert!((erf(x) - erf_maclaurin(x)).abs() < 2e-14);
    }

    #[test]
    fn erf_tail_matches_quadrature(x in 2.5..6.0f64) {
        let expect = erfc_simpson(x);
        prop_assert!(((1.0 - erf(x)) - expect).abs() < 1e-15 + 1e-9 * expect);
        prop_assert_eq!(erf(-x), -erf(x));
    }
}

/// Gauss–Legendre rule from the eigen-decomposition of the Jacobi matrix.
fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[test]
fn gauss_legendre_matches_golub_welsch() {
    for n in [1, 2, 3, 5, 8, 16, 24, 32, 48] {
        let rule = gauss(n);
        let (x, w) = golub_welsch(n);
        for i in 0..n {
            assert!((rule.nodes[i] - x[i]).abs() < 1e-14, "n = {n}, node {i}");
            assert!((rule.weights[i] - w[i]).abs() < 1e-14, "n = {n}, weight {i}");
        }
    }
}

fn two_discs(gap: f64) -> Discretization {
    Discretization::new(&two_disc_bodies(gap, Scheme::Panel { panels: 10, order: 16 }).unwrap()).unwrap()
}

fn random_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn combine(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| a * x + b * y).collect()
}

fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    max_abs(x.iter().zip(y).map(|(a, b)| a - b)) / max_abs(y.iter().copied()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn layer_potentials_are_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let disc = two_discs(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let targets = [Point::new(0.0, 0.05), Point::new(-1.15, 1.02), Point::new(2.0, 2.0), Point::new(-1.15, 0.3)];
        let plans = [EvalPlan::on_surface(&disc), EvalPlan::off_surface(&targets)];

        let (u, v) = (random_values(&mut rng, disc.len()), random_values(&mut rng, disc.len()));
        let w = combine(a, &u, b, &v);
        for plan in &plans {
            let eval = |x: &[f64]| eval_laplace_single(&disc, &Density::scalar(&disc, x.to_vec()).unwrap(), plan).unwrap();
            let lhs = eval(&w);
            let rhs = combine(a, &eval(&u), b, &eval(&v));
            prop_assert!(rel_diff(&lhs, &rhs) < 1e-12);
        }

        let (u, v) = (random_values(&mut rng, 2 * disc.len()), random_values(&mut rng, 2 * disc.len()));
        let w = combine(a, &u, b, &v);
        for plan in &plans {
            let eval = |x: &[f64]| -> Vec<f64> {
                eval_stokes_single(&disc, &Density::new(&disc, x.to_vec(), 2).unwrap(), plan)
                    .unwrap()
                    .iter()
                    .flat_map(|v: &Vector2<f64>| [v.x, v.y])
                    .collect()
            };
            let lhs = eval(&w);
            let rhs = combine(a, &eval(&u), b, &eval(&v));
            prop_assert!(rel_diff(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn operators_are_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let disc = two_discs(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ops: [&dyn LinearOperator; 4] = [
            &ElastanceOperator::new(&disc),
            &MobilityOperator::matrix_free(&disc),
            &CapacitanceSystem::new(&disc),
            &ResistanceSystem::new(&disc),
        ];
        for op in ops {
            let n = op.dim();
            let (u, v) = (random_values(&mut rng, n), random_values(&mut rng, n));
            let apply = |x: &[f64]| {
                let mut y = vec![0.0; n];
                op.apply(x, &mut y);
                y
            };
            let lhs = apply(&combine(a, &u, b, &v));
            let rhs = combine(a, &apply(&u), b, &apply(&v));
            prop_assert!(rel_diff(&lhs, &rhs) < 1e-12);
        }
    }
}

#[test]
fn gmres_agrees_with_dense_lu() {
    let disc = two_discs(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cases: [(&dyn LinearOperator, usize); 4] = [
        (&ElastanceOperator::new(&disc), 1),
        (&MobilityOperator::new(&disc), 2),
        (&CapacitanceSystem::new(&disc), 1),
        (&ResistanceSystem::new(&disc), 2),
    ];
    for (op, arity) in cases {
        let n = op.dim();
        let rhs = random_values(&mut rng, n);
        let mut scale = l2_scaling(&disc, arity);
        scale.resize(n, 1.0);
        let cfg = SolverConfig {
            tol: 1e-10,
            ..SolverConfig::default()
        };
        let (x, stats) = gmres(op, &rhs, &cfg, Some(&scale)).unwrap();
        assert!(stats.residual < 1e-10);
        let dense = SolverConfig {
            method: Method::Dense,
            ..cfg
        };
        let (y, _) = solve(op, &rhs, &dense, Some(&scale)).unwrap();
        let diff: f64 = x.iter().zip(&y).zip(&scale).map(|((a, b), s)| ((a - b) * s).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = y.iter().zip(&scale).map(|(b, s)| (b * s).powi(2)).sum::<f64>().sqrt();
        assert!(diff < 1e-8 * norm, "n = {n}: {:e}", diff / norm);
    }
}

//! GMRES with diagonal L² rescaling, and a dense LU fallback.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Stalled;
use crate::geometry::Discretization;
use crate::{Error, Result};

/// A square linear map on flat vectors.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// Dense matrix of the operator; by default built column by column.
    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        m
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let r = self * DVector::from_column_slice(x);
        y.copy_from_slice(r.as_slice());
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Gmres,
    /// LU on the assembled matrix; intended for a few thousand unknowns.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: Option<usize>,
    pub scaling: bool,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-6,
            max_iter: 500,
            restart: None,
            scaling: true,
            method: Method::Gmres,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Invalid(format!("tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iter == 0 || self.restart == Some(0) {
            return Err(Error::Invalid("iteration counts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual ‖b − Ax‖/‖b‖ in the (scaled) system.
    pub residual: f64,
    pub wall_time: f64,
    pub history: Vec<f64>,
}

/// Per-unknown weights √w_i, repeated `arity` times per node.
pub fn l2_scaling(disc: &Discretization, arity: usize) -> Vec<f64> {
    disc.weights
        .iter()
        .flat_map(|w| std::iter::repeat_n(w.sqrt(), arity))
        .collect()
}

struct Scaled<'a> {
    op: &'a dyn LinearOperator,
    d: &'a [f64],
}

impl LinearOperator for Scaled<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, y: &[f64], out: &mut [f64]) {
        let x: Vec<f64> = y.iter().zip(self.d).map(|(v, d)| v / d).collect();
        self.op.apply(&x, out);
        out.iter_mut().zip(self.d).for_each(|(o, d)| *o *= d);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `op x = rhs`. With `scaling` given and enabled in the config, the
/// similar system D A D⁻¹ (D x) = D b is solved and x is returned.
pub fn gmres(op: &dyn LinearOperator, rhs: &[f64], config: &SolverConfig, scaling: Option<&[f64]>) -> Result<(Vec<f64>, SolveStats)> {
    config.validate()?;
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::Invalid(format!("rhs has length {}, operator dimension {n}", rhs.len())));
    }
    let start = Instant::now();
    let d = match scaling {
        Some(d) if config.scaling => {
            if d.len() != n || d.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Invalid("scaling must be positive with one entry per unknown".into()));
            }
            Some(d)
        }
        _ => None,
    };
    let scaled;
    let (a, b): (&dyn LinearOperator, Vec<f64>) = match d {
        Some(d) => {
            scaled = Scaled { op, d };
            (&scaled, rhs.iter().zip(d).map(|(v, s)| v * s).collect())
        }
        None => (op, rhs.to_vec()),
    };
    let (y, mut stats) = gmres_core(a, &b, config)?;
    stats.wall_time = start.elapsed().as_secs_f64();
    let x = match d {
        Some(d) => y.iter().zip(d).map(|(v, s)| v / s).collect(),
        None => y,
    };
    Ok((x, stats))
}

fn gmres_core(a: &dyn LinearOperator, b: &[f64], config: &SolverConfig) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    let mut stats = SolveStats::default();
    if bnorm == 0.0 {
        return Ok((x, stats));
    }
    let cycle = config.restart.unwrap_or(config.max_iter).min(n.max(1));
    let mut r = b.to_vec();
    let mut w = vec![0.0; n];
    loop {
        let beta = norm(&r);
        let rel = beta / bnorm;
        stats.residual = rel;
        if rel <= config.tol {
            return Ok((x, stats));
        }
        if stats.iterations >= config.max_iter {
            return Err(Error::NoConvergence(Box::new(Stalled {
                iterations: stats.iterations,
                residual: rel,
                history: stats.history,
                best: x,
            })));
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut k = 0;
        while k < cycle && stats.iterations < config.max_iter {
            a.apply(&basis[k], &mut w);
            let mut col = vec![0.0; k + 2];
            // modified Gram–Schmidt, applied twice for stability
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    col[i] += c;
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let hn = norm(&w);
            col[k + 1] = hn;
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let rho = col[k].hypot(col[k + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (col[k] / rho, col[k + 1] / rho) };
            cs.push(c);
            sn.push(s);
            col[k] = rho;
            col[k + 1] = 0.0;
            g.push(-s * g[k]);
            g[k] *= c;
            h.push(col);
            k += 1;
            stats.iterations += 1;
            let est = g[k].abs() / bnorm;
            stats.history.push(est);
            if est <= config.tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution for the k×k triangular system
        let mut yk = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= h[j][i] * yk[j];
            }
            yk[i] = s / h[i][i];
        }
        for (j, yj) in yk.iter().enumerate() {
            x.iter_mut().zip(&basis[j]).for_each(|(xi, vi)| *xi += yj * vi);
        }
        a.apply(&x, &mut w);
        r.iter_mut().zip(b.iter().zip(&w)).for_each(|(ri, (bi, wi))| *ri = bi - wi);
    }
}

/// Solve with the method chosen in `config`. For the dense method the
/// reported residual is measured in the same (scaled) norm GMRES uses.
pub fn solve(op: &dyn LinearOperator, rhs: &[f64], config: &SolverConfig, scaling: Option<&[f64]>) -> Result<(Vec<f64>, SolveStats)> {
    match config.method {
        Method::Gmres => gmres(op, rhs, config, scaling),
        Method::Dense => {
            config.validate()?;
            let start = Instant::now();
            let x = dense_solve(op, rhs)?;
            let mut ax = vec![0.0; x.len()];
            op.apply(&x, &mut ax);
            let d = scaling.filter(|_| config.scaling);
            let weight = |i: usize| d.map_or(1.0, |d| d[i]);
            let r: Vec<f64> = (0..x.len()).map(|i| (rhs[i] - ax[i]) * weight(i)).collect();
            let b: Vec<f64> = (0..x.len()).map(|i| rhs[i] * weight(i)).collect();
            let bn = norm(&b);
            let residual = if bn > 0.0 { norm(&r) / bn } else { 0.0 };
            Ok((
                x,
                SolveStats {
                    iterations: 0,
                    residual,
                    wall_time: start.elapsed().as_secs_f64(),
                    history: vec![residual],
                },
            ))
        }
    }
}

/// Direct solve by LU with partial pivoting.
pub fn dense_solve(op: &dyn LinearOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::Invalid(format!("rhs has length {}, operator dimension {n}", rhs.len())));
    }
    let m = op.to_dense();
    let b = DVector::from_column_slice(rhs);
    let lu = m.clone().lu();
    let x = lu.solve(&b).ok_or(Error::Singular)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let res = (&m * &x - &b).norm();
    let scale = m.norm() * x.norm() + b.norm();
    if res > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Singular);
    }
    Ok(x.as_slice().to_vec())
}

//! Second-kind boundary operators for the four exterior problems.
//!
//! Elastance:   (½I + K + L) μ = −(½I + K) σ
//! Mobility:    (½I + 𝒦 + 𝐋) μ = −(½I + 𝒦) ρ
//! Capacitance: completed double layer with centroid log sources and an
//!              ambient constant, bordered by the neutrality row.
//! Resistance:  completed Stokes double layer with centroid Stokeslets,
//!              rotlets and an ambient velocity, bordered by ΣF = 0.

use nalgebra::{DMatrix, Vector2};
use rayon::prelude::*;

use crate::geometry::{perp, Discretization};
use crate::kernels::raw;
use crate::linsolve::LinearOperator;
use crate::quadrature::{apply_smooth, Density, SmoothKernel};
use crate::{Error, Result};

/// Largest dense kernel matrix (in entries) kept in memory.
pub const DENSE_CACHE_LIMIT: usize = 25_000_000;

fn neutrality_tol(values: impl Iterator<Item = f64> + Clone) -> f64 {
    1e-12 * values.map(f64::abs).sum::<f64>().max(1.0)
}

/// σ_i = q_i / |Γ_i| on each body.
pub fn make_sigma(disc: &Discretization, q: &[f64]) -> Result<Density> {
    check_count(disc, q.len(), "charges")?;
    let sum: f64 = q.iter().sum();
    if sum.abs() > neutrality_tol(q.iter().copied()) {
        return Err(Error::NonNeutralCharge(sum));
    }
    Ok(Density::from_fn_scalar(disc, |i| {
        let b = disc.body_of[i];
        q[b] / disc.bodies[b].arclength
    }))
}

/// ρ_j = F_j/|Γ_j| + T_j (x − x^c_j)^⊥ / W_j on each body.
pub fn make_rho(disc: &Discretization, forces: &[Vector2<f64>], torques: &[f64]) -> Result<Density> {
    check_count(disc, forces.len(), "forces")?;
    check_count(disc, torques.len(), "torques")?;
    let net: Vector2<f64> = forces.iter().sum();
    let tol = neutrality_tol(forces.iter().flat_map(|f| [f.x, f.y]));
    if net.norm() > tol {
        return Err(Error::NetForce(net.x, net.y));
    }
    Ok(Density::from_fn_vector(disc, |i| {
        let b = &disc.bodies[disc.body_of[i]];
        let k = disc.body_of[i];
        forces[k] / b.arclength + torques[k] * perp(&(disc.points[i] - b.centroid)) / b.second_moment
    }))
}

pub(crate) fn check_count(disc: &Discretization, got: usize, what: &str) -> Result<()> {
    if got != disc.body_count() {
        return Err(Error::Invalid(format!(
            "{got} {what} given for {} bodies",
            disc.body_count()
        )));
    }
    Ok(())
}

/// Smooth on-surface operator, optionally cached as a dense matrix.
pub struct SmoothOperator<'a> {
    disc: &'a Discretization,
    kernel: SmoothKernel,
    /// Row-major dense matrix.
    dense: Option<Vec<f64>>,
}

impl<'a> SmoothOperator<'a> {
    pub fn new(disc: &'a Discretization, kernel: SmoothKernel) -> Self {
        let n = disc.len() * kernel.arity();
        let dense = (n * n <= DENSE_CACHE_LIMIT).then(|| Self::assemble(disc, kernel));
        SmoothOperator { disc, kernel, dense }
    }

    pub fn matrix_free(disc: &'a Discretization, kernel: SmoothKernel) -> Self {
        SmoothOperator {
            disc,
            kernel,
            dense: None,
        }
    }

    pub fn is_cached(&self) -> bool {
        self.dense.is_some()
    }

    fn assemble(disc: &Discretization, kernel: SmoothKernel) -> Vec<f64> {
        let n = disc.len();
        let a = kernel.arity();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; a * a * n];
                for j in 0..n {
                    if a == 1 {
                        row[j] = kernel.scalar_entry(disc, i, j);
                    } else {
                        let m = kernel.block_entry(disc, i, j);
                        row[2 * j] = m[(0, 0)];
                        row[2 * j + 1] = m[(0, 1)];
                        row[2 * n + 2 * j] = m[(1, 0)];
                        row[2 * n + 2 * j + 1] = m[(1, 1)];
                    }
                }
                row
            })
            .collect();
        rows.concat()
    }

    /// The kernel matrix in the top-left corner of a `dim`×`dim` zero matrix.
    pub fn to_matrix(&self, dim: usize) -> DMatrix<f64> {
        let n = self.disc.len() * self.kernel.arity();
        let assembled;
        let rows = match &self.dense {
            Some(m) => m,
            None => {
                assembled = Self::assemble(self.disc, self.kernel);
                &assembled
            }
        };
        let mut m = DMatrix::zeros(dim, dim);
        for (i, row) in rows.chunks(n).enumerate() {
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        match &self.dense {
            Some(m) => {
                let dim = self.disc.len() * self.kernel.arity();
                y[..dim].par_iter_mut().zip(m.par_chunks(dim)).for_each(|(o, row)| {
                    *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
                });
            }
            None => apply_smooth(self.disc, self.kernel, x, y),
        }
    }
}

/// Dense `dim`×`dim` matrix of `op` whose smooth part is `k`, with `extra`
/// applying the remaining (cheap) terms additively.
fn dense_with_extra(dim: usize, k: &SmoothOperator, extra: impl Fn(&[f64], &mut [f64])) -> DMatrix<f64> {
    let mut m = k.to_matrix(dim);
    let mut e = vec![0.0; dim];
    let mut col = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        col.fill(0.0);
        extra(&e, &mut col);
        m.column_mut(j).iter_mut().zip(&col).for_each(|(a, c)| *a += c);
        e[j] = 0.0;
    }
    m
}

/// μ ↦ (½I + K + L) μ.
pub struct ElastanceOperator<'a> {
    disc: &'a Discretization,
    k: SmoothOperator<'a>,
}

impl<'a> ElastanceOperator<'a> {
    pub fn new(disc: &'a Discretization) -> Self {
        ElastanceOperator {
            disc,
            k: SmoothOperator::new(disc, SmoothKernel::LaplaceK),
        }
    }

    /// (½I + K) μ.
    pub fn apply_half_plus_k(&self, x: &[f64], y: &mut [f64]) {
        self.k.apply(x, y);
        y.iter_mut().zip(x).for_each(|(o, v)| *o += 0.5 * v);
    }

    /// −(½I + K) σ for the charges `q`.
    pub fn rhs(&self, q: &[f64]) -> Result<(Density, Vec<f64>)> {
        let sigma = make_sigma(self.disc, q)?;
        let mut out = vec![0.0; self.disc.len()];
        self.apply_half_plus_k(sigma.values(), &mut out);
        out.iter_mut().for_each(|v| *v = -*v);
        Ok((sigma, out))
    }
}

/// Per-body integrals ∫ μ ds of a scalar density.
pub fn body_integrals(disc: &Discretization, mu: &[f64]) -> Vec<f64> {
    disc.bodies
        .iter()
        .map(|b| b.nodes.clone().map(|i| disc.weights[i] * mu[i]).sum())
        .collect()
}

/// Per-body force ∫ μ ds and torque ∫ (y − x^c)^⊥·μ ds of a vector density.
pub fn body_moments(disc: &Discretization, mu: &[f64]) -> Vec<(Vector2<f64>, f64)> {
    disc.bodies
        .iter()
        .map(|b| {
            b.nodes.clone().fold((Vector2::zeros(), 0.0), |(f, t), i| {
                let m = Vector2::new(mu[2 * i], mu[2 * i + 1]) * disc.weights[i];
                (f + m, t + perp(&(disc.points[i] - b.centroid)).dot(&m))
            })
        })
        .collect()
}

impl LinearOperator for ElastanceOperator<'_> {
    fn dim(&self) -> usize {
        self.disc.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.k.apply(x, y);
        self.add_extra(x, y);
    }

    fn to_dense(&self) -> DMatrix<f64> {
        dense_with_extra(self.dim(), &self.k, |x, y| self.add_extra(x, y))
    }
}

impl ElastanceOperator<'_> {
    fn add_extra(&self, x: &[f64], y: &mut [f64]) {
        let l = body_integrals(self.disc, x);
        y.iter_mut()
            .zip(x)
            .zip(&self.disc.body_of)
            .for_each(|((o, v), &b)| *o += 0.5 * v + l[b]);
    }
}

/// Elastance right-hand side −(½I + K)σ.
pub fn elastance_rhs(disc: &Discretization, q: &[f64]) -> Result<Vec<f64>> {
    Ok(ElastanceOperator::new(disc).rhs(q)?.1)
}

/// μ ↦ (½I + 𝒦 + 𝐋) μ on interleaved 2-vectors.
pub struct MobilityOperator<'a> {
    disc: &'a Discretization,
    k: SmoothOperator<'a>,
}

impl<'a> MobilityOperator<'a> {
    pub fn new(disc: &'a Discretization) -> Self {
        MobilityOperator {
            disc,
            k: SmoothOperator::new(disc, SmoothKernel::StokesTraction),
        }
    }

    pub fn matrix_free(disc: &'a Discretization) -> Self {
        MobilityOperator {
            disc,
            k: SmoothOperator::matrix_free(disc, SmoothKernel::StokesTraction),
        }
    }

    pub fn apply_half_plus_k(&self, x: &[f64], y: &mut [f64]) {
        self.k.apply(x, y);
        y.iter_mut().zip(x).for_each(|(o, v)| *o += 0.5 * v);
    }

    /// −(½I + 𝒦) ρ for the given forces and torques.
    pub fn rhs(&self, forces: &[Vector2<f64>], torques: &[f64]) -> Result<(Density, Vec<f64>)> {
        let rho = make_rho(self.disc, forces, torques)?;
        let mut out = vec![0.0; 2 * self.disc.len()];
        self.apply_half_plus_k(rho.values(), &mut out);
        out.iter_mut().for_each(|v| *v = -*v);
        Ok((rho, out))
    }
}

impl LinearOperator for MobilityOperator<'_> {
    fn dim(&self) -> usize {
        2 * self.disc.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.k.apply(x, y);
        self.add_extra(x, y);
    }

    fn to_dense(&self) -> DMatrix<f64> {
        dense_with_extra(self.dim(), &self.k, |x, y| self.add_extra(x, y))
    }
}

impl MobilityOperator<'_> {
    fn add_extra(&self, x: &[f64], y: &mut [f64]) {
        let m = body_moments(self.disc, x);
        for (i, o) in y.chunks_mut(2).enumerate() {
            let b = self.disc.body_of[i];
            let (f, t) = m[b];
            let add = f + perp(&(self.disc.points[i] - self.disc.bodies[b].centroid)) * t;
            o[0] += 0.5 * x[2 * i] + add.x;
            o[1] += 0.5 * x[2 * i + 1] + add.y;
        }
    }
}

/// Mobility right-hand side −(½I + 𝒦)ρ.
pub fn mobility_rhs(disc: &Discretization, forces: &[Vector2<f64>], torques: &[f64]) -> Result<Vec<f64>> {
    Ok(MobilityOperator::new(disc).rhs(forces, torques)?.1)
}

/// Unknowns (μ, c∞): (½I + K*)μ + Σ_k a_k G(·, c_k) + c∞ = φ, Σ_k a_k = 0,
/// with a_k = ∫_{Γ_k} μ ds and c_k the centroid of body k.
pub struct CapacitanceSystem<'a> {
    disc: &'a Discretization,
    k: SmoothOperator<'a>,
    /// G(x_i, c_k), row-major by node.
    sources: Vec<f64>,
}

impl<'a> CapacitanceSystem<'a> {
    pub fn new(disc: &'a Discretization) -> Self {
        let nb = disc.body_count();
        let sources = (0..disc.len())
            .flat_map(|i| (0..nb).map(move |k| raw::laplace_g(&(disc.points[i] - disc.bodies[k].centroid))))
            .collect();
        CapacitanceSystem {
            disc,
            k: SmoothOperator::new(disc, SmoothKernel::LaplaceKStar),
            sources,
        }
    }

    pub fn rhs(&self, potentials: &[f64]) -> Result<Vec<f64>> {
        check_count(self.disc, potentials.len(), "potentials")?;
        let mut b: Vec<f64> = self.disc.body_of.iter().map(|&k| potentials[k]).collect();
        b.push(0.0);
        Ok(b)
    }

    pub fn scaling(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.disc.weights.iter().map(|w| w.sqrt()).collect();
        d.push(1.0);
        d
    }
}

impl LinearOperator for CapacitanceSystem<'_> {
    fn dim(&self) -> usize {
        self.disc.len() + 1
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.k.apply(&x[..self.disc.len()], y);
        self.add_extra(x, y);
    }

    fn to_dense(&self) -> DMatrix<f64> {
        dense_with_extra(self.dim(), &self.k, |x, y| self.add_extra(x, y))
    }
}

impl CapacitanceSystem<'_> {
    fn add_extra(&self, x: &[f64], y: &mut [f64]) {
        let n = self.disc.len();
        let nb = self.disc.body_count();
        let (mu, cinf) = (&x[..n], x[n]);
        let a = body_integrals(self.disc, mu);
        for i in 0..n {
            let src: f64 = (0..nb).map(|k| a[k] * self.sources[i * nb + k]).sum();
            y[i] += 0.5 * mu[i] + src + cinf;
        }
        y[n] = a.iter().sum();
    }
}

/// Unknowns (μ, u∞): (½I + 𝒟)μ + Σ_k [S(·, c_k) F'_k + R(·, c_k) T'_k] + u∞ = rigid
/// motion, Σ_k F'_k = 0, with F'_k = ∫μ_k ds and T'_k = ∫(y − c_k)^⊥·μ_k ds.
pub struct ResistanceSystem<'a> {
    disc: &'a Discretization,
    d: SmoothOperator<'a>,
}

impl<'a> ResistanceSystem<'a> {
    pub fn new(disc: &'a Discretization) -> Self {
        ResistanceSystem {
            disc,
            d: SmoothOperator::new(disc, SmoothKernel::StokesDlp),
        }
    }

    pub fn rhs(&self, velocities: &[Vector2<f64>], omegas: &[f64]) -> Result<Vec<f64>> {
        check_count(self.disc, velocities.len(), "velocities")?;
        check_count(self.disc, omegas.len(), "angular velocities")?;
        let mut b = Vec::with_capacity(2 * self.disc.len() + 2);
        for (i, &k) in self.disc.body_of.iter().enumerate() {
            let u = velocities[k] + omegas[k] * perp(&(self.disc.points[i] - self.disc.bodies[k].centroid));
            b.push(u.x);
            b.push(u.y);
        }
        b.extend([0.0, 0.0]);
        Ok(b)
    }

    pub fn scaling(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.disc.weights.iter().flat_map(|w| [w.sqrt(); 2]).collect();
        d.extend([1.0, 1.0]);
        d
    }
}

impl LinearOperator for ResistanceSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.disc.len() + 2
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.d.apply(&x[..2 * self.disc.len()], y);
        self.add_extra(x, y);
    }

    fn to_dense(&self) -> DMatrix<f64> {
        dense_with_extra(self.dim(), &self.d, |x, y| self.add_extra(x, y))
    }
}

impl ResistanceSystem<'_> {
    fn add_extra(&self, x: &[f64], y: &mut [f64]) {
        let n = self.disc.len();
        let mu = &x[..2 * n];
        let uinf = Vector2::new(x[2 * n], x[2 * n + 1]);
        let m = body_moments(self.disc, mu);
        let disc = self.disc;
        y[..2 * n].par_chunks_mut(2).enumerate().for_each(|(i, o)| {
            let mut u = 0.5 * Vector2::new(mu[2 * i], mu[2 * i + 1]) + uinf;
            for (b, (f, t)) in disc.bodies.iter().zip(&m) {
                let r = disc.points[i] - b.centroid;
                u += raw::stokeslet(&r) * f + raw::rotlet(&r) * *t;
            }
            o[0] += u.x;
            o[1] += u.y;
        });
        let net: Vector2<f64> = m.iter().map(|(f, _)| f).sum();
        y[2 * n] = net.x;
        y[2 * n + 1] = net.y;
    }
}

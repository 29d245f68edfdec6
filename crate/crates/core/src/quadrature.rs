//! Layer-potential evaluation from a discretized density.
//!
//! On-surface smooth kernels use the Nyström rule with diagonal limits.
//! The logarithmic part of single layers is integrated on-surface with
//! product weights (panel bodies) or the Kress rule (periodic bodies).
//! Off-surface targets close to a panel are handled by adaptive dyadic
//! subdivision with the density interpolated from the panel nodes; a
//! local-expansion (QBX) evaluator is also available.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::geometry::{perp, Discretization, Layout, Point};
use crate::kernels::{laplace_k_diag_limit, raw, stokes_diag_limit};
use crate::rules::{gauss, kress_weights, lagrange_basis, log_weights};
use crate::{Error, Result};

const INV_2PI: f64 = 0.5 / PI;
const INV_4PI: f64 = 0.25 / PI;
const SUB_ORDER: usize = 16;
const MAX_DEPTH: u32 = 52;
const PERIODIC_FAR: f64 = 5.0;

/// Scalar (arity 1) or 2-vector (arity 2) values at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    values: Vec<f64>,
    arity: usize,
}

impl Density {
    pub fn new(disc: &Discretization, values: Vec<f64>, arity: usize) -> Result<Self> {
        if !(1..=2).contains(&arity) {
            return Err(Error::Invalid(format!("density arity must be 1 or 2, got {arity}")));
        }
        if values.len() != disc.len() * arity {
            return Err(Error::DensityLength {
                got: values.len(),
                expected: disc.len() * arity,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("density contains non-finite values".into()));
        }
        Ok(Density { values, arity })
    }

    pub fn scalar(disc: &Discretization, values: Vec<f64>) -> Result<Self> {
        Self::new(disc, values, 1)
    }

    pub fn vector(disc: &Discretization, values: &[Vector2<f64>]) -> Result<Self> {
        Self::new(disc, values.iter().flat_map(|v| [v.x, v.y]).collect(), 2)
    }

    pub fn from_fn_scalar(disc: &Discretization, f: impl Fn(usize) -> f64) -> Self {
        Density {
            values: (0..disc.len()).map(f).collect(),
            arity: 1,
        }
    }

    pub fn from_fn_vector(disc: &Discretization, f: impl Fn(usize) -> Vector2<f64>) -> Self {
        Density {
            values: (0..disc.len()).flat_map(|i| {
                let v = f(i);
                [v.x, v.y]
            }).collect(),
            arity: 2,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn vec2(&self, i: usize) -> Vector2<f64> {
        Vector2::new(self.values[2 * i], self.values[2 * i + 1])
    }

    fn expect_arity(&self, arity: usize) -> Result<()> {
        if self.arity != arity {
            return Err(Error::Invalid(format!(
                "density arity {} where {arity} is required",
                self.arity
            )));
        }
        Ok(())
    }
}

/// An evaluation point, optionally flagged as quadrature node `node`.
#[derive(Debug, Clone, Copy)]
pub struct Target {
    pub point: Point,
    pub node: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NearMethod {
    /// Dyadic subdivision of near panels.
    Adaptive,
    /// Local expansions of the given order for targets closer than half a
    /// panel length; falls back to subdivision when no valid center exists.
    Qbx { order: usize },
}

#[derive(Debug, Clone)]
pub struct EvalPlan {
    pub targets: Vec<Target>,
    /// A target is near a panel when closer than this many panel lengths.
    pub near_threshold: f64,
    pub method: NearMethod,
}

impl EvalPlan {
    pub fn on_surface(disc: &Discretization) -> Self {
        EvalPlan {
            targets: (0..disc.len())
                .map(|i| Target {
                    point: disc.points[i],
                    node: Some(i),
                })
                .collect(),
            near_threshold: 1.5,
            method: NearMethod::Adaptive,
        }
    }

    pub fn off_surface(points: &[Point]) -> Self {
        EvalPlan {
            targets: points
                .iter()
                .map(|&point| Target { point, node: None })
                .collect(),
            near_threshold: 1.5,
            method: NearMethod::Adaptive,
        }
    }

    pub fn with_method(mut self, method: NearMethod) -> Self {
        self.method = method;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.near_threshold > 0.0) {
            return Err(Error::Invalid("near threshold must be positive".into()));
        }
        if let NearMethod::Qbx { order } = self.method {
            if order < 2 {
                return Err(Error::Invalid("expansion order must be at least 2".into()));
            }
        }
        Ok(())
    }
}

/// Panel geometry for near-field work. Periodic bodies get pseudo-panels.
struct ViewPanel {
    t0: f64,
    t1: f64,
    start: usize,
    length: f64,
    center: Point,
    radius: f64,
}

struct BodyView {
    order: usize,
    panels: Vec<ViewPanel>,
    pos: Vec<Point>,
    nrm: Vec<Vector2<f64>>,
    wts: Vec<f64>,
    dens: Vec<f64>,
}

/// Density on a discretization, with lazily built near-field views.
pub(crate) struct Sources<'a> {
    disc: &'a Discretization,
    dens: &'a [f64],
    arity: usize,
    views: Vec<OnceLock<BodyView>>,
    kress: Vec<OnceLock<Vec<f64>>>,
}

fn trig_interpolate(values: &[f64], t_first: f64, ts: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    ts.iter()
        .map(|&t| {
            let s = t - t_first;
            let mut acc = buf[0].re;
            for k in 1..half {
                let (sn, cs) = (k as f64 * s).sin_cos();
                let e = Complex::new(cs, sn);
                acc += 2.0 * (buf[k] * e).re;
            }
            if n % 2 == 0 {
                acc += buf[half].re * (half as f64 * s).cos();
            }
            acc / n as f64
        })
        .collect()
}

impl<'a> Sources<'a> {
    pub(crate) fn new(disc: &'a Discretization, density: &'a Density) -> Self {
        Sources {
            disc,
            dens: &density.values,
            arity: density.arity,
            views: (0..disc.body_count()).map(|_| OnceLock::new()).collect(),
            kress: (0..disc.body_count()).map(|_| OnceLock::new()).collect(),
        }
    }

    fn density_at(&self, i: usize) -> [f64; 2] {
        if self.arity == 1 {
            [self.dens[i], 0.0]
        } else {
            [self.dens[2 * i], self.dens[2 * i + 1]]
        }
    }

    fn view(&self, b: usize) -> &BodyView {
        self.views[b].get_or_init(|| self.build_view(b))
    }

    fn build_view(&self, b: usize) -> BodyView {
        let disc = self.disc;
        let body = &disc.bodies[b];
        let mut view = BodyView {
            order: SUB_ORDER,
            panels: Vec::new(),
            pos: Vec::new(),
            nrm: Vec::new(),
            wts: Vec::new(),
            dens: Vec::new(),
        };
        match body.layout {
            Layout::Panels { order } => {
                view.order = order;
                for p in &body.panels {
                    let r = p.start..p.start + order;
                    view.panels.push(ViewPanel {
                        t0: p.t0,
                        t1: p.t1,
                        start: p.start - body.nodes.start,
                        length: p.length,
                        center: Point::zeros(),
                        radius: 0.0,
                    });
                    view.pos.extend_from_slice(&disc.points[r.clone()]);
                    view.nrm.extend_from_slice(&disc.normals[r.clone()]);
                    view.wts.extend_from_slice(&disc.weights[r.clone()]);
                    view.dens.extend_from_slice(&self.dens[r.start * self.arity..r.end * self.arity]);
                }
            }
            Layout::Periodic => {
                let n = body.len();
                let count = (n / 4).max(4);
                let rule = gauss(SUB_ORDER);
                let h = 2.0 * PI / count as f64;
                let mut ts = Vec::with_capacity(count * SUB_ORDER);
                for p in 0..count {
                    let t0 = h * p as f64;
                    let start = view.pos.len();
                    for (u, w) in rule.nodes.iter().zip(&rule.weights) {
                        let t = t0 + 0.5 * h * (u + 1.0);
                        let cp = body.curve.eval(t);
                        view.pos.push(cp.position);
                        view.nrm.push(cp.normal);
                        view.wts.push(w * 0.5 * h * cp.speed);
                        ts.push(t);
                    }
                    view.panels.push(ViewPanel {
                        t0,
                        t1: t0 + h,
                        start,
                        length: view.wts[start..].iter().sum(),
                        center: Point::zeros(),
                        radius: 0.0,
                    });
                }
                let t_first = disc.params[body.nodes.start];
                let comps: Vec<Vec<f64>> = (0..self.arity)
                    .map(|c| {
                        let vals: Vec<f64> = body.nodes.clone().map(|i| self.dens[i * self.arity + c]).collect();
                        trig_interpolate(&vals, t_first, &ts)
                    })
                    .collect();
                for k in 0..ts.len() {
                    for comp in &comps {
                        view.dens.push(comp[k]);
                    }
                }
            }
        }
        let order = view.order;
        for p in view.panels.iter_mut() {
            let nodes = &view.pos[p.start..p.start + order];
            let c = nodes.iter().fold(Point::zeros(), |a, x| a + x) / order as f64;
            p.center = c;
            p.radius = nodes.iter().map(|x| (x - c).norm()).fold(0.0, f64::max) + 0.25 * p.length;
        }
        view
    }

    fn kress(&self, b: usize) -> &[f64] {
        self.kress[b].get_or_init(|| kress_weights(self.disc.bodies[b].len()))
    }

    /// ∫_{body b} k(x − y, n_y, μ(y)) ds_y for a target off body `b`.
    fn integrate_body<const M: usize, F>(&self, b: usize, x: &Point, near: f64, f: &F, skip: Option<usize>) -> [f64; M]
    where
        F: Fn(&Vector2<f64>, &Vector2<f64>, &[f64; 2]) -> [f64; M],
    {
        let disc = self.disc;
        let body = &disc.bodies[b];
        let mut acc = [0.0; M];
        if body.layout == Layout::Periodic {
            let dmin = body
                .nodes
                .clone()
                .map(|j| (x - disc.points[j]).norm_squared())
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            if dmin >= PERIODIC_FAR * body.spacing() {
                for j in body.nodes.clone() {
                    let v = f(&(x - disc.points[j]), &disc.normals[j], &self.density_at(j));
                    for m in 0..M {
                        acc[m] += v[m] * disc.weights[j];
                    }
                }
                return acc;
            }
        }
        let view = self.view(b);
        let a = self.arity;
        for (p, panel) in view.panels.iter().enumerate() {
            if skip == Some(p) {
                continue;
            }
            let limit = near * panel.length;
            let nodes = panel.start..panel.start + view.order;
            let far = (x - panel.center).norm() - panel.radius >= limit
                || nodes
                    .clone()
                    .map(|j| (x - view.pos[j]).norm_squared())
                    .fold(f64::INFINITY, f64::min)
                    >= limit * limit;
            if far {
                for j in nodes {
                    let d = if a == 1 {
                        [view.dens[j], 0.0]
                    } else {
                        [view.dens[2 * j], view.dens[2 * j + 1]]
                    };
                    let v = f(&(x - view.pos[j]), &view.nrm[j], &d);
                    for m in 0..M {
                        acc[m] += v[m] * view.wts[j];
                    }
                }
            } else {
                let v = self.adaptive(b, view, panel, x, f);
                for m in 0..M {
                    acc[m] += v[m];
                }
            }
        }
        acc
    }

    fn adaptive<const M: usize, F>(&self, b: usize, view: &BodyView, panel: &ViewPanel, x: &Point, f: &F) -> [f64; M]
    where
        F: Fn(&Vector2<f64>, &Vector2<f64>, &[f64; 2]) -> [f64; M],
    {
        let curve = &self.disc.bodies[b].curve;
        let prule = gauss(view.order);
        let sub = gauss(SUB_ORDER);
        let a = self.arity;
        let pd = &view.dens[panel.start * a..(panel.start + view.order) * a];
        let jac = 0.5 * (panel.t1 - panel.t0);
        let mut acc = [0.0; M];
        let mut stack = vec![(-1.0f64, 1.0f64, 0u32)];
        let mut pts = [(Point::zeros(), Vector2::zeros(), 0.0f64, 0.0f64); SUB_ORDER];
        let mut basis = vec![0.0; view.order];
        while let Some((lo, hi, depth)) = stack.pop() {
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            let mut length = 0.0;
            let mut dmin = f64::INFINITY;
            for (k, (xi, w)) in sub.nodes.iter().zip(&sub.weights).enumerate() {
                let u = mid + half * xi;
                let cp = curve.eval(panel.t0 + jac * (u + 1.0));
                let wt = w * half * jac * cp.speed;
                length += wt;
                dmin = dmin.min((x - cp.position).norm());
                pts[k] = (cp.position, cp.normal, wt, u);
            }
            if dmin < length && depth < MAX_DEPTH {
                stack.push((lo, mid, depth + 1));
                stack.push((mid, hi, depth + 1));
                continue;
            }
            for &(y, n, wt, u) in pts.iter() {
                lagrange_basis(&prule.nodes, &prule.bary, u, &mut basis);
                let mut d = [0.0; 2];
                for (l, bl) in basis.iter().enumerate() {
                    for c in 0..a {
                        d[c] += bl * pd[l * a + c];
                    }
                }
                let v = f(&(x - y), &n, &d);
                for m in 0..M {
                    acc[m] += v[m] * wt;
                }
            }
        }
        acc
    }

    /// Sum over all bodies except `own` (if any).
    fn integrate_all<const M: usize, F>(&self, x: &Point, near: f64, f: &F, own: Option<usize>) -> [f64; M]
    where
        F: Fn(&Vector2<f64>, &Vector2<f64>, &[f64; 2]) -> [f64; M],
    {
        let mut acc = [0.0; M];
        for b in 0..self.disc.body_count() {
            if own == Some(b) {
                continue;
            }
            let v = self.integrate_body(b, x, near, f, None);
            for m in 0..M {
                acc[m] += v[m];
            }
        }
        acc
    }

    /// ∫_{own body} log|x_i − y| μ(y) ds_y for node `i` (component-wise).
    fn log_self(&self, i: usize, near: f64) -> [f64; 2] {
        let disc = self.disc;
        let b = disc.body_of[i];
        let body = &disc.bodies[b];
        let x = disc.points[i];
        let mut acc = [0.0; 2];
        let mut add = |j: usize, w: f64| {
            let d = self.density_at(j);
            acc[0] += w * d[0];
            acc[1] += w * d[1];
        };
        match body.layout {
            Layout::Panels { order } => {
                let p = body
                    .panels
                    .partition_point(|p| p.start + order <= i);
                let panel = &body.panels[p];
                let local = i - panel.start;
                let rule = gauss(order);
                let lw = log_weights(order, local);
                let jac = 0.5 * (panel.t1 - panel.t0);
                for l in 0..order {
                    let j = panel.start + l;
                    let smooth = if l == local {
                        (disc.speed[j] * jac).ln()
                    } else {
                        (x - disc.points[j]).norm().ln() - (rule.nodes[l] - rule.nodes[local]).abs().ln()
                    };
                    add(j, lw[l] * disc.speed[j] * jac + smooth * disc.weights[j]);
                }
                let logk = |r: &Vector2<f64>, _: &Vector2<f64>, d: &[f64; 2]| {
                    let l = 0.5 * r.norm_squared().ln();
                    [l * d[0], l * d[1]]
                };
                let rest = self.integrate_body(b, &x, near, &logk, Some(p));
                acc[0] += rest[0];
                acc[1] += rest[1];
            }
            Layout::Periodic => {
                let n = body.len();
                let kw = self.kress(b);
                let li = i - body.nodes.start;
                for j in body.nodes.clone() {
                    let lj = j - body.nodes.start;
                    let smooth = if lj == li {
                        disc.speed[j].ln()
                    } else {
                        let s = (0.5 * (disc.params[i] - disc.params[j])).sin();
                        (x - disc.points[j]).norm().ln() - 0.5 * (4.0 * s * s).ln()
                    };
                    add(j, 0.5 * kw[(li + n - lj) % n] * disc.speed[j] + smooth * disc.weights[j]);
                }
            }
        }
        acc
    }

    fn check_target(&self, t: &Target) -> Result<()> {
        if t.node.is_none() {
            let x = t.point;
            let scale = 1e-13 * (1.0 + x.norm());
            if self.disc.points.iter().any(|y| (x - y).norm() < scale) {
                return Err(Error::AmbiguousSide { x: x.x, y: x.y });
            }
        } else if let Some(i) = t.node {
            if i >= self.disc.len() {
                return Err(Error::Invalid(format!("node index {i} out of range")));
            }
        }
        Ok(())
    }

    /// Nearest node to `x` and the length of the panel it belongs to.
    fn nearest(&self, x: &Point) -> (usize, f64, f64) {
        let disc = self.disc;
        let (mut best, mut dist) = (0, f64::INFINITY);
        for (j, y) in disc.points.iter().enumerate() {
            let d = (x - y).norm();
            if d < dist {
                best = j;
                dist = d;
            }
        }
        let body = &disc.bodies[disc.body_of[best]];
        let length = match body.layout {
            Layout::Panels { order } => {
                let p = body.panels.partition_point(|p| p.start + order <= best);
                body.panels[p].length
            }
            Layout::Periodic => body.spacing() * SUB_ORDER as f64 / 4.0,
        };
        (best, dist, length)
    }

    fn min_distance(&self, x: &Point) -> f64 {
        let mut d = f64::INFINITY;
        for b in 0..self.disc.body_count() {
            let v = self.view(b);
            for y in &v.pos {
                d = d.min((x - y).norm());
            }
        }
        d
    }
}

fn laplace_slp_kernel(r: &Vector2<f64>, _: &Vector2<f64>, d: &[f64; 2]) -> [f64; 1] {
    [raw::laplace_g(r) * d[0]]
}

fn stokes_slp_kernel(r: &Vector2<f64>, _: &Vector2<f64>, d: &[f64; 2]) -> [f64; 2] {
    let v = raw::stokeslet(r) * Vector2::new(d[0], d[1]);
    [v.x, v.y]
}

/// Laplace single layer S μ at the plan's targets.
pub fn eval_laplace_single(disc: &Discretization, density: &Density, plan: &EvalPlan) -> Result<Vec<f64>> {
    density.expect_arity(1)?;
    plan.validate()?;
    let src = Sources::new(disc, density);
    plan.targets.iter().try_for_each(|t| src.check_target(t))?;
    let near = plan.near_threshold;
    plan.targets
        .par_iter()
        .map(|t| match t.node {
            Some(i) => {
                let own = disc.body_of[i];
                let l = src.log_self(i, near);
                Ok(-INV_2PI * l[0] + src.integrate_all(&t.point, near, &laplace_slp_kernel, Some(own))[0])
            }
            None => {
                if let NearMethod::Qbx { order } = plan.method {
                    if let Some(v) = qbx_near(&src, &t.point, |c, r| laplace_expansion(&src, c, r, order, &t.point)) {
                        return Ok(v);
                    }
                }
                Ok(src.integrate_all(&t.point, near, &laplace_slp_kernel, None)[0])
            }
        })
        .collect()
}

/// Stokes single layer 𝒮 μ at the plan's targets.
pub fn eval_stokes_single(disc: &Discretization, density: &Density, plan: &EvalPlan) -> Result<Vec<Vector2<f64>>> {
    density.expect_arity(2)?;
    plan.validate()?;
    let src = Sources::new(disc, density);
    plan.targets.iter().try_for_each(|t| src.check_target(t))?;
    let near = plan.near_threshold;
    plan.targets
        .par_iter()
        .map(|t| match t.node {
            Some(i) => {
                let own = disc.body_of[i];
                let body = &disc.bodies[own];
                let l = src.log_self(i, near);
                let x = disc.points[i];
                let mut smooth = Vector2::zeros();
                for j in body.nodes.clone() {
                    let m = if j == i {
                        disc.tangents[i] * disc.tangents[i].transpose()
                    } else {
                        raw::stokeslet_smooth(&(x - disc.points[j]))
                    };
                    smooth += m * density.vec2(j) * disc.weights[j];
                }
                let other = src.integrate_all(&x, near, &stokes_slp_kernel, Some(own));
                Ok(INV_4PI * (smooth - Vector2::new(l[0], l[1])) + Vector2::new(other[0], other[1]))
            }
            None => {
                if let NearMethod::Qbx { order } = plan.method {
                    if let Some(v) = qbx_near(&src, &t.point, |c, r| stokes_expansion(&src, c, r, order, &t.point)) {
                        return Ok(v);
                    }
                }
                let v = src.integrate_all(&t.point, near, &stokes_slp_kernel, None);
                Ok(Vector2::new(v[0], v[1]))
            }
        })
        .collect()
}

fn off_surface<const M: usize, F>(disc: &Discretization, density: &Density, points: &[Point], f: F) -> Result<Vec<[f64; M]>>
where
    F: Fn(&Vector2<f64>, &Vector2<f64>, &[f64; 2]) -> [f64; M] + Sync,
{
    let src = Sources::new(disc, density);
    for p in points {
        src.check_target(&Target { point: *p, node: None })?;
    }
    Ok(points
        .par_iter()
        .map(|x| src.integrate_all(x, 1.5, &f, None))
        .collect())
}

/// Integrate a user kernel k(x − y, n_y, μ(y)) against the density at
/// off-surface points, with the same near-field treatment as the layer
/// potentials.
pub fn integrate_with<const M: usize, F>(disc: &Discretization, density: &Density, points: &[Point], f: F) -> Result<Vec<[f64; M]>>
where
    F: Fn(&Vector2<f64>, &Vector2<f64>, &[f64; 2]) -> [f64; M] + Sync,
{
    off_surface(disc, density, points, f)
}

/// Gradient of the Laplace single layer at off-surface points.
pub fn eval_laplace_single_gradient(disc: &Discretization, density: &Density, points: &[Point]) -> Result<Vec<Vector2<f64>>> {
    density.expect_arity(1)?;
    let v = off_surface(disc, density, points, |r, _, d| {
        let g = raw::laplace_grad(r) * d[0];
        [g.x, g.y]
    })?;
    Ok(v.into_iter().map(|g| Vector2::new(g[0], g[1])).collect())
}

/// Laplace double layer ∫ ∂G/∂n_y μ ds at off-surface points.
pub fn eval_laplace_double(disc: &Discretization, density: &Density, points: &[Point]) -> Result<Vec<f64>> {
    density.expect_arity(1)?;
    let v = off_surface(disc, density, points, |r, n, d| [raw::laplace_dn_source(r, n) * d[0]])?;
    Ok(v.into_iter().map(|g| g[0]).collect())
}

/// Gradient of the Laplace double layer at off-surface points.
pub fn eval_laplace_double_gradient(disc: &Discretization, density: &Density, points: &[Point]) -> Result<Vec<Vector2<f64>>> {
    density.expect_arity(1)?;
    let v = off_surface(disc, density, points, |r, n, d| {
        // ∇_x of (r·n)/(2π|r|²)
        let r2 = r.norm_squared();
        let g = (n / r2 - 2.0 * r.dot(n) * r / (r2 * r2)) * (INV_2PI * d[0]);
        [g.x, g.y]
    })?;
    Ok(v.into_iter().map(|g| Vector2::new(g[0], g[1])).collect())
}

/// Stokes double layer ∫ T_{j,i,k}(y,x) n_{y,k} μ_j ds at off-surface points.
pub fn eval_stokes_double(disc: &Discretization, density: &Density, points: &[Point]) -> Result<Vec<Vector2<f64>>> {
    density.expect_arity(2)?;
    let v = off_surface(disc, density, points, |r, n, d| {
        let u = raw::stokes_dlp(r, n) * Vector2::new(d[0], d[1]);
        [u.x, u.y]
    })?;
    Ok(v.into_iter().map(|g| Vector2::new(g[0], g[1])).collect())
}

/// On-surface kernels with a smooth Nyström discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothKernel {
    /// ∂G/∂n_x
    LaplaceK,
    /// ∂G/∂n_y
    LaplaceKStar,
    /// Traction of the Stokes single layer, n_{x,l} T_{k,m,l}(x, y).
    StokesTraction,
    /// Principal value of the Stokes double layer, T_{j,i,k}(y, x) n_{y,k}.
    StokesDlp,
}

impl SmoothKernel {
    pub fn arity(self) -> usize {
        match self {
            SmoothKernel::LaplaceK | SmoothKernel::LaplaceKStar => 1,
            _ => 2,
        }
    }

    /// Scalar entry (i, j) including the quadrature weight.
    #[inline]
    pub(crate) fn scalar_entry(self, disc: &Discretization, i: usize, j: usize) -> f64 {
        let w = disc.weights[j];
        if i == j {
            return laplace_k_diag_limit(disc.curvature[i]) * w;
        }
        let r = disc.points[i] - disc.points[j];
        match self {
            SmoothKernel::LaplaceK => raw::laplace_dn_target(&r, &disc.normals[i]) * w,
            _ => raw::laplace_dn_source(&r, &disc.normals[j]) * w,
        }
    }

    /// 2×2 block (i, j) including the quadrature weight.
    #[inline]
    pub(crate) fn block_entry(self, disc: &Discretization, i: usize, j: usize) -> Matrix2<f64> {
        let w = disc.weights[j];
        if i == j {
            return stokes_diag_limit(disc.curvature[i], &disc.tangents[i]) * w;
        }
        let r = disc.points[i] - disc.points[j];
        match self {
            SmoothKernel::StokesTraction => raw::traction(&r, &disc.normals[i]) * w,
            _ => raw::stokes_dlp(&r, &disc.normals[j]) * w,
        }
    }
}

/// Apply a smooth on-surface operator to raw node values.
pub fn apply_smooth(disc: &Discretization, kernel: SmoothKernel, input: &[f64], out: &mut [f64]) {
    let n = disc.len();
    match kernel.arity() {
        1 => out[..n].par_iter_mut().enumerate().for_each(|(i, o)| {
            *o = (0..n).map(|j| kernel.scalar_entry(disc, i, j) * input[j]).sum();
        }),
        _ => out[..2 * n].par_chunks_mut(2).enumerate().for_each(|(i, o)| {
            let mut acc = Vector2::zeros();
            for j in 0..n {
                acc += kernel.block_entry(disc, i, j) * Vector2::new(input[2 * j], input[2 * j + 1]);
            }
            o[0] = acc.x;
            o[1] = acc.y;
        }),
    }
}

fn smooth_eval(disc: &Discretization, density: &Density, kernel: SmoothKernel) -> Result<Vec<f64>> {
    density.expect_arity(kernel.arity())?;
    let mut out = vec![0.0; density.values.len()];
    apply_smooth(disc, kernel, &density.values, &mut out);
    Ok(out)
}

/// K μ = ∮ ∂G/∂n_x μ ds at every node.
pub fn eval_laplace_k(disc: &Discretization, density: &Density) -> Result<Vec<f64>> {
    smooth_eval(disc, density, SmoothKernel::LaplaceK)
}

/// K* μ = ∮ ∂G/∂n_y μ ds at every node.
pub fn eval_laplace_kstar(disc: &Discretization, density: &Density) -> Result<Vec<f64>> {
    smooth_eval(disc, density, SmoothKernel::LaplaceKStar)
}

/// 𝒦 μ, the on-surface traction operator, interleaved (x, y) per node.
pub fn eval_stokes_traction(disc: &Discretization, density: &Density) -> Result<Vec<f64>> {
    smooth_eval(disc, density, SmoothKernel::StokesTraction)
}

/// Principal-value Stokes double layer at every node, interleaved.
pub fn eval_stokes_dlp(disc: &Discretization, density: &Density) -> Result<Vec<f64>> {
    smooth_eval(disc, density, SmoothKernel::StokesDlp)
}

/// Harmonic local expansion Re Σ_k b_k (z − c)^k of L[g](x) = ∫ log|x − y| g ds
/// for several densities g at once.
fn log_expansions<const M: usize, G>(src: &Sources, c: &Point, order: usize, g: G) -> Vec<[Complex<f64>; M]>
where
    G: Fn(&Point, &[f64; 2]) -> [f64; M] + Sync,
{
    // integrand value at node y, packed as (Re, Im) per coefficient and density
    let width = 2 * (order + 1) * M;
    assert!(width <= 256, "expansion order too high");
    let disc = src.disc;
    let mut coeffs = vec![[Complex::new(0.0, 0.0); M]; order + 1];
    for b in 0..disc.body_count() {
        let f = |r: &Vector2<f64>, _: &Vector2<f64>, d: &[f64; 2]| -> [f64; 256] {
            let y = c - r;
            let gv = g(&y, d);
            let w = Complex::new(y.x - c.x, y.y - c.y);
            let inv = w.inv();
            let mut out = [0.0; 256];
            let mut pw = Complex::new(1.0, 0.0);
            for k in 0..=order {
                let base = if k == 0 {
                    Complex::new(0.5 * r.norm_squared().ln(), 0.0)
                } else {
                    pw *= inv;
                    -pw / k as f64
                };
                for m in 0..M {
                    let v = base * gv[m];
                    out[2 * (k * M + m)] = v.re;
                    out[2 * (k * M + m) + 1] = v.im;
                }
            }
            out
        };
        let v = src.integrate_body(b, c, 1.5, &f, None);
        for k in 0..=order {
            for m in 0..M {
                coeffs[k][m] += Complex::new(v[2 * (k * M + m)], v[2 * (k * M + m) + 1]);
            }
        }
    }
    coeffs
}

fn eval_series(coeffs: &[Complex<f64>], z: Complex<f64>) -> (f64, Vector2<f64>) {
    let mut val = Complex::new(0.0, 0.0);
    let mut der = Complex::new(0.0, 0.0);
    let mut pw = Complex::new(1.0, 0.0);
    for (k, b) in coeffs.iter().enumerate() {
        if k > 0 {
            der += b * pw * k as f64;
            pw *= z;
        }
        val += b * pw;
    }
    (val.re, Vector2::new(der.re, -der.im))
}

fn laplace_expansion(src: &Sources, c: &Point, _radius: f64, order: usize, target: &Point) -> f64 {
    let coeffs = log_expansions::<1, _>(src, c, order, |_, d| [d[0]]);
    let flat: Vec<Complex<f64>> = coeffs.iter().map(|v| v[0]).collect();
    let z = Complex::new(target.x - c.x, target.y - c.y);
    -INV_2PI * eval_series(&flat, z).0
}

fn stokes_expansion(src: &Sources, c: &Point, _radius: f64, order: usize, target: &Point) -> Vector2<f64> {
    let cc = *c;
    let coeffs = log_expansions::<3, _>(src, c, order, move |y, d| {
        let f = Vector2::new(d[0], d[1]);
        [d[0], d[1], (cc - y).dot(&f)]
    });
    let z = Complex::new(target.x - c.x, target.y - c.y);
    let series = |m: usize| {
        let flat: Vec<Complex<f64>> = coeffs.iter().map(|v| v[m]).collect();
        eval_series(&flat, z)
    };
    let (l1, g1) = series(0);
    let (l2, g2) = series(1);
    let (_, g3) = series(2);
    let dx = target - c;
    // u_i = (1/4π)[−L[f_i] + (x−c)_j ∂_i L[f_j] + ∂_i L[(c−y)·f]]
    let u = -Vector2::new(l1, l2) + g1 * dx.x + g2 * dx.y + g3;
    INV_4PI * u
}

fn qbx_near<T>(src: &Sources, x: &Point, expand: impl Fn(&Point, f64) -> T) -> Option<T> {
    let (j, dist, length) = src.nearest(x);
    let radius = 0.5 * length;
    if dist >= radius {
        return None;
    }
    let disc = src.disc;
    let n = disc.normals[j];
    let side = if (x - disc.points[j]).dot(&n) >= 0.0 { 1.0 } else { -1.0 };
    let c = disc.points[j] + side * radius * n;
    if (x - c).norm() >= radius || src.min_distance(&c) < 0.999 * radius {
        return None;
    }
    Some(expand(&c, radius))
}

fn check_center(src: &Sources, center: &Point, radius: f64, target: &Point) -> Result<()> {
    if !(radius > 0.0) || (target - center).norm() >= radius {
        return Err(Error::Invalid("target must lie inside the expansion disc".into()));
    }
    if src.min_distance(center) < 0.999 * radius {
        return Err(Error::CenterTooClose);
    }
    Ok(())
}

/// Laplace single layer at `target` from an order-`order` local expansion
/// about `center`.
pub fn qbx_expand_eval(disc: &Discretization, density: &Density, center: &Point, radius: f64, order: usize, target: &Point) -> Result<f64> {
    density.expect_arity(1)?;
    if order < 1 || 2 * (order + 1) > 256 {
        return Err(Error::Invalid(format!("unsupported expansion order {order}")));
    }
    let src = Sources::new(disc, density);
    check_center(&src, center, radius, target)?;
    Ok(laplace_expansion(&src, center, radius, order, target))
}

/// Stokes single layer at `target` from local expansions about `center`.
pub fn qbx_expand_eval_stokes(disc: &Discretization, density: &Density, center: &Point, radius: f64, order: usize, target: &Point) -> Result<Vector2<f64>> {
    density.expect_arity(2)?;
    if order < 1 || 6 * (order + 1) > 256 {
        return Err(Error::Invalid(format!("unsupported expansion order {order}")));
    }
    let src = Sources::new(disc, density);
    check_center(&src, center, radius, target)?;
    Ok(stokes_expansion(&src, center, radius, order, target))
}

/// Rigid-motion density v + ω (x − x^c)^⊥ on one body, zero elsewhere.
pub fn rigid_density(disc: &Discretization, body: usize, v: Vector2<f64>, omega: f64) -> Density {
    let b = &disc.bodies[body];
    Density::from_fn_vector(disc, |i| {
        if b.nodes.contains(&i) {
            v + omega * perp(&(disc.points[i] - b.centroid))
        } else {
            Vector2::zeros()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BodySpec, Curve, Scheme};

    fn circle(scheme: Scheme) -> Discretization {
        Discretization::from_curve(Curve::disc(Point::zeros(), 1.0), scheme).unwrap()
    }

    fn schemes() -> [Scheme; 2] {
        [Scheme::Panel { panels: 16, order: 16 }, Scheme::Periodic { points: 128 }]
    }

    #[test]
    fn single_layer_of_unit_circle() {
        for s in schemes() {
            let d = circle(s);
            let one = Density::from_fn_scalar(&d, |_| 1.0);
            let pts = [Point::new(3.0, 0.0), Point::new(0.2, 0.1), Point::new(1.001, 0.0), Point::new(0.0, 0.999)];
            let v = eval_laplace_single(&d, &one, &EvalPlan::off_surface(&pts)).unwrap();
            assert!((v[0] + 3f64.ln()).abs() < 1e-12, "{s:?}");
            assert!(v[1].abs() < 1e-12);
            assert!((v[2] + 1.001f64.ln()).abs() < 1e-12, "{s:?} {}", v[2] + 1.001f64.ln());
            assert!(v[3].abs() < 1e-12, "{s:?} {}", v[3]);
            let on = eval_laplace_single(&d, &one, &EvalPlan::on_surface(&d)).unwrap();
            assert!(on.iter().all(|v| v.abs() < 1e-12), "{s:?}");
        }
    }

    #[test]
    fn on_surface_log_rule_for_fourier_mode() {
        // S[cos kθ] on the unit circle is cos(kθ)/(2k)
        for s in schemes() {
            let d = circle(s);
            for k in 1..5 {
                let mu = Density::from_fn_scalar(&d, |i| (k as f64 * d.params[i]).cos());
                let on = eval_laplace_single(&d, &mu, &EvalPlan::on_surface(&d)).unwrap();
                for (i, v) in on.iter().enumerate() {
                    let exact = (k as f64 * d.params[i]).cos() / (2.0 * k as f64);
                    assert!((v - exact).abs() < 1e-12, "{s:?} k={k}");
                }
            }
        }
    }

    #[test]
    fn coincident_off_surface_target_rejected() {
        let d = circle(Scheme::Periodic { points: 64 });
        let one = Density::from_fn_scalar(&d, |_| 1.0);
        let r = eval_laplace_single(&d, &one, &EvalPlan::off_surface(&[d.points[3]]));
        assert!(matches!(r, Err(Error::AmbiguousSide { .. })));
    }

    #[test]
    fn circle_k_rows() {
        for s in schemes() {
            let d = circle(s);
            let one = Density::from_fn_scalar(&d, |_| 1.0);
            for v in eval_laplace_k(&d, &one).unwrap() {
                assert!((v + 0.5).abs() < 1e-13);
            }
            for v in eval_laplace_kstar(&d, &one).unwrap() {
                assert!((v + 0.5).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn stokes_rigid_null_densities() {
        for s in schemes() {
            let d = circle(s);
            for (v, w) in [(Vector2::new(1.0, 0.0), 0.0), (Vector2::new(0.0, 1.0), 0.0), (Vector2::zeros(), 1.0)] {
                let mu = rigid_density(&d, 0, v, w);
                let k = eval_stokes_traction(&d, &mu).unwrap();
                for (a, b) in k.iter().zip(mu.values()) {
                    assert!((a + 0.5 * b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn qbx_matches_exact_circle_field() {
        let d = circle(Scheme::Panel { panels: 16, order: 16 });
        let one = Density::from_fn_scalar(&d, |_| 1.0);
        let c = Point::new(1.05, 0.0);
        let v = qbx_expand_eval(&d, &one, &c, 0.05, 6, &Point::new(1.001, 0.0)).unwrap();
        assert!((v + 1.001f64.ln()).abs() < 1e-8);
        let at_c = qbx_expand_eval(&d, &one, &c, 0.05, 6, &c).unwrap();
        assert!((at_c + 1.05f64.ln()).abs() < 1e-12);
        assert!(matches!(
            qbx_expand_eval(&d, &one, &Point::new(1.02, 0.0), 0.05, 6, &Point::new(1.03, 0.0)),
            Err(Error::CenterTooClose)
        ));
    }

    #[test]
    fn qbx_stokes_matches_direct() {
        let d = circle(Scheme::Panel { panels: 16, order: 16 });
        let mu = Density::from_fn_vector(&d, |i| Vector2::new(d.params[i].cos(), 0.3 + (2.0 * d.params[i]).sin()));
        let c = Point::new(1.3, 0.2);
        let t = Point::new(1.25, 0.18);
        let q = qbx_expand_eval_stokes(&d, &mu, &c, 0.2, 12, &t).unwrap();
        let direct = eval_stokes_single(&d, &mu, &EvalPlan::off_surface(&[t])).unwrap()[0];
        assert!((q - direct).norm() < 1e-9, "{q} {direct}");
    }

    #[test]
    fn two_body_cross_terms_self_converge() {
        let specs = |p| {
            vec![
                BodySpec::new(Curve::disc(Point::new(-1.25, 0.0), 1.0), Scheme::Panel { panels: p, order: 16 }),
                BodySpec::new(Curve::disc(Point::new(1.25, 0.0), 1.0), Scheme::Panel { panels: p, order: 16 }),
            ]
        };
        let value_at = |p: usize, t: f64| {
            let d = Discretization::new(&specs(p)).unwrap();
            let mu = Density::from_fn_scalar(&d, |i| if d.body_of[i] == 0 { 1.0 } else { 0.0 });
            let k = eval_laplace_k(&d, &mu).unwrap();
            // pick the node on body 1 closest to parameter t
            let (i, _) = d.bodies[1]
                .nodes
                .clone()
                .map(|i| (i, (d.params[i] - t).abs()))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            (k[i], d.params[i])
        };
        let (v, t) = value_at(16, 3.0);
        // direct evaluation of the same integral on a much finer grid
        let fine = Discretization::from_curve(Curve::disc(Point::new(-1.25, 0.0), 1.0), Scheme::Panel { panels: 64, order: 16 }).unwrap();
        let x = Point::new(1.25 + t.cos(), t.sin());
        let n = Vector2::new(t.cos(), t.sin());
        let exact: f64 = (0..fine.len())
            .map(|j| raw::laplace_dn_target(&(x - fine.points[j]), &n) * fine.weights[j])
            .sum();
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn periodic_near_field_uses_interpolated_density() {
        let d = Discretization::from_curve(
            Curve::Ellipse { center: [0.0, 0.0], semi_axes: [1.0, 0.5], rotation: 0.2 },
            Scheme::Periodic { points: 256 },
        )
        .unwrap();
        let panels = Discretization::from_curve(
            Curve::Ellipse { center: [0.0, 0.0], semi_axes: [1.0, 0.5], rotation: 0.2 },
            Scheme::Panel { panels: 32, order: 16 },
        )
        .unwrap();
        let f = |t: f64| (3.0 * t).sin() + 0.5 * t.cos();
        let a = Density::from_fn_scalar(&d, |i| f(d.params[i]));
        let b = Density::from_fn_scalar(&panels, |i| f(panels.params[i]));
        let cp = d.bodies[0].curve.eval(0.7);
        let pts = [cp.position + 1e-3 * cp.normal, cp.position - 1e-4 * cp.normal];
        let va = eval_laplace_single(&d, &a, &EvalPlan::off_surface(&pts)).unwrap();
        let vb = eval_laplace_single(&panels, &b, &EvalPlan::off_surface(&pts)).unwrap();
        for (x, y) in va.iter().zip(&vb) {
            assert!((x - y).abs() < 1e-12, "{x} {y}");
        }
    }
}

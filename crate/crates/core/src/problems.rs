//! Drivers for the four exterior problems, round trips between the dual
//! pairs, analytic references and post-solve diagnostics.

use std::f64::consts::PI;

use nalgebra::Vector2;

use crate::geometry::{perp, BodySpec, Curve, Discretization, Point, Scheme};
use crate::kernels::raw;
use crate::linsolve::{l2_scaling, solve, SolveStats, SolverConfig};
use crate::operators::{
    body_integrals, body_moments, CapacitanceSystem, ElastanceOperator, MobilityOperator, ResistanceSystem,
};
use crate::quadrature::{
    eval_laplace_double, eval_laplace_single, eval_stokes_double, eval_stokes_single, Density, EvalPlan,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Elastance,
    Capacitance,
    Mobility,
    Resistance,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Elastance => "elastance",
            ProblemKind::Capacitance => "capacitance",
            ProblemKind::Mobility => "mobility",
            ProblemKind::Resistance => "resistance",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            ProblemKind::Elastance | ProblemKind::Capacitance => 1,
            _ => 2,
        }
    }
}

/// Derived per-body quantity of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodyOutput {
    /// Mean boundary potential and the largest deviation from it.
    Potential { phi: f64, spread: f64 },
    Charge { q: f64 },
    /// Rigid motion fitted to the boundary velocity, with the relative L²
    /// misfit of the fit.
    Motion { velocity: Vector2<f64>, omega: f64, deviation: f64 },
    Load { force: Vector2<f64>, torque: f64 },
}

/// Value of the field at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ambient {
    Scalar(f64),
    Vector(Vector2<f64>),
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub kind: ProblemKind,
    /// Solution of the integral equation, without bordered unknowns.
    pub density: Density,
    /// σ or ρ for elastance and mobility.
    pub source: Option<Density>,
    pub ambient: Ambient,
    pub bodies: Vec<BodyOutput>,
    /// Field at the boundary nodes (interleaved for Stokes), reconstructed
    /// from the layer potentials for elastance and mobility.
    pub trace: Option<Vec<f64>>,
    pub stats: SolveStats,
}

impl SolveReport {
    pub fn potentials(&self) -> Vec<f64> {
        self.bodies
            .iter()
            .filter_map(|b| match b {
                BodyOutput::Potential { phi, .. } => Some(*phi),
                _ => None,
            })
            .collect()
    }

    pub fn charges(&self) -> Vec<f64> {
        self.bodies
            .iter()
            .filter_map(|b| match b {
                BodyOutput::Charge { q } => Some(*q),
                _ => None,
            })
            .collect()
    }

    pub fn motions(&self) -> Vec<(Vector2<f64>, f64)> {
        self.bodies
            .iter()
            .filter_map(|b| match b {
                BodyOutput::Motion { velocity, omega, .. } => Some((*velocity, *omega)),
                _ => None,
            })
            .collect()
    }

    pub fn loads(&self) -> Vec<(Vector2<f64>, f64)> {
        self.bodies
            .iter()
            .filter_map(|b| match b {
                BodyOutput::Load { force, torque } => Some((*force, *torque)),
                _ => None,
            })
            .collect()
    }

    pub fn ambient_scalar(&self) -> f64 {
        match self.ambient {
            Ambient::Scalar(v) => v,
            Ambient::Vector(v) => v.norm(),
        }
    }

    pub fn ambient_vector(&self) -> Vector2<f64> {
        match self.ambient {
            Ambient::Scalar(v) => Vector2::new(v, 0.0),
            Ambient::Vector(v) => v,
        }
    }

    /// Relative size of the per-body moments of the density that the
    /// completed equations drive to zero: |∫μ_i ds| for Laplace, and the
    /// larger of |∫μ_i ds| and |∫(x − x^c_i)^⊥·μ_i ds| for Stokes, each
    /// divided by ‖μ‖_∞ |Γ_i|.
    pub fn annihilation(&self, disc: &Discretization) -> Vec<f64> {
        let mu = self.density.values();
        let sup = mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = |b: usize| {
            let s = sup * disc.bodies[b].arclength;
            if s > 0.0 {
                s
            } else {
                1.0
            }
        };
        match self.density.arity() {
            1 => body_integrals(disc, mu)
                .iter()
                .enumerate()
                .map(|(b, a)| a.abs() / scale(b))
                .collect(),
            _ => body_moments(disc, mu)
                .iter()
                .enumerate()
                .map(|(b, (f, t))| f.norm().max(t.abs()) / scale(b))
                .collect(),
        }
    }

    /// The represented field at exterior points.
    pub fn field(&self, disc: &Discretization, points: &[Point]) -> Result<Field> {
        match self.kind {
            ProblemKind::Elastance => {
                let total = total_density(disc, &self.density, self.source.as_ref())?;
                let u = eval_laplace_single(disc, &total, &EvalPlan::off_surface(points))?;
                let c = self.ambient_scalar();
                Ok(Field::Scalar(u.into_iter().map(|v| v + c).collect()))
            }
            ProblemKind::Mobility => {
                let total = total_density(disc, &self.density, self.source.as_ref())?;
                let u = eval_stokes_single(disc, &total, &EvalPlan::off_surface(points))?;
                let c = self.ambient_vector();
                Ok(Field::Vector(u.into_iter().map(|v| v + c).collect()))
            }
            ProblemKind::Capacitance => {
                let mut u = eval_laplace_double(disc, &self.density, points)?;
                let a = body_integrals(disc, self.density.values());
                let c = self.ambient_scalar();
                for (x, v) in points.iter().zip(u.iter_mut()) {
                    let src: f64 = disc
                        .bodies
                        .iter()
                        .zip(&a)
                        .map(|(b, ak)| ak * raw::laplace_g(&(x - b.centroid)))
                        .sum();
                    *v += src + c;
                }
                Ok(Field::Scalar(u))
            }
            ProblemKind::Resistance => {
                let mut u = eval_stokes_double(disc, &self.density, points)?;
                let m = body_moments(disc, self.density.values());
                let c = self.ambient_vector();
                for (x, v) in points.iter().zip(u.iter_mut()) {
                    for (b, (f, t)) in disc.bodies.iter().zip(&m) {
                        let r = x - b.centroid;
                        *v += raw::stokeslet(&r) * f + raw::rotlet(&r) * *t;
                    }
                    *v += c;
                }
                Ok(Field::Vector(u))
            }
        }
    }

    /// Largest relative deviation of the field at interior probe points from
    /// the body's constant potential (Laplace) or rigid motion (Stokes).
    /// Only defined for elastance and mobility solves, whose representations
    /// extend inside the bodies.
    pub fn interior_deviation(&self, disc: &Discretization, probes_per_body: usize) -> Result<Vec<f64>> {
        let probes: Vec<(usize, Point)> = (0..disc.body_count())
            .flat_map(|b| interior_probes(disc, b, probes_per_body).into_iter().map(move |p| (b, p)))
            .collect();
        let points: Vec<Point> = probes.iter().map(|(_, p)| *p).collect();
        let mut worst = vec![0.0f64; disc.body_count()];
        match (self.kind, self.field(disc, &points)?) {
            (ProblemKind::Elastance, Field::Scalar(u)) => {
                let phi = self.potentials();
                let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let scale = if scale > 0.0 { scale } else { 1.0 };
                for ((b, _), v) in probes.iter().zip(u) {
                    worst[*b] = worst[*b].max((v - phi[*b]).abs() / scale);
                }
            }
            (ProblemKind::Mobility, Field::Vector(u)) => {
                let motions = self.motions();
                let trace = self.trace.as_deref().unwrap_or(&[]);
                let scale = trace
                    .chunks(2)
                    .fold(0.0f64, |m, c| m.max(Vector2::new(c[0], c[1]).norm()));
                let scale = if scale > 0.0 { scale } else { 1.0 };
                for ((b, x), v) in probes.iter().zip(u) {
                    let (vel, om) = motions[*b];
                    let rigid = vel + om * perp(&(x - disc.bodies[*b].centroid));
                    worst[*b] = worst[*b].max((v - rigid).norm() / scale);
                }
            }
            _ => {
                return Err(Error::Invalid(format!(
                    "interior field is not meaningful for a {} solve",
                    self.kind.name()
                )))
            }
        }
        Ok(worst)
    }
}

/// Field values at a list of points.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Scalar(Vec<f64>),
    Vector(Vec<Vector2<f64>>),
}

fn total_density(disc: &Discretization, mu: &Density, source: Option<&Density>) -> Result<Density> {
    match source {
        Some(s) => Density::new(
            disc,
            mu.values().iter().zip(s.values()).map(|(a, b)| a + b).collect(),
            mu.arity(),
        ),
        None => Ok(mu.clone()),
    }
}

/// Points strictly inside body `b`, halfway between its center and the
/// boundary along evenly spread parameters.
pub fn interior_probes(disc: &Discretization, b: usize, count: usize) -> Vec<Point> {
    let curve = &disc.bodies[b].curve;
    let c = curve.center();
    (0..count)
        .map(|k| {
            let t = 2.0 * PI * (k as f64 + 0.3) / count as f64;
            c + 0.5 * (curve.position(t) - c)
        })
        .filter(|p| disc.containing_body(p) == Some(b))
        .collect()
}

fn scaling_for(config: &SolverConfig, d: Vec<f64>) -> Option<Vec<f64>> {
    config.scaling.then_some(d)
}

/// Elastance: given charges `q` (Σq = 0) and the potential at infinity,
/// solve for μ and recover the body potentials from u = S(σ + μ) + u∞.
pub fn solve_elastance(disc: &Discretization, q: &[f64], u_inf: f64, config: &SolverConfig) -> Result<SolveReport> {
    let op = ElastanceOperator::new(disc);
    let (sigma, rhs) = op.rhs(q)?;
    let d = scaling_for(config, l2_scaling(disc, 1));
    let (mu, stats) = solve(&op, &rhs, config, d.as_deref())?;
    let density = Density::scalar(disc, mu)?;
    let total = total_density(disc, &density, Some(&sigma))?;
    let mut u = eval_laplace_single(disc, &total, &EvalPlan::on_surface(disc))?;
    u.iter_mut().for_each(|v| *v += u_inf);
    let bodies = disc
        .bodies
        .iter()
        .map(|b| {
            let phi = b.nodes.clone().map(|i| disc.weights[i] * u[i]).sum::<f64>() / b.arclength;
            let spread = b.nodes.clone().fold(0.0f64, |m, i| m.max((u[i] - phi).abs()));
            BodyOutput::Potential { phi, spread }
        })
        .collect();
    Ok(SolveReport {
        kind: ProblemKind::Elastance,
        density,
        source: Some(sigma),
        ambient: Ambient::Scalar(u_inf),
        bodies,
        trace: Some(u),
        stats,
    })
}

/// Capacitance: given body potentials, find the charges and the potential
/// at infinity.
pub fn solve_capacitance(disc: &Discretization, potentials: &[f64], config: &SolverConfig) -> Result<SolveReport> {
    let sys = CapacitanceSystem::new(disc);
    let rhs = sys.rhs(potentials)?;
    let d = scaling_for(config, sys.scaling());
    let (mut x, stats) = solve(&sys, &rhs, config, d.as_deref())?;
    let c_inf = x.pop().unwrap_or(0.0);
    let density = Density::scalar(disc, x)?;
    let bodies = body_integrals(disc, density.values())
        .into_iter()
        .map(|q| BodyOutput::Charge { q })
        .collect();
    Ok(SolveReport {
        kind: ProblemKind::Capacitance,
        density,
        source: None,
        ambient: Ambient::Scalar(c_inf),
        bodies,
        trace: None,
        stats,
    })
}

/// Mobility: given forces (ΣF = 0) and torques and the velocity at
/// infinity, solve for μ and recover each body's rigid motion from
/// u = S(ρ + μ) + u∞.
pub fn solve_mobility(
    disc: &Discretization,
    forces: &[Vector2<f64>],
    torques: &[f64],
    u_inf: Vector2<f64>,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let op = MobilityOperator::new(disc);
    let (rho, rhs) = op.rhs(forces, torques)?;
    let d = scaling_for(config, l2_scaling(disc, 2));
    let (mu, stats) = solve(&op, &rhs, config, d.as_deref())?;
    let density = Density::new(disc, mu, 2)?;
    let total = total_density(disc, &density, Some(&rho))?;
    let u: Vec<Vector2<f64>> = eval_stokes_single(disc, &total, &EvalPlan::on_surface(disc))?
        .into_iter()
        .map(|v| v + u_inf)
        .collect();
    let bodies = (0..disc.body_count())
        .map(|b| {
            let m = extract_rigid_motion(disc, b, &u[disc.bodies[b].nodes.clone()]);
            BodyOutput::Motion {
                velocity: m.velocity,
                omega: m.omega,
                deviation: m.deviation,
            }
        })
        .collect();
    Ok(SolveReport {
        kind: ProblemKind::Mobility,
        density,
        source: Some(rho),
        ambient: Ambient::Vector(u_inf),
        bodies,
        trace: Some(u.iter().flat_map(|v| [v.x, v.y]).collect()),
        stats,
    })
}

/// Resistance: given rigid body velocities, find forces, torques and the
/// velocity at infinity.
pub fn solve_resistance(
    disc: &Discretization,
    velocities: &[Vector2<f64>],
    omegas: &[f64],
    config: &SolverConfig,
) -> Result<SolveReport> {
    let sys = ResistanceSystem::new(disc);
    let rhs = sys.rhs(velocities, omegas)?;
    let d = scaling_for(config, sys.scaling());
    let (mut x, stats) = solve(&sys, &rhs, config, d.as_deref())?;
    let uy = x.pop().unwrap_or(0.0);
    let ux = x.pop().unwrap_or(0.0);
    let density = Density::new(disc, x, 2)?;
    let bodies = body_moments(disc, density.values())
        .into_iter()
        .map(|(force, torque)| BodyOutput::Load { force, torque })
        .collect();
    Ok(SolveReport {
        kind: ProblemKind::Resistance,
        density,
        source: None,
        ambient: Ambient::Vector(Vector2::new(ux, uy)),
        bodies,
        trace: None,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub velocity: Vector2<f64>,
    pub omega: f64,
    /// ‖u − v − ω(x − x^c)^⊥‖ / ‖u‖ in L²(Γ_b).
    pub deviation: f64,
}

/// L² projection of the boundary velocity `u` (one value per node of body
/// `b`) onto rigid motions.
pub fn extract_rigid_motion(disc: &Discretization, b: usize, u: &[Vector2<f64>]) -> RigidMotion {
    let body = &disc.bodies[b];
    let nodes = body.nodes.clone();
    let arm = |i: usize| perp(&(disc.points[i] - body.centroid));
    let mut v = Vector2::zeros();
    let mut om = 0.0;
    for (i, ui) in nodes.clone().zip(u) {
        v += disc.weights[i] * ui;
        om += disc.weights[i] * arm(i).dot(ui);
    }
    v /= body.arclength;
    om /= body.second_moment;
    let (mut res, mut tot) = (0.0, 0.0);
    for (i, ui) in nodes.zip(u) {
        res += disc.weights[i] * (ui - v - om * arm(i)).norm_squared();
        tot += disc.weights[i] * ui.norm_squared();
    }
    RigidMotion {
        velocity: v,
        omega: om,
        deviation: if tot > 0.0 { (res / tot).sqrt() } else { 0.0 },
    }
}

/// Exterior potential for discs of radius 1 centred at (∓(1 + d/2), 0) held
/// at potentials φ₁ (left) and φ₂ (right).
pub fn two_disc_exact(d: f64, phi1: f64, phi2: f64, x: &Point) -> f64 {
    let (v1, v2, alpha) = two_disc_constants(d, phi1, phi2);
    let a = Point::new(alpha, 0.0);
    -v1 / (2.0 * PI) * ((x - a).norm() / (x + a).norm()).ln() + v2
}

/// (v₁, v₂, α) of the exact two-disc potential. The source at (α, 0) has
/// strength v₁, so the right disc carries charge v₁ and the left −v₁.
pub fn two_disc_constants(d: f64, phi1: f64, phi2: f64) -> (f64, f64, f64) {
    let alpha = (d + 0.25 * d * d).sqrt();
    let x0 = 0.5 * d;
    let v1 = PI * (phi2 - phi1) / ((x0 + alpha).abs() / (x0 - alpha).abs()).ln();
    (v1, 0.5 * (phi1 + phi2), alpha)
}

/// Relative L² error per body between node values `u` and `reference`
/// (interleaved when `arity` is 2).
pub fn boundary_error(disc: &Discretization, u: &[f64], reference: &[f64], arity: usize) -> Result<Vec<f64>> {
    let n = disc.len() * arity;
    if u.len() != n || reference.len() != n {
        return Err(Error::DensityLength {
            got: u.len().min(reference.len()),
            expected: n,
        });
    }
    disc.bodies
        .iter()
        .enumerate()
        .map(|(b, body)| {
            let (mut num, mut den) = (0.0, 0.0);
            for i in body.nodes.clone() {
                for c in 0..arity {
                    let k = arity * i + c;
                    num += disc.weights[i] * (u[k] - reference[k]).powi(2);
                    den += disc.weights[i] * reference[k].powi(2);
                }
            }
            if den == 0.0 {
                return Err(Error::ZeroReference(b));
            }
            Ok((num / den).sqrt())
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ElastanceRoundTrip {
    pub capacitance: SolveReport,
    pub elastance: SolveReport,
    /// Relative L² error per body of the recovered boundary potential.
    pub errors: Vec<f64>,
}

impl ElastanceRoundTrip {
    pub fn charges(&self) -> Vec<f64> {
        self.capacitance.charges()
    }
}

/// Capacitance solve for `potentials`, then an elastance solve with the
/// resulting charges and potential at infinity; errors compare the
/// recovered boundary potential against `potentials`.
pub fn roundtrip_elastance(disc: &Discretization, potentials: &[f64], config: &SolverConfig) -> Result<ElastanceRoundTrip> {
    let capacitance = solve_capacitance(disc, potentials, config)?;
    let mut q = capacitance.charges();
    // remove the rounding-level imbalance left by the iterative solve
    let mean = q.iter().sum::<f64>() / q.len() as f64;
    q.iter_mut().for_each(|v| *v -= mean);
    let elastance = solve_elastance(disc, &q, capacitance.ambient_scalar(), config)?;
    let reference: Vec<f64> = disc.body_of.iter().map(|&b| potentials[b]).collect();
    let trace = elastance.trace.as_deref().unwrap_or(&[]);
    let errors = boundary_error(disc, trace, &reference, 1)?;
    Ok(ElastanceRoundTrip {
        capacitance,
        elastance,
        errors,
    })
}

#[derive(Debug, Clone)]
pub struct MobilityRoundTrip {
    pub resistance: SolveReport,
    pub mobility: SolveReport,
    /// Relative L² error per body of the recovered boundary velocity.
    pub errors: Vec<f64>,
}

impl MobilityRoundTrip {
    pub fn loads(&self) -> Vec<(Vector2<f64>, f64)> {
        self.resistance.loads()
    }
}

/// Resistance solve for the rigid motions, then a mobility solve with the
/// resulting forces, torques and velocity at infinity.
pub fn roundtrip_mobility(
    disc: &Discretization,
    velocities: &[Vector2<f64>],
    omegas: &[f64],
    config: &SolverConfig,
) -> Result<MobilityRoundTrip> {
    let resistance = solve_resistance(disc, velocities, omegas, config)?;
    let loads = resistance.loads();
    let mut forces: Vec<Vector2<f64>> = loads.iter().map(|(f, _)| *f).collect();
    let mean = forces.iter().sum::<Vector2<f64>>() / forces.len() as f64;
    forces.iter_mut().for_each(|f| *f -= mean);
    let torques: Vec<f64> = loads.iter().map(|(_, t)| *t).collect();
    let mobility = solve_mobility(disc, &forces, &torques, resistance.ambient_vector(), config)?;
    let reference: Vec<f64> = (0..disc.len())
        .flat_map(|i| {
            let b = disc.body_of[i];
            let u = velocities[b] + omegas[b] * perp(&(disc.points[i] - disc.bodies[b].centroid));
            [u.x, u.y]
        })
        .collect();
    let trace = mobility.trace.as_deref().unwrap_or(&[]);
    let errors = boundary_error(disc, trace, &reference, 2)?;
    Ok(MobilityRoundTrip {
        resistance,
        mobility,
        errors,
    })
}

/// Two rounded-bar plates with an m × 10 lattice of equal ellipses between
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct Nanocomposite {
    /// Number of lattice rows m (0 for empty plates).
    pub rows: usize,
    /// Aspect ratio a_x / a_y of every ellipse.
    pub aspect: f64,
    pub plate_points: usize,
    pub ellipse_points: usize,
}

const LATTICE_COLUMNS: usize = 10;
const PLATE_SHIFT: f64 = 1.1;

impl Nanocomposite {
    pub fn new(rows: usize, aspect: f64) -> Self {
        Nanocomposite {
            rows,
            aspect,
            plate_points: 800,
            ellipse_points: 600,
        }
    }

    /// Semi-axes (a_x, a_y) with total inclusion area 0.002 per row count.
    pub fn semi_axes(&self) -> [f64; 2] {
        let ab = 0.002 / (PI * self.rows.max(1) as f64);
        let ay = (ab / self.aspect).sqrt();
        [self.aspect * ay, ay]
    }

    /// Plates first (upper plate, then lower), then ellipses row by row.
    pub fn bodies(&self) -> Result<Vec<BodySpec>> {
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return Err(Error::Invalid(format!("aspect ratio must be positive, got {}", self.aspect)));
        }
        let plate = |shift: f64| {
            BodySpec::new(Curve::RoundedBar { shift }, Scheme::Periodic { points: self.plate_points })
        };
        let mut specs = vec![plate(PLATE_SHIFT), plate(-PLATE_SHIFT)];
        let semi_axes = self.semi_axes();
        let m = self.rows as f64;
        for j in 0..self.rows {
            let y = -0.9 + 1.8 * (j as f64 + 0.5) / m;
            for k in 0..LATTICE_COLUMNS {
                let x = -0.9 + 1.8 * k as f64 / LATTICE_COLUMNS as f64;
                specs.push(BodySpec::new(
                    Curve::Ellipse {
                        center: [x, y],
                        semi_axes,
                        rotation: 0.0,
                    },
                    Scheme::Periodic { points: self.ellipse_points },
                ));
            }
        }
        check_overlaps(&specs)?;
        Ok(specs)
    }
}

/// Rejects bodies whose bounding boxes intersect.
fn check_overlaps(specs: &[BodySpec]) -> Result<()> {
    let boxes: Vec<[f64; 4]> = specs
        .iter()
        .map(|s| {
            (0..256).fold([f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY], |bb, k| {
                let p = s.curve.position(2.0 * PI * k as f64 / 256.0);
                [bb[0].min(p.x), bb[1].min(p.y), bb[2].max(p.x), bb[3].max(p.y)]
            })
        })
        .collect();
    for i in 0..boxes.len() {
        for j in (i + 1)..boxes.len() {
            let (a, b) = (boxes[i], boxes[j]);
            if a[0] < b[2] && b[0] < a[2] && a[1] < b[3] && b[1] < a[3] {
                return Err(Error::Overlap(i, j));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EffectiveCapacitance {
    pub value: f64,
    pub report: SolveReport,
    pub disc: Discretization,
}

/// C̃ = 1/(V₁ − V₂) for unit charges ±1 on the plates and neutral
/// inclusions.
pub fn effective_capacitance(setup: &Nanocomposite, config: &SolverConfig) -> Result<EffectiveCapacitance> {
    let disc = Discretization::new(&setup.bodies()?)?;
    let (value, report) = plate_capacitance(&disc, config)?;
    Ok(EffectiveCapacitance { value, report, disc })
}

/// C̃ for a discretization whose first two bodies are the plates.
pub fn plate_capacitance(disc: &Discretization, config: &SolverConfig) -> Result<(f64, SolveReport)> {
    if disc.body_count() < 2 {
        return Err(Error::Invalid("capacitance needs two plates".into()));
    }
    let mut q = vec![0.0; disc.body_count()];
    q[0] = 1.0;
    q[1] = -1.0;
    let report = solve_elastance(disc, &q, 0.0, config)?;
    let v = report.potentials();
    Ok((1.0 / (v[0] - v[1]), report))
}

/// Field samples on a regular grid.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub points: Vec<Point>,
    /// Index of the body containing each point, if any.
    pub inside: Vec<Option<usize>>,
    pub values: Field,
}

/// Evaluate the field of `report` on an `nx` × `ny` grid spanning
/// `[x0, x1] × [y0, y1]`. Points inside a body get the body's potential
/// or rigid velocity for elastance and mobility, and zero otherwise.
pub fn evaluate_field_grid(
    disc: &Discretization,
    report: &SolveReport,
    bbox: [f64; 4],
    nx: usize,
    ny: usize,
) -> Result<FieldGrid> {
    let [x0, y0, x1, y1] = bbox;
    if nx < 2 || ny < 2 || !(x1 > x0 && y1 > y0) {
        return Err(Error::Invalid("grid needs nx, ny ≥ 2 and a non-empty box".into()));
    }
    let points: Vec<Point> = (0..ny)
        .flat_map(|j| {
            (0..nx).map(move |i| {
                Point::new(
                    x0 + (x1 - x0) * i as f64 / (nx - 1) as f64,
                    y0 + (y1 - y0) * j as f64 / (ny - 1) as f64,
                )
            })
        })
        .collect();
    // points on a node are treated as inside that node's body
    let on_node = |p: &Point| disc.points.iter().position(|y| (y - p).norm() < 1e-12).map(|i| disc.body_of[i]);
    let inside: Vec<Option<usize>> = points
        .iter()
        .map(|p| on_node(p).or_else(|| disc.containing_body(p)))
        .collect();
    let outside: Vec<Point> = points
        .iter()
        .zip(&inside)
        .filter(|(_, b)| b.is_none())
        .map(|(p, _)| *p)
        .collect();
    let exterior = report.field(disc, &outside)?;
    let values = match exterior {
        Field::Scalar(u) => {
            let phi = report.potentials();
            let mut it = u.into_iter();
            Field::Scalar(
                inside
                    .iter()
                    .map(|b| match b {
                        None => it.next().unwrap_or(0.0),
                        Some(b) => phi.get(*b).copied().unwrap_or(0.0),
                    })
                    .collect(),
            )
        }
        Field::Vector(u) => {
            let motions = report.motions();
            let mut it = u.into_iter();
            Field::Vector(
                inside
                    .iter()
                    .zip(&points)
                    .map(|(b, x)| match b {
                        None => it.next().unwrap_or_else(Vector2::zeros),
                        Some(b) => motions
                            .get(*b)
                            .map(|(v, om)| v + *om * perp(&(x - disc.bodies[*b].centroid)))
                            .unwrap_or_else(Vector2::zeros),
                    })
                    .collect(),
            )
        }
    };
    Ok(FieldGrid { points, inside, values })
}

//! Analytic closed curves and their discretization into quadrature nodes.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::Vector2;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::rules::gauss;
use crate::{Error, Result};

pub type Point = Vector2<f64>;

/// Counter-clockwise rotation by a right angle.
#[inline]
pub fn perp(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// Error function, accurate to about 1e-15 absolute.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x == 0.0 || x.is_nan() {
        return x;
    }
    if x <= 3.0 {
        // erf(x) = 2/√π e^{-x²} Σ 2ⁿ x^{2n+1} / (2n+1)!!
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= 2.0 * x2 / (2.0 * n + 1.0);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        2.0 / PI.sqrt() * (-x2).exp() * sum
    } else {
        1.0 - erfc_large(x)
    }
}

/// Complementary error function for x > 3 by Lentz's continued fraction.
fn erfc_large(x: f64) -> f64 {
    // erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / PI.sqrt() / f
}

/// Analytic closed curve parametrized over t ∈ [0, 2π), counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Curve {
    Disc {
        center: [f64; 2],
        radius: f64,
    },
    /// r(θ) = 1 + Σ a_k sin(kθ), x = center + r(θ)(cos(θ+β), sin(θ+β)).
    FourierStar {
        center: [f64; 2],
        rotation: f64,
        coeffs: Vec<f64>,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        rotation: f64,
    },
    /// Thin bar with smoothed ends, centred at (0, shift).
    RoundedBar { shift: f64 },
}

/// Position, unit tangent, outward normal and curvature at one parameter.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub position: Point,
    pub tangent: Vector2<f64>,
    pub normal: Vector2<f64>,
    pub curvature: f64,
    pub speed: f64,
}

const BAR_HALF_LENGTH: f64 = 1.1;
const BAR_HALF_THICKNESS: f64 = 0.1;

/// Bar half-profile on s ∈ [-π/2, π/2]: (x, x', x'') and (y, y', y'').
fn bar_half(s: f64) -> ([f64; 3], [f64; 3]) {
    let sqpi = PI.sqrt();
    let g0 = (-100.0 * s * s).exp();
    // smooth |s|: g = e^{-100s²}/(10√π) + s·erf(10s), g' = erf(10s)
    let g = g0 / (10.0 * sqpi) + s * erf(10.0 * s);
    let g1 = erf(10.0 * s);
    let g2 = 20.0 / sqpi * g0;
    let k = -BAR_HALF_LENGTH * 2.0 / PI;
    let x = [BAR_HALF_LENGTH + k * g, k * g1, k * g2];
    let e = (-49.0 * s * s).exp();
    let y = [
        BAR_HALF_THICKNESS * erf(7.0 * s),
        BAR_HALF_THICKNESS * 14.0 / sqpi * e,
        BAR_HALF_THICKNESS * 14.0 / sqpi * (-98.0 * s) * e,
    ];
    (x, y)
}

fn rotate(v: Vector2<f64>, angle: f64) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

impl Curve {
    pub fn disc(center: Point, radius: f64) -> Self {
        Curve::Disc {
            center: [center.x, center.y],
            radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Curve::Disc { center, radius } => {
                if !finite(center) || !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Invalid(format!("disc radius must be positive, got {radius}")));
                }
            }
            Curve::FourierStar {
                center,
                rotation,
                coeffs,
            } => {
                let amp: f64 = coeffs.iter().map(|a| a.abs()).sum();
                if !finite(center) || !rotation.is_finite() || !finite(coeffs) || amp >= 1.0 {
                    return Err(Error::Invalid(
                        "star coefficients must be finite with Σ|a_k| < 1".into(),
                    ));
                }
            }
            Curve::Ellipse {
                center,
                semi_axes,
                rotation,
            } => {
                if !finite(center) || !rotation.is_finite() || semi_axes.iter().any(|a| !(*a > 0.0)) {
                    return Err(Error::Invalid("ellipse semi-axes must be positive".into()));
                }
            }
            Curve::RoundedBar { shift } => {
                if !shift.is_finite() {
                    return Err(Error::Invalid("bar shift must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// A point inside the curve from which the curve is star-shaped.
    pub fn center(&self) -> Point {
        match self {
            Curve::Disc { center, .. }
            | Curve::FourierStar { center, .. }
            | Curve::Ellipse { center, .. } => Point::new(center[0], center[1]),
            Curve::RoundedBar { shift } => Point::new(0.0, *shift),
        }
    }

    /// Position and its first two parameter derivatives.
    pub fn derivatives(&self, t: f64) -> [Vector2<f64>; 3] {
        match self {
            Curve::Disc { center, radius } => {
                let (s, c) = t.sin_cos();
                [
                    Vector2::new(center[0] + radius * c, center[1] + radius * s),
                    Vector2::new(-radius * s, radius * c),
                    Vector2::new(-radius * c, -radius * s),
                ]
            }
            Curve::FourierStar {
                center,
                rotation,
                coeffs,
            } => {
                let (mut r, mut r1, mut r2) = (1.0, 0.0, 0.0);
                for (k, a) in coeffs.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    let (s, c) = (kf * t).sin_cos();
                    r += a * s;
                    r1 += a * kf * c;
                    r2 -= a * kf * kf * s;
                }
                let (s, c) = (t + rotation).sin_cos();
                let e = Vector2::new(c, s);
                let ep = Vector2::new(-s, c);
                [
                    Vector2::new(center[0], center[1]) + r * e,
                    r1 * e + r * ep,
                    r2 * e + 2.0 * r1 * ep - r * e,
                ]
            }
            Curve::Ellipse {
                center,
                semi_axes,
                rotation,
            } => {
                let (s, c) = t.sin_cos();
                let [a, b] = *semi_axes;
                [
                    Vector2::new(center[0], center[1]) + rotate(Vector2::new(a * c, b * s), *rotation),
                    rotate(Vector2::new(-a * s, b * c), *rotation),
                    rotate(Vector2::new(-a * c, -b * s), *rotation),
                ]
            }
            Curve::RoundedBar { shift } => {
                // wrap to s ∈ [-π/2, 3π/2); the left half mirrors the right one
                let mut s = t.rem_euclid(2.0 * PI);
                if s >= 1.5 * PI {
                    s -= 2.0 * PI;
                }
                if s <= 0.5 * PI {
                    let (x, y) = bar_half(s);
                    [
                        Vector2::new(x[0], y[0] + shift),
                        Vector2::new(x[1], y[1]),
                        Vector2::new(x[2], y[2]),
                    ]
                } else {
                    let (x, y) = bar_half(PI - s);
                    [
                        Vector2::new(-x[0], y[0] + shift),
                        Vector2::new(x[1], -y[1]),
                        Vector2::new(-x[2], y[2]),
                    ]
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> CurvePoint {
        let [x, d1, d2] = self.derivatives(t);
        let speed = d1.norm();
        let tangent = d1 / speed;
        CurvePoint {
            position: x,
            tangent,
            normal: Vector2::new(tangent.y, -tangent.x),
            curvature: (d1.x * d2.y - d1.y * d2.x) / speed.powi(3),
            speed,
        }
    }

    pub fn position(&self, t: f64) -> Point {
        self.derivatives(t)[0]
    }

    /// Signed area by the trapezoidal shoelace integral with `n` samples.
    pub fn signed_area(&self, n: usize) -> f64 {
        let h = 2.0 * PI / n as f64;
        0.5 * (0..n)
            .map(|k| {
                let [x, d, _] = self.derivatives(h * k as f64);
                x.x * d.y - x.y * d.x
            })
            .sum::<f64>()
            * h
    }
}

/// Fraction of the coordinate energy carried by the top 20% of Fourier
/// modes of `n` equispaced samples.
pub fn resolution_estimate(curve: &Curve, n: usize) -> f64 {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            let p = curve.position(2.0 * PI * k as f64 / n as f64);
            Complex::new(p.x, p.y)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let cutoff = 0.8 * (n / 2) as f64;
    let (mut tail, mut total) = (0.0, 0.0);
    for (k, c) in buf.iter().enumerate() {
        let freq = if k <= n / 2 { k } else { n - k } as f64;
        let e = c.norm_sqr();
        total += e;
        if freq > cutoff {
            tail += e;
        }
    }
    tail / total
}

/// How a body is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Scheme {
    /// Uniform parameter panels with Gauss–Legendre nodes.
    Panel { panels: usize, order: usize },
    /// Equispaced trapezoidal nodes at t_k = 2π(k + ½)/n.
    Periodic { points: usize },
}

impl Scheme {
    fn validate(&self) -> Result<()> {
        match *self {
            Scheme::Panel { panels, order } if panels >= 1 && (2..=32).contains(&order) => Ok(()),
            Scheme::Periodic { points } if points >= 16 && points % 2 == 0 => Ok(()),
            s => Err(Error::Invalid(format!("unsupported discretization {s:?}"))),
        }
    }
}

/// A curve with its sampling request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub curve: Curve,
    pub scheme: Scheme,
    /// Parameters toward which panels are dyadically refined.
    #[serde(default)]
    pub refine_toward: Vec<f64>,
    #[serde(default)]
    pub refine_levels: u32,
}

impl BodySpec {
    pub fn new(curve: Curve, scheme: Scheme) -> Self {
        BodySpec {
            curve,
            scheme,
            refine_toward: Vec::new(),
            refine_levels: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub t0: f64,
    pub t1: f64,
    /// Global index of the first node.
    pub start: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Panels { order: usize },
    Periodic,
}

/// Per-body metadata of a discretization.
#[derive(Debug, Clone)]
pub struct Body {
    pub curve: Curve,
    pub layout: Layout,
    pub nodes: Range<usize>,
    /// Empty for periodic bodies.
    pub panels: Vec<Panel>,
    pub arclength: f64,
    pub centroid: Point,
    /// ∫ |x − centroid|² ds
    pub second_moment: f64,
}

impl Body {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Typical node spacing in arclength.
    pub fn spacing(&self) -> f64 {
        self.arclength / self.len() as f64
    }
}

/// Quadrature nodes with geometric data for a multi-body boundary.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub bodies: Vec<Body>,
    pub params: Vec<f64>,
    pub points: Vec<Point>,
    pub normals: Vec<Vector2<f64>>,
    pub tangents: Vec<Vector2<f64>>,
    pub curvature: Vec<f64>,
    pub speed: Vec<f64>,
    pub weights: Vec<f64>,
    pub body_of: Vec<usize>,
}

enum Sampling {
    Panels { order: usize, breaks: Vec<f64> },
    Periodic { points: usize },
}

fn initial_sampling(spec: &BodySpec) -> Sampling {
    match spec.scheme {
        Scheme::Panel { panels, order } => {
            let mut breaks: Vec<f64> = (0..=panels)
                .map(|k| 2.0 * PI * k as f64 / panels as f64)
                .collect();
            for &target in &spec.refine_toward {
                let t = target.rem_euclid(2.0 * PI);
                for _ in 0..spec.refine_levels {
                    // split the panel holding t and its two neighbours
                    let k = breaks.partition_point(|&b| b <= t).clamp(1, breaks.len() - 1) - 1;
                    let np = breaks.len() - 1;
                    let mut hit = vec![k, (k + 1) % np, (k + np - 1) % np];
                    hit.sort_unstable();
                    hit.dedup();
                    for &p in hit.iter().rev() {
                        let mid = 0.5 * (breaks[p] + breaks[p + 1]);
                        breaks.insert(p + 1, mid);
                    }
                }
            }
            Sampling::Panels { order, breaks }
        }
        Scheme::Periodic { points } => Sampling::Periodic { points },
    }
}

impl Discretization {
    /// Single body.
    pub fn from_curve(curve: Curve, scheme: Scheme) -> Result<Self> {
        Self::new(&[BodySpec::new(curve, scheme)])
    }

    pub fn new(specs: &[BodySpec]) -> Result<Self> {
        Self::build(specs, None)
    }

    /// Like [`Discretization::new`], then splits panels until every panel
    /// is no longer than `factor` times its distance to any other body.
    pub fn with_proximity(specs: &[BodySpec], factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::Invalid(format!("proximity factor must be positive, got {factor}")));
        }
        Self::build(specs, Some(factor))
    }

    fn build(specs: &[BodySpec], proximity: Option<f64>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Invalid("no bodies given".into()));
        }
        for s in specs {
            s.curve.validate()?;
            s.scheme.validate()?;
        }
        let mut samplings: Vec<Sampling> = specs.iter().map(initial_sampling).collect();
        let mut disc = Self::assemble(specs, &samplings);
        if let Some(factor) = proximity {
            for _ in 0..60 {
                if !disc.split_close_panels(&mut samplings, factor) {
                    break;
                }
                disc = Self::assemble(specs, &samplings);
            }
        }
        Ok(disc)
    }

    fn split_close_panels(&self, samplings: &mut [Sampling], factor: f64) -> bool {
        if self.bodies.len() < 2 {
            return false;
        }
        let mut changed = false;
        for (b, body) in self.bodies.iter().enumerate() {
            let Sampling::Panels { order, breaks } = &mut samplings[b] else {
                continue;
            };
            let mut split = Vec::new();
            for (p, panel) in body.panels.iter().enumerate() {
                let nodes = panel.start..panel.start + *order;
                let mid = self.points[panel.start + *order / 2];
                let dist = self
                    .points
                    .iter()
                    .zip(&self.body_of)
                    .filter(|(_, &o)| o != b)
                    .filter(|(y, _)| (*y - mid).norm() - 0.6 * panel.length < panel.length / factor)
                    .flat_map(|(y, _)| nodes.clone().map(move |i| (self.points[i] - y).norm()))
                    .fold(f64::INFINITY, f64::min);
                if panel.length > factor * dist {
                    split.push(p);
                }
            }
            for &p in split.iter().rev() {
                let mid = 0.5 * (breaks[p] + breaks[p + 1]);
                breaks.insert(p + 1, mid);
                changed = true;
            }
        }
        changed
    }

    fn assemble(specs: &[BodySpec], samplings: &[Sampling]) -> Self {
        let mut d = Discretization {
            bodies: Vec::with_capacity(specs.len()),
            params: Vec::new(),
            points: Vec::new(),
            normals: Vec::new(),
            tangents: Vec::new(),
            curvature: Vec::new(),
            speed: Vec::new(),
            weights: Vec::new(),
            body_of: Vec::new(),
        };
        for (b, (spec, sampling)) in specs.iter().zip(samplings).enumerate() {
            let start = d.points.len();
            let mut panels = Vec::new();
            let push = |d: &mut Discretization, t: f64, w: f64| {
                let cp = spec.curve.eval(t);
                d.params.push(t);
                d.points.push(cp.position);
                d.normals.push(cp.normal);
                d.tangents.push(cp.tangent);
                d.curvature.push(cp.curvature);
                d.speed.push(cp.speed);
                d.weights.push(w * cp.speed);
                d.body_of.push(b);
            };
            let layout = match sampling {
                Sampling::Panels { order, breaks } => {
                    let rule = gauss(*order);
                    for win in breaks.windows(2) {
                        let (t0, t1) = (win[0], win[1]);
                        let half = 0.5 * (t1 - t0);
                        let pstart = d.points.len();
                        for (u, w) in rule.nodes.iter().zip(&rule.weights) {
                            push(&mut d, t0 + half * (u + 1.0), w * half);
                        }
                        panels.push(Panel {
                            t0,
                            t1,
                            start: pstart,
                            length: d.weights[pstart..].iter().sum(),
                        });
                    }
                    Layout::Panels { order: *order }
                }
                Sampling::Periodic { points } => {
                    let h = 2.0 * PI / *points as f64;
                    for k in 0..*points {
                        push(&mut d, h * (k as f64 + 0.5), h);
                    }
                    Layout::Periodic
                }
            };
            let range = start..d.points.len();
            let arclength: f64 = d.weights[range.clone()].iter().sum();
            let centroid = range
                .clone()
                .fold(Point::zeros(), |acc, i| acc + d.points[i] * d.weights[i])
                / arclength;
            let second_moment = range
                .clone()
                .map(|i| (d.points[i] - centroid).norm_squared() * d.weights[i])
                .sum();
            d.bodies.push(Body {
                curve: spec.curve.clone(),
                layout,
                nodes: range,
                panels,
                arclength,
                centroid,
                second_moment,
            });
        }
        d
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn body_count(&self) -> usize {
        self.bodies.len()
    }

    /// Translate every body by `shift` (used by invariance checks).
    pub fn translated(&self, shift: Vector2<f64>) -> Self {
        let mut out = self.clone();
        for p in out.points.iter_mut() {
            *p += shift;
        }
        for b in out.bodies.iter_mut() {
            b.centroid += shift;
            b.curve = match &b.curve {
                Curve::Disc { center, radius } => Curve::Disc {
                    center: [center[0] + shift.x, center[1] + shift.y],
                    radius: *radius,
                },
                Curve::FourierStar {
                    center,
                    rotation,
                    coeffs,
                } => Curve::FourierStar {
                    center: [center[0] + shift.x, center[1] + shift.y],
                    rotation: *rotation,
                    coeffs: coeffs.clone(),
                },
                Curve::Ellipse {
                    center,
                    semi_axes,
                    rotation,
                } => Curve::Ellipse {
                    center: [center[0] + shift.x, center[1] + shift.y],
                    semi_axes: *semi_axes,
                    rotation: *rotation,
                },
                // the bar has no horizontal offset parameter
                Curve::RoundedBar { .. } => b.curve.clone(),
            };
        }
        out
    }

    /// Smallest distance between nodes of different bodies.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                if self.body_of[i] != self.body_of[j] {
                    best = best.min((self.points[i] - self.points[j]).norm());
                }
            }
        }
        best
    }

    /// Winding-number test: index of the body containing `x`, if any.
    pub fn containing_body(&self, x: &Point) -> Option<usize> {
        self.bodies.iter().position(|b| {
            let mut angle = 0.0;
            for i in b.nodes.clone() {
                let d = self.points[i] - x;
                let w = self.tangents[i] * self.weights[i];
                angle += (d.x * w.y - d.y * w.x) / d.norm_squared();
            }
            angle > PI
        })
    }
}

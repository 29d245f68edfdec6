//! Acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::TAU;
use std::time::Instant;

use bie2d::linsolve::Method;
use bie2d::problems::SolveReport;
use bie2d::quadrature::{
    eval_laplace_double, eval_laplace_k, eval_laplace_kstar, eval_laplace_single, eval_laplace_single_gradient,
    eval_stokes_dlp, eval_stokes_double, eval_stokes_traction, rigid_density, Density, EvalPlan,
};
use bie2d::scenarios::{Outcome, Scenario, ScenarioConfig, ScenarioKind, TWO_DISC_POTENTIALS};
use bie2d::{perp, Discretization, Point};
use common::*;
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAPS: [f64; 3] = [0.5, 0.05, 0.005];
/// Log strength of the left disc.
const TWO_DISC_Q1: [f64; 3] = [-0.239487, -0.743917, -2.348079];
/// F₁ₓ, F₁ᵧ, T₁, T₂ per gap.
const TWO_DISC_LOADS: [[f64; 4]; 3] = [
    [27.180434, -6.575686, -1.496082, 1.494675],
    [499.08688, -15.202716, -11.159661, -4.859692],
    [14653.544, -40.877338, -42.867299, -24.078713],
];
const TWO_DISC_LOAD_TOL: [f64; 3] = [1e-3, 1e-2, 1e-2];
const ASPECTS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
const NANO_ONE_ROW: [f64; 5] = [2.3147, 2.3073, 2.3033, 2.3013, 2.3003];
const NANO_EMPTY: f64 = 2.2949;
const NANO_FOUR_ROWS_UNIT: f64 = 2.3047;
const DENSE_LIMIT: usize = 5000;

/// Exact log strength of the left disc for two unit discs at gap `d`: in
/// bipolar coordinates the field is linear in ξ with the discs at ξ = ±ξ₀,
/// cosh ξ₀ = 1 + d/2.
fn bipolar_q1(d: f64, phi: [f64; 2]) -> f64 {
    (phi[1] - phi[0]) / (2.0 * (1.0 + 0.5 * d).acosh())
}

struct Run {
    label: String,
    config: ScenarioConfig,
    scenario: Scenario,
    outcome: Result<Outcome, String>,
}

impl Run {
    fn new(label: String, config: ScenarioConfig) -> Run {
        let t = Instant::now();
        let scenario = config.build().expect("scenario builds");
        let outcome = scenario.run(&config.solver).map_err(|e| e.to_string());
        eprintln!("  ran {label} ({} nodes) in {:.1} s", scenario.disc.len(), t.elapsed().as_secs_f64());
        Run {
            label,
            config,
            scenario,
            outcome,
        }
    }

    fn disc(&self) -> &Discretization {
        &self.scenario.disc
    }

    /// Reports whose densities solve the completed second-kind equations.
    fn completed(&self) -> Vec<&SolveReport> {
        match &self.outcome {
            Ok(Outcome::Elastance(rt)) => vec![&rt.elastance],
            Ok(Outcome::Mobility(rt)) => vec![&rt.mobility],
            Ok(o) => vec![o.primary()],
            Err(_) => Vec::new(),
        }
    }

    fn all_reports(&self) -> Vec<&SolveReport> {
        match &self.outcome {
            Ok(Outcome::Elastance(rt)) => vec![&rt.capacitance, &rt.elastance],
            Ok(Outcome::Mobility(rt)) => vec![&rt.resistance, &rt.mobility],
            Ok(o) => vec![o.primary()],
            Err(_) => Vec::new(),
        }
    }

    fn unknowns(&self) -> usize {
        let arity = match self.scenario.kind {
            ScenarioKind::TwoDiscMobility | ScenarioKind::SplashMobility => 2,
            _ => 1,
        };
        self.disc().len() * arity
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new() -> Self {
        Verdict {
            pass: true,
            detail: String::new(),
        }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.pass &= ok;
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        if !ok {
            self.detail.push_str("FAILED ");
        }
        self.detail.push_str(&note);
    }

    fn error(&mut self, label: &str, e: &str) {
        self.check(false, format!("{label}: {e}"));
    }
}

fn preset(kind: ScenarioKind, edit: impl FnOnce(&mut ScenarioConfig)) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset(kind);
    edit(&mut cfg);
    cfg
}

fn two_disc_elastance(runs: &[Run]) -> Verdict {
    let mut v = Verdict::new();
    for ((run, d), q1_ref) in runs.iter().zip(GAPS).zip(TWO_DISC_Q1) {
        let Ok(Outcome::Elastance(rt)) = &run.outcome else {
            v.error(&run.label, run.outcome.as_ref().err().map_or("unexpected outcome", |s| s));
            continue;
        };
        let q1 = -rt.charges()[0] / TAU;
        let rel = ((q1 - q1_ref) / q1_ref).abs();
        let exact = bipolar_q1(d, TWO_DISC_POTENTIALS);
        let rel_exact = ((q1 - exact) / exact).abs();
        let e = max_abs(rt.errors.iter().copied());
        v.check(rel < 5e-5, format!("d={d} q1={q1:.7} rel {rel:.1e}"));
        v.check(rel_exact < 5e-5, format!("bipolar rel {rel_exact:.1e}"));
        v.check(e <= 1e-4, format!("e={e:.1e}"));
    }
    v
}

fn two_disc_mobility(runs: &[Run]) -> Verdict {
    let mut v = Verdict::new();
    for (((run, d), reference), tol) in runs.iter().zip(GAPS).zip(TWO_DISC_LOADS).zip(TWO_DISC_LOAD_TOL) {
        let Ok(Outcome::Mobility(rt)) = &run.outcome else {
            v.error(&run.label, run.outcome.as_ref().err().map_or("unexpected outcome", |s| s));
            continue;
        };
        let loads = rt.loads();
        let got = [loads[0].0.x, loads[0].0.y, loads[0].1, loads[1].1];
        let rel = max_abs(got.iter().zip(reference).map(|(g, r)| (g - r) / r));
        let e = max_abs(rt.errors.iter().copied());
        v.check(rel < tol, format!("d={d} F11={:.6} max rel {rel:.1e}", got[0]));
        v.check(e <= 1e-4, format!("e={e:.1e}"));
    }
    v
}

fn splash(elastance: &Run, mobility: &Run) -> Verdict {
    let mut v = Verdict::new();
    match &elastance.outcome {
        Ok(Outcome::Elastance(rt)) => {
            let e = max_abs(rt.errors.iter().copied());
            let it = rt.elastance.stats.iterations;
            v.check(e <= 1e-4, format!("elastance e={e:.1e}"));
            v.check((20..=45).contains(&it), format!("{it} iterations"));
        }
        o => v.error("splash elastance", o.as_ref().err().map_or("unexpected outcome", |s| s)),
    }
    match &mobility.outcome {
        Ok(Outcome::Mobility(rt)) => {
            let e = max_abs(rt.errors.iter().copied());
            let it = rt.mobility.stats.iterations;
            v.check(e <= 1e-4, format!("mobility e={e:.1e}"));
            v.check((50..=100).contains(&it), format!("{it} iterations"));
        }
        o => v.error("splash mobility", o.as_ref().err().map_or("unexpected outcome", |s| s)),
    }
    v
}

fn nanocomposite(runs: &[(Run, f64, f64)]) -> Verdict {
    let mut v = Verdict::new();
    for (run, reference, tol) in runs {
        match &run.outcome {
            Ok(Outcome::Capacitance { value, .. }) => {
                let err = (value - reference).abs();
                v.check(err <= *tol, format!("{} C={value:.4} ({err:.1e})", run.label));
            }
            o => v.error(&run.label, o.as_ref().err().map_or("unexpected outcome", |s| s)),
        }
    }
    v
}

fn radial_point(disc: &Discretization, t: f64, s: f64) -> Point {
    let curve = &disc.bodies[0].curve;
    let c = curve.center();
    c + s * (curve.position(t) - c)
}

fn identities() -> Verdict {
    let mut v = Verdict::new();
    let rigid = [(Vector2::new(1.0, 0.0), 0.0), (Vector2::new(0.0, 1.0), 0.0), (Vector2::zeros(), 1.0)];
    for (name, disc, outer, inner) in geometries() {
        let c = disc.bodies[0].centroid;
        let one = Density::from_fn_scalar(&disc, |_| 1.0);
        let pts: Vec<Point> = [(0.3, 0.2), (2.0, 0.6), (4.5, 0.75), (1.0, 1.4), (3.3, 2.5), (5.9, 1.7)]
            .iter()
            .map(|&(t, s)| radial_point(&disc, t, s))
            .collect();

        // Laplace double layer: −1 inside, 0 outside, −1/2 on the curve
        let dl = eval_laplace_double(&disc, &one, &pts).unwrap();
        let on = eval_laplace_kstar(&disc, &one).unwrap();
        let err = max_abs(dl[..3].iter().map(|x| x + 1.0).chain(dl[3..].iter().copied()).chain(on.iter().map(|x| x + 0.5)));
        v.check(err < 1e-10, format!("{name} laplace dlp {err:.0e}"));

        // Gauss laws of the Laplace single layer
        let mu = smooth_scalar(&disc, &[(1.0, 0.0), (0.3, -0.2), (0.1, 0.25)]);
        let total: f64 = mu.values().iter().zip(&disc.weights).map(|(m, w)| m * w).sum();
        let flux = |r: &Ring| -> f64 {
            let g = eval_laplace_single_gradient(&disc, &mu, &r.points).unwrap();
            g.iter().zip(&r.normals).zip(&r.weights).map(|((g, n), w)| g.dot(n) * w).sum()
        };
        let err = max_abs([flux(&ring(c, outer, 256)) + total, flux(&ring(c, inner, 256)), flux(&ring(c + Vector2::new(0.0, 4.0), 1.0, 256))]);
        v.check(err < 1e-10, format!("{name} gauss {err:.0e}"));

        // Stokes double layer of rigid motions and the torque moment
        let mut err = 0.0f64;
        for (vel, om) in rigid {
            let mu = rigid_density(&disc, 0, vel, om);
            let u = eval_stokes_double(&disc, &mu, &pts).unwrap();
            for (k, p) in pts.iter().enumerate() {
                let expect = if k < 3 { -(vel + om * perp(&(p - c))) } else { Vector2::zeros() };
                err = err.max((u[k] - expect).norm());
            }
            let d = eval_stokes_dlp(&disc, &mu).unwrap();
            for i in 0..disc.len() {
                let x = vel + om * perp(&(disc.points[i] - c));
                err = err.max((Vector2::new(d[2 * i], d[2 * i + 1]) + 0.5 * x).norm());
            }
        }
        let mu = Density::from_fn_vector(&disc, |i| perp(&disc.points[i]));
        let u = eval_stokes_double(&disc, &mu, &pts).unwrap();
        for (k, p) in pts.iter().enumerate() {
            let expect = if k < 3 { -perp(p) } else { Vector2::zeros() };
            err = err.max((u[k] - expect).norm());
        }
        let d = eval_stokes_dlp(&disc, &mu).unwrap();
        for i in 0..disc.len() {
            err = err.max((Vector2::new(d[2 * i], d[2 * i + 1]) + 0.5 * perp(&disc.points[i])).norm());
        }
        v.check(err < 1e-8, format!("{name} stokes dlp {err:.0e}"));

        // adjoint null vectors
        let err = max_abs(on.iter().map(|x| x + 0.5));
        v.check(err < 1e-8, format!("{name} null {err:.0e}"));

        // Stokes single layer force and torque laws
        let mu = smooth_vector(&disc, &[(0.7, 0.0), (0.2, -0.4), (0.0, 0.1)], &[(-0.3, 0.0), (0.5, 0.1), (0.2, 0.0)]);
        let (force, torque) = density_moments(&disc, &mu, c);
        let loads = |r: &Ring| ring_loads(r, &stokes_traction(&disc, &mu, &r.points, &r.normals, 1e-5), c);
        let (f_out, t_out) = loads(&ring(c, outer, 256));
        let (f_in, t_in) = loads(&ring(c, inner, 256));
        let err = max_abs([(f_out + force).norm(), t_out + torque, f_in.norm(), t_in]);
        v.check(err < 1e-8, format!("{name} stokes gauss {err:.0e}"));
    }
    v
}

fn annihilation(runs: &[&Run]) -> Verdict {
    let mut v = Verdict::new();
    let mut worst = (0.0f64, String::new());
    let mut count = 0;
    for run in runs {
        for r in run.completed() {
            count += 1;
            let a = max_abs(r.annihilation(run.disc()));
            if a >= worst.0 {
                worst = (a, run.label.clone());
            }
        }
    }
    v.check(worst.0 < 1e-8, format!("{count} solves, worst {:.1e} ({})", worst.0, worst.1));
    v
}

/// Fixed random smooth densities on the unit circle.
fn random_modes(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    (0..4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn jumps() -> Verdict {
    let mut v = Verdict::new();
    let disc = unit_circle();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 4e-3;
    let nodes = [3, 64, 111, 190, 250];
    let line = |i: usize, sign: f64, from: usize| -> Vec<Point> {
        (from..from + 5).map(|k| disc.points[i] + sign * k as f64 * h * disc.normals[i]).collect()
    };

    let mu = smooth_scalar(&disc, &random_modes(&mut rng));
    let on = eval_laplace_single(&disc, &mu, &EvalPlan::on_surface(&disc)).unwrap();
    let k = eval_laplace_k(&disc, &mu).unwrap();
    let mut err = 0.0f64;
    for &i in &nodes {
        for sign in [1.0, -1.0] {
            let s = eval_laplace_single(&disc, &mu, &EvalPlan::off_surface(&line(i, sign, 1))).unwrap();
            let f = [on[i], s[0], s[1], s[2], s[3]];
            let dn = sign * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
            err = err.max((dn - (k[i] - 0.5 * sign * mu.values()[i])).abs());
        }
    }
    v.check(err < 1e-6, format!("laplace {err:.0e}"));

    let mu = smooth_vector(&disc, &random_modes(&mut rng), &random_modes(&mut rng));
    let kmu = eval_stokes_traction(&disc, &mu).unwrap();
    let mut err = 0.0f64;
    for &i in &nodes {
        for sign in [1.0, -1.0] {
            let f = stokes_traction(&disc, &mu, &line(i, sign, 1), &[disc.normals[i]; 5], 1e-5);
            let limit = f[0] * 5.0 - f[1] * 10.0 + f[2] * 10.0 - f[3] * 5.0 + f[4];
            let expect = Vector2::new(kmu[2 * i], kmu[2 * i + 1]) - 0.5 * sign * mu.vec2(i);
            err = err.max((limit - expect).norm());
        }
    }
    v.check(err < 1e-6, format!("stokes {err:.0e}"));
    v
}

fn interior(runs: &[&Run]) -> Verdict {
    let mut v = Verdict::new();
    let mut worst = (0.0f64, String::new());
    for run in runs {
        for r in run.completed() {
            match r.interior_deviation(run.disc(), 5) {
                Ok(dev) => {
                    let m = max_abs(dev);
                    if m >= worst.0 {
                        worst = (m, run.label.clone());
                    }
                }
                Err(e) => v.error(&run.label, &e.to_string()),
            }
        }
    }
    v.check(worst.0 <= 1e-6, format!("worst {:.1e} ({})", worst.0, worst.1));
    v
}

/// Relative difference of two densities in the √w-weighted norm.
fn scaled_difference(disc: &Discretization, a: &Density, b: &Density) -> f64 {
    let arity = a.arity();
    let (mut diff, mut norm) = (0.0, 0.0);
    for (k, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
        let w = disc.weights[k / arity];
        diff += w * (x - y).powi(2);
        norm += w * y * y;
    }
    (diff / norm).sqrt()
}

fn cross_solver(runs: &[&Run]) -> Verdict {
    let mut v = Verdict::new();
    for run in runs.iter().filter(|r| r.unknowns() <= DENSE_LIMIT) {
        let mut cfg = run.config.clone();
        cfg.solver.method = Method::Dense;
        let t = Instant::now();
        let dense = match run.scenario.run(&cfg.solver) {
            Ok(o) => o,
            Err(e) => {
                v.error(&run.label, &e.to_string());
                continue;
            }
        };
        eprintln!("  dense {} in {:.1} s", run.label, t.elapsed().as_secs_f64());
        let dense_run = Run {
            label: run.label.clone(),
            config: cfg,
            scenario: run.scenario.clone(),
            outcome: Ok(dense),
        };
        let diff = run
            .all_reports()
            .iter()
            .zip(dense_run.all_reports())
            .map(|(g, d)| scaled_difference(run.disc(), &g.density, &d.density))
            .fold(0.0, f64::max);
        v.check(diff < 1e-5, format!("{} {diff:.0e}", run.label));
    }
    v
}

fn main() {
    let start = Instant::now();
    let de: Vec<Run> = GAPS
        .iter()
        .map(|&d| Run::new(format!("two-disc-elastance d={d}"), preset(ScenarioKind::TwoDiscElastance, |c| c.gap = Some(d))))
        .collect();
    let dm: Vec<Run> = GAPS
        .iter()
        .map(|&d| Run::new(format!("two-disc-mobility d={d}"), preset(ScenarioKind::TwoDiscMobility, |c| c.gap = Some(d))))
        .collect();
    let se = Run::new("splash-elastance".into(), ScenarioConfig::preset(ScenarioKind::SplashElastance));
    let sm = Run::new("splash-mobility".into(), ScenarioConfig::preset(ScenarioKind::SplashMobility));
    let mut nano = vec![(
        Run::new("m=0".into(), preset(ScenarioKind::Nanocomposite, |c| c.rows = Some(0))),
        NANO_EMPTY,
        2e-3,
    )];
    for (a, reference) in ASPECTS.iter().zip(NANO_ONE_ROW) {
        let cfg = preset(ScenarioKind::Nanocomposite, |c| {
            c.rows = Some(1);
            c.aspect = Some(*a);
        });
        nano.push((Run::new(format!("m=1 A={a}"), cfg), reference, 2e-3));
    }
    let cfg = preset(ScenarioKind::Nanocomposite, |c| {
        c.rows = Some(4);
        c.aspect = Some(1.0);
    });
    nano.push((Run::new("m=4 A=1".into(), cfg), NANO_FOUR_ROWS_UNIT, 3e-3));

    let all: Vec<&Run> = de.iter().chain(&dm).chain([&se, &sm]).chain(nano.iter().map(|(r, ..)| r)).collect();

    let verdicts = [
        ("two-disc capacitance/elastance round trip", two_disc_elastance(&de)),
        ("two-disc resistance/mobility round trip", two_disc_mobility(&dm)),
        ("splash elastance and mobility", splash(&se, &sm)),
        ("nanocomposite effective capacitance", nanocomposite(&nano)),
        ("layer potential identities", identities()),
        ("per-body moments annihilated", annihilation(&all)),
        ("single-layer jump relations", jumps()),
        ("interior field constant or rigid", interior(&all)),
        ("gmres agrees with dense LU", cross_solver(&all)),
    ];

    let mut passed = 0;
    for (k, (name, v)) in verdicts.iter().enumerate() {
        passed += v.pass as usize;
        println!("criterion {} {} {name}: {}", k + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!(
        "acceptance: {passed}/{} criteria passed in {:.0} s",
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if passed != verdicts.len() {
        std::process::exit(1);
    }
}

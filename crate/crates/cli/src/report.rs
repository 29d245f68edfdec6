//! Report and grid file formats.
//!
//! A report is a list of `key = value` lines followed by tab-delimited
//! tables opened by `[table <name>]` and closed by `[end]`. Lines starting
//! with `#` are comments and hold the run-dependent wall times. Floats are written in shortest round-trip form.

use std::fmt::Write;

use bie2d::problems::{BodyOutput, Field, FieldGrid, ProblemKind, SolveReport};
use bie2d::scenarios::{Outcome, Scenario, ScenarioConfig, Task};
use bie2d::{Discretization, Result};

const INTERIOR_PROBES: usize = 5;

pub struct Meta<'a> {
    pub version: &'a str,
    pub checksum: &'a str,
    pub stem: &'a str,
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn render(&self, name: &str, out: &mut String) {
        let _ = writeln!(out, "[table {name}]");
        let _ = writeln!(out, "body\t{}", self.columns.join("\t"));
        for (b, row) in self.rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
            let _ = writeln!(out, "{b}\t{}", cells.join("\t"));
        }
        out.push_str("[end]\n");
    }
}

/// Shortest round-trip form, in exponent notation outside [1e-4, 1e7).
fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e7).contains(&a) || !a.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key} = {value}");
}

fn solve_stats(out: &mut String, label: &str, r: &SolveReport) {
    kv(out, &format!("{label}.iterations"), r.stats.iterations);
    kv(out, &format!("{label}.residual"), num(r.stats.residual));
    let _ = writeln!(out, "# {label} wall time {:.3} s", r.stats.wall_time);
    match r.kind {
        ProblemKind::Elastance => kv(out, &format!("{label}.u_inf"), num(r.ambient_scalar())),
        ProblemKind::Mobility => {
            let u = r.ambient_vector();
            kv(out, &format!("{label}.u_inf"), format!("{} {}", num(u.x), num(u.y)));
        }
        _ => {}
    }
}

fn body_columns(kind: ProblemKind) -> &'static [&'static str] {
    match kind {
        ProblemKind::Elastance => &["phi", "spread"],
        ProblemKind::Capacitance => &["q", "log_strength"],
        ProblemKind::Mobility => &["vx", "vy", "omega", "deviation"],
        ProblemKind::Resistance => &["fx", "fy", "torque"],
    }
}

fn body_values(b: &BodyOutput) -> Vec<f64> {
    match *b {
        BodyOutput::Potential { phi, spread } => vec![phi, spread],
        BodyOutput::Charge { q } => vec![q, -q / std::f64::consts::TAU],
        BodyOutput::Motion { velocity, omega, deviation } => vec![velocity.x, velocity.y, omega, deviation],
        BodyOutput::Load { force, torque } => vec![force.x, force.y, torque],
    }
}

/// Annihilation and interior columns for the report whose density they
/// describe.
fn diagnostics(disc: &Discretization, r: &SolveReport) -> Result<Vec<Vec<f64>>> {
    let moments = r.annihilation(disc);
    let interior = match r.kind {
        ProblemKind::Elastance | ProblemKind::Mobility => Some(r.interior_deviation(disc, INTERIOR_PROBES)?),
        _ => None,
    };
    Ok(moments
        .iter()
        .enumerate()
        .map(|(b, m)| {
            let mut row = vec![*m];
            if let Some(i) = &interior {
                row.push(i[b]);
            }
            row
        })
        .collect())
}

fn diagnostic_columns(kind: ProblemKind) -> &'static [&'static str] {
    match kind {
        ProblemKind::Elastance | ProblemKind::Mobility => &["annihilation", "interior"],
        _ => &["annihilation"],
    }
}

fn single_table(disc: &Discretization, r: &SolveReport) -> Result<Table> {
    let mut t = Table::new(body_columns(r.kind));
    t.columns.extend_from_slice(diagnostic_columns(r.kind));
    for (b, d) in r.bodies.iter().zip(diagnostics(disc, r)?) {
        let mut row = body_values(b);
        row.extend(d);
        t.rows.push(row);
    }
    Ok(t)
}

/// Prescribed data, computed response, recovered data and diagnostics of a
/// round trip; `second` is the solve that recovers `prescribed`.
fn roundtrip_table(
    disc: &Discretization,
    prescribed: &[Vec<f64>],
    first: &SolveReport,
    second: &SolveReport,
    errors: &[f64],
) -> Result<Table> {
    let (given, recovered): (&[&str], &[&str]) = match second.kind {
        ProblemKind::Elastance => (&["phi"], &["phi_recovered", "spread"]),
        _ => (&["vx", "vy", "omega"], &["vx_recovered", "vy_recovered", "omega_recovered", "deviation"]),
    };
    let mut t = Table::new(given);
    t.columns.extend_from_slice(body_columns(first.kind));
    t.columns.extend_from_slice(recovered);
    t.columns.push("error");
    t.columns.extend_from_slice(diagnostic_columns(second.kind));
    for (b, d) in diagnostics(disc, second)?.into_iter().enumerate() {
        let mut row = prescribed[b].clone();
        row.extend(body_values(&first.bodies[b]));
        row.extend(body_values(&second.bodies[b]));
        row.push(errors[b]);
        row.extend(d);
        t.rows.push(row);
    }
    Ok(t)
}

fn prescribed(task: &Task) -> Vec<Vec<f64>> {
    match task {
        Task::RoundtripElastance { potentials } => potentials.iter().map(|p| vec![*p]).collect(),
        Task::RoundtripMobility { velocities, omegas } => {
            velocities.iter().zip(omegas).map(|(v, om)| vec![v[0], v[1], *om]).collect()
        }
        _ => Vec::new(),
    }
}

pub fn render(meta: &Meta, cfg: &ScenarioConfig, scenario: &Scenario, outcome: &Outcome) -> Result<String> {
    let disc = &scenario.disc;
    let mut out = String::new();
    out.push_str("# bie2d report\n");
    kv(&mut out, "version", meta.version);
    kv(&mut out, "schema", &cfg.schema);
    kv(&mut out, "scenario", scenario.kind.name());
    kv(&mut out, "source", meta.stem);
    kv(&mut out, "config_sha256", meta.checksum);
    if let Some(d) = cfg.gap {
        kv(&mut out, "gap", d);
    }
    if let Some(m) = cfg.rows {
        kv(&mut out, "rows", m);
    }
    if let Some(a) = cfg.aspect {
        kv(&mut out, "aspect", a);
    }
    kv(&mut out, "bodies", disc.body_count());
    kv(&mut out, "nodes", disc.len());
    kv(&mut out, "solver.method", format!("{:?}", cfg.solver.method).to_lowercase());
    kv(&mut out, "solver.tol", num(cfg.solver.tol));
    kv(&mut out, "threads", rayon::current_num_threads());

    let table = match outcome {
        Outcome::Single(r) => {
            kv(&mut out, "problem", r.kind.name());
            solve_stats(&mut out, r.kind.name(), r);
            single_table(disc, r)?
        }
        Outcome::Elastance(rt) => {
            kv(&mut out, "problem", "capacitance+elastance");
            solve_stats(&mut out, "capacitance", &rt.capacitance);
            solve_stats(&mut out, "elastance", &rt.elastance);
            roundtrip_table(disc, &prescribed(&scenario.task), &rt.capacitance, &rt.elastance, &rt.errors)?
        }
        Outcome::Mobility(rt) => {
            kv(&mut out, "problem", "resistance+mobility");
            solve_stats(&mut out, "resistance", &rt.resistance);
            solve_stats(&mut out, "mobility", &rt.mobility);
            roundtrip_table(disc, &prescribed(&scenario.task), &rt.resistance, &rt.mobility, &rt.errors)?
        }
        Outcome::Capacitance { value, report } => {
            kv(&mut out, "problem", "effective-capacitance");
            kv(&mut out, "effective_capacitance", num(*value));
            solve_stats(&mut out, report.kind.name(), report);
            single_table(disc, report)?
        }
    };
    table.render("bodies", &mut out);
    Ok(out)
}

/// Tab-delimited grid: x, y, masked flag, containing body (or -1) and the
/// field value or velocity components.
pub fn render_grid(grid: &FieldGrid) -> String {
    let mut out = String::new();
    match &grid.values {
        Field::Scalar(u) => {
            out.push_str("x\ty\tmasked\tbody\tu\n");
            for ((p, b), v) in grid.points.iter().zip(&grid.inside).zip(u) {
                let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", num(p.x), num(p.y), b.is_some() as u8, body_index(b), num(*v));
            }
        }
        Field::Vector(u) => {
            out.push_str("x\ty\tmasked\tbody\tux\tuy\n");
            for ((p, b), v) in grid.points.iter().zip(&grid.inside).zip(u) {
                let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", num(p.x), num(p.y), b.is_some() as u8, body_index(b), num(v.x), num(v.y));
            }
        }
    }
    out
}

fn body_index(b: &Option<usize>) -> i64 {
    b.map_or(-1, |i| i as i64)
}

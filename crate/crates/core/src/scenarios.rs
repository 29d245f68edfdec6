//! Built-in scenarios and the versioned TOML scenario configuration.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::geometry::{BodySpec, Curve, Discretization, Point, Scheme};
use crate::linsolve::SolverConfig;
use crate::problems::{
    plate_capacitance, roundtrip_elastance, roundtrip_mobility, solve_capacitance, solve_elastance, solve_mobility,
    solve_resistance, ElastanceRoundTrip, MobilityRoundTrip, Nanocomposite, SolveReport,
};
use crate::{Error, Result};

/// Schema identifier every configuration file must carry.
pub const SCHEMA: &str = "bie2d/1";

const SPLASH_DATA: &str = include_str!("../data/splash.toml");

/// Potentials of the left and right disc.
pub const TWO_DISC_POTENTIALS: [f64; 2] = [0.209, -0.123];
/// Velocities of the left and right disc.
pub const TWO_DISC_VELOCITIES: [[f64; 2]; 2] = [[2.09, -1.034], [1.00, 0.254]];
pub const TWO_DISC_OMEGAS: [f64; 2] = [0.12, 0.33];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    TwoDiscElastance,
    TwoDiscMobility,
    SplashElastance,
    SplashMobility,
    Nanocomposite,
    Custom,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::TwoDiscElastance,
        ScenarioKind::TwoDiscMobility,
        ScenarioKind::SplashElastance,
        ScenarioKind::SplashMobility,
        ScenarioKind::Nanocomposite,
        ScenarioKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::TwoDiscElastance => "two-disc-elastance",
            ScenarioKind::TwoDiscMobility => "two-disc-mobility",
            ScenarioKind::SplashElastance => "splash-elastance",
            ScenarioKind::SplashMobility => "splash-mobility",
            ScenarioKind::Nanocomposite => "nanocomposite",
            ScenarioKind::Custom => "custom",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioKind::TwoDiscElastance => {
                "two unit discs at gap d held at potentials (0.209, -0.123); capacitance solve, then elastance \
                 solve with the resulting charges, compared with the exact potential"
            }
            ScenarioKind::TwoDiscMobility => {
                "two unit discs at gap d in rigid motion; resistance solve, then mobility solve with the resulting \
                 forces and torques"
            }
            ScenarioKind::SplashElastance => {
                "five Fourier-star conductors at prescribed potentials; capacitance/elastance round trip"
            }
            ScenarioKind::SplashMobility => "five Fourier-star particles in rigid motion; resistance/mobility round trip",
            ScenarioKind::Nanocomposite => {
                "two rounded-bar plates with an m x 10 lattice of ellipses of aspect A; effective capacitance"
            }
            ScenarioKind::Custom => "bodies and problem data taken from the configuration file",
        }
    }

    /// Tabulated reference values, for display.
    pub fn reference(self) -> &'static str {
        match self {
            ScenarioKind::TwoDiscElastance => "q1 (log strength) = -0.239487 / -0.743917 / -2.348079 at d = 0.5 / 0.05 / 0.005",
            ScenarioKind::TwoDiscMobility => "F11 = 27.180434, F21 = -6.575686, T1 = -1.496082, T2 = 1.494675 at d = 0.5",
            ScenarioKind::SplashElastance => "boundary errors below 2.4e-5, about 30 iterations",
            ScenarioKind::SplashMobility => "boundary errors below 2.5e-5, about 71 iterations",
            ScenarioKind::Nanocomposite => "C = 2.2949 at m = 0; 2.3033 at m = 1, A = 1",
            ScenarioKind::Custom => "none",
        }
    }
}

/// What to solve on the scenario geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Elastance {
        charges: Vec<f64>,
        #[serde(default)]
        u_inf: f64,
    },
    Capacitance {
        potentials: Vec<f64>,
    },
    Mobility {
        forces: Vec<[f64; 2]>,
        torques: Vec<f64>,
        #[serde(default)]
        u_inf: [f64; 2],
    },
    Resistance {
        velocities: Vec<[f64; 2]>,
        omegas: Vec<f64>,
    },
    RoundtripElastance {
        potentials: Vec<f64>,
    },
    RoundtripMobility {
        velocities: Vec<[f64; 2]>,
        omegas: Vec<f64>,
    },
    /// Plates are the first two bodies; they carry charges ±1.
    EffectiveCapacitance,
}

impl Task {
    fn check_arity(&self, bodies: usize) -> Result<()> {
        let lengths: &[(&str, usize)] = match self {
            Task::Elastance { charges, .. } => &[("charges", charges.len())],
            Task::Capacitance { potentials } | Task::RoundtripElastance { potentials } => {
                &[("potentials", potentials.len())]
            }
            Task::Mobility { forces, torques, .. } => &[("forces", forces.len()), ("torques", torques.len())],
            Task::Resistance { velocities, omegas } | Task::RoundtripMobility { velocities, omegas } => {
                &[("velocities", velocities.len()), ("omegas", omegas.len())]
            }
            Task::EffectiveCapacitance => {
                if bodies < 2 {
                    return Err(Error::Invalid("effective capacitance needs two plates".into()));
                }
                &[]
            }
        };
        for (field, len) in lengths {
            if *len != bodies {
                return Err(Error::Invalid(format!("task has {len} {field} for {bodies} bodies")));
            }
        }
        Ok(())
    }
}

/// Optional discretization overrides; unset fields keep scenario defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationOverrides {
    /// Panels per body for panel schemes.
    pub panels: Option<usize>,
    /// Gauss–Legendre order per panel.
    pub order: Option<usize>,
    /// Points per body for periodic schemes.
    pub points: Option<usize>,
    pub plate_points: Option<usize>,
    pub ellipse_points: Option<usize>,
    /// Split panels longer than this multiple of their distance to other
    /// bodies; `0` disables the refinement.
    pub proximity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// [x0, y0, x1, y1]
    pub bbox: [f64; 4],
    pub nx: usize,
    pub ny: usize,
}

/// A scenario configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    pub scenario: ScenarioKind,
    /// Gap between the two discs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Lattice rows of the nanocomposite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    /// Ellipse aspect ratio of the nanocomposite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bodies: Vec<BodySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default)]
    pub discretization: DiscretizationOverrides,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

/// A ready-to-solve scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub disc: Discretization,
    pub task: Task,
}

/// Result of running a scenario.
#[derive(Debug, Clone)]
pub enum Outcome {
    Single(SolveReport),
    Elastance(ElastanceRoundTrip),
    Mobility(MobilityRoundTrip),
    Capacitance { value: f64, report: SolveReport },
}

impl Outcome {
    /// The report whose field is plotted: the elastance or mobility half of
    /// a round trip.
    pub fn primary(&self) -> &SolveReport {
        match self {
            Outcome::Single(r) | Outcome::Capacitance { report: r, .. } => r,
            Outcome::Elastance(rt) => &rt.elastance,
            Outcome::Mobility(rt) => &rt.mobility,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplashBody {
    center: [f64; 2],
    rotation: f64,
    coeffs: Vec<f64>,
    potential: f64,
    velocity: [f64; 2],
    omega: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplashData {
    body: Vec<SplashBody>,
}

fn splash_data() -> SplashData {
    toml::from_str(SPLASH_DATA).expect("embedded splash data parses")
}

/// The five splash curves.
pub fn splash_curves() -> Vec<Curve> {
    splash_data()
        .body
        .into_iter()
        .map(|b| Curve::FourierStar {
            center: b.center,
            rotation: b.rotation,
            coeffs: b.coeffs,
        })
        .collect()
}

pub fn splash_potentials() -> Vec<f64> {
    splash_data().body.iter().map(|b| b.potential).collect()
}

pub fn splash_motions() -> (Vec<[f64; 2]>, Vec<f64>) {
    let d = splash_data();
    (d.body.iter().map(|b| b.velocity).collect(), d.body.iter().map(|b| b.omega).collect())
}

/// Two unit discs centred at (∓(1 + d/2), 0); the left disc is body 0.
pub fn two_disc_bodies(gap: f64, scheme: Scheme) -> Result<Vec<BodySpec>> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::Invalid(format!("disc gap must be positive, got {gap}")));
    }
    Ok([-1.0, 1.0]
        .iter()
        .map(|s| BodySpec::new(Curve::disc(Point::new(s * (1.0 + 0.5 * gap), 0.0), 1.0), scheme))
        .collect())
}

const DEFAULT_GAP: f64 = 0.5;
const DISC_PANELS: usize = 16;
const SPLASH_PANELS: usize = 40;
const PANEL_ORDER: usize = 16;
const PROXIMITY: f64 = 1.0;
/// Residual target for the mobility and nanocomposite presets.
const TIGHT_TOL: f64 = 1e-8;

impl ScenarioConfig {
    /// Configuration of a built-in scenario with default parameters.
    pub fn preset(kind: ScenarioKind) -> Self {
        let mut solver = SolverConfig::default();
        if matches!(
            kind,
            ScenarioKind::TwoDiscMobility | ScenarioKind::SplashMobility | ScenarioKind::Nanocomposite
        ) {
            solver.tol = TIGHT_TOL;
        }
        ScenarioConfig {
            schema: SCHEMA.into(),
            scenario: kind,
            gap: None,
            rows: None,
            aspect: None,
            bodies: Vec::new(),
            task: None,
            discretization: DiscretizationOverrides::default(),
            solver,
            grid: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Invalid(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        self.solver.validate()?;
        let custom = self.scenario == ScenarioKind::Custom;
        if custom && (self.bodies.is_empty() || self.task.is_none()) {
            return Err(Error::Invalid("custom scenarios need `bodies` and `task`".into()));
        }
        if !custom && (!self.bodies.is_empty() || self.task.is_some()) {
            return Err(Error::Invalid(format!(
                "`bodies` and `task` are only allowed for custom scenarios, not {}",
                self.scenario.name()
            )));
        }
        if let Some(task) = &self.task {
            task.check_arity(self.bodies.len())?;
        }
        let two_disc = matches!(self.scenario, ScenarioKind::TwoDiscElastance | ScenarioKind::TwoDiscMobility);
        if self.gap.is_some() && !two_disc {
            return Err(Error::Invalid("`gap` only applies to two-disc scenarios".into()));
        }
        if (self.rows.is_some() || self.aspect.is_some()) && self.scenario != ScenarioKind::Nanocomposite {
            return Err(Error::Invalid("`rows` and `aspect` only apply to the nanocomposite".into()));
        }
        if let Some(p) = self.discretization.proximity {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::Invalid(format!("proximity factor must be non-negative, got {p}")));
            }
        }
        if let Some(g) = &self.grid {
            let [x0, y0, x1, y1] = g.bbox;
            if g.nx < 2 || g.ny < 2 || !(x1 > x0 && y1 > y0) {
                return Err(Error::Invalid("grid needs nx, ny >= 2 and x0 < x1, y0 < y1".into()));
            }
        }
        Ok(())
    }

    fn panel_scheme(&self, panels: usize) -> Scheme {
        Scheme::Panel {
            panels: self.discretization.panels.unwrap_or(panels),
            order: self.discretization.order.unwrap_or(PANEL_ORDER),
        }
    }

    fn discretize(&self, specs: &[BodySpec]) -> Result<Discretization> {
        match self.discretization.proximity.unwrap_or(PROXIMITY) {
            p if p > 0.0 => Discretization::with_proximity(specs, p),
            _ => Discretization::new(specs),
        }
    }

    /// Build the geometry and task.
    pub fn build(&self) -> Result<Scenario> {
        self.validate()?;
        let (disc, task) = match self.scenario {
            ScenarioKind::TwoDiscElastance | ScenarioKind::TwoDiscMobility => {
                let specs = two_disc_bodies(self.gap.unwrap_or(DEFAULT_GAP), self.panel_scheme(DISC_PANELS))?;
                let task = if self.scenario == ScenarioKind::TwoDiscElastance {
                    Task::RoundtripElastance {
                        potentials: TWO_DISC_POTENTIALS.to_vec(),
                    }
                } else {
                    Task::RoundtripMobility {
                        velocities: TWO_DISC_VELOCITIES.to_vec(),
                        omegas: TWO_DISC_OMEGAS.to_vec(),
                    }
                };
                (self.discretize(&specs)?, task)
            }
            ScenarioKind::SplashElastance | ScenarioKind::SplashMobility => {
                let scheme = match self.discretization.points {
                    Some(points) => Scheme::Periodic { points },
                    None => self.panel_scheme(SPLASH_PANELS),
                };
                let specs: Vec<BodySpec> = splash_curves().into_iter().map(|c| BodySpec::new(c, scheme)).collect();
                let task = if self.scenario == ScenarioKind::SplashElastance {
                    Task::RoundtripElastance {
                        potentials: splash_potentials(),
                    }
                } else {
                    let (velocities, omegas) = splash_motions();
                    Task::RoundtripMobility { velocities, omegas }
                };
                (self.discretize(&specs)?, task)
            }
            ScenarioKind::Nanocomposite => {
                let mut setup = Nanocomposite::new(self.rows.unwrap_or(0), self.aspect.unwrap_or(1.0));
                if let Some(n) = self.discretization.plate_points {
                    setup.plate_points = n;
                }
                if let Some(n) = self.discretization.ellipse_points {
                    setup.ellipse_points = n;
                }
                (Discretization::new(&setup.bodies()?)?, Task::EffectiveCapacitance)
            }
            ScenarioKind::Custom => {
                let task = self.task.clone().ok_or_else(|| Error::Invalid("missing task".into()))?;
                (self.discretize(&self.bodies)?, task)
            }
        };
        Ok(Scenario {
            kind: self.scenario,
            disc,
            task,
        })
    }
}

fn vectors(v: &[[f64; 2]]) -> Vec<Vector2<f64>> {
    v.iter().map(|a| Vector2::new(a[0], a[1])).collect()
}

impl Scenario {
    pub fn run(&self, config: &SolverConfig) -> Result<Outcome> {
        let disc = &self.disc;
        Ok(match &self.task {
            Task::Elastance { charges, u_inf } => Outcome::Single(solve_elastance(disc, charges, *u_inf, config)?),
            Task::Capacitance { potentials } => Outcome::Single(solve_capacitance(disc, potentials, config)?),
            Task::Mobility { forces, torques, u_inf } => Outcome::Single(solve_mobility(
                disc,
                &vectors(forces),
                torques,
                Vector2::new(u_inf[0], u_inf[1]),
                config,
            )?),
            Task::Resistance { velocities, omegas } => {
                Outcome::Single(solve_resistance(disc, &vectors(velocities), omegas, config)?)
            }
            Task::RoundtripElastance { potentials } => Outcome::Elastance(roundtrip_elastance(disc, potentials, config)?),
            Task::RoundtripMobility { velocities, omegas } => {
                Outcome::Mobility(roundtrip_mobility(disc, &vectors(velocities), omegas, config)?)
            }
            Task::EffectiveCapacitance => {
                let (value, report) = plate_capacitance(disc, config)?;
                Outcome::Capacitance { value, report }
            }
        })
    }
}

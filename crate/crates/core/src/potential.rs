//! Periodic pair potentials and the sampled checks of their structural assumptions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::wrap_value;

pub trait Potential: Send + Sync {
    fn psi(&self, r: f64) -> f64;
    /// First derivative; the left derivative at nonsmooth points.
    fn dpsi(&self, r: f64) -> f64;
    fn d2psi(&self, r: f64) -> f64;
    fn d4psi(&self, _r: f64) -> Option<f64> {
        None
    }
    /// `psi(a) - psi(b)`, overridable for better cancellation.
    fn psi_diff(&self, a: f64, b: f64) -> f64 {
        self.psi(a) - self.psi(b)
    }
    fn mu(&self) -> f64 {
        self.d2psi(0.0)
    }
    fn name(&self) -> String;
}

/// Built-in potentials, selectable from configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `(lambda / 2) dist(r, Z)^2`.
    Lin { lambda: f64 },
    /// `(1 - cos 2 pi r) / (4 pi^2)`.
    Cos,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Lin { lambda: 1.0 }
    }
}

pub fn psi_lin(lambda: f64) -> Result<PotentialSpec> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("psi_lin needs lambda > 0, got {lambda}")));
    }
    Ok(PotentialSpec::Lin { lambda })
}

pub fn psi_cos() -> PotentialSpec {
    PotentialSpec::Cos
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialSpec::Lin { lambda } => psi_lin(lambda).map(|_| ()),
            PotentialSpec::Cos => Ok(()),
        }
    }

    /// Whether `psi''` is constant away from the nonsmooth set.
    pub fn has_constant_curvature(&self) -> bool {
        matches!(self, PotentialSpec::Lin { .. })
    }
}

impl Potential for PotentialSpec {
    fn psi(&self, r: f64) -> f64 {
        match *self {
            PotentialSpec::Lin { lambda } => {
                let d = wrap_value(r);
                0.5 * lambda * d * d
            }
            PotentialSpec::Cos => (1.0 - (2.0 * PI * r).cos()) / (4.0 * PI * PI),
        }
    }

    fn dpsi(&self, r: f64) -> f64 {
        match *self {
            PotentialSpec::Lin { lambda } => lambda * wrap_value(r),
            PotentialSpec::Cos => (2.0 * PI * r).sin() / (2.0 * PI),
        }
    }

    fn d2psi(&self, r: f64) -> f64 {
        match *self {
            PotentialSpec::Lin { lambda } => lambda,
            PotentialSpec::Cos => (2.0 * PI * r).cos(),
        }
    }

    fn d4psi(&self, r: f64) -> Option<f64> {
        match *self {
            PotentialSpec::Lin { .. } => Some(0.0),
            PotentialSpec::Cos => Some(-4.0 * PI * PI * (2.0 * PI * r).cos()),
        }
    }

    fn psi_diff(&self, a: f64, b: f64) -> f64 {
        match *self {
            PotentialSpec::Lin { lambda } => {
                let (x, y) = (wrap_value(a), wrap_value(b));
                0.5 * lambda * (x - y) * (x + y)
            }
            PotentialSpec::Cos => {
                (PI * (a + b)).sin() * (PI * (a - b)).sin() / (2.0 * PI * PI)
            }
        }
    }

    fn name(&self) -> String {
        match *self {
            PotentialSpec::Lin { lambda } => format!("psi_lin(lambda={lambda})"),
            PotentialSpec::Cos => "psi_cos".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    /// Sample point of the largest violation (or of the tightest margin when passing).
    pub worst_point: f64,
    /// Violation measure at `worst_point`; nonpositive when passing.
    pub worst_value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub potential: String,
    pub grid_n: usize,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const ASSUMPTION_TOL: f64 = 1e-12;

struct Worst {
    point: f64,
    value: f64,
}

impl Worst {
    fn new() -> Self {
        Worst { point: f64::NAN, value: f64::NEG_INFINITY }
    }
    fn see(&mut self, point: f64, value: f64) {
        if value > self.value {
            self.point = point;
            self.value = value;
        }
    }
    fn check(self, name: &str, tol: f64) -> AssumptionCheck {
        AssumptionCheck { name: name.into(), passed: self.value <= tol, worst_point: self.point, worst_value: self.value }
    }
}

/// Samples the five structural assumptions on a uniform grid with `grid_n` points per unit.
pub fn check_assumptions(p: &dyn Potential, grid_n: usize) -> Result<AssumptionReport> {
    if grid_n < 100 {
        return Err(Error::InvalidParameter(format!("grid_n must be at least 100, got {grid_n}")));
    }
    let h = 1.0 / grid_n as f64;
    let scale = 1.0 + p.psi(0.5).abs();
    let tol = ASSUMPTION_TOL * scale;
    let grid = |a: f64, b: f64| {
        let k = ((b - a) / h).round() as usize;
        (0..=k).map(move |j| a + j as f64 * h)
    };

    let mut periodic = Worst::new();
    for r in grid(-1.0, 1.0) {
        periodic.see(r, (p.psi(r + 1.0) - p.psi(r)).abs());
    }

    let mut even = Worst::new();
    for r in grid(0.0, 1.0) {
        even.see(r, (p.psi(r) - p.psi(-r)).abs());
        even.see(0.5 + r, (p.psi(0.5 + r) - p.psi(0.5 - r)).abs());
    }

    // Integers must be zeros; every other grid point must be strictly positive.
    let mut at_integers = Worst::new();
    for k in -2..=2 {
        at_integers.see(k as f64, p.psi(k as f64).abs());
    }
    let mut off_integers = Worst::new();
    for j in 1..grid_n {
        let r = j as f64 * h;
        off_integers.see(r, -p.psi(r));
    }
    let zeros = if at_integers.value > tol {
        at_integers.check("psi3", tol)
    } else {
        AssumptionCheck {
            name: "psi3".into(),
            passed: off_integers.value < 0.0,
            worst_point: off_integers.point,
            worst_value: off_integers.value,
        }
    };

    let mu = p.mu();
    let mut curvature = Worst::new();
    curvature.see(0.0, -mu);
    let curvature = AssumptionCheck { passed: mu > 0.0, ..curvature.check("psi4", 0.0) };

    let mut quad = Worst::new();
    for x in grid(-0.5, 0.5) {
        quad.see(x, 0.5 * mu * x * x - p.psi(x));
    }

    Ok(AssumptionReport {
        potential: p.name(),
        grid_n,
        checks: vec![
            periodic.check("psi1", tol),
            even.check("psi2", tol),
            zeros,
            curvature,
            quad.check("psi5", tol),
        ],
    })
}

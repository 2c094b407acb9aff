//! Bolza optimal control problems on the computational domain `tau in [-1, 1]`.
//!
//! A problem supplies pure evaluators for the Mayer and Lagrange cost terms,
//! the dynamics `dy/dt = a(y, u, t)`, event constraints `b <= 0` and path
//! constraints `c <= 0`, plus box bounds. Fixed endpoint values are expressed
//! as degenerate endpoint bounds (`lower == upper`).

mod double_integrator;
mod robot_arm;

pub use double_integrator::{MinEnergyDoubleIntegrator, MinTimeDoubleIntegrator};
pub use robot_arm::{inertia_phi, inertia_theta, RobotArm, ARM_LENGTH};

use crate::error::{Error, Result};

/// Problem dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n_y: usize,
    pub n_u: usize,
    pub n_b: usize,
    pub n_c: usize,
}

/// Closed interval `[lower, upper]`; infinite ends are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lower: f64,
    pub upper: f64,
}

impl Range {
    pub const FREE: Range = Range {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn fixed(value: f64) -> Self {
        Self {
            lower: value,
            upper: value,
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn intersect(&self, other: &Range) -> Range {
        Range {
            lower: self.lower.max(other.lower),
            upper: self.upper.min(other.upper),
        }
    }

    /// Midpoint of a finite range; the finite end of a half-bounded range;
    /// zero for a free range.
    pub fn guess(&self) -> f64 {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => 0.5 * (self.lower + self.upper),
            (true, false) => self.lower,
            (false, true) => self.upper,
            (false, false) => 0.0,
        }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lower).min(self.upper)
    }

    /// Distance from `x` to the range (zero inside).
    pub fn violation(&self, x: f64) -> f64 {
        (self.lower - x).max(x - self.upper).max(0.0)
    }
}

/// Box bounds on every variable class.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub state: Vec<Range>,
    pub control: Vec<Range>,
    pub initial_state: Vec<Range>,
    pub final_state: Vec<Range>,
    pub t0: Range,
    pub tf: Range,
}

impl Bounds {
    /// Per-component distance of the endpoint values from their bounds,
    /// initial states first, then final states, then `t0`, `tf`.
    pub fn endpoint_residual(&self, y0: &[f64], t0: f64, yf: &[f64], tf: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .initial_state
            .iter()
            .zip(y0)
            .map(|(r, &v)| r.violation(v))
            .collect();
        out.extend(self.final_state.iter().zip(yf).map(|(r, &v)| r.violation(v)));
        out.push(self.t0.violation(t0));
        out.push(self.tf.violation(tf));
        out
    }
}

/// A Bolza optimal control problem. Evaluators must be pure.
pub trait OcpProblem: Send + Sync {
    fn name(&self) -> &str;

    fn dims(&self) -> Dims;

    fn bounds(&self) -> &Bounds;

    /// Endpoint cost.
    fn mayer(&self, _y0: &[f64], _t0: f64, _yf: &[f64], _tf: f64) -> f64 {
        0.0
    }

    /// Running cost integrand in physical time.
    fn lagrange(&self, _y: &[f64], _u: &[f64], _t: f64) -> f64 {
        0.0
    }

    /// `false` lets the transcription skip the quadrature entirely.
    fn has_lagrange(&self) -> bool {
        false
    }

    /// Writes `dy/dt` into `out` (length `n_y`).
    fn dynamics(&self, y: &[f64], u: &[f64], t: f64, out: &mut [f64]);

    /// Event constraints, feasible when `<= 0` (length `n_b`).
    fn boundary(&self, _y0: &[f64], _t0: f64, _yf: &[f64], _tf: f64, _out: &mut [f64]) {}

    /// Path constraints, feasible when `<= 0` (length `n_c`).
    fn path(&self, _y: &[f64], _u: &[f64], _t: f64, _out: &mut [f64]) {}
}

/// Checks that bound vectors agree with the declared dimensions.
pub fn validate(problem: &dyn OcpProblem) -> Result<()> {
    let d = problem.dims();
    let b = problem.bounds();
    let check = |what: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{}: {what} bounds have length {got}, expected {want}",
                problem.name()
            )))
        }
    };
    check("state", b.state.len(), d.n_y)?;
    check("initial state", b.initial_state.len(), d.n_y)?;
    check("final state", b.final_state.len(), d.n_y)?;
    check("control", b.control.len(), d.n_u)?;
    if d.n_y == 0 {
        return Err(Error::DimensionMismatch("problem has no states".into()));
    }
    if b.t0.lower > b.t0.upper || b.tf.lower > b.tf.upper {
        return Err(Error::InvalidConfig("empty time bounds".into()));
    }
    Ok(())
}

/// Names accepted by [`by_name`].
pub const PROBLEM_NAMES: [&str; 3] = ["robot-arm", "min-time-di", "min-energy-di"];

/// Problem registry used by the command line.
pub fn by_name(name: &str) -> Result<Box<dyn OcpProblem>> {
    match name {
        "robot-arm" => Ok(Box::new(make_robot_arm())),
        "min-time-di" => Ok(Box::new(make_min_time_double_integrator(1.0)?)),
        "min-energy-di" => Ok(Box::new(make_min_energy_double_integrator())),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// Minimum-time reorientation of a robotic arm.
pub fn make_robot_arm() -> RobotArm {
    RobotArm::new()
}

/// Rest-to-rest minimum-time double integrator covering distance `d`.
pub fn make_min_time_double_integrator(d: f64) -> Result<MinTimeDoubleIntegrator> {
    MinTimeDoubleIntegrator::new(d)
}

/// Fixed-time minimum-energy double integrator on `t in [0, 1]`.
pub fn make_min_energy_double_integrator() -> MinEnergyDoubleIntegrator {
    MinEnergyDoubleIntegrator::new()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves_every_name() {
        for name in PROBLEM_NAMES {
            let p = by_name(name).unwrap();
            assert_eq!(p.name(), name);
            validate(p.as_ref()).unwrap();
        }
        assert!(matches!(by_name("shuttle"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn range_helpers() {
        assert_eq!(Range::new(-1.0, 1.0).guess(), 0.0);
        assert_eq!(Range::new(2.0, f64::INFINITY).guess(), 2.0);
        assert_eq!(Range::FREE.guess(), 0.0);
        assert!(Range::fixed(3.0).is_fixed());
        assert_eq!(Range::new(0.0, 1.0).violation(1.5), 0.5);
        assert_eq!(Range::new(0.0, 1.0).violation(0.5), 0.0);
    }
}

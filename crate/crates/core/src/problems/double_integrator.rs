use super::{Bounds, Dims, OcpProblem, Range};
use crate::error::{Error, Result};

/// Rest-to-rest double integrator `y1' = y2, y2' = u`, `|u| <= 1`, moving a
/// distance `d` in minimum time.
///
/// The optimum is bang-bang: `u = +1` up to `t = sqrt(d)`, `u = -1` after,
/// with `tf = 2 sqrt(d)`. The switch always sits at `tau = 0`.
#[derive(Debug, Clone)]
pub struct MinTimeDoubleIntegrator {
    distance: f64,
    bounds: Bounds,
}

impl MinTimeDoubleIntegrator {
    pub fn new(distance: f64) -> Result<Self> {
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "distance must be positive, got {distance}"
            )));
        }
        let span = 10.0 * distance.max(1.0);
        Ok(Self {
            distance,
            bounds: Bounds {
                state: vec![Range::new(-span, span), Range::new(-span, span)],
                control: vec![Range::new(-1.0, 1.0)],
                initial_state: vec![Range::fixed(0.0), Range::fixed(0.0)],
                final_state: vec![Range::fixed(distance), Range::fixed(0.0)],
                t0: Range::fixed(0.0),
                tf: Range::new(0.1, 10.0 * (2.0 * distance.sqrt()).max(1.0)),
            },
        })
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn optimal_final_time(&self) -> f64 {
        2.0 * self.distance.sqrt()
    }

    pub fn switch_time(&self) -> f64 {
        self.distance.sqrt()
    }

    pub fn optimal_control(&self, t: f64) -> f64 {
        if t < self.switch_time() {
            1.0
        } else {
            -1.0
        }
    }
}

impl OcpProblem for MinTimeDoubleIntegrator {
    fn name(&self) -> &str {
        "min-time-di"
    }

    fn dims(&self) -> Dims {
        Dims {
            n_y: 2,
            n_u: 1,
            n_b: 0,
            n_c: 0,
        }
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn mayer(&self, _y0: &[f64], _t0: f64, _yf: &[f64], tf: f64) -> f64 {
        tf
    }

    fn dynamics(&self, y: &[f64], u: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = y[1];
        out[1] = u[0];
    }
}

/// Fixed-time double integrator on `[0, 1]` minimising `int u^2 / 2` from
/// `(0, 0)` to `(1, 0)`.
///
/// The optimal control is `u = 6 - 12 t` with cost 6; the state is cubic, so
/// the solution is smooth everywhere.
#[derive(Debug, Clone)]
pub struct MinEnergyDoubleIntegrator {
    bounds: Bounds,
}

impl MinEnergyDoubleIntegrator {
    pub const OPTIMAL_COST: f64 = 6.0;

    pub fn new() -> Self {
        Self {
            bounds: Bounds {
                state: vec![Range::new(-10.0, 10.0), Range::new(-10.0, 10.0)],
                control: vec![Range::FREE],
                initial_state: vec![Range::fixed(0.0), Range::fixed(0.0)],
                final_state: vec![Range::fixed(1.0), Range::fixed(0.0)],
                t0: Range::fixed(0.0),
                tf: Range::fixed(1.0),
            },
        }
    }

    pub fn optimal_control(t: f64) -> f64 {
        6.0 - 12.0 * t
    }

    pub fn optimal_state(t: f64) -> [f64; 2] {
        [3.0 * t * t - 2.0 * t * t * t, 6.0 * t - 6.0 * t * t]
    }
}

impl Default for MinEnergyDoubleIntegrator {
    fn default() -> Self {
        Self::new()
    }
}

impl OcpProblem for MinEnergyDoubleIntegrator {
    fn name(&self) -> &str {
        "min-energy-di"
    }

    fn dims(&self) -> Dims {
        Dims {
            n_y: 2,
            n_u: 1,
            n_b: 0,
            n_c: 0,
        }
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn lagrange(&self, _y: &[f64], u: &[f64], _t: f64) -> f64 {
        0.5 * u[0] * u[0]
    }

    fn has_lagrange(&self) -> bool {
        true
    }

    fn dynamics(&self, y: &[f64], u: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = y[1];
        out[1] = u[0];
    }
}

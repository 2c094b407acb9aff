use std::f64::consts::PI;

use super::{Bounds, Dims, OcpProblem, Range};

/// Arm length.
pub const ARM_LENGTH: f64 = 5.0;

/// Minimum-time reorientation of a robotic arm.
///
/// States are `(rho, rho', theta, theta', phi, phi')`, controls are the three
/// normalised torques in `[-1, 1]`, and the cost is the final time. The arm
/// starts and ends at rest with `rho = 9/2`, `phi = pi/4`, and swings `theta`
/// from `0` to `2 pi / 3`.
#[derive(Debug, Clone)]
pub struct RobotArm {
    bounds: Bounds,
}

impl RobotArm {
    pub fn new() -> Self {
        let rho0 = 4.5;
        let phi0 = PI / 4.0;
        let state = vec![
            Range::new(0.0, ARM_LENGTH),
            Range::new(-10.0, 10.0),
            Range::new(-PI, PI),
            Range::new(-10.0, 10.0),
            Range::new(0.05, PI - 0.05),
            Range::new(-10.0, 10.0),
        ];
        let initial_state = vec![
            Range::fixed(rho0),
            Range::fixed(0.0),
            Range::fixed(0.0),
            Range::fixed(0.0),
            Range::fixed(phi0),
            Range::fixed(0.0),
        ];
        let final_state = vec![
            Range::fixed(rho0),
            Range::fixed(0.0),
            Range::fixed(2.0 * PI / 3.0),
            Range::fixed(0.0),
            Range::fixed(phi0),
            Range::fixed(0.0),
        ];
        Self {
            bounds: Bounds {
                state,
                control: vec![Range::new(-1.0, 1.0); 3],
                initial_state,
                final_state,
                t0: Range::fixed(0.0),
                tf: Range::new(0.1, 20.0),
            },
        }
    }
}

impl Default for RobotArm {
    fn default() -> Self {
        Self::new()
    }
}

/// Moment of inertia about the `phi` axis for radial position `rho`.
pub fn inertia_phi(rho: f64) -> f64 {
    ((ARM_LENGTH - rho).powi(3) + rho.powi(3)) / 3.0
}

/// Moment of inertia about the `theta` axis.
pub fn inertia_theta(rho: f64, phi: f64) -> f64 {
    inertia_phi(rho) * phi.sin().powi(2)
}

impl OcpProblem for RobotArm {
    fn name(&self) -> &str {
        "robot-arm"
    }

    fn dims(&self) -> Dims {
        Dims {
            n_y: 6,
            n_u: 3,
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
        let i_phi = inertia_phi(y[0]);
        let i_theta = i_phi * y[4].sin().powi(2);
        out[0] = y[1];
        out[1] = u[0] / ARM_LENGTH;
        out[2] = y[3];
        out[3] = u[1] / i_theta;
        out[4] = y[5];
        out[5] = u[2] / i_phi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_rest_with_zero_torque() {
        let arm = RobotArm::new();
        let y = [4.5, 0.0, 0.0, 0.0, PI / 4.0, 0.0];
        let mut out = [1.0; 6];
        arm.dynamics(&y, &[0.0; 3], 3.0, &mut out);
        assert_eq!(out, [0.0; 6]);
    }

    #[test]
    fn inertia_at_start() {
        assert!((inertia_phi(4.5) - (0.125 + 91.125) / 3.0).abs() < 1e-12);
        let want = (0.125 + 91.125) / 3.0 * 0.5;
        assert!((inertia_theta(4.5, PI / 4.0) - want).abs() < 1e-12);
    }

    #[test]
    fn inertia_derivative_matches_hand_partial() {
        // d I_phi / d rho = -(L - rho)^2 + rho^2
        for rho in [0.5, 2.0, 3.7, 4.5] {
            let h = 1e-6;
            let fd = (inertia_phi(rho + h) - inertia_phi(rho - h)) / (2.0 * h);
            let exact = -(ARM_LENGTH - rho).powi(2) + rho.powi(2);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "rho={rho}");
        }
    }

    #[test]
    fn endpoint_residual_zero_at_targets() {
        let arm = RobotArm::new();
        let y0 = [4.5, 0.0, 0.0, 0.0, PI / 4.0, 0.0];
        let yf = [4.5, 0.0, 2.0 * PI / 3.0, 0.0, PI / 4.0, 0.0];
        let r = arm.bounds().endpoint_residual(&y0, 0.0, &yf, 9.0);
        assert!(r.iter().all(|&v| v == 0.0));
        let r = arm.bounds().endpoint_residual(&y0, 0.0, &y0, 9.0);
        assert!(r.iter().any(|&v| v > 0.0));
    }
}

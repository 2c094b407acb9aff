//! Relative state-error estimates on each mesh interval.
//!
//! Each interval gets an enriched grid of `M_k = P_k + 1` LGR points plus the
//! right endpoint. The collocated state is interpolated there and compared
//! with a state re-integrated from the dynamics through the enriched
//! integration matrix.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use serde::Serialize;

use crate::basis::{integ_matrix, lgr_rule, IntegMatrix, Interpolant, IntervalGrid, LgrRule};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problems::OcpProblem;
use crate::transcription::CollocationSolution;

/// Errors on one interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalError {
    /// Enriched LGR points followed by the right endpoint.
    pub points: Vec<f64>,
    /// `absolute[l][i]`: error of state component `i` at `points[l]`.
    pub absolute: Vec<Vec<f64>>,
    pub relative: Vec<Vec<f64>>,
    pub e_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub intervals: Vec<IntervalError>,
    /// Per-component normalization `1 + max |Y_i|` over all support points.
    pub denominators: Vec<f64>,
}

impl ErrorReport {
    pub fn e_max(&self) -> Vec<f64> {
        self.intervals.iter().map(|iv| iv.e_max).collect()
    }

    /// Largest interval error on the mesh.
    pub fn max(&self) -> f64 {
        self.intervals.iter().fold(0.0, |m, iv| m.max(iv.e_max))
    }
}

/// Per-component `1 + max |Y_i|` over every support point of the mesh.
pub fn denominators(solution: &CollocationSolution) -> Vec<f64> {
    let n_y = solution.n_y();
    let mut out = vec![0.0f64; n_y];
    for iv in &solution.intervals {
        for row in &iv.states {
            for (d, v) in out.iter_mut().zip(row) {
                *d = d.max(v.abs());
            }
        }
    }
    out.iter().map(|m| 1.0 + m).collect()
}

pub fn estimate_errors(
    problem: &dyn OcpProblem,
    mesh: &Mesh,
    solution: &CollocationSolution,
) -> Result<ErrorReport> {
    if solution.intervals.len() != mesh.num_intervals() {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} intervals, mesh has {}",
            solution.intervals.len(),
            mesh.num_intervals()
        )));
    }
    let denom = denominators(solution);
    let mut rules: HashMap<usize, LgrRule> = HashMap::new();
    let mut intervals = Vec::with_capacity(mesh.num_intervals());
    for (k, iv) in solution.intervals.iter().enumerate() {
        if iv.degree() != mesh.degrees()[k] {
            return Err(Error::DimensionMismatch(format!(
                "interval {k} carries degree {}, mesh says {}",
                iv.degree(),
                mesh.degrees()[k]
            )));
        }
        let m = iv.degree() + 1;
        if let Entry::Vacant(slot) = rules.entry(m) {
            slot.insert(lgr_rule(m)?);
        }
        let rule = &rules[&m];
        let (left, right) = mesh.interval(k);
        let grid = IntervalGrid::new(rule, left, right)?;
        let integ = integ_matrix(rule, &grid)?;
        intervals.push(interval_error(problem, solution, k, &grid, &integ, &denom)?);
    }
    Ok(ErrorReport {
        intervals,
        denominators: denom,
    })
}

fn interval_error(
    problem: &dyn OcpProblem,
    solution: &CollocationSolution,
    k: usize,
    grid: &IntervalGrid,
    integ: &IntegMatrix,
    denom: &[f64],
) -> Result<IntervalError> {
    let iv = &solution.intervals[k];
    let n_y = solution.n_y();
    let n_u = solution.n_u();
    let points = grid.support();
    let m = grid.degree();

    let y_interp = Interpolant::new(&iv.tau)?;
    let u_interp = Interpolant::new(iv.colloc_pts())?;
    let interp_rows = |interp: &Interpolant, data: &[Vec<f64>], width: usize, tau: f64| -> Vec<f64> {
        let basis = interp.basis_row(tau);
        (0..width)
            .map(|c| basis.iter().zip(data).map(|(b, row)| b * row[c]).sum())
            .collect()
    };
    let y: Vec<Vec<f64>> = points
        .iter()
        .map(|&tau| interp_rows(&y_interp, &iv.states, n_y, tau))
        .collect();

    let half_span = 0.5 * (solution.tf - solution.t0);
    let mut rates = vec![vec![0.0; n_y]; m];
    for (l, rate) in rates.iter_mut().enumerate() {
        let tau = points[l];
        let u = interp_rows(&u_interp, &iv.controls, n_u, tau);
        problem.dynamics(&y[l], &u, solution.time_at(tau), rate);
        if rate.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "dynamics at tau = {tau} (interval {k})"
            )));
        }
    }

    let mut absolute = vec![vec![0.0; n_y]; m + 1];
    for j in 0..m {
        for i in 0..n_y {
            let integral: f64 = (0..m).map(|l| integ[(j, l)] * rates[l][i]).sum();
            let y_hat = y[0][i] + half_span * integral;
            absolute[j + 1][i] = (y_hat - y[j + 1][i]).abs();
        }
    }
    let relative: Vec<Vec<f64>> = absolute
        .iter()
        .map(|row| row.iter().zip(denom).map(|(e, d)| e / d).collect())
        .collect();
    let e_max = relative.iter().flatten().fold(0.0, |a: f64, &b| a.max(b));
    Ok(IntervalError {
        points,
        absolute,
        relative,
        e_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::problems::{Bounds, Dims, Range};
    use crate::transcription::IntervalSolution;

    struct Rate {
        bounds: Bounds,
        c: f64,
        growth: bool,
    }

    impl Rate {
        fn new(c: f64, growth: bool) -> Self {
            let free = vec![Range::FREE];
            Self {
                bounds: Bounds {
                    t0: Range::fixed(0.0),
                    tf: Range::fixed(2.0),
                    initial_state: free.clone(),
                    final_state: free.clone(),
                    state: free.clone(),
                    control: free,
                },
                c,
                growth,
            }
        }
    }

    impl OcpProblem for Rate {
        fn name(&self) -> &str {
            "rate"
        }
        fn dims(&self) -> Dims {
            Dims {
                n_y: 1,
                n_u: 1,
                n_c: 0,
                n_b: 0,
            }
        }
        fn bounds(&self) -> &Bounds {
            &self.bounds
        }
        fn dynamics(&self, y: &[f64], _u: &[f64], _t: f64, out: &mut [f64]) {
            out[0] = if self.growth { y[0] } else { self.c };
        }
    }

    fn sample(mesh: &Mesh, t0: f64, tf: f64, f: impl Fn(f64) -> f64) -> CollocationSolution {
        let intervals = mesh
            .grids()
            .unwrap()
            .into_iter()
            .map(|g| {
                let tau = g.support();
                let t = |x: f64| 0.5 * (tf - t0) * x + 0.5 * (tf + t0);
                IntervalSolution {
                    left: g.left(),
                    right: g.right(),
                    states: tau.iter().map(|&x| vec![f(t(x))]).collect(),
                    controls: g.colloc_pts().iter().map(|_| vec![0.0]).collect(),
                    tau,
                }
            })
            .collect();
        CollocationSolution {
            intervals,
            t0,
            tf,
            cost: 0.0,
        }
    }

    #[test]
    fn affine_solution_has_zero_error() {
        let p = Rate::new(3.0, false);
        let mesh = Mesh::uniform(5, 4).unwrap();
        let sol = sample(&mesh, 0.0, 2.0, |t| 1.0 + 3.0 * t);
        let rep = estimate_errors(&p, &mesh, &sol).unwrap();
        assert_eq!(rep.intervals.len(), 5);
        for iv in &rep.intervals {
            assert!(iv.e_max < 1e-12, "{}", iv.e_max);
            assert_eq!(iv.points.len(), 6);
            assert_eq!(iv.absolute.len(), 6);
        }
    }

    #[test]
    fn denominator_uses_global_max() {
        let mesh = Mesh::uniform(3, 3).unwrap();
        let mut sol = sample(&mesh, 0.0, 2.0, |_| 0.0);
        sol.intervals[1].states[2][0] = -4.0;
        assert_eq!(denominators(&sol), vec![5.0]);
    }

    #[test]
    fn growth_error_matches_direct_reintegration() {
        // Independent route: integrate the degree-4 control-free rate
        // e^t reconstructed on the 5 enriched points by a fine composite
        // Simpson rule instead of the integration matrix.
        let p = Rate::new(0.0, true);
        let mesh = Mesh::uniform(1, 4).unwrap();
        let sol = sample(&mesh, 0.0, 2.0, f64::exp);
        let rep = estimate_errors(&p, &mesh, &sol).unwrap();

        let rule = lgr_rule(5).unwrap();
        let grid = IntervalGrid::new(&rule, -1.0, 1.0).unwrap();
        let pts = grid.support();
        let iv = &sol.intervals[0];
        let y_at = |x: f64| Interpolant::new(&iv.tau).unwrap().eval(&iv.states.iter().map(|r| r[0]).collect::<Vec<_>>(), x);
        let rate_vals: Vec<f64> = pts[..5].iter().map(|&x| y_at(x)).collect();
        let rate_poly = Interpolant::new(&pts[..5]).unwrap();
        let simpson = |a: f64, b: f64| {
            let n = 2000;
            let h = (b - a) / n as f64;
            let mut s = rate_poly.eval(&rate_vals, a) + rate_poly.eval(&rate_vals, b);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * rate_poly.eval(&rate_vals, a + i as f64 * h);
            }
            s * h / 3.0
        };
        let denom = 1.0 + 2f64.exp();
        let mut expect: f64 = 0.0;
        for &x in &pts[1..] {
            let y_hat = y_at(pts[0]) + simpson(pts[0], x);
            expect = expect.max((y_hat - y_at(x)).abs() / denom);
        }
        assert!(expect > 0.0);
        let got = rep.intervals[0].e_max;
        assert!((got - expect).abs() <= 0.1 * expect, "{got} vs {expect}");
    }

    #[test]
    fn rejects_mismatched_solution() {
        let p = Rate::new(1.0, false);
        let mesh = Mesh::uniform(2, 4).unwrap();
        let sol = sample(&Mesh::uniform(3, 4).unwrap(), 0.0, 2.0, |t| t);
        assert!(estimate_errors(&p, &mesh, &sol).is_err());
    }
}

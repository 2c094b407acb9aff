//! Discontinuity detection in the control from divided-difference jump
//! function approximations.
//!
//! For a sample grid `t_1 < ... < t_N` and an order `m`, the jump at `t` is
//! approximated by
//!
//! ```text
//! L_m f(t) = (1 / q_m(t)) * sum_j c_j(t) f(t_j),   c_j = m! / prod_{i != j} (t_j - t_i)
//! ```
//!
//! over the `m + 1` grid points nearest to `t`, with `q_m` the sum of the
//! `c_j` whose points lie right of `t`. Several orders are combined with a
//! minmod limiter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_est::ErrorReport;
use crate::transcription::CollocationSolution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpConfig {
    /// Approximation orders combined by minmod.
    pub orders: Vec<usize>,
    /// Normalized jump size that flags a discontinuity.
    pub eta: f64,
    /// Safety factor widening the uncertainty bounds.
    pub mu: f64,
}

impl Default for JumpConfig {
    fn default() -> Self {
        Self {
            orders: (1..=6).collect(),
            eta: 0.1,
            mu: 1.0,
        }
    }
}

impl JumpConfig {
    pub fn check(&self) -> Result<()> {
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(Error::InvalidConfig(
                "jump orders must be a nonempty set of positive integers".into(),
            ));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!("eta = {} must lie in (0, 1)", self.eta)));
        }
        if !(self.mu >= 1.0) || !self.mu.is_finite() {
            return Err(Error::InvalidConfig(format!("mu = {} must be at least 1", self.mu)));
        }
        Ok(())
    }
}

/// Indices of the `m + 1` points nearest to `t`, sorted; ties go left.
/// `None` if the grid has fewer than `m + 1` points.
pub fn stencil(points: &[f64], t: f64, m: usize) -> Option<Vec<usize>> {
    let need = m + 1;
    if points.len() < need {
        return None;
    }
    let split = points.partition_point(|&p| p <= t);
    let mut lo = split;
    let mut hi = split;
    while hi - lo < need {
        let left = lo.checked_sub(1);
        let right = (hi < points.len()).then_some(hi);
        match (left, right) {
            (Some(l), Some(r)) => {
                if t - points[l] <= points[r] - t {
                    lo = l;
                } else {
                    hi = r + 1;
                }
            }
            (Some(l), None) => lo = l,
            (None, Some(r)) => hi = r + 1,
            (None, None) => return None,
        }
    }
    Some((lo..hi).collect())
}

/// Coefficients `c_j` and `q_m` for the stencil `pts` around `t`.
pub fn jump_coefficients(pts: &[f64], t: f64) -> (Vec<f64>, f64) {
    let m = pts.len() - 1;
    let factorial: f64 = (1..=m).map(|v| v as f64).product();
    let c: Vec<f64> = pts
        .iter()
        .enumerate()
        .map(|(j, &tj)| {
            let prod: f64 = pts
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, &ti)| tj - ti)
                .product();
            factorial / prod
        })
        .collect();
    let q = pts
        .iter()
        .zip(&c)
        .filter(|&(&tj, _)| tj > t)
        .map(|(_, &cj)| cj)
        .sum();
    (c, q)
}

/// `L_m f(t)` on the nearest-point stencil; `None` when the stencil is
/// unavailable or `q_m` vanishes.
pub fn divided_diff_jump(points: &[f64], values: &[f64], t: f64, m: usize) -> Option<f64> {
    if m == 0 || points.len() != values.len() {
        return None;
    }
    let idx = stencil(points, t, m)?;
    let pts: Vec<f64> = idx.iter().map(|&i| points[i]).collect();
    if !pts.iter().any(|&p| p > t) {
        return None;
    }
    let (c, q) = jump_coefficients(&pts, t);
    if q == 0.0 || !q.is_finite() {
        return None;
    }
    let s: f64 = idx.iter().zip(&c).map(|(&i, cj)| cj * values[i]).sum();
    Some(s / q)
}

/// Minmod over the available orders; 0 when signs disagree or no order
/// has a stencil.
pub fn minmod_jump(points: &[f64], values: &[f64], t: f64, orders: &[usize]) -> f64 {
    let vals: Vec<f64> = orders
        .iter()
        .filter_map(|&m| divided_diff_jump(points, values, t, m))
        .collect();
    minmod(&vals)
}

pub fn minmod(vals: &[f64]) -> f64 {
    if vals.is_empty() {
        0.0
    } else if vals.iter().all(|&v| v > 0.0) {
        vals.iter().copied().fold(f64::INFINITY, f64::min)
    } else if vals.iter().all(|&v| v < 0.0) {
        vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        0.0
    }
}

/// Range normalization `(U - U_min) / (1 + U_max - U_min)`.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().map(|v| (v - lo) / (1.0 + hi - lo)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Estimated location: midpoint of the triggering gap.
    pub location: f64,
    pub lower: f64,
    pub upper: f64,
    /// Control component with the largest normalized jump.
    pub component: usize,
    /// Signed minmod value of that component.
    pub minmod: f64,
    /// The sample gap `[tau_j, tau_{j+1}]` that triggered the detection.
    pub gap: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detections: Vec<Detection>,
}

impl DetectionReport {
    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn locations(&self) -> Vec<f64> {
        self.detections.iter().map(|d| d.location).collect()
    }
}

struct Flag {
    gap: usize,
    component: usize,
    value: f64,
}

/// Scans the control on every interval whose error exceeds `epsilon`.
pub fn detect(
    solution: &CollocationSolution,
    report: &ErrorReport,
    epsilon: f64,
    config: &JumpConfig,
) -> Result<DetectionReport> {
    config.check()?;
    if report.intervals.len() != solution.intervals.len() {
        return Err(Error::DimensionMismatch(format!(
            "error report has {} intervals, solution has {}",
            report.intervals.len(),
            solution.intervals.len()
        )));
    }
    let mut tau = Vec::new();
    let mut owner = Vec::new();
    for (k, iv) in solution.intervals.iter().enumerate() {
        tau.extend_from_slice(iv.colloc_pts());
        owner.extend(std::iter::repeat_n(k, iv.degree()));
    }
    let n_u = solution.n_u();
    let columns: Vec<Vec<f64>> = (0..n_u)
        .map(|c| {
            let raw: Vec<f64> = solution
                .intervals
                .iter()
                .flat_map(|iv| iv.controls.iter().map(move |row| row[c]))
                .collect();
            normalize(&raw)
        })
        .collect();
    let failing: Vec<bool> = report.intervals.iter().map(|iv| iv.e_max > epsilon).collect();

    let mut flags: Vec<Flag> = Vec::new();
    for j in 0..tau.len().saturating_sub(1) {
        if !(failing[owner[j]] || failing[owner[j + 1]]) {
            continue;
        }
        let mid = 0.5 * (tau[j] + tau[j + 1]);
        let mut best: Option<(usize, f64)> = None;
        for (c, col) in columns.iter().enumerate() {
            let mm = minmod_jump(&tau, col, mid, &config.orders);
            if mm.abs() >= config.eta && best.is_none_or(|(_, b)| mm.abs() > b.abs()) {
                best = Some((c, mm));
            }
        }
        if let Some((component, value)) = best {
            flags.push(Flag {
                gap: j,
                component,
                value,
            });
        }
    }

    let mut detections = Vec::new();
    let mut i = 0;
    while i < flags.len() {
        let start = i;
        while i + 1 < flags.len() && flags[i + 1].gap == flags[i].gap + 1 {
            i += 1;
        }
        let run = &flags[start..=i];
        let peak = run
            .iter()
            .fold(&run[0], |a, b| if b.value.abs() > a.value.abs() { b } else { a });
        let lo = tau[run[0].gap];
        let hi = tau[run[run.len() - 1].gap + 1];
        let location = 0.5 * (tau[peak.gap] + tau[peak.gap + 1]);
        detections.push(Detection {
            location,
            lower: location - config.mu * (location - lo),
            upper: location + config.mu * (hi - location),
            component: peak.component,
            minmod: peak.value,
            gap: (tau[peak.gap], tau[peak.gap + 1]),
        });
        i += 1;
    }
    Ok(DetectionReport { detections })
}

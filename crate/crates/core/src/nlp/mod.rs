//! Nonlinear programming contract and the bundled solver.
//!
//! Problems have the form
//!
//! ```text
//! minimize f(z)  subject to  g_lo <= g(z) <= g_hi,  z_lo <= z <= z_hi
//! ```
//!
//! with only zeroth-order callbacks; derivatives come from grouped central
//! differences driven by declared sparsity patterns.

mod fd;
mod ipm;

pub use fd::{
    color_columns, fd_gradient, fd_hessian_lagrangian, fd_jacobian, fd_jacobian_dense,
    HessianColoring,
};
pub use ipm::InteriorPoint;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-compressed nonzero structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from `(row, col)` pairs; duplicates are merged.
    pub fn from_entries<I>(nrows: usize, ncols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); ncols];
        for (r, c) in entries {
            if r >= nrows || c >= ncols {
                return Err(Error::DimensionMismatch(format!(
                    "sparsity entry ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            cols[c].push(r);
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for mut rows in cols {
            rows.sort_unstable();
            rows.dedup();
            row_idx.extend(rows);
            col_ptr.push(row_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
        })
    }

    pub fn dense(nrows: usize, ncols: usize) -> Self {
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(nrows * ncols);
        col_ptr.push(0);
        for _ in 0..ncols {
            row_idx.extend(0..nrows);
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Rows with a structural nonzero in column `j`.
    pub fn col(&self, j: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn col_range(&self, j: usize) -> std::ops::Range<usize> {
        self.col_ptr[j]..self.col_ptr[j + 1]
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.col(c).binary_search(&r).is_ok()
    }

    /// Row-wise lists of columns.
    pub fn rows(&self) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.nrows];
        for j in 0..self.ncols {
            for &r in self.col(j) {
                rows[r].push(j);
            }
        }
        rows
    }

    /// `(row, col)` pairs in column-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ncols).flat_map(move |j| self.col(j).iter().map(move |&r| (r, j)))
    }
}

/// Values laid out along a [`SparsityPattern`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub pattern: SparsityPattern,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: SparsityPattern) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.pattern.col_range(c);
        match self.pattern.col(c).binary_search(&r) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.pattern.nrows];
        for (j, &xj) in x.iter().enumerate().take(self.pattern.ncols) {
            for idx in self.pattern.col_range(j) {
                y[self.pattern.row_idx[idx]] += self.values[idx] * xj;
            }
        }
        y
    }

    /// `y = A^T x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.pattern.ncols)
            .map(|j| {
                self.pattern
                    .col_range(j)
                    .map(|idx| self.values[idx] * x[self.pattern.row_idx[idx]])
                    .sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.pattern.ncols]; self.pattern.nrows];
        for j in 0..self.pattern.ncols {
            for idx in self.pattern.col_range(j) {
                out[self.pattern.row_idx[idx]][j] = self.values[idx];
            }
        }
        out
    }
}

/// A smooth NLP given by zeroth-order callbacks.
pub trait NlpProblem: Sync {
    fn num_variables(&self) -> usize;

    fn num_constraints(&self) -> usize;

    /// `(lower, upper)` per variable; equal entries fix a variable.
    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>);

    /// `(lower, upper)` per constraint; equal entries make an equality.
    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>);

    fn objective(&self, z: &[f64]) -> f64;

    fn constraints(&self, z: &[f64], out: &mut [f64]);

    fn jacobian_sparsity(&self) -> SparsityPattern {
        SparsityPattern::dense(self.num_constraints(), self.num_variables())
    }

    /// Variables the objective can depend on.
    fn objective_dependencies(&self) -> Vec<usize> {
        (0..self.num_variables()).collect()
    }

    /// Symmetric structure of the Lagrangian Hessian (both triangles).
    fn hessian_sparsity(&self) -> SparsityPattern {
        SparsityPattern::dense(self.num_variables(), self.num_variables())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdMode {
    Central,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
    pub fd_mode: FdMode,
    /// Relative step of the first-derivative differences.
    pub fd_step_scale: f64,
    /// Largest constraint violation accepted at termination.
    pub constraint_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-9,
            max_iterations: 500,
            fd_mode: FdMode::Central,
            fd_step_scale: f64::EPSILON.cbrt(),
            constraint_tolerance: 1e-8,
        }
    }
}

impl SolverOptions {
    pub fn check(&self) -> Result<()> {
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::InvalidConfig("kkt_tolerance must be positive".into()));
        }
        if !(self.fd_step_scale > 0.0) {
            return Err(Error::InvalidConfig("fd_step_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Acceptable,
    MaxIter,
    Infeasible,
    Error,
}

impl SolveStatus {
    /// Whether the returned point may be used downstream.
    pub fn is_usable(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Acceptable)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Acceptable => "acceptable",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub z: Vec<f64>,
    /// Constraint multipliers, sign convention `grad f + J^T lambda - zl + zu = 0`.
    pub multipliers: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    pub iterations: usize,
    /// Diagnostic text for failures.
    pub message: String,
}

/// Pluggable solver contract.
pub trait NlpSolver {
    fn solve(&self, nlp: &dyn NlpProblem, z0: &[f64], options: &SolverOptions) -> SolveOutcome;
}

/// Solves with the bundled interior-point method.
pub fn solve(nlp: &dyn NlpProblem, z0: &[f64], options: &SolverOptions) -> SolveOutcome {
    InteriorPoint::default().solve(nlp, z0, options)
}

/// Largest violation of the constraint and variable bounds at `z`.
pub fn max_violation(nlp: &dyn NlpProblem, z: &[f64]) -> f64 {
    let (gl, gu) = nlp.constraint_bounds();
    let (xl, xu) = nlp.variable_bounds();
    let mut g = vec![0.0; nlp.num_constraints()];
    nlp.constraints(z, &mut g);
    let mut v: f64 = 0.0;
    for i in 0..g.len() {
        v = v.max(gl[i] - g[i]).max(g[i] - gu[i]);
    }
    for i in 0..z.len() {
        v = v.max(xl[i] - z[i]).max(z[i] - xu[i]);
    }
    v
}

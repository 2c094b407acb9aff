//! Grouped central differences.
//!
//! Columns that never share a row are perturbed together, so a Jacobian
//! costs two constraint evaluations per color instead of per column. The
//! Hessian of the Lagrangian is obtained by differencing its gradient; a few
//! "dense" columns (such as free final times) are differenced on their own
//! and their entries reused by symmetry, which keeps the remaining columns
//! colorable.

use super::{NlpProblem, SparseMatrix, SparsityPattern};
use crate::error::{Error, Result};

/// Greedy distance-1 coloring of `columns` with respect to shared rows.
pub fn color_columns(pattern: &SparsityPattern, columns: &[usize]) -> Vec<Vec<usize>> {
    color_with_row_filter(pattern, columns, |_| true)
}

fn color_with_row_filter<F: Fn(usize) -> bool>(
    pattern: &SparsityPattern,
    columns: &[usize],
    row_counts: F,
) -> Vec<Vec<usize>> {
    let mut row_colors: Vec<Vec<usize>> = vec![Vec::new(); pattern.nrows()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut stamp: Vec<usize> = Vec::new();
    for (tick, &j) in columns.iter().enumerate() {
        let tick = tick + 1;
        for &r in pattern.col(j) {
            if !row_counts(r) {
                continue;
            }
            for &c in &row_colors[r] {
                stamp[c] = tick;
            }
        }
        let color = (0..groups.len())
            .find(|&c| stamp[c] != tick)
            .unwrap_or_else(|| {
                groups.push(Vec::new());
                stamp.push(0);
                groups.len() - 1
            });
        groups[color].push(j);
        for &r in pattern.col(j) {
            if row_counts(r) {
                row_colors[r].push(color);
            }
        }
    }
    groups
}

fn step_for(z: f64, scale: f64) -> f64 {
    scale * z.abs().max(1.0)
}

fn check_finite(values: &[f64], what: &str, column: usize) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "{what} entry {i} while perturbing variable {column}"
        )));
    }
    Ok(())
}

/// Reusable grouped-difference Jacobian evaluator.
#[derive(Debug, Clone)]
pub(crate) struct JacobianEngine {
    pub pattern: SparsityPattern,
    pub groups: Vec<Vec<usize>>,
}

impl JacobianEngine {
    pub fn new(pattern: SparsityPattern, columns: &[usize]) -> Self {
        let groups = color_columns(&pattern, columns);
        Self { pattern, groups }
    }

    /// Fills `out.values`; columns outside the colored set are left untouched.
    pub fn eval(
        &self,
        nlp: &dyn NlpProblem,
        z: &[f64],
        step_scale: f64,
        out: &mut SparseMatrix,
    ) -> Result<()> {
        let m = nlp.num_constraints();
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        let mut gp = vec![0.0; m];
        let mut gm = vec![0.0; m];
        for group in &self.groups {
            for &j in group {
                let h = step_for(z[j], step_scale);
                zp[j] = z[j] + h;
                zm[j] = z[j] - h;
            }
            nlp.constraints(&zp, &mut gp);
            check_finite(&gp, "constraints", group[0])?;
            nlp.constraints(&zm, &mut gm);
            check_finite(&gm, "constraints", group[0])?;
            for &j in group {
                let denom = zp[j] - zm[j];
                for idx in self.pattern.col_range(j) {
                    let r = self.pattern.col(j)[idx - self.pattern.col_range(j).start];
                    out.values[idx] = (gp[r] - gm[r]) / denom;
                }
                zp[j] = z[j];
                zm[j] = z[j];
            }
        }
        Ok(())
    }
}

/// Central-difference constraint Jacobian over the declared sparsity pattern.
pub fn fd_jacobian(nlp: &dyn NlpProblem, z: &[f64], step_scale: f64) -> Result<SparseMatrix> {
    check_finite(z, "decision vector", 0)?;
    let pattern = nlp.jacobian_sparsity();
    let columns: Vec<usize> = (0..nlp.num_variables()).collect();
    let engine = JacobianEngine::new(pattern.clone(), &columns);
    let mut out = SparseMatrix::zeros(pattern);
    engine.eval(nlp, z, step_scale, &mut out)?;
    Ok(out)
}

/// Ungrouped dense central differences, one column at a time.
pub fn fd_jacobian_dense(nlp: &dyn NlpProblem, z: &[f64], step_scale: f64) -> Result<Vec<Vec<f64>>> {
    let m = nlp.num_constraints();
    let n = nlp.num_variables();
    let mut out = vec![vec![0.0; n]; m];
    let mut zz = z.to_vec();
    let mut gp = vec![0.0; m];
    let mut gm = vec![0.0; m];
    for j in 0..n {
        let h = step_for(z[j], step_scale);
        zz[j] = z[j] + h;
        let hp = zz[j];
        nlp.constraints(&zz, &mut gp);
        check_finite(&gp, "constraints", j)?;
        zz[j] = z[j] - h;
        let hm = zz[j];
        nlp.constraints(&zz, &mut gm);
        check_finite(&gm, "constraints", j)?;
        zz[j] = z[j];
        for i in 0..m {
            out[i][j] = (gp[i] - gm[i]) / (hp - hm);
        }
    }
    Ok(out)
}

/// Central-difference objective gradient restricted to `deps`.
pub fn fd_gradient(nlp: &dyn NlpProblem, z: &[f64], deps: &[usize], step_scale: f64) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; z.len()];
    let mut zz = z.to_vec();
    for &j in deps {
        let h = step_for(z[j], step_scale);
        zz[j] = z[j] + h;
        let hp = zz[j];
        let fp = nlp.objective(&zz);
        zz[j] = z[j] - h;
        let hm = zz[j];
        let fm = nlp.objective(&zz);
        zz[j] = z[j];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!("objective while perturbing variable {j}")));
        }
        grad[j] = (fp - fm) / (hp - hm);
    }
    Ok(grad)
}

/// Column grouping for differencing a symmetric Hessian.
#[derive(Debug, Clone)]
pub struct HessianColoring {
    pattern: SparsityPattern,
    dense: Vec<usize>,
    groups: Vec<Vec<usize>>,
    is_dense: Vec<bool>,
    active: Vec<bool>,
    transpose: Vec<usize>,
}

impl HessianColoring {
    /// `pattern` must be structurally symmetric. Only `columns` are
    /// differenced; entries touching other variables stay zero.
    pub fn new(pattern: SparsityPattern, columns: &[usize]) -> Self {
        let n = pattern.ncols();
        let mut active = vec![false; n];
        for &j in columns {
            active[j] = true;
        }
        let threshold = 16usize.max((2.0 * (columns.len() as f64).sqrt()) as usize);
        let mut is_dense = vec![false; n];
        let mut dense = Vec::new();
        for &j in columns {
            let count = pattern.col(j).iter().filter(|&&r| active[r]).count();
            if count > threshold {
                is_dense[j] = true;
                dense.push(j);
            }
        }
        let sparse_cols: Vec<usize> = columns.iter().copied().filter(|&j| !is_dense[j]).collect();
        let groups = color_with_row_filter(&pattern, &sparse_cols, |r| active[r] && !is_dense[r]);
        let mut transpose = vec![usize::MAX; pattern.nnz()];
        for j in 0..n {
            let range = pattern.col_range(j);
            for (off, &r) in pattern.col(j).iter().enumerate() {
                if let Ok(pos) = pattern.col(r).binary_search(&j) {
                    transpose[range.start + off] = pattern.col_range(r).start + pos;
                }
            }
        }
        Self {
            pattern,
            dense,
            groups,
            is_dense,
            active,
            transpose,
        }
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    /// Number of gradient-difference pairs per Hessian.
    pub fn num_directions(&self) -> usize {
        self.dense.len() + self.groups.len()
    }

    /// Differences `grad` around `z` and returns the symmetrized Hessian.
    pub fn eval<F>(&self, z: &[f64], step_scale: f64, mut grad: F) -> Result<SparseMatrix>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    {
        let n = z.len();
        let p = &self.pattern;
        let mut raw = vec![0.0; p.nnz()];
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        let singles = self.dense.iter().map(std::slice::from_ref);
        for group in singles.chain(self.groups.iter().map(|g| g.as_slice())) {
            for &j in group {
                let h = step_for(z[j], step_scale);
                zp[j] = z[j] + h;
                zm[j] = z[j] - h;
            }
            grad(&zp, &mut gp)?;
            grad(&zm, &mut gm)?;
            for &j in group {
                let denom = zp[j] - zm[j];
                let range = p.col_range(j);
                for (off, &r) in p.col(j).iter().enumerate() {
                    if !self.active[r] || (self.is_dense[r] && !self.is_dense[j]) {
                        continue;
                    }
                    raw[range.start + off] = (gp[r] - gm[r]) / denom;
                }
                zp[j] = z[j];
                zm[j] = z[j];
            }
        }
        let mut out = SparseMatrix::zeros(p.clone());
        for j in 0..n {
            if !self.active[j] {
                continue;
            }
            let range = p.col_range(j);
            for (off, &r) in p.col(j).iter().enumerate() {
                if !self.active[r] {
                    continue;
                }
                let idx = range.start + off;
                let t = self.transpose[idx];
                out.values[idx] = match (self.is_dense[r], self.is_dense[j]) {
                    (false, true) => raw[idx],
                    (true, false) => raw[t],
                    _ => 0.5 * (raw[idx] + raw[t]),
                };
            }
        }
        Ok(out)
    }
}

/// Hessian of `sigma f + lambda^T g` by differencing its gradient.
pub fn fd_hessian_lagrangian(
    nlp: &dyn NlpProblem,
    z: &[f64],
    sigma: f64,
    lambda: &[f64],
    step_scale: f64,
) -> Result<SparseMatrix> {
    let columns: Vec<usize> = (0..nlp.num_variables()).collect();
    let coloring = HessianColoring::new(nlp.hessian_sparsity(), &columns);
    let engine = JacobianEngine::new(nlp.jacobian_sparsity(), &columns);
    let deps = nlp.objective_dependencies();
    let mut jac = SparseMatrix::zeros(engine.pattern.clone());
    coloring.eval(z, step_scale, |x, out| {
        engine.eval(nlp, x, step_scale, &mut jac)?;
        let g = fd_gradient(nlp, x, &deps, step_scale)?;
        let jt = jac.tr_mul_vec(lambda);
        for i in 0..out.len() {
            out[i] = sigma * g[i] + jt[i];
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quad;

    impl NlpProblem for Quad {
        fn num_variables(&self) -> usize {
            3
        }
        fn num_constraints(&self) -> usize {
            2
        }
        fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![f64::NEG_INFINITY; 3], vec![f64::INFINITY; 3])
        }
        fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0; 2], vec![0.0; 2])
        }
        fn objective(&self, z: &[f64]) -> f64 {
            z[0] * z[0] * z[1] + z[2].exp()
        }
        fn constraints(&self, z: &[f64], out: &mut [f64]) {
            out[0] = z[0] * z[0];
            out[1] = 2.0 * z[1] - z[2];
        }
        fn jacobian_sparsity(&self) -> SparsityPattern {
            SparsityPattern::from_entries(2, 3, [(0, 0), (1, 1), (1, 2)]).unwrap()
        }
    }

    #[test]
    fn jacobian_of_quadratic_and_linear_rows() {
        let j = fd_jacobian(&Quad, &[2.0, 1.0, 0.5], f64::EPSILON.cbrt()).unwrap();
        assert!((j.get(0, 0) - 4.0).abs() < 1e-7);
        assert!((j.get(1, 1) - 2.0).abs() < 1e-9);
        assert!((j.get(1, 2) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn coloring_groups_independent_columns() {
        let p = SparsityPattern::from_entries(2, 3, [(0, 0), (1, 1), (1, 2)]).unwrap();
        let g = color_columns(&p, &[0, 1, 2]);
        assert_eq!(g, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn gradient_matches_analytic() {
        let z = [1.5, -0.5, 0.25];
        let g = fd_gradient(&Quad, &z, &[0, 1, 2], f64::EPSILON.cbrt()).unwrap();
        assert!((g[0] - 2.0 * 1.5 * -0.5).abs() < 1e-8);
        assert!((g[1] - 2.25).abs() < 1e-8);
        assert!((g[2] - 0.25f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn lagrangian_hessian_matches_analytic() {
        let z = [1.5, -0.5, 0.25];
        let lambda = [3.0, 7.0];
        let h = fd_hessian_lagrangian(&Quad, &z, 2.0, &lambda, f64::EPSILON.powf(0.25)).unwrap();
        // f: [[2 z1, 2 z0, 0], [2 z0, 0, 0], [0, 0, e^z2]]; g0 adds 2 to (0,0).
        let exact = [
            [2.0 * 2.0 * -0.5 + 3.0 * 2.0, 2.0 * 2.0 * 1.5, 0.0],
            [2.0 * 2.0 * 1.5, 0.0, 0.0],
            [0.0, 0.0, 2.0 * 0.25f64.exp()],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((h.get(i, j) - exact[i][j]).abs() < 1e-6, "({i},{j})");
            }
        }
    }

    #[test]
    fn non_finite_constraint_is_reported() {
        struct Bad;
        impl NlpProblem for Bad {
            fn num_variables(&self) -> usize {
                1
            }
            fn num_constraints(&self) -> usize {
                1
            }
            fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
                (vec![0.0], vec![1.0])
            }
            fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
                (vec![0.0], vec![0.0])
            }
            fn objective(&self, _z: &[f64]) -> f64 {
                0.0
            }
            fn constraints(&self, z: &[f64], out: &mut [f64]) {
                out[0] = z[0].ln();
            }
        }
        let err = fd_jacobian(&Bad, &[0.0], 1e-3).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }
}

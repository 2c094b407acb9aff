//! Multiple-interval LGR collocation of an [`OcpProblem`] as an [`NlpProblem`].
//!
//! Decision vector layout, interval-major: for every interval the state
//! nodes (node-major, component-minor) followed by the controls at the
//! collocation points, then `t0`, `tf`. The last node of interval `k` is the
//! first node of interval `k + 1`; only the final interval stores its right
//! endpoint. Total length `n_y (P + 1) + n_u P + 2` with `P = sum P_k`.
//!
//! Defect rows are written on the reference interval,
//! `D_ref Y - (h_k / 2) (tf - t0) / 2 a(Y, U, t) = 0`, which is the
//! collocated dynamics multiplied by the interval half-width `h_k / 2`.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{diff_matrix, lgr_rule, IntervalGrid, Interpolant, LgrRule};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::nlp::{NlpProblem, SparsityPattern};
use crate::problems::{Dims, OcpProblem, Range};

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionLayout {
    mesh: Mesh,
    n_y: usize,
    n_u: usize,
    state_offset: Vec<usize>,
    control_offset: Vec<usize>,
    len: usize,
}

impl DecisionLayout {
    pub fn new(mesh: &Mesh, n_y: usize, n_u: usize) -> Self {
        let k = mesh.num_intervals();
        let mut state_offset = Vec::with_capacity(k);
        let mut control_offset = Vec::with_capacity(k);
        let mut pos = 0;
        for (i, &p) in mesh.degrees().iter().enumerate() {
            state_offset.push(pos);
            let nodes = if i + 1 == k { p + 1 } else { p };
            pos += nodes * n_y;
            control_offset.push(pos);
            pos += p * n_u;
        }
        Self {
            mesh: mesh.clone(),
            n_y,
            n_u,
            state_offset,
            control_offset,
            len: pos + 2,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    /// Index of state component `c` at node `j` (`0..=P_k`) of interval `k`.
    pub fn state_index(&self, k: usize, j: usize, c: usize) -> usize {
        let p = self.mesh.degrees()[k];
        if j == p && k + 1 < self.mesh.num_intervals() {
            self.state_offset[k + 1] + c
        } else {
            self.state_offset[k] + j * self.n_y + c
        }
    }

    /// Index of control component `c` at collocation point `i` of interval `k`.
    pub fn control_index(&self, k: usize, i: usize, c: usize) -> usize {
        self.control_offset[k] + i * self.n_u + c
    }

    pub fn t0_index(&self) -> usize {
        self.len - 2
    }

    pub fn tf_index(&self) -> usize {
        self.len - 1
    }

    pub fn final_state_index(&self, c: usize) -> usize {
        let k = self.mesh.num_intervals() - 1;
        self.state_index(k, self.mesh.degrees()[k], c)
    }
}

/// States and controls on one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSolution {
    pub left: f64,
    pub right: f64,
    /// Support points: collocation points followed by `right`.
    pub tau: Vec<f64>,
    /// `P_k + 1` rows of `n_y` values.
    pub states: Vec<Vec<f64>>,
    /// `P_k` rows of `n_u` values at the collocation points.
    pub controls: Vec<Vec<f64>>,
}

impl IntervalSolution {
    pub fn degree(&self) -> usize {
        self.controls.len()
    }

    pub fn colloc_pts(&self) -> &[f64] {
        &self.tau[..self.degree()]
    }

    fn state_column(&self, c: usize) -> Vec<f64> {
        self.states.iter().map(|row| row[c]).collect()
    }

    fn control_column(&self, c: usize) -> Vec<f64> {
        self.controls.iter().map(|row| row[c]).collect()
    }

    /// Degree-`P_k` state interpolant evaluated at `tau`.
    pub fn state_at(&self, tau: f64) -> Result<Vec<f64>> {
        let interp = Interpolant::new(&self.tau)?;
        let row = interp.basis_row(tau);
        let n_y = self.states.first().map_or(0, |r| r.len());
        Ok((0..n_y)
            .map(|c| row.iter().zip(&self.states).map(|(l, s)| l * s[c]).sum())
            .collect())
    }

    /// Degree-`P_k - 1` control interpolant evaluated at `tau`.
    pub fn control_at(&self, tau: f64) -> Result<Vec<f64>> {
        let interp = Interpolant::new(self.colloc_pts())?;
        let row = interp.basis_row(tau);
        let n_u = self.controls.first().map_or(0, |r| r.len());
        Ok((0..n_u)
            .map(|c| row.iter().zip(&self.controls).map(|(l, u)| l * u[c]).sum())
            .collect())
    }

    pub fn state_component(&self, c: usize) -> Vec<f64> {
        self.state_column(c)
    }

    pub fn control_component(&self, c: usize) -> Vec<f64> {
        self.control_column(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollocationSolution {
    pub intervals: Vec<IntervalSolution>,
    pub t0: f64,
    pub tf: f64,
    pub cost: f64,
}

impl CollocationSolution {
    pub fn n_y(&self) -> usize {
        self.intervals[0].states[0].len()
    }

    pub fn n_u(&self) -> usize {
        self.intervals[0].controls.first().map_or(0, |r| r.len())
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.intervals[0].states[0]
    }

    pub fn final_state(&self) -> &[f64] {
        self.intervals.last().and_then(|iv| iv.states.last()).expect("nonempty")
    }

    fn locate(&self, tau: f64) -> &IntervalSolution {
        let idx = self
            .intervals
            .partition_point(|iv| iv.right <= tau)
            .min(self.intervals.len() - 1);
        &self.intervals[idx]
    }

    /// State at `tau` from the interval containing it.
    pub fn state_at(&self, tau: f64) -> Result<Vec<f64>> {
        self.locate(tau).state_at(tau)
    }

    /// Control at `tau` from the interval containing it.
    pub fn control_at(&self, tau: f64) -> Result<Vec<f64>> {
        self.locate(tau).control_at(tau)
    }

    /// Every collocation point in increasing order with its control values.
    pub fn collocation_controls(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut tau = Vec::new();
        let mut u = Vec::new();
        for iv in &self.intervals {
            tau.extend_from_slice(iv.colloc_pts());
            u.extend(iv.controls.iter().cloned());
        }
        (tau, u)
    }

    pub fn time_at(&self, tau: f64) -> f64 {
        0.5 * (self.tf - self.t0) * tau + 0.5 * (self.tf + self.t0)
    }
}

/// Splits `z` into per-interval arrays. The cost field is left at zero;
/// [`Transcription::unpack`] fills it.
pub fn unpack(z: &[f64], layout: &DecisionLayout) -> Result<CollocationSolution> {
    if z.len() != layout.len() {
        return Err(Error::LengthMismatch {
            expected: layout.len(),
            got: z.len(),
        });
    }
    let mesh = layout.mesh();
    let mut intervals = Vec::with_capacity(mesh.num_intervals());
    for k in 0..mesh.num_intervals() {
        let grid = mesh.grid(k)?;
        let p = grid.degree();
        let states = (0..=p)
            .map(|j| (0..layout.n_y).map(|c| z[layout.state_index(k, j, c)]).collect())
            .collect();
        let controls = (0..p)
            .map(|i| (0..layout.n_u).map(|c| z[layout.control_index(k, i, c)]).collect())
            .collect();
        intervals.push(IntervalSolution {
            left: grid.left(),
            right: grid.right(),
            tau: grid.support(),
            states,
            controls,
        });
    }
    Ok(CollocationSolution {
        intervals,
        t0: z[layout.t0_index()],
        tf: z[layout.tf_index()],
        cost: 0.0,
    })
}

/// Inverse of [`unpack`]. Shared endpoint nodes are read from the interval
/// on their left.
pub fn pack(solution: &CollocationSolution, layout: &DecisionLayout) -> Result<Vec<f64>> {
    let mesh = layout.mesh();
    if solution.intervals.len() != mesh.num_intervals() {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} intervals, layout {}",
            solution.intervals.len(),
            mesh.num_intervals()
        )));
    }
    let mut z = vec![0.0; layout.len()];
    for (k, iv) in solution.intervals.iter().enumerate() {
        let p = mesh.degrees()[k];
        if iv.states.len() != p + 1 || iv.controls.len() != p {
            return Err(Error::DimensionMismatch(format!("interval {k} sizes do not match degree {p}")));
        }
        for j in (0..=p).rev() {
            for c in 0..layout.n_y {
                z[layout.state_index(k, j, c)] = iv.states[j][c];
            }
        }
        for i in 0..p {
            for c in 0..layout.n_u {
                z[layout.control_index(k, i, c)] = iv.controls[i][c];
            }
        }
    }
    // Interior shared nodes: interval k's right node wins over k+1's first.
    for k in 0..mesh.num_intervals().saturating_sub(1) {
        let p = mesh.degrees()[k];
        for c in 0..layout.n_y {
            z[layout.state_index(k, p, c)] = solution.intervals[k].states[p][c];
        }
    }
    z[layout.t0_index()] = solution.t0;
    z[layout.tf_index()] = solution.tf;
    Ok(z)
}

struct IntervalData {
    grid: IntervalGrid,
    /// Differentiation matrix on `[-1, 1]`.
    diff: DMatrix<f64>,
    rule: LgrRule,
    /// First collocation row of this interval (global point index).
    point_offset: usize,
}

/// The collocation NLP for one mesh.
pub struct Transcription<'a> {
    problem: &'a dyn OcpProblem,
    dims: Dims,
    layout: DecisionLayout,
    data: Vec<IntervalData>,
    total_points: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Builds the collocation NLP for `problem` on `mesh`.
pub fn transcribe<'a>(problem: &'a dyn OcpProblem, mesh: &Mesh) -> Result<Transcription<'a>> {
    crate::problems::validate(problem)?;
    let dims = problem.dims();
    let layout = DecisionLayout::new(mesh, dims.n_y, dims.n_u);
    let mut cache: BTreeMap<usize, (LgrRule, DMatrix<f64>)> = BTreeMap::new();
    let mut data = Vec::with_capacity(mesh.num_intervals());
    let mut offset = 0;
    for k in 0..mesh.num_intervals() {
        let p = mesh.degrees()[k];
        if let Entry::Vacant(slot) = cache.entry(p) {
            let rule = lgr_rule(p)?;
            let reference = IntervalGrid::new(&rule, -1.0, 1.0)?;
            let d = diff_matrix(&reference);
            slot.insert((rule, d));
        }
        let (rule, diff) = cache[&p].clone();
        let (l, r) = mesh.interval(k);
        data.push(IntervalData {
            grid: IntervalGrid::new(&rule, l, r)?,
            diff,
            rule,
            point_offset: offset,
        });
        offset += p;
    }
    let (lower, upper) = variable_bounds(problem, &layout);
    Ok(Transcription {
        problem,
        dims,
        layout,
        data,
        total_points: offset,
        lower,
        upper,
    })
}

fn variable_bounds(problem: &dyn OcpProblem, layout: &DecisionLayout) -> (Vec<f64>, Vec<f64>) {
    let b = problem.bounds();
    let mesh = layout.mesh();
    let mut lo = vec![0.0; layout.len()];
    let mut hi = vec![0.0; layout.len()];
    let mut set = |idx: usize, r: Range| {
        lo[idx] = r.lower;
        hi[idx] = r.upper;
    };
    for k in 0..mesh.num_intervals() {
        let p = mesh.degrees()[k];
        for j in 0..=p {
            for c in 0..layout.n_y() {
                set(layout.state_index(k, j, c), b.state[c]);
            }
        }
        for i in 0..p {
            for c in 0..layout.n_u() {
                set(layout.control_index(k, i, c), b.control[c]);
            }
        }
    }
    for c in 0..layout.n_y() {
        set(layout.state_index(0, 0, c), b.state[c].intersect(&b.initial_state[c]));
        set(layout.final_state_index(c), b.state[c].intersect(&b.final_state[c]));
    }
    set(layout.t0_index(), b.t0);
    set(layout.tf_index(), b.tf);
    (lo, hi)
}

impl<'a> Transcription<'a> {
    pub fn layout(&self) -> &DecisionLayout {
        &self.layout
    }

    pub fn mesh(&self) -> &Mesh {
        self.layout.mesh()
    }

    pub fn problem(&self) -> &dyn OcpProblem {
        self.problem
    }

    pub fn num_defects(&self) -> usize {
        self.dims.n_y * self.total_points
    }

    pub fn num_path(&self) -> usize {
        self.dims.n_c * self.total_points
    }

    /// Unpacks `z` and evaluates the cost.
    pub fn unpack(&self, z: &[f64]) -> Result<CollocationSolution> {
        let mut sol = unpack(z, &self.layout)?;
        sol.cost = self.objective(z);
        Ok(sol)
    }

    pub fn pack(&self, solution: &CollocationSolution) -> Result<Vec<f64>> {
        pack(solution, &self.layout)
    }

    fn gather_state(&self, z: &[f64], k: usize, j: usize, out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = z[self.layout.state_index(k, j, c)];
        }
    }

    fn gather_control(&self, z: &[f64], k: usize, i: usize, out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = z[self.layout.control_index(k, i, c)];
        }
    }

    fn endpoints(&self, z: &[f64]) -> (Vec<f64>, f64, Vec<f64>, f64) {
        let n_y = self.dims.n_y;
        let y0: Vec<f64> = (0..n_y).map(|c| z[self.layout.state_index(0, 0, c)]).collect();
        let yf: Vec<f64> = (0..n_y).map(|c| z[self.layout.final_state_index(c)]).collect();
        (y0, z[self.layout.t0_index()], yf, z[self.layout.tf_index()])
    }

    /// Column groups touched by collocation point `i` of interval `k`.
    fn point_columns(&self, k: usize, i: usize) -> Vec<usize> {
        let mut cols: Vec<usize> = (0..self.dims.n_y).map(|c| self.layout.state_index(k, i, c)).collect();
        cols.extend((0..self.dims.n_u).map(|c| self.layout.control_index(k, i, c)));
        cols.push(self.layout.t0_index());
        cols.push(self.layout.tf_index());
        cols
    }

    fn endpoint_columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = (0..self.dims.n_y).map(|c| self.layout.state_index(0, 0, c)).collect();
        cols.extend((0..self.dims.n_y).map(|c| self.layout.final_state_index(c)));
        cols.push(self.layout.t0_index());
        cols.push(self.layout.tf_index());
        cols
    }
}

/// Structural nonzeros of the constraint Jacobian.
pub fn jacobian_sparsity(layout: &DecisionLayout, mesh: &Mesh, problem: &dyn OcpProblem) -> SparsityPattern {
    let d = problem.dims();
    let total = mesh.total_points();
    let rows = d.n_y * total + d.n_c * total + d.n_b;
    let mut entries = Vec::new();
    let mut point = 0;
    for k in 0..mesh.num_intervals() {
        let p = mesh.degrees()[k];
        for i in 0..p {
            let mut local: Vec<usize> = (0..d.n_y).map(|c| layout.state_index(k, i, c)).collect();
            local.extend((0..d.n_u).map(|c| layout.control_index(k, i, c)));
            local.push(layout.t0_index());
            local.push(layout.tf_index());
            for c in 0..d.n_y {
                let row = (point + i) * d.n_y + c;
                for j in 0..=p {
                    entries.push((row, layout.state_index(k, j, c)));
                }
                entries.extend(local.iter().map(|&col| (row, col)));
            }
            for c in 0..d.n_c {
                let row = d.n_y * total + (point + i) * d.n_c + c;
                entries.extend(local.iter().map(|&col| (row, col)));
            }
        }
        point += p;
    }
    let mut ends: Vec<usize> = (0..d.n_y).map(|c| layout.state_index(0, 0, c)).collect();
    ends.extend((0..d.n_y).map(|c| layout.final_state_index(c)));
    ends.push(layout.t0_index());
    ends.push(layout.tf_index());
    for b in 0..d.n_b {
        let row = d.n_y * total + d.n_c * total + b;
        entries.extend(ends.iter().map(|&col| (row, col)));
    }
    SparsityPattern::from_entries(rows, layout.len(), entries).expect("indices in range")
}

impl NlpProblem for Transcription<'_> {
    fn num_variables(&self) -> usize {
        self.layout.len()
    }

    fn num_constraints(&self) -> usize {
        self.num_defects() + self.num_path() + self.dims.n_b
    }

    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }

    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.num_constraints();
        let nd = self.num_defects();
        let lo = (0..m).map(|i| if i < nd { 0.0 } else { f64::NEG_INFINITY }).collect();
        (lo, vec![0.0; m])
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let (y0, t0, yf, tf) = self.endpoints(z);
        let mut cost = self.problem.mayer(&y0, t0, &yf, tf);
        if self.problem.has_lagrange() {
            let mut y = vec![0.0; self.dims.n_y];
            let mut u = vec![0.0; self.dims.n_u];
            let half = 0.5 * (tf - t0);
            let mid = 0.5 * (tf + t0);
            for (k, d) in self.data.iter().enumerate() {
                let scale = half * 0.5 * d.grid.width();
                let mut sum = 0.0;
                for (i, (&tau, &w)) in d.grid.colloc_pts().iter().zip(d.rule.weights()).enumerate() {
                    self.gather_state(z, k, i, &mut y);
                    self.gather_control(z, k, i, &mut u);
                    sum += w * self.problem.lagrange(&y, &u, half * tau + mid);
                }
                cost += scale * sum;
            }
        }
        cost
    }

    fn constraints(&self, z: &[f64], out: &mut [f64]) {
        let n_y = self.dims.n_y;
        let n_c = self.dims.n_c;
        let total = self.total_points;
        let t0 = z[self.layout.t0_index()];
        let tf = z[self.layout.tf_index()];
        let half = 0.5 * (tf - t0);
        let mid = 0.5 * (tf + t0);
        let mut y = vec![0.0; n_y];
        let mut u = vec![0.0; self.dims.n_u];
        let mut a = vec![0.0; n_y];
        let mut nodes = vec![0.0; 0];
        for (k, d) in self.data.iter().enumerate() {
            let p = d.grid.degree();
            nodes.resize((p + 1) * n_y, 0.0);
            for j in 0..=p {
                self.gather_state(z, k, j, &mut nodes[j * n_y..(j + 1) * n_y]);
            }
            let scale = half * 0.5 * d.grid.width();
            for i in 0..p {
                let tau = d.grid.colloc_pts()[i];
                let t = half * tau + mid;
                y.copy_from_slice(&nodes[i * n_y..(i + 1) * n_y]);
                self.gather_control(z, k, i, &mut u);
                self.problem.dynamics(&y, &u, t, &mut a);
                let row = (d.point_offset + i) * n_y;
                for c in 0..n_y {
                    let mut dy = 0.0;
                    for j in 0..=p {
                        dy += d.diff[(i, j)] * nodes[j * n_y + c];
                    }
                    out[row + c] = dy - scale * a[c];
                }
                if n_c > 0 {
                    let prow = n_y * total + (d.point_offset + i) * n_c;
                    self.problem.path(&y, &u, t, &mut out[prow..prow + n_c]);
                }
            }
        }
        if self.dims.n_b > 0 {
            let (y0, t0, yf, tf) = self.endpoints(z);
            let start = (n_y + n_c) * total;
            self.problem.boundary(&y0, t0, &yf, tf, &mut out[start..start + self.dims.n_b]);
        }
    }

    fn jacobian_sparsity(&self) -> SparsityPattern {
        jacobian_sparsity(&self.layout, self.mesh(), self.problem)
    }

    fn objective_dependencies(&self) -> Vec<usize> {
        let mut deps = self.endpoint_columns();
        if self.problem.has_lagrange() {
            for (k, d) in self.data.iter().enumerate() {
                for i in 0..d.grid.degree() {
                    deps.extend(self.point_columns(k, i));
                }
            }
        }
        deps.sort_unstable();
        deps.dedup();
        deps
    }

    fn hessian_sparsity(&self) -> SparsityPattern {
        let mut entries = Vec::new();
        let mut block = |cols: &[usize]| {
            for &r in cols {
                for &c in cols {
                    entries.push((r, c));
                }
            }
        };
        for (k, d) in self.data.iter().enumerate() {
            for i in 0..d.grid.degree() {
                block(&self.point_columns(k, i));
            }
        }
        block(&self.endpoint_columns());
        let n = self.layout.len();
        SparsityPattern::from_entries(n, n, entries).expect("indices in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::fd_jacobian_dense;
    use crate::problems::{make_min_energy_double_integrator, make_robot_arm, Bounds};

    /// `y' = y` with `t` fixed on `[0, 1]`.
    struct Growth {
        bounds: Bounds,
    }

    impl Growth {
        fn new() -> Self {
            Self {
                bounds: Bounds {
                    state: vec![Range::FREE],
                    control: vec![Range::FREE],
                    initial_state: vec![Range::fixed(1.0)],
                    final_state: vec![Range::FREE],
                    t0: Range::fixed(0.0),
                    tf: Range::fixed(1.0),
                },
            }
        }
    }

    impl OcpProblem for Growth {
        fn name(&self) -> &str {
            "growth"
        }
        fn dims(&self) -> Dims {
            Dims {
                n_y: 1,
                n_u: 1,
                n_b: 0,
                n_c: 0,
            }
        }
        fn bounds(&self) -> &Bounds {
            &self.bounds
        }
        fn dynamics(&self, y: &[f64], _u: &[f64], _t: f64, out: &mut [f64]) {
            out[0] = y[0];
        }
    }

    #[test]
    fn robot_arm_initial_layout_sizes() {
        let p = make_robot_arm();
        let mesh = Mesh::uniform(10, 4).unwrap();
        let tr = transcribe(&p, &mesh).unwrap();
        assert_eq!(tr.layout().len(), 6 * 41 + 3 * 40 + 2);
        assert_eq!(tr.layout().len(), 368);
        assert_eq!(tr.num_defects(), 240);
        assert_eq!(tr.num_constraints(), 240);
    }

    #[test]
    fn single_interval_ordering() {
        let mesh = Mesh::uniform(1, 2).unwrap();
        let layout = DecisionLayout::new(&mesh, 1, 1);
        assert_eq!(layout.len(), 7);
        assert_eq!(
            [
                layout.state_index(0, 0, 0),
                layout.state_index(0, 1, 0),
                layout.state_index(0, 2, 0),
                layout.control_index(0, 0, 0),
                layout.control_index(0, 1, 0),
                layout.t0_index(),
                layout.tf_index()
            ],
            [0, 1, 2, 3, 4, 5, 6]
        );
    }

    #[test]
    fn aliasing_and_round_trip() {
        let mesh = Mesh::smooth(vec![-1.0, -0.2, 0.5, 1.0], vec![3, 4, 5]).unwrap();
        let layout = DecisionLayout::new(&mesh, 2, 1);
        assert_eq!(layout.len(), 2 * 13 + 12 + 2);
        assert_eq!(layout.state_index(0, 3, 1), layout.state_index(1, 0, 1));
        let z: Vec<f64> = (0..layout.len()).map(|i| (i as f64).sin()).collect();
        let sol = unpack(&z, &layout).unwrap();
        assert_eq!(sol.intervals[0].states[3], sol.intervals[1].states[0]);
        assert_eq!(sol.intervals[1].states[4], sol.intervals[2].states[0]);
        assert_eq!(pack(&sol, &layout).unwrap(), z);
        assert!(matches!(
            unpack(&z[1..], &layout),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fixed_times_have_equal_bounds() {
        let p = make_min_energy_double_integrator();
        let mesh = Mesh::uniform(3, 4).unwrap();
        let tr = transcribe(&p, &mesh).unwrap();
        let (lo, hi) = tr.variable_bounds();
        let l = tr.layout();
        assert_eq!(lo[l.t0_index()], hi[l.t0_index()]);
        assert_eq!(lo[l.tf_index()], hi[l.tf_index()]);
        assert_eq!(lo[l.final_state_index(0)], 1.0);
        assert_eq!(hi[l.final_state_index(0)], 1.0);
    }

    fn exact_z(tr: &Transcription, y: impl Fn(f64) -> Vec<f64>, u: impl Fn(f64) -> Vec<f64>, t0: f64, tf: f64) -> Vec<f64> {
        let layout = tr.layout();
        let mesh = tr.mesh();
        let mut z = vec![0.0; layout.len()];
        let time = |tau: f64| 0.5 * (tf - t0) * tau + 0.5 * (tf + t0);
        for k in 0..mesh.num_intervals() {
            let g = mesh.grid(k).unwrap();
            for (j, &tau) in g.support().iter().enumerate() {
                for (c, v) in y(time(tau)).into_iter().enumerate() {
                    z[layout.state_index(k, j, c)] = v;
                }
            }
            for (i, &tau) in g.colloc_pts().iter().enumerate() {
                for (c, v) in u(time(tau)).into_iter().enumerate() {
                    z[layout.control_index(k, i, c)] = v;
                }
            }
        }
        z[layout.t0_index()] = t0;
        z[layout.tf_index()] = tf;
        z
    }

    #[test]
    fn polynomial_solution_satisfies_defects() {
        let p = make_min_energy_double_integrator();
        let mesh = Mesh::smooth(vec![-1.0, -0.3, 0.4, 1.0], vec![3, 4, 3]).unwrap();
        let tr = transcribe(&p, &mesh).unwrap();
        let z = exact_z(
            &tr,
            |t| vec![3.0 * t * t - 2.0 * t.powi(3), 6.0 * t - 6.0 * t * t],
            |t| vec![6.0 - 12.0 * t],
            0.0,
            1.0,
        );
        let mut g = vec![0.0; tr.num_constraints()];
        tr.constraints(&z, &mut g);
        assert!(g.iter().all(|v| v.abs() < 1e-9), "{g:?}");
        // u^2 / 2 is quadratic, so the quadrature is exact.
        assert!((tr.objective(&z) - 6.0).abs() < 1e-10);
    }

    #[test]
    fn defect_residual_decays_with_degree() {
        let prob = Growth::new();
        let mut last = f64::INFINITY;
        for p in [2, 4, 8] {
            let mesh = Mesh::uniform(1, p).unwrap();
            let tr = transcribe(&prob, &mesh).unwrap();
            let z = exact_z(&tr, |t| vec![t.exp()], |_| vec![0.0], 0.0, 1.0);
            let mut g = vec![0.0; tr.num_constraints()];
            tr.constraints(&z, &mut g);
            let r = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(r < last * 0.1, "P={p}: {r} vs {last}");
            last = r;
        }
        assert!(last < 1e-7);
    }

    #[test]
    fn sparsity_blocks() {
        let prob = Growth::new();
        let mesh = Mesh::uniform(1, 2).unwrap();
        let tr = transcribe(&prob, &mesh).unwrap();
        let pat = NlpProblem::jacobian_sparsity(&tr);
        for row in pat.rows() {
            // 3 state nodes, the control at this point, 2 times.
            assert_eq!(row.len(), 3 + 1 + 2);
        }
        let mesh = Mesh::uniform(2, 3).unwrap();
        let tr = transcribe(&prob, &mesh).unwrap();
        let pat = NlpProblem::jacobian_sparsity(&tr);
        let l = tr.layout();
        for row in pat.rows() {
            let touches0 = (1..3).any(|j| row.contains(&l.state_index(0, j, 0)));
            let touches1 = (1..3).any(|j| row.contains(&l.state_index(1, j, 0)));
            assert!(!(touches0 && touches1));
        }
    }

    #[test]
    fn sparsity_covers_dense_fd_nonzeros() {
        let p = make_robot_arm();
        let mesh = Mesh::smooth(vec![-1.0, -0.1, 0.6, 1.0], vec![3, 4, 3]).unwrap();
        let tr = transcribe(&p, &mesh).unwrap();
        let n = tr.num_variables();
        let z: Vec<f64> = (0..n)
            .map(|i| {
                let (lo, hi) = (tr.lower[i], tr.upper[i]);
                let s = 0.5 + 0.4 * ((i * 7919) as f64).sin();
                if lo == hi { lo } else { lo + s * (hi - lo) }
            })
            .collect();
        let dense = fd_jacobian_dense(&tr, &z, f64::EPSILON.cbrt()).unwrap();
        let pat = NlpProblem::jacobian_sparsity(&tr);
        for (r, row) in dense.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v.abs() > 1e-8 {
                    assert!(pat.contains(r, c), "missing ({r},{c}) = {v}");
                }
            }
        }
    }
}

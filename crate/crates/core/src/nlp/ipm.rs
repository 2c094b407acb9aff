//! Primal-dual interior-point method.
//!
//! Inequalities get slacks, fixed variables are eliminated, and Newton steps
//! on the barrier subproblem come from a sparse factorization of the reduced
//! KKT matrix
//!
//! ```text
//! [ W + Sigma_x + dw I   J^T ] [dx]   [ -r_x ]
//! [ J                    -D  ] [dl] = [ -r_c ]
//! ```
//!
//! where `D` holds the eliminated slack block plus constraint regularization.
//! The matrix is factored by sparse LU. A direction is kept when its
//! curvature `dx' (W + Sigma + dw) dx + ds' (Sigma_s + dw) ds` is positive;
//! otherwise, or when the factorization fails, `dw` grows. The step length
//! comes from a fraction-to-boundary rule and a backtracking line search on
//! an l1 exact-penalty merit function with one second-order correction.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Mat, Par};

use super::fd::{fd_gradient, HessianColoring, JacobianEngine};
use super::{NlpProblem, NlpSolver, SolveOutcome, SolveStatus, SolverOptions, SparseMatrix, SparsityPattern};
use crate::error::{Error, Result};

const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const TAU_MIN: f64 = 0.99;
const KAPPA_SIGMA: f64 = 1e10;
const ARMIJO: f64 = 1e-4;
const PENALTY_RHO: f64 = 0.1;
const S_MAX: f64 = 100.0;
const DW_MIN: f64 = 1e-20;
const DW_FIRST: f64 = 1e-4;
const DW_MAX: f64 = 1e40;
const CURVATURE: f64 = 1e-10;
const ALPHA_MIN: f64 = 1e-13;

/// The bundled solver. Fields are algorithm tuning knobs.
#[derive(Debug, Clone)]
pub struct InteriorPoint {
    /// Initial barrier parameter.
    pub mu_init: f64,
    /// Relative distance the starting point is pushed inside its bounds.
    pub bound_push: f64,
    /// Consecutive iterations within `1e2 * kkt_tolerance` that end the
    /// solve as acceptable.
    pub acceptable_iterations: usize,
    /// Scale rows and objective so their initial gradients are at most 100.
    pub gradient_scaling: bool,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        Self {
            mu_init: 0.1,
            bound_push: 1e-2,
            acceptable_iterations: 15,
            gradient_scaling: true,
        }
    }
}

impl NlpSolver for InteriorPoint {
    fn solve(&self, nlp: &dyn NlpProblem, z0: &[f64], options: &SolverOptions) -> SolveOutcome {
        faer::set_global_parallelism(Par::Seq);
        let n_full = nlp.num_variables();
        let m_full = nlp.num_constraints();
        let fail = |msg: String, z: Vec<f64>| SolveOutcome {
            status: SolveStatus::Error,
            z,
            multipliers: vec![0.0; m_full],
            objective: f64::NAN,
            kkt_residual: f64::INFINITY,
            constraint_violation: f64::INFINITY,
            iterations: 0,
            message: msg,
        };
        if let Err(e) = options.check() {
            return fail(e.to_string(), z0.to_vec());
        }
        if z0.len() != n_full {
            return fail(
                Error::LengthMismatch {
                    expected: n_full,
                    got: z0.len(),
                }
                .to_string(),
                z0.to_vec(),
            );
        }
        let mut run = match Run::new(self, nlp, z0, options) {
            Ok(r) => r,
            Err(e) => return fail(e.to_string(), z0.to_vec()),
        };
        run.iterate()
    }
}

/// Reduced KKT matrix with a fixed sparsity structure.
struct Kkt {
    pattern: SparsityPattern,
    symbolic: SymbolicSparseColMat<usize>,
    symbolic_lu: Option<SymbolicLu<usize>>,
    values: Vec<f64>,
    hess_pos: Vec<Option<usize>>,
    jac_pos: Vec<Option<(usize, usize)>>,
    diag_pos: Vec<usize>,
}

impl Kkt {
    fn new(
        n: usize,
        ma: usize,
        hess: &SparsityPattern,
        jac: &SparsityPattern,
        col_map: &[Option<usize>],
        row_map: &[Option<usize>],
    ) -> Result<Self> {
        let dim = n + ma;
        let mut entries = Vec::new();
        for i in 0..dim {
            entries.push((i, i));
        }
        for (r, c) in hess.entries() {
            if let (Some(fr), Some(fc)) = (col_map[r], col_map[c]) {
                entries.push((fr, fc));
            }
        }
        for (r, c) in jac.entries() {
            if let (Some(a), Some(fc)) = (row_map[r], col_map[c]) {
                entries.push((n + a, fc));
                entries.push((fc, n + a));
            }
        }
        let pattern = SparsityPattern::from_entries(dim, dim, entries)?;
        let pos = |r: usize, c: usize| {
            let start = pattern.col_range(c).start;
            start + pattern.col(c).binary_search(&r).expect("entry present")
        };
        let diag_pos = (0..dim).map(|i| pos(i, i)).collect();
        let hess_pos = hess
            .entries()
            .map(|(r, c)| match (col_map[r], col_map[c]) {
                (Some(fr), Some(fc)) => Some(pos(fr, fc)),
                _ => None,
            })
            .collect();
        let jac_pos = jac
            .entries()
            .map(|(r, c)| match (row_map[r], col_map[c]) {
                (Some(a), Some(fc)) => Some((pos(n + a, fc), pos(fc, n + a))),
                _ => None,
            })
            .collect();
        let symbolic = SymbolicSparseColMat::<usize>::new_checked(
            dim,
            dim,
            pattern.col_ptr.clone(),
            None,
            pattern.row_idx.clone(),
        );
        let values = vec![0.0; pattern.nnz()];
        Ok(Self {
            pattern,
            symbolic,
            symbolic_lu: None,
            values,
            hess_pos,
            jac_pos,
            diag_pos,
        })
    }

    fn assemble(&mut self, hess: &SparseMatrix, jac: &SparseMatrix, row_scale: &[f64], row_of: &[usize], diag: &[f64]) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
        for (idx, p) in self.hess_pos.iter().enumerate() {
            if let Some(p) = p {
                self.values[*p] += hess.values[idx];
            }
        }
        for (idx, p) in self.jac_pos.iter().enumerate() {
            if let Some((lo, up)) = p {
                let v = jac.values[idx] * row_scale[row_of[idx]];
                self.values[*lo] += v;
                self.values[*up] += v;
            }
        }
        for (i, &d) in diag.iter().enumerate() {
            self.values[self.diag_pos[i]] += d;
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (j, &xj) in x.iter().enumerate() {
            for idx in self.pattern.col_range(j) {
                y[self.pattern.row_idx[idx]] += self.values[idx] * xj;
            }
        }
        y
    }

    fn lower(&self) -> SparseColMatRef<'_, usize, f64> {
        SparseColMatRef::new(self.symbolic.as_ref(), &self.values)
    }

    fn factor_lu(&mut self) -> Option<Lu<usize, f64>> {
        if self.symbolic_lu.is_none() {
            self.symbolic_lu = SymbolicLu::try_new(self.symbolic.as_ref()).ok();
        }
        let sym = self.symbolic_lu.clone()?;
        Lu::try_new_with_symbolic(sym, self.lower()).ok()
    }

    /// Solves `K x = rhs` by sparse LU with iterative refinement; `None`
    /// when the factorization fails or the solution is inaccurate.
    fn solve(&mut self, rhs: &[f64]) -> Option<Vec<f64>> {
        let dim = rhs.len();
        let lu = self.factor_lu()?;
        self.refine(rhs, 2, |b| {
            let m = Mat::<f64>::from_fn(dim, 1, |i, _| b[i]);
            let x = lu.solve(&m);
            (0..dim).map(|i| x[(i, 0)]).collect()
        })
    }

    fn refine(&self, rhs: &[f64], rounds: usize, mut solve_once: impl FnMut(&[f64]) -> Vec<f64>) -> Option<Vec<f64>> {
        let mut x = solve_once(rhs);
        let scale = 1.0 + inf_norm(rhs);
        for _ in 0..rounds {
            if x.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let kx = self.mul(&x);
            let r: Vec<f64> = rhs.iter().zip(&kx).map(|(b, k)| b - k).collect();
            if inf_norm(&r) <= 1e-14 * scale {
                break;
            }
            let dx = solve_once(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let kx = self.mul(&x);
        let res = rhs.iter().zip(&kx).map(|(b, k)| (b - k).abs()).fold(0.0, f64::max);
        let xnorm = 1.0 + inf_norm(&x);
        if res > 1e-9 * (scale + xnorm) {
            return None;
        }
        Some(x)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluations at one primal point.
#[derive(Clone)]
struct Point {
    x: Vec<f64>,
    s: Vec<f64>,
    f: f64,
    c: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dl: Vec<f64>,
}

struct Run<'a> {
    nlp: &'a dyn NlpProblem,
    opts: &'a SolverOptions,
    cfg: &'a InteriorPoint,
    base: Vec<f64>,
    free: Vec<usize>,
    xl: Vec<f64>,
    xu: Vec<f64>,
    rows: Vec<usize>,
    is_eq: Vec<bool>,
    sl: Vec<f64>,
    su: Vec<f64>,
    obj_scale: f64,
    row_scale: Vec<f64>,
    jac_engine: JacobianEngine,
    jac_row_of: Vec<usize>,
    row_map: Vec<Option<usize>>,
    col_map: Vec<Option<usize>>,
    hess: HessianColoring,
    obj_deps: Vec<usize>,
    kkt: Kkt,
    hess_step: f64,
    // iterate
    pt: Point,
    grad: Vec<f64>,
    jac: SparseMatrix,
    lam: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
    vl: Vec<f64>,
    vu: Vec<f64>,
    mu: f64,
    tau: f64,
    nu: f64,
    dw_last: f64,
    last_alpha: f64,
    last_alpha_max: f64,
    last_dw: f64,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a InteriorPoint, nlp: &'a dyn NlpProblem, z0: &[f64], opts: &'a SolverOptions) -> Result<Self> {
        let n_full = nlp.num_variables();
        let m_full = nlp.num_constraints();
        let (lo, hi) = nlp.variable_bounds();
        let (gl, gu) = nlp.constraint_bounds();
        if lo.len() != n_full || hi.len() != n_full || gl.len() != m_full || gu.len() != m_full {
            return Err(Error::DimensionMismatch("bound vectors do not match problem size".into()));
        }
        let mut base = Vec::with_capacity(n_full);
        let mut free = Vec::new();
        let mut col_map = vec![None; n_full];
        for j in 0..n_full {
            if lo[j] > hi[j] {
                return Err(Error::InvalidConfig(format!("variable {j} has empty bounds")));
            }
            let v = z0[j].max(lo[j]).min(hi[j]);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("initial value of variable {j}")));
            }
            base.push(v);
            if lo[j] != hi[j] {
                col_map[j] = Some(free.len());
                free.push(j);
            }
        }
        let mut rows = Vec::new();
        let mut row_map = vec![None; m_full];
        let mut is_eq = Vec::new();
        let mut sl = Vec::new();
        let mut su = Vec::new();
        for i in 0..m_full {
            if gl[i] > gu[i] {
                return Err(Error::InvalidConfig(format!("constraint {i} has empty bounds")));
            }
            if gl[i] == f64::NEG_INFINITY && gu[i] == f64::INFINITY {
                continue;
            }
            row_map[i] = Some(rows.len());
            rows.push(i);
            is_eq.push(gl[i] == gu[i]);
            sl.push(gl[i]);
            su.push(gu[i]);
        }
        let n = free.len();
        let ma = rows.len();
        let xl: Vec<f64> = free.iter().map(|&j| lo[j]).collect();
        let xu: Vec<f64> = free.iter().map(|&j| hi[j]).collect();

        let jac_pattern = nlp.jacobian_sparsity();
        let hess_pattern = nlp.hessian_sparsity();
        if jac_pattern.nrows() != m_full || jac_pattern.ncols() != n_full {
            return Err(Error::DimensionMismatch("Jacobian pattern size".into()));
        }
        let jac_engine = JacobianEngine::new(jac_pattern.clone(), &free);
        let jac_row_of: Vec<usize> = jac_pattern
            .entries()
            .map(|(r, _)| row_map[r].unwrap_or(0))
            .collect();
        let hess = HessianColoring::new(hess_pattern.clone(), &free);
        let obj_deps: Vec<usize> = nlp
            .objective_dependencies()
            .into_iter()
            .filter(|&j| col_map[j].is_some())
            .collect();
        let kkt = Kkt::new(n, ma, &hess_pattern, &jac_pattern, &col_map, &row_map)?;

        // Starting point pushed strictly inside the bounds.
        let push = |v: f64, l: f64, u: f64| -> f64 {
            let k = cfg.bound_push;
            match (l.is_finite(), u.is_finite()) {
                (true, true) => {
                    let pl = (k * l.abs().max(1.0)).min(k * (u - l));
                    let pu = (k * u.abs().max(1.0)).min(k * (u - l));
                    v.max(l + pl).min(u - pu)
                }
                (true, false) => v.max(l + k * l.abs().max(1.0)),
                (false, true) => v.min(u - k * u.abs().max(1.0)),
                (false, false) => v,
            }
        };
        for (i, &j) in free.iter().enumerate() {
            base[j] = push(base[j], xl[i], xu[i]);
        }
        let x: Vec<f64> = free.iter().map(|&j| base[j]).collect();

        let mut run = Self {
            nlp,
            opts,
            cfg,
            base,
            free,
            xl,
            xu,
            rows,
            is_eq,
            sl,
            su,
            obj_scale: 1.0,
            row_scale: vec![1.0; ma],
            jac_engine,
            jac_row_of,
            row_map,
            col_map,
            hess,
            obj_deps,
            kkt,
            hess_step: f64::EPSILON.powf(0.25),
            pt: Point {
                x,
                s: vec![0.0; ma],
                f: 0.0,
                c: vec![0.0; ma],
            },
            grad: vec![0.0; n],
            jac: SparseMatrix::zeros(jac_pattern),
            lam: vec![0.0; ma],
            zl: Vec::new(),
            zu: Vec::new(),
            vl: Vec::new(),
            vu: Vec::new(),
            mu: cfg.mu_init,
            tau: TAU_MIN.max(1.0 - cfg.mu_init),
            nu: 1.0,
            dw_last: 0.0,
            last_alpha: 0.0,
            last_alpha_max: 0.0,
            last_dw: 0.0,
        };

        let x = run.pt.x.clone();
        let (f, c) = run.eval(&x)?;
        run.derivatives(&x)?;
        if cfg.gradient_scaling {
            let gmax = inf_norm(&run.grad);
            if gmax > S_MAX {
                run.obj_scale = S_MAX / gmax;
            }
            let mut rmax = vec![0.0f64; ma];
            for (idx, (r, c)) in run.jac.pattern.entries().enumerate() {
                if let (Some(a), Some(_)) = (run.row_map[r], run.col_map[c]) {
                    rmax[a] = rmax[a].max(run.jac.values[idx].abs());
                }
            }
            for a in 0..ma {
                if rmax[a] > S_MAX {
                    run.row_scale[a] = S_MAX / rmax[a];
                }
            }
        }
        let f = f * run.obj_scale;
        let c: Vec<f64> = c.iter().zip(&run.row_scale).map(|(v, s)| v * s).collect();
        run.grad.iter_mut().for_each(|g| *g *= run.obj_scale);
        let mut s = vec![0.0; ma];
        for a in 0..ma {
            let (l, u) = (run.sl[a] * run.row_scale[a], run.su[a] * run.row_scale[a]);
            s[a] = if run.is_eq[a] { l } else { push(c[a], l, u) };
        }
        run.pt = Point { x, s, f, c };
        run.zl = run.xl.iter().map(|l| if l.is_finite() { 1.0 } else { 0.0 }).collect();
        run.zu = run.xu.iter().map(|u| if u.is_finite() { 1.0 } else { 0.0 }).collect();
        run.vl = (0..ma)
            .map(|a| if !run.is_eq[a] && run.sl[a].is_finite() { 1.0 } else { 0.0 })
            .collect();
        run.vu = (0..ma)
            .map(|a| if !run.is_eq[a] && run.su[a].is_finite() { 1.0 } else { 0.0 })
            .collect();
        Ok(run)
    }

    fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.base.clone();
        for (i, &j) in self.free.iter().enumerate() {
            z[j] = x[i];
        }
        z
    }

    /// Unscaled objective and active-row constraint values.
    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let z = self.full(x);
        let f = self.nlp.objective(&z);
        if !f.is_finite() {
            return Err(Error::NonFinite("objective".into()));
        }
        let mut g = vec![0.0; self.nlp.num_constraints()];
        self.nlp.constraints(&z, &mut g);
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("constraint {i}")));
        }
        Ok((f, self.rows.iter().map(|&r| g[r]).collect()))
    }

    fn eval_scaled(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (f, c) = self.eval(x)?;
        Ok((
            f * self.obj_scale,
            c.iter().zip(&self.row_scale).map(|(v, s)| v * s).collect(),
        ))
    }

    /// Objective gradient (scaled) and raw Jacobian values at `x`.
    fn derivatives(&mut self, x: &[f64]) -> Result<()> {
        let z = self.full(x);
        let g = fd_gradient(self.nlp, &z, &self.obj_deps, self.opts.fd_step_scale)?;
        self.grad = self.free.iter().map(|&j| g[j] * self.obj_scale).collect();
        self.jac_engine
            .eval(self.nlp, &z, self.opts.fd_step_scale, &mut self.jac)?;
        Ok(())
    }

    /// `J^T v` over free columns with row scaling applied.
    fn jt_mul(&self, jac: &SparseMatrix, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.free.len()];
        for (idx, (r, c)) in jac.pattern.entries().enumerate() {
            if let (Some(a), Some(fc)) = (self.row_map[r], self.col_map[c]) {
                out[fc] += jac.values[idx] * self.row_scale[a] * v[a];
            }
        }
        out
    }

    fn hessian(&self) -> Result<SparseMatrix> {
        let n_full = self.nlp.num_variables();
        let mut lam_full = vec![0.0; self.nlp.num_constraints()];
        for (a, &r) in self.rows.iter().enumerate() {
            lam_full[r] = self.lam[a] * self.row_scale[a];
        }
        let mut jac = SparseMatrix::zeros(self.jac_engine.pattern.clone());
        let z = self.full(&self.pt.x);
        let step = self.hess_step;
        self.hess.eval(&z, step, |zz, out| {
            self.jac_engine.eval(self.nlp, zz, step, &mut jac)?;
            let g = fd_gradient(self.nlp, zz, &self.obj_deps, step)?;
            let jt = jac.tr_mul_vec(&lam_full);
            for i in 0..n_full {
                out[i] = self.obj_scale * g[i] + jt[i];
            }
            Ok(())
        })
    }

    fn c_res(&self, p: &Point) -> Vec<f64> {
        (0..self.rows.len())
            .map(|a| {
                if self.is_eq[a] {
                    p.c[a] - self.sl[a] * self.row_scale[a]
                } else {
                    p.c[a] - p.s[a]
                }
            })
            .collect()
    }

    fn slack_lo(&self, a: usize) -> f64 {
        self.sl[a] * self.row_scale[a]
    }

    fn slack_hi(&self, a: usize) -> f64 {
        self.su[a] * self.row_scale[a]
    }

    fn barrier_value(&self, p: &Point) -> f64 {
        let mut b = 0.0;
        for i in 0..p.x.len() {
            if self.xl[i].is_finite() {
                b -= (p.x[i] - self.xl[i]).ln();
            }
            if self.xu[i].is_finite() {
                b -= (self.xu[i] - p.x[i]).ln();
            }
        }
        for a in 0..self.rows.len() {
            if self.is_eq[a] {
                continue;
            }
            if self.sl[a].is_finite() {
                b -= (p.s[a] - self.slack_lo(a)).ln();
            }
            if self.su[a].is_finite() {
                b -= (self.slack_hi(a) - p.s[a]).ln();
            }
        }
        p.f + self.mu * b
    }

    fn merit(&self, p: &Point) -> f64 {
        let viol: f64 = self.c_res(p).iter().map(|v| v.abs()).sum();
        self.barrier_value(p) + self.nu * viol
    }

    /// Barrier gradients in x and s.
    fn barrier_grads(&self) -> (Vec<f64>, Vec<f64>) {
        let p = &self.pt;
        let mu = self.mu;
        let gx: Vec<f64> = (0..p.x.len())
            .map(|i| {
                let mut g = self.grad[i];
                if self.xl[i].is_finite() {
                    g -= mu / (p.x[i] - self.xl[i]);
                }
                if self.xu[i].is_finite() {
                    g += mu / (self.xu[i] - p.x[i]);
                }
                g
            })
            .collect();
        let gs: Vec<f64> = (0..self.rows.len())
            .map(|a| {
                if self.is_eq[a] {
                    return 0.0;
                }
                let mut g = 0.0;
                if self.sl[a].is_finite() {
                    g -= mu / (p.s[a] - self.slack_lo(a));
                }
                if self.su[a].is_finite() {
                    g += mu / (self.slack_hi(a) - p.s[a]);
                }
                g
            })
            .collect();
        (gx, gs)
    }

    fn sigmas(&self) -> (Vec<f64>, Vec<f64>) {
        let p = &self.pt;
        let sx = (0..p.x.len())
            .map(|i| {
                let mut s = 0.0;
                if self.xl[i].is_finite() {
                    s += self.zl[i] / (p.x[i] - self.xl[i]);
                }
                if self.xu[i].is_finite() {
                    s += self.zu[i] / (self.xu[i] - p.x[i]);
                }
                s
            })
            .collect();
        let ss = (0..self.rows.len())
            .map(|a| {
                let mut s = 0.0;
                if self.is_eq[a] {
                    return s;
                }
                if self.sl[a].is_finite() {
                    s += self.vl[a] / (p.s[a] - self.slack_lo(a));
                }
                if self.su[a].is_finite() {
                    s += self.vu[a] / (self.slack_hi(a) - p.s[a]);
                }
                s
            })
            .collect();
        (sx, ss)
    }

    /// Scaled optimality error for barrier parameter `mu`.
    fn optimality_error(&self, mu: f64) -> f64 {
        let p = &self.pt;
        let jtl = self.jt_mul(&self.jac, &self.lam);
        let mut stat: f64 = 0.0;
        for i in 0..p.x.len() {
            stat = stat.max((self.grad[i] + jtl[i] - self.zl[i] + self.zu[i]).abs());
        }
        for a in 0..self.rows.len() {
            if !self.is_eq[a] {
                stat = stat.max((-self.lam[a] - self.vl[a] + self.vu[a]).abs());
            }
        }
        let prim = inf_norm(&self.c_res(p));
        let mut comp: f64 = 0.0;
        let mut zsum = 0.0;
        let mut nb = 0usize;
        for i in 0..p.x.len() {
            if self.xl[i].is_finite() {
                comp = comp.max(((p.x[i] - self.xl[i]) * self.zl[i] - mu).abs());
                zsum += self.zl[i];
                nb += 1;
            }
            if self.xu[i].is_finite() {
                comp = comp.max(((self.xu[i] - p.x[i]) * self.zu[i] - mu).abs());
                zsum += self.zu[i];
                nb += 1;
            }
        }
        for a in 0..self.rows.len() {
            if self.is_eq[a] {
                continue;
            }
            if self.sl[a].is_finite() {
                comp = comp.max(((p.s[a] - self.slack_lo(a)) * self.vl[a] - mu).abs());
                zsum += self.vl[a];
                nb += 1;
            }
            if self.su[a].is_finite() {
                comp = comp.max(((self.slack_hi(a) - p.s[a]) * self.vu[a] - mu).abs());
                zsum += self.vu[a];
                nb += 1;
            }
        }
        let lsum: f64 = self.lam.iter().map(|v| v.abs()).sum();
        let denom = (self.rows.len() + nb).max(1) as f64;
        let s_d = S_MAX.max((lsum + zsum) / denom) / S_MAX;
        let s_c = S_MAX.max(zsum / (nb.max(1) as f64)) / S_MAX;
        (stat / s_d).max(prim).max(comp / s_c)
    }

    /// Largest violation of the original (unscaled) constraints.
    fn unscaled_violation(&self) -> f64 {
        let mut v: f64 = 0.0;
        for a in 0..self.rows.len() {
            let c = self.pt.c[a] / self.row_scale[a];
            v = v.max(self.sl[a] - c).max(c - self.su[a]);
        }
        v
    }

    fn direction(
        &mut self,
        hess: &SparseMatrix,
        rc: &[f64],
        gx: &[f64],
        gs: &[f64],
    ) -> Option<(Direction, f64, f64)> {
        let n = self.free.len();
        let ma = self.rows.len();
        let (sx, ss) = self.sigmas();
        let jtl = self.jt_mul(&self.jac, &self.lam);
        let rx: Vec<f64> = (0..n).map(|i| gx[i] + jtl[i]).collect();
        let rs: Vec<f64> = (0..ma).map(|a| gs[a] - self.lam[a]).collect();
        let mut dw = 0.0;
        let mut dc = 0.0;
        let mut tries = 0;
        loop {
            tries += 1;
            if tries > 60 {
                return None;
            }
            let mut diag = vec![0.0; n + ma];
            for i in 0..n {
                diag[i] = sx[i] + dw;
            }
            for a in 0..ma {
                diag[n + a] = if self.is_eq[a] {
                    -dc
                } else {
                    -(1.0 / (ss[a] + dw) + dc)
                };
            }
            self.kkt
                .assemble(hess, &self.jac, &self.row_scale, &self.jac_row_of, &diag);
            let mut rhs = vec![0.0; n + ma];
            for i in 0..n {
                rhs[i] = -rx[i];
            }
            for a in 0..ma {
                rhs[n + a] = if self.is_eq[a] {
                    -rc[a]
                } else {
                    -rc[a] - rs[a] / (ss[a] + dw)
                };
            }
            let sol = self.kkt.solve(&rhs);
            let Some(sol) = sol else {
                if dc == 0.0 {
                    dc = 1e-8 * self.mu.powf(0.25);
                } else if dw == 0.0 {
                    dw = if self.dw_last == 0.0 { DW_FIRST } else { (self.dw_last / 3.0).max(DW_MIN) };
                } else {
                    dw *= 8.0;
                    if dw > DW_MAX {
                        return None;
                    }
                }
                continue;
            };
            let dx = sol[..n].to_vec();
            let dl = sol[n..].to_vec();
            let ds: Vec<f64> = (0..ma)
                .map(|a| if self.is_eq[a] { 0.0 } else { (dl[a] - rs[a]) / (ss[a] + dw) })
                .collect();
            let hdx = hess_mul(hess, &self.col_map, &dx);
            let mut curv = 0.0;
            for i in 0..n {
                curv += dx[i] * (hdx[i] + (sx[i] + dw) * dx[i]);
            }
            for a in 0..ma {
                if !self.is_eq[a] {
                    curv += (ss[a] + dw) * ds[a] * ds[a];
                }
            }
            let dnorm2 = dot(&dx, &dx) + dot(&ds, &ds);
            if curv >= CURVATURE * dnorm2 || dw >= DW_MAX {
                if dw > 0.0 {
                    self.dw_last = dw;
                }
                return Some((Direction { dx, ds, dl }, curv, dw));
            }
            dw = if dw == 0.0 {
                if self.dw_last == 0.0 {
                    DW_FIRST
                } else {
                    (self.dw_last / 3.0).max(DW_MIN)
                }
            } else if self.dw_last == 0.0 {
                dw * 100.0
            } else {
                dw * 8.0
            };
        }
    }

    /// Largest step in `(0, 1]` keeping `x`, `s` strictly feasible.
    fn max_primal_step(&self, d: &Direction) -> f64 {
        let p = &self.pt;
        let mut alpha: f64 = 1.0;
        for i in 0..p.x.len() {
            if self.xl[i].is_finite() && d.dx[i] < 0.0 {
                alpha = alpha.min(-self.tau * (p.x[i] - self.xl[i]) / d.dx[i]);
            }
            if self.xu[i].is_finite() && d.dx[i] > 0.0 {
                alpha = alpha.min(self.tau * (self.xu[i] - p.x[i]) / d.dx[i]);
            }
        }
        for a in 0..self.rows.len() {
            if self.is_eq[a] {
                continue;
            }
            if self.sl[a].is_finite() && d.ds[a] < 0.0 {
                alpha = alpha.min(-self.tau * (p.s[a] - self.slack_lo(a)) / d.ds[a]);
            }
            if self.su[a].is_finite() && d.ds[a] > 0.0 {
                alpha = alpha.min(self.tau * (self.slack_hi(a) - p.s[a]) / d.ds[a]);
            }
        }
        alpha
    }

    fn trial(&self, d: &Direction, alpha: f64) -> Option<Point> {
        let x: Vec<f64> = self.pt.x.iter().zip(&d.dx).map(|(x, dx)| x + alpha * dx).collect();
        let s: Vec<f64> = self.pt.s.iter().zip(&d.ds).map(|(s, ds)| s + alpha * ds).collect();
        let (f, c) = self.eval_scaled(&x).ok()?;
        Some(Point { x, s, f, c })
    }

    /// Bound multiplier steps for a primal direction.
    fn dual_steps(&self, d: &Direction) -> [Vec<f64>; 4] {
        let p = &self.pt;
        let mu = self.mu;
        let dzl = (0..p.x.len())
            .map(|i| {
                if !self.xl[i].is_finite() {
                    return 0.0;
                }
                let gap = p.x[i] - self.xl[i];
                mu / gap - self.zl[i] - self.zl[i] / gap * d.dx[i]
            })
            .collect();
        let dzu = (0..p.x.len())
            .map(|i| {
                if !self.xu[i].is_finite() {
                    return 0.0;
                }
                let gap = self.xu[i] - p.x[i];
                mu / gap - self.zu[i] + self.zu[i] / gap * d.dx[i]
            })
            .collect();
        let dvl = (0..self.rows.len())
            .map(|a| {
                if self.is_eq[a] || !self.sl[a].is_finite() {
                    return 0.0;
                }
                let gap = p.s[a] - self.slack_lo(a);
                mu / gap - self.vl[a] - self.vl[a] / gap * d.ds[a]
            })
            .collect();
        let dvu = (0..self.rows.len())
            .map(|a| {
                if self.is_eq[a] || !self.su[a].is_finite() {
                    return 0.0;
                }
                let gap = self.slack_hi(a) - p.s[a];
                mu / gap - self.vu[a] + self.vu[a] / gap * d.ds[a]
            })
            .collect();
        [dzl, dzu, dvl, dvu]
    }

    fn accept(&mut self, next: Point, d: &Direction, alpha: f64) -> Result<()> {
        let steps = self.dual_steps(d);
        let mut alpha_z: f64 = 1.0;
        for (vals, ds) in [&self.zl, &self.zu, &self.vl, &self.vu].iter().zip(&steps) {
            for (v, dv) in vals.iter().zip(ds) {
                if *dv < 0.0 && *v > 0.0 {
                    alpha_z = alpha_z.min(-self.tau * v / dv);
                }
            }
        }
        for (l, dl) in self.lam.iter_mut().zip(&d.dl) {
            *l += alpha * dl;
        }
        for (v, dv) in self.zl.iter_mut().zip(&steps[0]) {
            *v += alpha_z * dv;
        }
        for (v, dv) in self.zu.iter_mut().zip(&steps[1]) {
            *v += alpha_z * dv;
        }
        for (v, dv) in self.vl.iter_mut().zip(&steps[2]) {
            *v += alpha_z * dv;
        }
        for (v, dv) in self.vu.iter_mut().zip(&steps[3]) {
            *v += alpha_z * dv;
        }
        self.pt = next;
        self.safeguard_duals();
        let x = self.pt.x.clone();
        self.derivatives(&x)
    }

    fn safeguard_duals(&mut self) {
        let mu = self.mu;
        let clip = |v: &mut f64, gap: f64| {
            *v = v.min(KAPPA_SIGMA * mu / gap).max(mu / (KAPPA_SIGMA * gap));
        };
        for i in 0..self.pt.x.len() {
            if self.xl[i].is_finite() {
                clip(&mut self.zl[i], self.pt.x[i] - self.xl[i]);
            }
            if self.xu[i].is_finite() {
                clip(&mut self.zu[i], self.xu[i] - self.pt.x[i]);
            }
        }
        for a in 0..self.rows.len() {
            if self.is_eq[a] {
                continue;
            }
            if self.sl[a].is_finite() {
                let gap = self.pt.s[a] - self.slack_lo(a);
                clip(&mut self.vl[a], gap);
            }
            if self.su[a].is_finite() {
                let gap = self.slack_hi(a) - self.pt.s[a];
                clip(&mut self.vu[a], gap);
            }
        }
    }

    /// One Newton step with line search. `Ok(false)` when no acceptable
    /// step could be found.
    fn step(&mut self, hess: &SparseMatrix) -> Result<bool> {
        let rc = self.c_res(&self.pt);
        let theta: f64 = rc.iter().map(|v| v.abs()).sum();
        let (gx, gs) = self.barrier_grads();
        let mut extra_dw = 0.0;
        for _attempt in 0..4 {
            let h_reg;
            let hess_used = if extra_dw > 0.0 {
                let mut h = hess.clone();
                for j in 0..h.pattern.ncols() {
                    if let Ok(pos) = h.pattern.col(j).binary_search(&j) {
                        let idx = h.pattern.col_range(j).start + pos;
                        h.values[idx] += extra_dw;
                    }
                }
                h_reg = h;
                &h_reg
            } else {
                hess
            };
            let Some((d, curv, dw)) = self.direction(hess_used, &rc, &gx, &gs) else {
                extra_dw = if extra_dw == 0.0 { 1e-2 } else { extra_dw * 100.0 };
                continue;
            };
            let grad_d = dot(&gx, &d.dx) + dot(&gs, &d.ds);
            // Penalty must dominate the new multipliers and make the step a
            // descent direction; it may relax again when far above both.
            let mut need = self
                .lam
                .iter()
                .zip(&d.dl)
                .fold(0.0f64, |m, (l, dl)| m.max((l + dl).abs()));
            if theta > 0.0 {
                need = need.max((grad_d + 0.5 * curv.max(0.0)) / ((1.0 - PENALTY_RHO) * theta));
            }
            let target = 1.1 * need.max(1e-8);
            if self.nu < target || self.nu > 10.0 * target {
                self.nu = target;
            }
            let dphi = grad_d - self.nu * theta;
            let phi0 = self.merit(&self.pt);
            let alpha_max = self.max_primal_step(&d);
            self.last_alpha_max = alpha_max;
            self.last_dw = dw + extra_dw;
            let mut alpha = alpha_max;
            let mut first = true;
            while alpha >= ALPHA_MIN {
                if let Some(next) = self.trial(&d, alpha) {
                    let phi = self.merit(&next);
                    let slack = 1e-14 * phi0.abs().max(1.0);
                    if phi.is_finite() && phi <= phi0 + ARMIJO * alpha * dphi.min(0.0) + slack {
                        self.last_alpha = alpha;
                        self.accept(next, &d, alpha)?;
                        return Ok(true);
                    }
                    if first {
                        if let Some((soc_pt, soc_d, a_soc)) = self.second_order_correction(&d, &next, alpha, hess_used, &rc, &gx, &gs) {
                            let phi_soc = self.merit(&soc_pt);
                            if phi_soc.is_finite() && phi_soc <= phi0 + ARMIJO * alpha * dphi.min(0.0) + slack {
                                self.last_alpha = -a_soc;
                                self.accept(soc_pt, &soc_d, a_soc)?;
                                return Ok(true);
                            }
                        }
                    }
                }
                first = false;
                alpha *= 0.5;
            }
            extra_dw = if extra_dw == 0.0 { 1e-2 } else { extra_dw * 100.0 };
        }
        Ok(false)
    }

    #[allow(clippy::too_many_arguments)]
    fn second_order_correction(
        &mut self,
        d: &Direction,
        trial: &Point,
        alpha: f64,
        hess: &SparseMatrix,
        rc: &[f64],
        gx: &[f64],
        gs: &[f64],
    ) -> Option<(Point, Direction, f64)> {
        let rc_trial = self.c_res(trial);
        let theta0: f64 = rc.iter().map(|v| v.abs()).sum();
        let theta1: f64 = rc_trial.iter().map(|v| v.abs()).sum();
        if theta1 < theta0 || theta1 == 0.0 {
            return None;
        }
        let c_soc: Vec<f64> = rc.iter().zip(&rc_trial).map(|(a, b)| alpha * a + b).collect();
        let (soc, _, _) = self.direction(hess, &c_soc, gx, gs)?;
        let a = self.max_primal_step(&soc);
        let _ = d;
        let pt = self.trial(&soc, a)?;
        Some((pt, soc, a))
    }

    fn update_barrier(&mut self) {
        let floor = self.opts.kkt_tolerance / 10.0;
        while self.mu > floor && self.optimality_error(self.mu) <= KAPPA_EPS * self.mu {
            self.mu = floor.max((KAPPA_MU * self.mu).min(self.mu.powf(THETA_MU)));
            self.tau = TAU_MIN.max(1.0 - self.mu);
        }
    }

    fn outcome(&self, status: SolveStatus, iterations: usize, message: String) -> SolveOutcome {
        let z = self.full(&self.pt.x);
        let mut multipliers = vec![0.0; self.nlp.num_constraints()];
        for (a, &r) in self.rows.iter().enumerate() {
            multipliers[r] = self.lam[a] * self.row_scale[a] / self.obj_scale;
        }
        SolveOutcome {
            status,
            objective: self.nlp.objective(&z),
            z,
            multipliers,
            kkt_residual: self.optimality_error(0.0),
            constraint_violation: self.unscaled_violation(),
            iterations,
            message,
        }
    }

    fn iterate(&mut self) -> SolveOutcome {
        let tol = self.opts.kkt_tolerance;
        let ctol = self.opts.constraint_tolerance;
        let mut acceptable_count = 0;
        for iter in 0..self.opts.max_iterations {
            let e0 = self.optimality_error(0.0);
            let viol = self.unscaled_violation();
            log::trace!(
                "ipm iter {iter}: f={:.10e} err={e0:.3e} viol={viol:.3e} mu={:.1e} alpha={:.2e}/{:.2e} dw={:.1e} nu={:.2e}",
                self.pt.f / self.obj_scale,
                self.mu,
                self.last_alpha,
                self.last_alpha_max,
                self.last_dw,
                self.nu
            );
            if e0 <= tol && viol <= ctol {
                return self.outcome(SolveStatus::Optimal, iter, String::new());
            }
            if e0 <= 1e2 * tol && viol <= ctol {
                acceptable_count += 1;
                if acceptable_count >= self.cfg.acceptable_iterations {
                    return self.outcome(SolveStatus::Acceptable, iter, "stalled near optimum".into());
                }
            } else {
                acceptable_count = 0;
            }
            self.update_barrier();
            let hess = match self.hessian() {
                Ok(h) => h,
                Err(e) => return self.outcome(SolveStatus::Error, iter, e.to_string()),
            };
            match self.step(&hess) {
                Ok(true) => {}
                Ok(false) => {
                    let e0 = self.optimality_error(0.0);
                    let viol = self.unscaled_violation();
                    let (status, msg) = if e0 <= 1e2 * tol && viol <= ctol {
                        (SolveStatus::Acceptable, "line search stalled near optimum")
                    } else if viol > 1e-4 {
                        (SolveStatus::Infeasible, "line search failed at an infeasible point")
                    } else {
                        (SolveStatus::Error, "line search failed")
                    };
                    return self.outcome(status, iter, msg.into());
                }
                Err(e) => return self.outcome(SolveStatus::Error, iter, e.to_string()),
            }
        }
        let e0 = self.optimality_error(0.0);
        let viol = self.unscaled_violation();
        let iters = self.opts.max_iterations;
        if e0 <= tol && viol <= ctol {
            self.outcome(SolveStatus::Optimal, iters, String::new())
        } else if e0 <= 1e2 * tol && viol <= ctol {
            self.outcome(SolveStatus::Acceptable, iters, "iteration limit".into())
        } else {
            self.outcome(SolveStatus::MaxIter, iters, "iteration limit".into())
        }
    }
}

/// `H dx` restricted to free variables.
fn hess_mul(h: &SparseMatrix, col_map: &[Option<usize>], dx: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dx.len()];
    for (idx, (r, c)) in h.pattern.entries().enumerate() {
        if let (Some(fr), Some(fc)) = (col_map[r], col_map[c]) {
            out[fr] += h.values[idx] * dx[fc];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Simple {
        n: usize,
        obj: fn(&[f64]) -> f64,
        cons: fn(&[f64], &mut [f64]),
        m: usize,
        glo: Vec<f64>,
        ghi: Vec<f64>,
        xlo: Vec<f64>,
        xhi: Vec<f64>,
    }

    impl NlpProblem for Simple {
        fn num_variables(&self) -> usize {
            self.n
        }
        fn num_constraints(&self) -> usize {
            self.m
        }
        fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (self.xlo.clone(), self.xhi.clone())
        }
        fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (self.glo.clone(), self.ghi.clone())
        }
        fn objective(&self, z: &[f64]) -> f64 {
            (self.obj)(z)
        }
        fn constraints(&self, z: &[f64], out: &mut [f64]) {
            (self.cons)(z, out)
        }
    }

    fn free(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    #[test]
    fn bound_constrained_quadratic_hits_bound() {
        let p = Simple {
            n: 2,
            obj: |z| (z[0] - 3.0).powi(2) + (z[1] + 1.0).powi(2),
            cons: |_, _| {},
            m: 0,
            glo: vec![],
            ghi: vec![],
            xlo: vec![0.0, 0.0],
            xhi: vec![2.0, 5.0],
        };
        let out = InteriorPoint::default().solve(&p, &[1.0, 1.0], &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::Optimal, "{}", out.message);
        assert!((out.z[0] - 2.0).abs() < 1e-7);
        assert!(out.z[1].abs() < 1e-7);
    }

    #[test]
    fn fixed_variables_are_held() {
        let (lo, hi) = free(2);
        let p = Simple {
            n: 3,
            obj: |z| z[0] * z[0] + z[1] * z[1] + z[2] * z[2],
            cons: |z, out| out[0] = z[0] + z[1] + z[2],
            m: 1,
            glo: vec![3.0],
            ghi: vec![3.0],
            xlo: vec![lo[0], 1.0, lo[1]],
            xhi: vec![hi[0], 1.0, hi[1]],
        };
        let out = InteriorPoint::default().solve(&p, &[0.0, 0.0, 0.0], &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::Optimal, "{}", out.message);
        assert_eq!(out.z[1], 1.0);
        assert!((out.z[0] - 1.0).abs() < 1e-7 && (out.z[2] - 1.0).abs() < 1e-7);
        // grad f + lambda grad g = 0 with grad f = 2 z = 2.
        assert!((out.multipliers[0] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn nonconvex_rosenbrock() {
        let (lo, hi) = free(2);
        let p = Simple {
            n: 2,
            obj: |z| 100.0 * (z[1] - z[0] * z[0]).powi(2) + (1.0 - z[0]).powi(2),
            cons: |_, _| {},
            m: 0,
            glo: vec![],
            ghi: vec![],
            xlo: lo,
            xhi: hi,
        };
        let out = InteriorPoint::default().solve(&p, &[-1.2, 1.0], &SolverOptions::default());
        assert!(out.status.is_usable(), "{:?} {}", out.status, out.message);
        assert!((out.z[0] - 1.0).abs() < 1e-5 && (out.z[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn two_sided_inequality() {
        let (lo, hi) = free(2);
        let p = Simple {
            n: 2,
            obj: |z| -(z[0] + 2.0 * z[1]),
            cons: |z, out| out[0] = z[0] * z[0] + z[1] * z[1],
            m: 1,
            glo: vec![0.5],
            ghi: vec![5.0],
            xlo: lo,
            xhi: hi,
        };
        let out = InteriorPoint::default().solve(&p, &[0.1, 0.1], &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::Optimal, "{}", out.message);
        assert!((out.z[0] - 1.0).abs() < 1e-6 && (out.z[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn evaluator_failure_is_reported() {
        let p = Simple {
            n: 1,
            obj: |z| if z[0] > 0.5 { f64::NAN } else { z[0] },
            cons: |_, _| {},
            m: 0,
            glo: vec![],
            ghi: vec![],
            xlo: vec![0.0],
            xhi: vec![1.0],
        };
        let out = InteriorPoint::default().solve(&p, &[0.9], &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::Error);
        assert!(out.message.contains("objective"));
    }
}

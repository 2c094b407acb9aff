//! Legendre-Gauss-Radau nodes, weights and the interpolation machinery built
//! on top of them.
//!
//! An `N`-point LGR rule has abscissae on `[-1, 1)` with the first node pinned
//! at `-1`; it integrates polynomials of degree `2N - 2` exactly. Collocation
//! intervals carry the `N` LGR points plus the right endpoint as a
//! non-collocated support point, giving `N + 1` support points for a degree
//! `N` state polynomial.
//!
//! Nodes are the roots of `P_{N-1} + P_N`. The `N - 1` interior roots are the
//! zeros of the Jacobi polynomial `P^{(0,1)}_{N-1}`; they come from the
//! eigenvalues of the symmetric Jacobi matrix and are then polished by Newton
//! iteration on `P_{N-1} + P_N`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest supported rule size.
pub const MAX_LGR_DEGREE: usize = 64;

/// An `N`-point Legendre-Gauss-Radau quadrature rule on `[-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LgrRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LgrRule {
    pub fn degree(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]` with the rule mapped affinely.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(half * x + mid))
            .sum::<f64>()
            * half
    }
}

/// Evaluates `(P_{n-1}(x), P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_prev(n: usize, x: f64) -> (f64, f64, f64) {
    if n == 0 {
        return (0.0, 1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1), only used away from +-1
    let dp = nf * (x * p - p_prev) / (x * x - 1.0);
    (p_prev, p, dp)
}

/// `P_{N-1}(x) + P_N(x)` and its derivative.
fn radau_poly(n: usize, x: f64) -> (f64, f64) {
    let (pm1, p, dp) = legendre_with_prev(n, x);
    let dpm1 = if n >= 2 {
        legendre_with_prev(n - 1, x).2
    } else {
        0.0
    };
    (pm1 + p, dpm1 + dp)
}

/// Builds the `N`-point LGR rule.
pub fn lgr_rule(n: usize) -> Result<LgrRule> {
    if n == 0 || n > MAX_LGR_DEGREE {
        return Err(Error::DegreeOutOfRange(n));
    }
    let mut nodes = Vec::with_capacity(n);
    nodes.push(-1.0);
    if n >= 2 {
        let m = n - 1;
        // Jacobi matrix of P^{(0,1)}: diagonal 1/((2k+1)(2k+3)),
        // off-diagonal sqrt(k(k+1))/(2k+1).
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            let kf = k as f64;
            jac[(k, k)] = 1.0 / ((2.0 * kf + 1.0) * (2.0 * kf + 3.0));
            if k + 1 < m {
                let j = kf + 1.0;
                let off = (j * (j + 1.0)).sqrt() / (2.0 * j + 1.0);
                jac[(k, k + 1)] = off;
                jac[(k + 1, k)] = off;
            }
        }
        let mut roots: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
        roots.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        for x in roots.iter_mut() {
            for _ in 0..20 {
                let (g, dg) = radau_poly(n, *x);
                if g.abs() < 1e-14 {
                    break;
                }
                let step = g / dg;
                *x -= step;
                if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                    break;
                }
            }
        }
        nodes.extend(roots);
    }
    let nf = (n * n) as f64;
    let weights = nodes
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == 0 {
                2.0 / nf
            } else {
                let (pm1, _, _) = legendre_with_prev(n, x);
                (1.0 - x) / (nf * pm1 * pm1)
            }
        })
        .collect();
    Ok(LgrRule { nodes, weights })
}

/// Collocation grid of one mesh interval `[left, right]` in mesh-fraction
/// coordinates: the mapped LGR points plus the right endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalGrid {
    left: f64,
    right: f64,
    colloc: Vec<f64>,
}

impl IntervalGrid {
    pub fn new(rule: &LgrRule, left: f64, right: f64) -> Result<Self> {
        if !(left < right) {
            return Err(Error::InvalidMesh(format!(
                "interval [{left}, {right}] is empty"
            )));
        }
        let half = 0.5 * (right - left);
        let colloc = rule
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &x)| if i == 0 { left } else { left + half * (x + 1.0) })
            .collect();
        Ok(Self { left, right, colloc })
    }

    /// Grid for an `n`-point interval.
    pub fn with_degree(n: usize, left: f64, right: f64) -> Result<Self> {
        Self::new(&lgr_rule(n)?, left, right)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn degree(&self) -> usize {
        self.colloc.len()
    }

    pub fn colloc_pts(&self) -> &[f64] {
        &self.colloc
    }

    pub fn endpoint(&self) -> f64 {
        self.right
    }

    /// Collocation points followed by the endpoint.
    pub fn support(&self) -> Vec<f64> {
        let mut s = self.colloc.clone();
        s.push(self.right);
        s
    }
}

/// Barycentric weights `1 / prod_{k != j} (s_j - s_k)`.
pub fn barycentric_weights(support: &[f64]) -> Result<Vec<f64>> {
    let n = support.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                let d = support[j] - support[k];
                if d == 0.0 {
                    return Err(Error::DuplicateSupport(j.max(k)));
                }
                w[j] /= d;
            }
        }
    }
    Ok(w)
}

/// Lagrange differentiation matrix: `N x (N+1)`, entry `(i, j)` is the
/// derivative of the `j`-th support basis polynomial at collocation point `i`.
pub type DiffMatrix = DMatrix<f64>;

/// LGR integration matrix: `M x M`, row `j` integrates from the interval's
/// left end to support point `j + 1`.
pub type IntegMatrix = DMatrix<f64>;

/// Differentiation matrix over the full support of `grid`, in the grid's own
/// coordinate (derivatives per unit mesh fraction).
pub fn diff_matrix(grid: &IntervalGrid) -> DiffMatrix {
    let support = grid.support();
    let n = grid.degree();
    let bw = barycentric_weights(&support).expect("LGR support points are distinct");
    let mut d = DMatrix::zeros(n, n + 1);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..=n {
            if j != i {
                let v = (bw[j] / bw[i]) / (support[i] - support[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Integration matrix for the `M` LGR points of `grid`.
pub fn integ_matrix(rule: &LgrRule, grid: &IntervalGrid) -> Result<IntegMatrix> {
    let m = rule.degree();
    if grid.degree() != m {
        return Err(Error::DimensionMismatch(format!(
            "rule has {m} points, grid has {}",
            grid.degree()
        )));
    }
    let pts = grid.colloc_pts();
    let bw = barycentric_weights(pts)?;
    let support = grid.support();
    let mut out = DMatrix::zeros(m, m);
    let mut unit = vec![0.0; m];
    for l in 0..m {
        unit.iter_mut().for_each(|v| *v = 0.0);
        unit[l] = 1.0;
        for j in 0..m {
            out[(j, l)] = rule.integrate(support[0], support[j + 1], |x| {
                barycentric_eval(pts, &bw, &unit, x)
            });
        }
    }
    Ok(out)
}

fn barycentric_eval(support: &[f64], bw: &[f64], values: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&s, &w), &v) in support.iter().zip(bw).zip(values) {
        let d = x - s;
        if d == 0.0 {
            return v;
        }
        let t = w / d;
        num += t * v;
        den += t;
    }
    num / den
}

/// Reusable barycentric interpolant over a fixed support.
#[derive(Debug, Clone)]
pub struct Interpolant {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl Interpolant {
    pub fn new(support: &[f64]) -> Result<Self> {
        Ok(Self {
            weights: barycentric_weights(support)?,
            support: support.to_vec(),
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn eval(&self, values: &[f64], x: f64) -> f64 {
        barycentric_eval(&self.support, &self.weights, values, x)
    }

    /// Row of basis values `l_j(x)`; multiplying it into a value vector gives
    /// the interpolant at `x`.
    pub fn basis_row(&self, x: f64) -> Vec<f64> {
        let n = self.support.len();
        if let Some(hit) = self.support.iter().position(|&s| s == x) {
            let mut row = vec![0.0; n];
            row[hit] = 1.0;
            return row;
        }
        let terms: Vec<f64> = self
            .support
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w / (x - s))
            .collect();
        let den: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / den).collect()
    }
}

/// Evaluates the Lagrange interpolant of `(support, values)` at each query.
pub fn lagrange_eval(support: &[f64], values: &[f64], query: &[f64]) -> Result<Vec<f64>> {
    if support.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} support points, {} values",
            support.len(),
            values.len()
        )));
    }
    let interp = Interpolant::new(support)?;
    Ok(query.iter().map(|&x| interp.eval(values, x)).collect())
}

/// Maps the computational coordinate `tau` in `[-1, 1]` to time.
pub fn tau_to_t(tau: f64, t0: f64, tf: f64) -> Result<f64> {
    if !(tf > t0) {
        return Err(Error::InvalidTimeInterval { t0, tf });
    }
    Ok(0.5 * (tf - t0) * tau + 0.5 * (tf + t0))
}

//! The interior-point solver on a small constrained problem.

use jumpmesh::nlp::{solve, NlpProblem, SolverOptions};

/// Minimize `z0 + z1` on the unit disk with `z0 >= -0.5`.
struct Disk;

impl NlpProblem for Disk {
    fn num_variables(&self) -> usize {
        2
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-0.5, f64::NEG_INFINITY], vec![f64::INFINITY; 2])
    }
    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![f64::NEG_INFINITY], vec![1.0])
    }
    fn objective(&self, z: &[f64]) -> f64 {
        z[0] + z[1]
    }
    fn constraints(&self, z: &[f64], out: &mut [f64]) {
        out[0] = z[0] * z[0] + z[1] * z[1];
    }
}

fn main() {
    let out = solve(&Disk, &[0.0, 0.0], &SolverOptions::default());
    println!("status {} after {} iterations", out.status.as_str(), out.iterations);
    println!("z = ({:.9}, {:.9}), expected (-0.5, {:.9})", out.z[0], out.z[1], -(0.75f64).sqrt());
    println!("objective {:.9}, multiplier {:.6}", out.objective, out.multipliers[0]);
    println!("kkt residual {:.1e}, violation {:.1e}", out.kkt_residual, out.constraint_violation);
}

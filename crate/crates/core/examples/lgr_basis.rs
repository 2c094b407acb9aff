//! Radau nodes and weights, and differentiation on one interval.

use jumpmesh::basis::{diff_matrix, lagrange_eval, lgr_rule, IntervalGrid};

fn main() -> jumpmesh::Result<()> {
    for n in [1, 2, 3, 5] {
        let rule = lgr_rule(n)?;
        println!("N = {n}");
        for (x, w) in rule.nodes().iter().zip(rule.weights()) {
            println!("  node {x:>20.16}  weight {w:.16}");
        }
    }

    // exp on [0, 1]: quadrature, derivative at the collocation points and
    // interpolation between them.
    let rule = lgr_rule(6)?;
    let integral = rule.integrate(0.0, 1.0, f64::exp);
    println!("\nint_0^1 e^t dt = {integral:.15} (error {:.1e})", (integral - (1f64.exp() - 1.0)).abs());

    let grid = IntervalGrid::new(&rule, 0.0, 1.0)?;
    let support = grid.support();
    let values: Vec<f64> = support.iter().map(|&t| t.exp()).collect();
    let d = diff_matrix(&grid);
    for (i, &t) in grid.colloc_pts().iter().enumerate() {
        let slope: f64 = (0..support.len()).map(|j| d[(i, j)] * values[j]).sum();
        println!("  t = {t:.4}: D y = {slope:.10}, exact {:.10}", t.exp());
    }
    let mid = lagrange_eval(&support, &values, &[0.5])?;
    println!("  interpolated e^0.5 = {:.10}, exact {:.10}", mid[0], 0.5f64.exp());
    Ok(())
}

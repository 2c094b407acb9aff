//! Jump function approximations on sampled data with a step.

use jumpmesh::jumpfun::{divided_diff_jump, minmod_jump};

fn main() {
    let h = 0.02;
    let points: Vec<f64> = (0..=50).map(|i| i as f64 * h).collect();
    let step = 0.513;
    let f = |t: f64| t.sin() + if t > step { 0.75 } else { 0.0 };
    let values: Vec<f64> = points.iter().map(|&t| f(t)).collect();
    let orders: Vec<usize> = (1..=6).collect();

    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "t", "L1", "L3", "L6", "minmod");
    for w in points.windows(2).skip(20).take(10) {
        let t = 0.5 * (w[0] + w[1]);
        let l = |m| divided_diff_jump(&points, &values, t, m).unwrap_or(f64::NAN);
        let mm = minmod_jump(&points, &values, t, &orders);
        let mark = if w[0] < step && step <= w[1] { "  <- jump" } else { "" };
        println!("{t:>8.3} {:>10.5} {:>10.5} {:>10.5} {mm:>10.5}{mark}", l(1), l(3), l(6));
    }
}

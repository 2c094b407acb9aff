//! A user-defined problem: rest-to-rest transfer over unit distance in
//! minimum time when the thrust can push twice as hard as it can brake.
//! The optimum accelerates until t = 1/sqrt(3) and brakes until sqrt(3).

use jumpmesh::driver::{run, RunConfig};
use jumpmesh::mesh::SegmentKind;
use jumpmesh::problems::{Bounds, Dims, OcpProblem, Range};

struct Lopsided {
    bounds: Bounds,
}

impl Lopsided {
    fn new() -> Self {
        Self {
            bounds: Bounds {
                state: vec![Range::FREE, Range::FREE],
                control: vec![Range::new(-1.0, 2.0)],
                initial_state: vec![Range::fixed(0.0), Range::fixed(0.0)],
                final_state: vec![Range::fixed(1.0), Range::fixed(0.0)],
                t0: Range::fixed(0.0),
                tf: Range::new(0.1, 10.0),
            },
        }
    }
}

impl OcpProblem for Lopsided {
    fn name(&self) -> &str {
        "lopsided"
    }
    fn dims(&self) -> Dims {
        Dims {
            n_y: 2,
            n_u: 1,
            n_b: 0,
            n_c: 0,
        }
    }
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }
    fn mayer(&self, _y0: &[f64], _t0: f64, _yf: &[f64], tf: f64) -> f64 {
        tf
    }
    fn dynamics(&self, y: &[f64], u: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = y[1];
        out[1] = u[0];
    }
}

fn main() -> jumpmesh::Result<()> {
    let problem = Lopsided::new();
    // A coarse first estimate can miss the switch by more than its gap;
    // a larger safety factor widens the bracket so the switch stays inside.
    for mu in [1.0, 2.0] {
        let mut config = RunConfig::default();
        config.jump.mu = mu;
        let out = run(&problem, &config)?;
        let h = &out.history;
        let tf = h.iterations.last().map_or(f64::NAN, |r| r.tf);
        println!(
            "mu = {mu}: {} at M = {}, tf = {tf:.8} (exact {:.8})",
            h.status.as_str(),
            h.final_iteration(),
            3f64.sqrt()
        );
        let mesh = h.final_mesh();
        let to_t = |tau: f64| 0.5 * tf * (tau + 1.0);
        for seg in mesh.segments().iter().filter(|s| s.kind == SegmentKind::Nonsmooth) {
            let (lo, hi) = seg.span(mesh);
            let d = seg.bracket_point(mesh).unwrap_or(f64::NAN);
            println!(
                "  bracket t in [{:.5}, {:.5}] split at {:.5}; switch at {:.5}",
                to_t(lo),
                to_t(hi),
                to_t(d),
                1.0 / 3f64.sqrt()
            );
        }
    }
    Ok(())
}

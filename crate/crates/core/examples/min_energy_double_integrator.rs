//! Smooth double integrator: no discontinuities should be reported, and the
//! mesh history is the same with and without detection.

use jumpmesh::driver::{run, RunConfig};
use jumpmesh::problems::make_min_energy_double_integrator;

fn main() -> jumpmesh::Result<()> {
    let problem = make_min_energy_double_integrator();
    for (label, detect) in [("with detection", true), ("without detection", false)] {
        let config = RunConfig {
            epsilon: 1e-7,
            detect_jumps: detect,
            ..RunConfig::default()
        };
        let out = run(&problem, &config)?;
        let last = out.history.iterations.last().expect("one iteration");
        println!(
            "{label}: {} after M = {}, cost {:.12}, detections {}, K = {}",
            out.history.status.as_str(),
            out.history.final_iteration(),
            last.cost,
            out.history.total_detections(),
            last.mesh.num_intervals()
        );
    }
    Ok(())
}

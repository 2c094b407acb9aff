//! Bang-bang double integrator: the switch at t = 1 is found and bracketed.

use jumpmesh::driver::{run, RunConfig};
use jumpmesh::mesh::SegmentKind;
use jumpmesh::problems::make_min_time_double_integrator;

fn main() -> jumpmesh::Result<()> {
    let problem = make_min_time_double_integrator(1.0)?;
    // Nine intervals keep the switch off the initial mesh points.
    let config = RunConfig {
        initial_intervals: 9,
        ..RunConfig::default()
    };
    let out = run(&problem, &config)?;
    for it in &out.history.iterations {
        println!(
            "M = {}: K = {:2}, tf = {:.9}, max error {:.2e}, detections {:?}",
            it.iteration,
            it.mesh.num_intervals(),
            it.tf,
            it.max_error(),
            it.detections.locations()
        );
    }
    let mesh = out.history.final_mesh();
    for seg in mesh.segments().iter().filter(|s| s.kind == SegmentKind::Nonsmooth) {
        let (lo, hi) = seg.span(mesh);
        println!("bracket [{lo:.6}, {hi:.6}] around {:.6}", seg.bracket_point(mesh).unwrap_or(f64::NAN));
    }
    println!("status {}", out.history.status.as_str());
    Ok(())
}

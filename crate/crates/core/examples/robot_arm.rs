//! Robot arm reorientation with and without discontinuity handling.
//!
//! `RUST_LOG=info` shows the per-iteration progress.

use jumpmesh::driver::{run, RunConfig};
use jumpmesh::mesh::SegmentKind;
use jumpmesh::problems::make_robot_arm;

fn main() -> jumpmesh::Result<()> {
    env_logger::init();
    let problem = make_robot_arm();
    for detect in [true, false] {
        let config = RunConfig {
            detect_jumps: detect,
            ..RunConfig::default()
        };
        let out = run(&problem, &config)?;
        let h = &out.history;
        let mesh = h.final_mesh();
        println!(
            "detection {detect}: {} at M = {}, tf = {:.8}, K = {}, N = {}, {:.1} s",
            h.status.as_str(),
            h.final_iteration(),
            h.iterations.last().map_or(f64::NAN, |r| r.tf),
            mesh.num_intervals(),
            mesh.total_points(),
            h.wall_time()
        );
        for seg in mesh.segments().iter().filter(|s| s.kind == SegmentKind::Nonsmooth) {
            let (lo, hi) = seg.span(mesh);
            println!("  bracket [{lo:+.5}, {hi:+.5}]");
        }
    }
    Ok(())
}

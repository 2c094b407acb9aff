//! One refinement step by hand: a detection is bracketed, the remaining
//! failing intervals get ph refinement, and the log replays the change.

use jumpmesh::error_est::{ErrorReport, IntervalError};
use jumpmesh::jumpfun::{Detection, DetectionReport};
use jumpmesh::mesh::Mesh;
use jumpmesh::refine::{refine, RefineConfig, RefinementLog};

fn errors(e: &[f64]) -> ErrorReport {
    ErrorReport {
        intervals: e
            .iter()
            .map(|&e_max| IntervalError {
                points: Vec::new(),
                absolute: Vec::new(),
                relative: Vec::new(),
                e_max,
            })
            .collect(),
        denominators: vec![1.0],
    }
}

fn show(label: &str, mesh: &Mesh) {
    println!("{label}");
    for k in 0..mesh.num_intervals() {
        let (a, b) = mesh.interval(k);
        println!("  [{a:+.4}, {b:+.4}] P = {:2} {:?}", mesh.degrees()[k], mesh.tags()[k]);
    }
}

fn main() -> jumpmesh::Result<()> {
    let mesh = Mesh::uniform(4, 4)?;
    let report = errors(&[1e-8, 3e-3, 2e-5, 1e-9]);
    let detections = DetectionReport {
        detections: vec![Detection {
            location: -0.3,
            lower: -0.32,
            upper: -0.28,
            component: 0,
            minmod: 0.8,
            gap: (-0.32, -0.28),
        }],
    };
    let step = refine(&mesh, &report, &detections, &RefineConfig::default())?;
    show("before", &mesh);
    show("after the nonsmooth pass", &step.intermediate);
    show("after the smooth pass", &step.mesh);

    let text = step.log.to_text();
    println!("log\n{text}");
    let replayed = RefinementLog::parse(&text)?.replay(&mesh)?;
    println!("replay reproduces the mesh: {}", replayed == step.mesh);
    Ok(())
}

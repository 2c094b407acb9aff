//! ph refinement of the smooth segments of the intermediate mesh.

use crate::error::{Error, Result};
use crate::error_est::ErrorReport;
use crate::jumpfun::DetectionReport;
use crate::mesh::{IntervalTag, Mesh, SegmentKind};

use super::{ActionKind, Piece, RefineConfig, RefinementLog, Work};

/// Which old interval an intermediate interval inherits its error from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapCase {
    /// Overlaps the open interior of this old smooth interval.
    Overlap(usize),
    /// Identical to this old nonsmooth interval.
    Identical(usize),
    /// Created by a bracket update; left alone.
    Unmapped,
}

pub fn map_interval(old: &Mesh, left: f64, right: f64) -> Result<MapCase> {
    let mut hit = None;
    for k in 0..old.num_intervals() {
        if old.tags()[k] != IntervalTag::Smooth {
            continue;
        }
        let (a, b) = old.interval(k);
        if left < b && right > a {
            if hit.is_some() {
                return Err(Error::InvalidMesh(format!(
                    "interval [{left}, {right}] overlaps several old smooth intervals"
                )));
            }
            hit = Some(k);
        }
    }
    if let Some(k) = hit {
        return Ok(MapCase::Overlap(k));
    }
    for k in 0..old.num_intervals() {
        if old.tags()[k] != IntervalTag::Smooth && old.interval(k) == (left, right) {
            return Ok(MapCase::Identical(k));
        }
    }
    Ok(MapCase::Unmapped)
}

/// `P + ceil(log10(e / epsilon))` for an interval with error `e > epsilon`.
pub fn ph_degree(p: usize, e: f64, epsilon: f64) -> usize {
    p + (e / epsilon).log10().ceil().max(1.0) as usize
}

/// Old-interval errors with intervals holding a detection set to zero.
fn effective_errors(old: &Mesh, report: &ErrorReport, detections: &DetectionReport) -> Vec<f64> {
    let mut e = report.e_max();
    for d in &detections.detections {
        e[old.find_interval(d.location)] = 0.0;
    }
    e
}

pub(crate) fn smooth_pass(
    work: &mut Work,
    old: &Mesh,
    report: &ErrorReport,
    detections: &DetectionReport,
    config: &RefineConfig,
) -> Result<()> {
    let e = effective_errors(old, report, detections);
    let mesh = work.to_mesh()?;
    let segments = mesh.segments();
    for seg in segments.iter().rev() {
        if seg.kind != SegmentKind::Smooth {
            continue;
        }
        for i in seg.intervals().rev() {
            let p = work.pieces[i];
            let k = match map_interval(old, p.left, p.right)? {
                MapCase::Overlap(k) | MapCase::Identical(k) => k,
                MapCase::Unmapped => continue,
            };
            if e[k] <= config.epsilon {
                continue;
            }
            let target = ph_degree(p.degree, e[k], config.epsilon);
            if target <= config.p_max {
                work.splice(
                    ActionKind::DegreeRaised,
                    i,
                    1,
                    vec![Piece::smooth(p.left, p.right, target)],
                );
            } else {
                let n = target.div_ceil(config.p_min);
                let width = p.right - p.left;
                let new = (0..n)
                    .map(|j| {
                        let a = if j == 0 { p.left } else { p.left + width * j as f64 / n as f64 };
                        let b = if j + 1 == n {
                            p.right
                        } else {
                            p.left + width * (j + 1) as f64 / n as f64
                        };
                        Piece::smooth(a, b, config.p_min)
                    })
                    .collect();
                work.splice(ActionKind::SmoothSubdivided, i, 1, new);
            }
        }
    }
    Ok(())
}

/// Refines the smooth segments of `intermediate` using the errors of
/// `old`, the mesh the solution and `report` belong to.
pub fn smooth_refine(
    old: &Mesh,
    intermediate: &Mesh,
    report: &ErrorReport,
    detections: &DetectionReport,
    config: &RefineConfig,
) -> Result<(Mesh, RefinementLog)> {
    config.check()?;
    let mut work = Work::from_mesh(intermediate);
    smooth_pass(&mut work, old, report, detections, config)?;
    Ok((work.to_mesh()?, work.log))
}


#[cfg(test)]
mod pass_tests {
    use super::*;
    use crate::refine::fixtures::{dets, errors, mesh};
    use crate::refine::refine;

    fn config() -> RefineConfig {
        RefineConfig::default()
    }

    #[test]
    fn no_detection_passing_mesh_is_unchanged() {
        let m = mesh(&[-1.0, -0.2, 0.0, 0.2, 1.0], &[6, 4, 4, 5], "slrs");
        let r = refine(&m, &errors(&[1e-7; 4]), &dets(&[]), &config()).unwrap();
        assert_eq!(r.mesh, m);
        assert_eq!(r.intermediate, m);
        assert!(r.log.actions.is_empty());
    }

    #[test]
    fn pure_ph_without_detections() {
        let m = Mesh::uniform(3, 4).unwrap();
        let r = refine(&m, &errors(&[1e-3, 1e-8, 1e12]), &dets(&[]), &config()).unwrap();
        assert_eq!(r.intermediate, m);
        // 1e12 / 1e-6 -> P' = 22 > 14 -> ceil(22 / 3) = 8 pieces of 3.
        let mut degrees = vec![7, 4];
        degrees.extend([3; 8]);
        assert_eq!(r.mesh.degrees(), &degrees[..]);
        assert_eq!(r.mesh.num_intervals(), 10);
        let f = r.mesh.fractions();
        for w in f[3..].windows(2) {
            assert!(((w[1] - w[0]) - (2.0 / 3.0) / 8.0).abs() < 1e-15);
        }
        assert_eq!(r.log.count(ActionKind::DegreeRaised), 1);
        assert_eq!(r.log.count(ActionKind::SmoothSubdivided), 1);
        assert_eq!(r.log.replay(&m).unwrap(), r.mesh);
    }

    #[test]
    fn detection_zeroes_error_of_its_interval() {
        let m = Mesh::uniform(4, 6).unwrap();
        let r = refine(
            &m,
            &errors(&[1e-8, 1e-8, 1e-2, 1e-8]),
            &dets(&[(0.25, 0.2, 0.3)]),
            &config(),
        )
        .unwrap();
        assert_eq!(r.mesh, r.intermediate);
        assert_eq!(r.mesh.degrees(), &[6, 6, 6, 4, 4, 6, 6]);
    }

    #[test]
    fn update_created_interval_is_left_alone() {
        let m = mesh(&[-1.0, -0.8, -0.6, 1.0], &[4, 4, 7], "lrs");
        let r = refine(
            &m,
            &errors(&[1e-2, 1e-2, 1e-8]),
            &dets(&[(-0.75, -0.9, -0.7)]),
            &config(),
        )
        .unwrap();
        assert_eq!(r.intermediate.fractions(), &[-1.0, -0.9, -0.75, -0.7, 1.0]);
        assert_eq!(r.mesh, r.intermediate);
    }

    #[test]
    fn relabeled_intervals_are_ph_refined() {
        let m = mesh(&[-1.0, -0.2, 0.0, 0.2, 1.0], &[6, 4, 4, 5], "slrs");
        let r = refine(&m, &errors(&[0.0, 1e-3, 0.0, 0.0]), &dets(&[]), &config()).unwrap();
        assert_eq!(r.intermediate.nonsmooth_count(), 0);
        assert_eq!(r.mesh.degrees(), &[6, 7, 4, 5]);
        assert_eq!(r.log.replay(&m).unwrap(), r.mesh);
    }
}

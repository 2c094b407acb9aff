//! Bracketing, bracket updates and relabeling.

use crate::error::{Error, Result};
use crate::error_est::ErrorReport;
use crate::jumpfun::{Detection, DetectionReport};
use crate::mesh::{IntervalTag, Mesh, Segment, SegmentKind};

use super::{ActionKind, Piece, RefinementLog, Work, BRACKET_DEGREE};

/// Smallest half-width allowed on either side of a detection.
pub fn min_half_width(d: &Detection) -> f64 {
    (1e-3 * (d.gap.1 - d.gap.0)).max(1e-6)
}

/// Widens bounds closer to the location than [`min_half_width`].
pub fn widen(report: &DetectionReport) -> DetectionReport {
    let detections = report
        .detections
        .iter()
        .map(|d| {
            let w = min_half_width(d);
            let mut d = d.clone();
            d.lower = d.lower.min(d.location - w);
            d.upper = d.upper.max(d.location + w);
            d
        })
        .collect();
    DetectionReport { detections }
}

/// Index into `mesh.segments()` of the segment containing `tau`.
fn segment_of(mesh: &Mesh, segments: &[Segment], tau: f64) -> usize {
    let k = mesh.find_interval(tau);
    segments
        .iter()
        .position(|s| s.intervals().contains(&k))
        .expect("segments partition the mesh")
}

/// Detection indices grouped by the segment that contains them.
fn group(mesh: &Mesh, report: &DetectionReport) -> Vec<Vec<usize>> {
    let segments = mesh.segments();
    let mut groups = vec![Vec::new(); segments.len()];
    for (i, d) in report.detections.iter().enumerate() {
        groups[segment_of(mesh, &segments, d.location)].push(i);
    }
    groups
}

/// Confines the outer bounds of each segment's detections to the segment
/// and splits overlapping neighbors at the midpoint of their locations.
pub fn adjust_bounds(report: &DetectionReport, mesh: &Mesh) -> DetectionReport {
    let mut detections = report.detections.clone();
    detections.sort_by(|a, b| a.location.total_cmp(&b.location));
    let sorted = DetectionReport { detections };
    let mut out = sorted.clone();
    let segments = mesh.segments();
    for (s, idx) in group(mesh, &sorted).iter().enumerate() {
        let Some((&first, &last)) = idx.first().zip(idx.last()) else {
            continue;
        };
        let (lo, hi) = segments[s].span(mesh);
        let ds = &mut out.detections;
        ds[first].lower = ds[first].lower.max(lo);
        ds[last].upper = ds[last].upper.min(hi);
        for w in idx.windows(2) {
            let (a, b) = (w[0], w[1]);
            if ds[a].upper > ds[b].lower {
                let mid = 0.5 * (ds[a].location + ds[b].location);
                ds[a].upper = mid;
                ds[b].lower = mid;
            }
        }
    }
    out
}

/// `(lower, location, upper, min_half_width)` for each detection.
type Cut = (f64, f64, f64, f64);

fn cuts(dets: &[&Detection]) -> Vec<Cut> {
    dets.iter()
        .map(|d| (d.lower, d.location, d.upper, min_half_width(d)))
        .collect()
}

/// Closes gaps narrower than the minimum width between consecutive cuts.
fn close_gaps(cuts: &mut [Cut]) {
    for i in 1..cuts.len() {
        let gap = cuts[i].0 - cuts[i - 1].2;
        let w = cuts[i].3.max(cuts[i - 1].3);
        if gap > 0.0 && gap < w {
            let mid = 0.5 * (cuts[i].0 + cuts[i - 1].2);
            cuts[i - 1].2 = mid;
            cuts[i].0 = mid;
        }
    }
}

fn bracket_pieces(c: &Cut) -> [Piece; 2] {
    [
        Piece {
            left: c.0,
            right: c.1,
            degree: BRACKET_DEGREE,
            tag: IntervalTag::BracketLeft,
        },
        Piece {
            left: c.1,
            right: c.2,
            degree: BRACKET_DEGREE,
            tag: IntervalTag::BracketRight,
        },
    ]
}

/// Brackets detections inside the smooth run `first..first + len`.
fn bracket_run(work: &mut Work, first: usize, len: usize, dets: &[&Detection]) {
    let old: Vec<Piece> = work.pieces[first..first + len].to_vec();
    let mut bounds: Vec<f64> = old.iter().map(|p| p.left).collect();
    bounds.push(old[len - 1].right);

    let mut cuts = cuts(dets);
    // Absorb slivers between a bracket end and an old mesh point.
    for i in 0..cuts.len() {
        let floor = if i == 0 { f64::NEG_INFINITY } else { cuts[i - 1].2 };
        let ceil = if i + 1 < cuts.len() { cuts[i + 1].0 } else { f64::INFINITY };
        let (lo, _, hi, w) = cuts[i];
        if let Some(&t) = bounds.iter().rev().find(|&&t| t <= lo) {
            if lo - t > 0.0 && lo - t < w && t >= floor {
                cuts[i].0 = t;
            }
        }
        if let Some(&t) = bounds.iter().find(|&&t| t >= hi) {
            if t - hi > 0.0 && t - hi < w && t <= ceil {
                cuts[i].2 = t;
            }
        }
    }
    close_gaps(&mut cuts);

    let mut new: Vec<Piece> = Vec::new();
    for p in &old {
        let mut cursor = p.left;
        for c in &cuts {
            if c.2 <= p.left || c.0 >= p.right {
                continue;
            }
            if c.0 > cursor {
                new.push(Piece::smooth(cursor, c.0, p.degree));
            }
            cursor = cursor.max(c.2);
        }
        if cursor < p.right {
            new.push(Piece::smooth(cursor, p.right, p.degree));
        }
    }
    for c in &cuts {
        new.extend(bracket_pieces(c));
    }
    new.sort_by(|a, b| a.left.total_cmp(&b.left));
    work.splice(ActionKind::BracketCreated, first, len, new);
}

/// Replaces the bracket starting at piece `i` with brackets around `dets`.
fn update_run(work: &mut Work, i: usize, dets: &[&Detection]) {
    let t_m = work.pieces[i].left;
    let t_m2 = work.pieces[i + 1].right;
    let mut cuts = cuts(dets);
    let n = cuts.len();
    if cuts[0].0 - t_m > 0.0 && cuts[0].0 - t_m < cuts[0].3 {
        cuts[0].0 = t_m;
    }
    if t_m2 - cuts[n - 1].2 > 0.0 && t_m2 - cuts[n - 1].2 < cuts[n - 1].3 {
        cuts[n - 1].2 = t_m2;
    }
    close_gaps(&mut cuts);

    let mut first = i;
    let mut last = i + 2;
    let mut new = Vec::new();
    if cuts[0].0 > t_m {
        match i.checked_sub(1).map(|j| work.pieces[j]) {
            Some(left) if left.tag == IntervalTag::Smooth => {
                first = i - 1;
                new.push(Piece::smooth(left.left, cuts[0].0, left.degree));
            }
            _ => new.push(Piece::smooth(t_m, cuts[0].0, BRACKET_DEGREE)),
        }
    }
    for (j, c) in cuts.iter().enumerate() {
        if j > 0 && cuts[j - 1].2 < c.0 {
            new.push(Piece::smooth(cuts[j - 1].2, c.0, BRACKET_DEGREE));
        }
        new.extend(bracket_pieces(c));
    }
    if cuts[n - 1].2 < t_m2 {
        match work.pieces.get(i + 2).copied() {
            Some(right) if right.tag == IntervalTag::Smooth => {
                last = i + 3;
                new.push(Piece::smooth(cuts[n - 1].2, right.right, right.degree));
            }
            _ => new.push(Piece::smooth(cuts[n - 1].2, t_m2, BRACKET_DEGREE)),
        }
    }
    work.splice(ActionKind::BracketUpdated, first, last - first, new);
}

fn relabel_run(work: &mut Work, i: usize) {
    let new = vec![
        Piece {
            tag: IntervalTag::Smooth,
            ..work.pieces[i]
        },
        Piece {
            tag: IntervalTag::Smooth,
            ..work.pieces[i + 1]
        },
    ];
    work.splice(ActionKind::BracketRelabeled, i, 2, new);
}

fn locate_bracket(work: &Work, mesh: &Mesh, seg: &Segment) -> Result<usize> {
    let (lo, hi) = seg.span(mesh);
    work.find_left(lo)
        .filter(|&i| {
            work.pieces[i].tag == IntervalTag::BracketLeft
                && work.pieces.get(i + 1).is_some_and(|p| p.right == hi)
        })
        .ok_or_else(|| Error::InvalidMesh(format!("bracket [{lo}, {hi}] lost during refinement")))
}

/// The nonsmooth pass on already adjusted detections.
pub(crate) fn nonsmooth_pass(
    work: &mut Work,
    mesh: &Mesh,
    adjusted: &DetectionReport,
    report: &ErrorReport,
    epsilon: f64,
) -> Result<()> {
    let segments = mesh.segments();
    let groups = group(mesh, adjusted);
    let dets = |s: usize| -> Vec<&Detection> {
        groups[s].iter().map(|&i| &adjusted.detections[i]).collect()
    };
    for s in (0..segments.len()).rev() {
        if segments[s].kind == SegmentKind::Smooth && !groups[s].is_empty() {
            bracket_run(work, segments[s].first, segments[s].len, &dets(s));
        }
    }
    for (s, seg) in segments.iter().enumerate() {
        if seg.kind == SegmentKind::Nonsmooth && !groups[s].is_empty() {
            let i = locate_bracket(work, mesh, seg)?;
            update_run(work, i, &dets(s));
        }
    }
    let e = report.e_max();
    for (s, seg) in segments.iter().enumerate() {
        let idle = seg.kind == SegmentKind::Nonsmooth && groups[s].is_empty();
        if idle && seg.intervals().any(|k| e[k] > epsilon) {
            let i = locate_bracket(work, mesh, seg)?;
            relabel_run(work, i);
        }
    }
    Ok(())
}

/// Brackets detections that lie on smooth segments of `mesh`.
pub fn bracket(mesh: &Mesh, detections: &DetectionReport) -> Result<(Mesh, RefinementLog)> {
    let segments = mesh.segments();
    let groups = group(mesh, detections);
    let mut work = Work::from_mesh(mesh);
    for s in (0..segments.len()).rev() {
        if groups[s].is_empty() {
            continue;
        }
        if segments[s].kind != SegmentKind::Smooth {
            return Err(Error::InvalidMesh(format!(
                "detection at {} lies on a nonsmooth segment",
                detections.detections[groups[s][0]].location
            )));
        }
        let mut dets: Vec<&Detection> = groups[s].iter().map(|&i| &detections.detections[i]).collect();
        dets.sort_by(|a, b| a.location.total_cmp(&b.location));
        bracket_run(&mut work, segments[s].first, segments[s].len, &dets);
    }
    Ok((work.to_mesh()?, work.log))
}

/// Contracts the nonsmooth `segment` around `detections`, which must lie
/// inside it with adjusted bounds.
pub fn update_bracket(
    mesh: &Mesh,
    segment: &Segment,
    detections: &[Detection],
) -> Result<(Mesh, RefinementLog)> {
    if segment.kind != SegmentKind::Nonsmooth || detections.is_empty() {
        return Err(Error::InvalidMesh(
            "update needs a nonsmooth segment and at least one detection".into(),
        ));
    }
    let (lo, hi) = segment.span(mesh);
    if detections.iter().any(|d| !(lo <= d.lower && d.location < hi && d.upper <= hi)) {
        return Err(Error::InvalidMesh(format!(
            "detections must lie inside the bracket [{lo}, {hi}]"
        )));
    }
    let mut dets: Vec<&Detection> = detections.iter().collect();
    dets.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut work = Work::from_mesh(mesh);
    update_run(&mut work, segment.first, &dets);
    Ok((work.to_mesh()?, work.log))
}

/// Relabels as smooth every nonsmooth segment without a detection in which
/// at least one interval misses the tolerance.
pub fn relabel(
    mesh: &Mesh,
    detections: &DetectionReport,
    report: &ErrorReport,
    epsilon: f64,
) -> Result<(Mesh, RefinementLog)> {
    let e = report.e_max();
    let groups = group(mesh, detections);
    let mut work = Work::from_mesh(mesh);
    for (s, seg) in mesh.segments().iter().enumerate() {
        let idle = seg.kind == SegmentKind::Nonsmooth && groups[s].is_empty();
        if idle && seg.intervals().any(|k| e[k] > epsilon) {
            relabel_run(&mut work, seg.first);
        }
    }
    Ok((work.to_mesh()?, work.log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::fixtures::{dets, errors, mesh};

    #[test]
    fn adjust_keeps_interior_detection() {
        let m = Mesh::uniform(4, 4).unwrap();
        let r = dets(&[(0.25, 0.1, 0.4)]);
        assert_eq!(adjust_bounds(&r, &m), r);
    }

    #[test]
    fn adjust_splits_overlap_at_midpoint() {
        let m = Mesh::uniform(4, 4).unwrap();
        let r = adjust_bounds(&dets(&[(0.3, 0.25, 0.4), (0.2, 0.1, 0.35)]), &m);
        assert_eq!(r.locations(), vec![0.2, 0.3]);
        assert_eq!(r.detections[0].upper, 0.25);
        assert_eq!(r.detections[1].lower, 0.25);
        assert_eq!(r.detections[0].lower, 0.1);
        assert_eq!(r.detections[1].upper, 0.4);
    }

    #[test]
    fn adjust_clamps_to_segment() {
        let m = mesh(&[-1.0, -0.5, 0.1, 1.0], &[4, 4, 4], "lrs");
        let r = adjust_bounds(&dets(&[(0.3, 0.05, 0.4)]), &m);
        assert_eq!(r.detections[0].lower, 0.1);
        // Inside the leading bracket [-1, 0.1].
        let r = adjust_bounds(&dets(&[(-0.3, -0.6, 0.4)]), &m);
        assert_eq!((r.detections[0].lower, r.detections[0].upper), (-0.6, 0.1));
    }

    #[test]
    fn bracket_inside_one_interval() {
        let m = Mesh::uniform(4, 6).unwrap();
        let (new, log) = bracket(&m, &dets(&[(0.25, 0.2, 0.3)])).unwrap();
        assert_eq!(new.fractions(), &[-1.0, -0.5, 0.0, 0.2, 0.25, 0.3, 0.5, 1.0]);
        assert_eq!(new.degrees(), &[6, 6, 6, 4, 4, 6, 6]);
        assert_eq!(new.nonsmooth_count(), 1);
        assert_eq!(log.replay(&m).unwrap(), new);
    }

    #[test]
    fn bracket_spanning_two_intervals() {
        let m = mesh(&[-1.0, 0.0, 1.0], &[5, 7], "ss");
        let (new, log) = bracket(&m, &dets(&[(0.05, -0.1, 0.2)])).unwrap();
        assert_eq!(new.fractions(), &[-1.0, -0.1, 0.05, 0.2, 1.0]);
        assert_eq!(new.degrees(), &[5, 4, 4, 7]);
        assert_eq!(log.replay(&m).unwrap(), new);
    }

    #[test]
    fn bracket_two_detections_in_order() {
        let m = Mesh::uniform(2, 4).unwrap();
        let (new, _) = bracket(&m, &dets(&[(0.5, 0.4, 0.6), (-0.5, -0.6, -0.4)])).unwrap();
        let segs = new.segments();
        let brackets: Vec<f64> = segs
            .iter()
            .filter(|s| s.kind == SegmentKind::Nonsmooth)
            .map(|s| s.bracket_point(&new).unwrap())
            .collect();
        assert_eq!(brackets, vec![-0.5, 0.5]);
    }

    #[test]
    fn bracket_rejects_nonsmooth_target() {
        let m = mesh(&[-1.0, 0.0, 1.0], &[4, 4], "lr");
        assert!(bracket(&m, &dets(&[(0.1, 0.0, 0.2)])).is_err());
    }

    #[test]
    fn update_single_detection_reuses_points() {
        let m = mesh(&[-1.0, -0.2, 0.0, 0.2, 1.0], &[6, 4, 4, 5], "slrs");
        let seg = m.segments()[1];
        let (new, log) = update_bracket(&m, &seg, &[dets(&[(0.05, 0.0, 0.1)]).detections[0].clone()]).unwrap();
        assert_eq!(new.fractions(), &[-1.0, 0.0, 0.05, 0.1, 1.0]);
        assert_eq!(new.degrees(), &[6, 4, 4, 5]);
        assert_eq!(new.num_intervals(), m.num_intervals());
        assert_eq!(log.replay(&m).unwrap(), new);
    }

    #[test]
    fn update_at_edge_creates_leading_interval() {
        let m = mesh(&[-1.0, -0.8, -0.6, 1.0], &[4, 4, 7], "lrs");
        let seg = m.segments()[0];
        let d = dets(&[(-0.75, -0.9, -0.7)]).detections;
        let (new, _) = update_bracket(&m, &seg, &d).unwrap();
        assert_eq!(new.fractions(), &[-1.0, -0.9, -0.75, -0.7, 1.0]);
        assert_eq!(new.degrees(), &[4, 4, 4, 7]);
        assert_eq!(new.tags()[0], IntervalTag::Smooth);
    }

    #[test]
    fn update_with_two_detections() {
        let m = mesh(&[-1.0, -0.4, 0.0, 0.4, 1.0], &[5, 4, 4, 5], "slrs");
        let seg = m.segments()[1];
        let d = dets(&[(-0.2, -0.3, -0.1), (0.2, 0.1, 0.3)]).detections;
        let (new, log) = update_bracket(&m, &seg, &d).unwrap();
        assert_eq!(new.fractions(), &[-1.0, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 1.0]);
        assert_eq!(new.degrees(), &[5, 4, 4, 4, 4, 4, 5]);
        assert_eq!(new.nonsmooth_count(), 2);
        assert_eq!(log.actions.len(), 1);
        // Two brackets and the connecting interval are new; the flanks were stretched.
        assert_eq!(log.actions[0].degrees.len(), 7);
        assert_eq!(log.actions[0].removed, 4);
    }

    #[test]
    fn relabel_changes_tags_only() {
        let m = mesh(&[-1.0, -0.2, 0.0, 0.2, 1.0], &[6, 4, 4, 5], "slrs");
        let none = dets(&[]);
        let (same, log) = relabel(&m, &none, &errors(&[0.0, 1e-9, 1e-9, 0.0]), 1e-6).unwrap();
        assert_eq!(same, m);
        assert!(log.actions.is_empty());

        let (new, log) = relabel(&m, &none, &errors(&[0.0, 1e-3, 0.0, 0.0]), 1e-6).unwrap();
        assert_eq!(new.fractions(), m.fractions());
        assert_eq!(new.degrees(), m.degrees());
        assert_eq!(new.nonsmooth_count(), 0);
        assert_eq!(new.segments().len(), 1);
        assert_eq!(log.count(ActionKind::BracketRelabeled), 1);

        let kept = dets(&[(0.0, -0.1, 0.1)]);
        let (same, _) = relabel(&m, &kept, &errors(&[0.0, 1e-3, 0.0, 0.0]), 1e-6).unwrap();
        assert_eq!(same, m);
    }
}

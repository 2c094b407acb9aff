//! Random refinement scenarios and the invariants every refinement must keep.
#![allow(dead_code)]

use jumpmesh::error_est::{ErrorReport, IntervalError};
use jumpmesh::jumpfun::{Detection, DetectionReport};
use jumpmesh::mesh::{IntervalTag, Mesh, SegmentKind};
use jumpmesh::refine::{adjust_bounds, refine, relabel, widen, RefineConfig};
use rand::Rng;

pub const P_MIN: usize = 3;
pub const P_MAX: usize = 14;
pub const EPSILON: f64 = 1e-6;

/// Raw draws from which a scenario is assembled; kept plain so that proptest
/// can generate and shrink them directly.
#[derive(Debug, Clone)]
pub struct Params {
    /// Relative interval widths as `log10` values.
    pub log_widths: Vec<f64>,
    pub degrees: Vec<usize>,
    /// Whether a bracket starts at interval `k` (ignored where impossible).
    pub bracket_starts: Vec<bool>,
    /// `log10` of each interval error.
    pub log_errors: Vec<f64>,
    /// `(gap selector, run length, mu)` per candidate detection.
    pub detections: Vec<(f64, usize, f64)>,
}

impl Params {
    pub fn random(rng: &mut impl Rng) -> Self {
        let k = rng.random_range(1..=10);
        Self {
            log_widths: (0..k).map(|_| rng.random_range(-5.0..0.0)).collect(),
            degrees: (0..k).map(|_| rng.random_range(P_MIN..=P_MAX)).collect(),
            bracket_starts: (0..k).map(|_| rng.random_bool(0.3)).collect(),
            log_errors: (0..k).map(|_| rng.random_range(-10.0..2.0)).collect(),
            detections: (0..rng.random_range(0..=4))
                .map(|_| {
                    (
                        rng.random_range(0.0..1.0),
                        rng.random_range(1..=3),
                        rng.random_range(1.0..=2.0),
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub mesh: Mesh,
    pub errors: ErrorReport,
    pub detections: DetectionReport,
}

impl Scenario {
    /// Builds the mesh, then flags runs of gaps between its collocation
    /// points next to failing intervals, the way the detector reports them.
    pub fn build(p: &Params) -> Self {
        let k = p.log_widths.len();
        let widths: Vec<f64> = p.log_widths.iter().map(|l| 10f64.powf(*l)).collect();
        let total: f64 = widths.iter().sum();
        let mut fractions = vec![-1.0];
        let mut acc = 0.0;
        for w in &widths[..k - 1] {
            acc += w;
            fractions.push(-1.0 + 2.0 * acc / total);
        }
        fractions.push(1.0);
        let mut tags = vec![IntervalTag::Smooth; k];
        let mut i = 0;
        while i + 1 < k {
            if p.bracket_starts[i] {
                tags[i] = IntervalTag::BracketLeft;
                tags[i + 1] = IntervalTag::BracketRight;
                i += 2;
            } else {
                i += 1;
            }
        }
        let mesh = Mesh::new(fractions, p.degrees.clone(), tags).expect("generated mesh");
        let e: Vec<f64> = p.log_errors.iter().map(|l| 10f64.powf(*l)).collect();
        let errors = ErrorReport {
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
        };

        let tau = mesh.collocation_points().expect("grid");
        let mut owner = Vec::new();
        for (k, &d) in mesh.degrees().iter().enumerate() {
            owner.extend(std::iter::repeat_n(k, d));
        }
        let eligible: Vec<usize> = (0..tau.len() - 1)
            .filter(|&j| e[owner[j]] > EPSILON || e[owner[j + 1]] > EPSILON)
            .collect();
        let mut used = vec![false; tau.len()];
        let mut detections = Vec::new();
        for &(sel, len, mu) in &p.detections {
            if eligible.is_empty() {
                break;
            }
            let start = eligible[((sel * eligible.len() as f64) as usize).min(eligible.len() - 1)];
            let run: Vec<usize> = (start..start + len)
                .take_while(|j| eligible.contains(j))
                .collect();
            // Runs never touch, as the detector merges adjacent flags.
            let lo_gap = run[0];
            let hi_gap = run[run.len() - 1];
            let blocked = (lo_gap.saturating_sub(1)..=(hi_gap + 1).min(tau.len() - 1)).any(|j| used[j]);
            if blocked {
                continue;
            }
            used[lo_gap..=hi_gap].fill(true);
            let peak = run[run.len() / 2];
            let location = 0.5 * (tau[peak] + tau[peak + 1]);
            let lo = tau[lo_gap];
            let hi = tau[hi_gap + 1];
            detections.push(Detection {
                location,
                lower: location - mu * (location - lo),
                upper: location + mu * (hi - location),
                component: 0,
                minmod: 1.0,
                gap: (tau[peak], tau[peak + 1]),
            });
        }
        detections.sort_by(|a, b| a.location.total_cmp(&b.location));
        Self {
            mesh,
            errors,
            detections: DetectionReport { detections },
        }
    }
}

fn contains(span: (f64, f64), x: f64) -> bool {
    span.0 <= x && x <= span.1
}

/// Checks one scenario; the error names the first violated invariant.
pub fn check(s: &Scenario) -> Result<(), String> {
    let config = RefineConfig {
        epsilon: EPSILON,
        p_min: P_MIN,
        p_max: P_MAX,
    };
    let r = refine(&s.mesh, &s.errors, &s.detections, &config).map_err(|e| format!("refine failed: {e}"))?;

    r.intermediate
        .validate(P_MIN, P_MAX)
        .map_err(|e| format!("intermediate mesh: {e}"))?;
    r.mesh.validate(P_MIN, P_MAX).map_err(|e| format!("final mesh: {e}"))?;

    let replayed = r.log.replay(&s.mesh).map_err(|e| format!("replay failed: {e}"))?;
    if replayed != r.mesh {
        return Err("replayed log does not reproduce the refined mesh".into());
    }

    // Bound adjustment: clamped to the owning segment, overlaps split at the
    // midpoint of the two locations, everything else untouched.
    let widened = widen(&s.detections);
    let adjusted = adjust_bounds(&widened, &s.mesh);
    if adjusted != r.detections {
        return Err("refine reports different adjusted detections".into());
    }
    let segments = s.mesh.segments();
    let owner = |x: f64| {
        let k = s.mesh.find_interval(x);
        segments.iter().position(|g| g.intervals().contains(&k)).unwrap()
    };
    for (i, (a, w)) in adjusted.detections.iter().zip(&widened.detections).enumerate() {
        let seg = owner(a.location);
        let span = segments[seg].span(&s.mesh);
        if !(a.lower < a.location && a.location < a.upper) {
            return Err(format!("detection {i} does not straddle its location"));
        }
        if !(contains(span, a.lower) && contains(span, a.upper)) {
            return Err(format!("detection {i} leaves its segment {span:?}"));
        }
        let prev = i.checked_sub(1).map(|j| &adjusted.detections[j]).filter(|b| owner(b.location) == seg);
        let next = adjusted.detections.get(i + 1).filter(|b| owner(b.location) == seg);
        let expect_lower = match prev {
            Some(b) if widened.detections[i - 1].upper > w.lower => 0.5 * (a.location + b.location),
            Some(_) => w.lower,
            None => w.lower.max(span.0),
        };
        let expect_upper = match next {
            Some(b) if w.upper > widened.detections[i + 1].lower => 0.5 * (a.location + b.location),
            Some(_) => w.upper,
            None => w.upper.min(span.1),
        };
        if a.lower != expect_lower || a.upper != expect_upper {
            return Err(format!(
                "detection {i}: bounds ({}, {}) expected ({expect_lower}, {expect_upper})",
                a.lower, a.upper
            ));
        }
    }

    // Every detection sits at the bracket point of a nonsmooth segment that
    // covers its adjusted bounds and stays inside the original segment, and
    // that bracket survives the smooth pass.
    let brackets = |m: &Mesh| -> Vec<((f64, f64), f64)> {
        m.segments()
            .iter()
            .filter(|g| g.kind == SegmentKind::Nonsmooth)
            .map(|g| (g.span(m), g.bracket_point(m).unwrap()))
            .collect()
    };
    let mid = brackets(&r.intermediate);
    let fin = brackets(&r.mesh);
    for (i, d) in adjusted.detections.iter().enumerate() {
        let Some(&(span, _)) = mid.iter().find(|(_, p)| *p == d.location) else {
            return Err(format!("detection {i} at {} has no bracket", d.location));
        };
        if !(span.0 <= d.lower && d.upper <= span.1) {
            return Err(format!("bracket {span:?} misses bounds of detection {i}"));
        }
        let outer = segments[owner(d.location)].span(&s.mesh);
        if !(contains(outer, span.0) && contains(outer, span.1)) {
            return Err(format!("bracket {span:?} leaves segment {outer:?}"));
        }
    }
    if mid != fin {
        return Err("smooth pass changed a nonsmooth segment".into());
    }

    // Relabeling touches only tags, and only turns brackets smooth.
    let (relabeled, _) =
        relabel(&s.mesh, &adjusted, &s.errors, EPSILON).map_err(|e| format!("relabel failed: {e}"))?;
    if relabeled.fractions() != s.mesh.fractions() || relabeled.degrees() != s.mesh.degrees() {
        return Err("relabel moved points or changed degrees".into());
    }
    for (a, b) in s.mesh.tags().iter().zip(relabeled.tags()) {
        if a != b && *b != IntervalTag::Smooth {
            return Err("relabel created a bracket".into());
        }
    }
    Ok(())
}

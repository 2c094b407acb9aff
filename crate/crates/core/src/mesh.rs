//! Meshes on the computational domain `[-1, 1]`.
//!
//! Each interval carries a collocation degree and a tag. Smooth intervals
//! group into maximal smooth segments; a `BracketLeft` interval followed by
//! a `BracketRight` interval forms one nonsmooth segment whose shared
//! boundary is the pinned discontinuity estimate.

use std::fmt;
use std::ops::Range as IndexRange;

use serde::{Deserialize, Serialize};

use crate::basis::{IntervalGrid, MAX_LGR_DEGREE};
use crate::error::{Error, Result};

pub const DEFAULT_P_MIN: usize = 3;
pub const DEFAULT_P_MAX: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalTag {
    Smooth,
    BracketLeft,
    BracketRight,
}

impl IntervalTag {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalTag::Smooth => "smooth",
            IntervalTag::BracketLeft => "bracket_left",
            IntervalTag::BracketRight => "bracket_right",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(IntervalTag::Smooth),
            "bracket_left" => Ok(IntervalTag::BracketLeft),
            "bracket_right" => Ok(IntervalTag::BracketRight),
            other => Err(Error::Parse(format!("unknown interval tag `{other}`"))),
        }
    }

    pub fn segment_kind(self) -> SegmentKind {
        match self {
            IntervalTag::Smooth => SegmentKind::Smooth,
            _ => SegmentKind::Nonsmooth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Smooth,
    Nonsmooth,
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentKind::Smooth => "smooth",
            SegmentKind::Nonsmooth => "nonsmooth",
        })
    }
}

/// A contiguous run of intervals `first..first + len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub first: usize,
    pub len: usize,
}

impl Segment {
    pub fn intervals(&self) -> IndexRange<usize> {
        self.first..self.first + self.len
    }

    /// Domain covered by the segment.
    pub fn span(&self, mesh: &Mesh) -> (f64, f64) {
        (mesh.fractions[self.first], mesh.fractions[self.first + self.len])
    }

    /// Shared boundary of a bracket; `None` for smooth segments.
    pub fn bracket_point(&self, mesh: &Mesh) -> Option<f64> {
        match self.kind {
            SegmentKind::Nonsmooth => Some(mesh.fractions[self.first + 1]),
            SegmentKind::Smooth => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    fractions: Vec<f64>,
    degrees: Vec<usize>,
    tags: Vec<IntervalTag>,
}

impl Mesh {
    pub fn new(fractions: Vec<f64>, degrees: Vec<usize>, tags: Vec<IntervalTag>) -> Result<Self> {
        let mesh = Self {
            fractions,
            degrees,
            tags,
        };
        mesh.check_structure()?;
        Ok(mesh)
    }

    /// A single smooth segment of `k` equal intervals of degree `p`.
    pub fn uniform(k: usize, p: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidMesh("need at least one interval".into()));
        }
        let mut fractions: Vec<f64> = (0..=k).map(|i| -1.0 + 2.0 * i as f64 / k as f64).collect();
        fractions[k] = 1.0;
        Self::new(fractions, vec![p; k], vec![IntervalTag::Smooth; k])
    }

    /// All-smooth mesh on the given fractions.
    pub fn smooth(fractions: Vec<f64>, degrees: Vec<usize>) -> Result<Self> {
        let k = degrees.len();
        Self::new(fractions, degrees, vec![IntervalTag::Smooth; k])
    }

    fn check_structure(&self) -> Result<()> {
        let k = self.degrees.len();
        if k == 0 {
            return Err(Error::InvalidMesh("need at least one interval".into()));
        }
        if self.fractions.len() != k + 1 || self.tags.len() != k {
            return Err(Error::InvalidMesh(format!(
                "{} fractions and {} tags for {k} intervals",
                self.fractions.len(),
                self.tags.len()
            )));
        }
        if self.fractions[0] != -1.0 || self.fractions[k] != 1.0 {
            return Err(Error::InvalidMesh("mesh must start at -1 and end at +1".into()));
        }
        for (i, w) in self.fractions.windows(2).enumerate() {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidMesh(format!(
                    "fractions not strictly increasing at {i}: {} >= {}",
                    w[0], w[1]
                )));
            }
        }
        for (i, &p) in self.degrees.iter().enumerate() {
            if p == 0 || p > MAX_LGR_DEGREE {
                return Err(Error::InvalidMesh(format!("interval {i} has degree {p}")));
            }
        }
        let mut i = 0;
        while i < k {
            match self.tags[i] {
                IntervalTag::Smooth => i += 1,
                IntervalTag::BracketLeft => {
                    if i + 1 >= k || self.tags[i + 1] != IntervalTag::BracketRight {
                        return Err(Error::InvalidMesh(format!(
                            "bracket starting at interval {i} has no right half"
                        )));
                    }
                    i += 2;
                }
                IntervalTag::BracketRight => {
                    return Err(Error::InvalidMesh(format!(
                        "interval {i} closes a bracket that was never opened"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Structural validity plus degrees inside `[p_min, p_max]`.
    pub fn validate(&self, p_min: usize, p_max: usize) -> Result<()> {
        self.check_structure()?;
        for (i, &p) in self.degrees.iter().enumerate() {
            if p < p_min || p > p_max {
                return Err(Error::InvalidMesh(format!(
                    "interval {i} degree {p} outside [{p_min}, {p_max}]"
                )));
            }
        }
        Ok(())
    }

    pub fn num_intervals(&self) -> usize {
        self.degrees.len()
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn tags(&self) -> &[IntervalTag] {
        &self.tags
    }

    /// `(T_{k-1}, T_k)` for interval `k` (zero-based).
    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.fractions[k], self.fractions[k + 1])
    }

    /// Total number of collocation points.
    pub fn total_points(&self) -> usize {
        self.degrees.iter().sum()
    }

    pub fn segments(&self) -> Vec<Segment> {
        let k = self.num_intervals();
        let mut out = Vec::new();
        let mut i = 0;
        while i < k {
            if self.tags[i] == IntervalTag::BracketLeft {
                out.push(Segment {
                    kind: SegmentKind::Nonsmooth,
                    first: i,
                    len: 2,
                });
                i += 2;
            } else {
                let start = i;
                while i < k && self.tags[i] == IntervalTag::Smooth {
                    i += 1;
                }
                out.push(Segment {
                    kind: SegmentKind::Smooth,
                    first: start,
                    len: i - start,
                });
            }
        }
        out
    }

    pub fn nonsmooth_count(&self) -> usize {
        self.tags
            .iter()
            .filter(|&&t| t == IntervalTag::BracketLeft)
            .count()
    }

    /// Index of the interval containing `tau`; right boundaries belong to the
    /// next interval except at `+1`.
    pub fn find_interval(&self, tau: f64) -> usize {
        let k = self.num_intervals();
        let idx = self.fractions[1..k].partition_point(|&f| f <= tau);
        idx.min(k - 1)
    }

    pub fn grid(&self, k: usize) -> Result<IntervalGrid> {
        IntervalGrid::with_degree(self.degrees[k], self.fractions[k], self.fractions[k + 1])
    }

    pub fn grids(&self) -> Result<Vec<IntervalGrid>> {
        (0..self.num_intervals()).map(|k| self.grid(k)).collect()
    }

    /// All collocation points in increasing order.
    pub fn collocation_points(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.total_points());
        for g in self.grids()? {
            out.extend_from_slice(g.colloc_pts());
        }
        Ok(out)
    }
}

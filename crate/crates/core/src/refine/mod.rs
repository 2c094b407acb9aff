//! Mesh refinement: a nonsmooth pass that brackets detected
//! discontinuities, followed by a smooth ph pass on the remaining smooth
//! segments.
//!
//! Every structural change is a splice of the interval list and is recorded
//! in a [`RefinementLog`], so the new mesh can be rebuilt from the old one.

mod nonsmooth;
mod smooth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use nonsmooth::{adjust_bounds, bracket, relabel, update_bracket, widen};
pub use smooth::{map_interval, ph_degree, smooth_refine, MapCase};

use crate::error::{Error, Result};
use crate::error_est::ErrorReport;
use crate::jumpfun::DetectionReport;
use crate::mesh::{IntervalTag, Mesh, DEFAULT_P_MAX, DEFAULT_P_MIN};

/// Collocation points given to each half of a new bracket and to new
/// smooth intervals created while updating a bracket.
pub const BRACKET_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub epsilon: f64,
    pub p_min: usize,
    pub p_max: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            p_min: DEFAULT_P_MIN,
            p_max: DEFAULT_P_MAX,
        }
    }
}

impl RefineConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.p_min == 0 || self.p_min > self.p_max {
            return Err(Error::InvalidConfig(format!(
                "degree range [{}, {}] is empty",
                self.p_min, self.p_max
            )));
        }
        if !(self.p_min..=self.p_max).contains(&BRACKET_DEGREE) {
            return Err(Error::InvalidConfig(format!(
                "degree range [{}, {}] must include the bracket degree {BRACKET_DEGREE}",
                self.p_min, self.p_max
            )));
        }
        Ok(())
    }
}

/// One mesh interval during refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Piece {
    pub left: f64,
    pub right: f64,
    pub degree: usize,
    pub tag: IntervalTag,
}

impl Piece {
    pub fn smooth(left: f64, right: f64, degree: usize) -> Self {
        Self {
            left,
            right,
            degree,
            tag: IntervalTag::Smooth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    BracketCreated,
    BracketUpdated,
    BracketRelabeled,
    SmoothSubdivided,
    DegreeRaised,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::BracketCreated => "bracket_created",
            ActionKind::BracketUpdated => "bracket_updated",
            ActionKind::BracketRelabeled => "bracket_relabeled",
            ActionKind::SmoothSubdivided => "smooth_subdivided",
            ActionKind::DegreeRaised => "degree_raised",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "bracket_created" => ActionKind::BracketCreated,
            "bracket_updated" => ActionKind::BracketUpdated,
            "bracket_relabeled" => ActionKind::BracketRelabeled,
            "smooth_subdivided" => ActionKind::SmoothSubdivided,
            "degree_raised" => ActionKind::DegreeRaised,
            other => return Err(Error::Parse(format!("unknown action `{other}`"))),
        })
    }
}

/// Replacement of intervals `first..first + removed` of the mesh as it
/// stood when the action ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub first: usize,
    pub removed: usize,
    /// Boundaries of the removed intervals.
    pub before: Vec<f64>,
    /// Boundaries of the inserted intervals.
    pub fractions: Vec<f64>,
    pub degrees: Vec<usize>,
    pub tags: Vec<IntervalTag>,
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn split<T: FromStr>(field: &str) -> Result<Vec<T>> {
    field
        .split(';')
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Parse(format!("bad list entry `{s}` in `{field}`")))
        })
        .collect()
}

/// `kind first removed before fractions degrees tags`, lists separated by
/// `;`. Floats use the shortest round-trip representation.
impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tags: Vec<&str> = self.tags.iter().map(|t| t.as_str()).collect();
        write!(
            f,
            "{} {} {} {} {} {} {}",
            self.kind.as_str(),
            self.first,
            self.removed,
            join(&self.before),
            join(&self.fractions),
            join(&self.degrees),
            tags.join(";")
        )
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(Error::Parse(format!("expected 7 fields in `{line}`")));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad index `{s}`")))
        };
        Ok(Action {
            kind: ActionKind::parse(fields[0])?,
            first: int(fields[1])?,
            removed: int(fields[2])?,
            before: split(fields[3])?,
            fractions: split(fields[4])?,
            degrees: split(fields[5])?,
            tags: fields[6]
                .split(';')
                .map(IntervalTag::parse)
                .collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RefinementLog {
    pub actions: Vec<Action>,
}

impl RefinementLog {
    pub fn count(&self, kind: ActionKind) -> usize {
        self.actions.iter().filter(|a| a.kind == kind).count()
    }

    /// Applies the recorded splices to `mesh`.
    pub fn replay(&self, mesh: &Mesh) -> Result<Mesh> {
        let mut work = Work::from_mesh(mesh);
        for a in &self.actions {
            work.apply(a)?;
        }
        work.to_mesh()
    }

    pub fn to_text(&self) -> String {
        self.actions.iter().map(|a| format!("{a}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let actions = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        Ok(Self { actions })
    }
}

/// Mutable interval list that logs every splice.
#[derive(Debug, Clone)]
pub(crate) struct Work {
    pub pieces: Vec<Piece>,
    pub log: RefinementLog,
}

impl Work {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let pieces = (0..mesh.num_intervals())
            .map(|k| {
                let (left, right) = mesh.interval(k);
                Piece {
                    left,
                    right,
                    degree: mesh.degrees()[k],
                    tag: mesh.tags()[k],
                }
            })
            .collect();
        Self {
            pieces,
            log: RefinementLog::default(),
        }
    }

    pub fn to_mesh(&self) -> Result<Mesh> {
        let mut fractions: Vec<f64> = self.pieces.iter().map(|p| p.left).collect();
        fractions.push(self.pieces.last().map_or(1.0, |p| p.right));
        Mesh::new(
            fractions,
            self.pieces.iter().map(|p| p.degree).collect(),
            self.pieces.iter().map(|p| p.tag).collect(),
        )
    }

    /// Index of the piece starting exactly at `left`.
    pub fn find_left(&self, left: f64) -> Option<usize> {
        self.pieces.iter().position(|p| p.left == left)
    }

    pub fn splice(&mut self, kind: ActionKind, first: usize, removed: usize, new: Vec<Piece>) {
        let old = &self.pieces[first..first + removed];
        let mut before: Vec<f64> = old.iter().map(|p| p.left).collect();
        before.push(old[removed - 1].right);
        let mut fractions: Vec<f64> = new.iter().map(|p| p.left).collect();
        fractions.push(new[new.len() - 1].right);
        debug_assert_eq!(before[0], fractions[0]);
        debug_assert_eq!(before[removed], fractions[new.len()]);
        let action = Action {
            kind,
            first,
            removed,
            before,
            fractions,
            degrees: new.iter().map(|p| p.degree).collect(),
            tags: new.iter().map(|p| p.tag).collect(),
        };
        self.pieces.splice(first..first + removed, new);
        self.log.actions.push(action);
    }

    fn apply(&mut self, a: &Action) -> Result<()> {
        let n = a.degrees.len();
        if a.removed == 0
            || a.first + a.removed > self.pieces.len()
            || a.before.len() != a.removed + 1
            || a.fractions.len() != n + 1
            || a.tags.len() != n
            || n == 0
        {
            return Err(Error::InvalidMesh(format!("malformed action `{a}`")));
        }
        let old = &self.pieces[a.first..a.first + a.removed];
        let matches = old.iter().zip(&a.before).all(|(p, &f)| p.left == f)
            && old[a.removed - 1].right == a.before[a.removed];
        if !matches {
            return Err(Error::InvalidMesh(format!(
                "action `{a}` does not match the mesh it is applied to"
            )));
        }
        let new: Vec<Piece> = (0..n)
            .map(|i| Piece {
                left: a.fractions[i],
                right: a.fractions[i + 1],
                degree: a.degrees[i],
                tag: a.tags[i],
            })
            .collect();
        self.pieces.splice(a.first..a.first + a.removed, new);
        Ok(())
    }
}

/// Result of one refinement iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    /// Mesh after the nonsmooth pass.
    pub intermediate: Mesh,
    pub mesh: Mesh,
    /// Detections after widening and bound adjustment.
    pub detections: DetectionReport,
    pub log: RefinementLog,
}

/// Runs the nonsmooth pass (adjust, bracket, update, relabel) and then the
/// smooth pass on `mesh`.
pub fn refine(
    mesh: &Mesh,
    report: &ErrorReport,
    detections: &DetectionReport,
    config: &RefineConfig,
) -> Result<Refinement> {
    config.check()?;
    if report.intervals.len() != mesh.num_intervals() {
        return Err(Error::DimensionMismatch(format!(
            "error report has {} intervals, mesh has {}",
            report.intervals.len(),
            mesh.num_intervals()
        )));
    }
    let adjusted = adjust_bounds(&widen(detections), mesh);
    let mut work = Work::from_mesh(mesh);
    nonsmooth::nonsmooth_pass(&mut work, mesh, &adjusted, report, config.epsilon)?;
    let intermediate = work.to_mesh()?;
    smooth::smooth_pass(&mut work, mesh, report, &adjusted, config)?;
    let new_mesh = work.to_mesh()?;
    Ok(Refinement {
        intermediate,
        mesh: new_mesh,
        detections: adjusted,
        log: work.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_text_round_trip() {
        let a = Action {
            kind: ActionKind::BracketCreated,
            first: 2,
            removed: 1,
            before: vec![-0.2, 0.1],
            fractions: vec![-0.2, -0.05, 0.0 + 1e-17, 0.1],
            degrees: vec![4, 4, 4],
            tags: vec![IntervalTag::BracketLeft, IntervalTag::BracketRight, IntervalTag::Smooth],
        };
        let line = a.to_string();
        let back: Action = line.parse().unwrap();
        assert_eq!(back, a);
        assert!("nonsense 1 2".parse::<Action>().is_err());
    }

    #[test]
    fn replay_rejects_mismatched_mesh() {
        let mesh = Mesh::uniform(4, 4).unwrap();
        let mut work = Work::from_mesh(&mesh);
        work.splice(
            ActionKind::DegreeRaised,
            1,
            1,
            vec![Piece::smooth(-0.5, 0.0, 7)],
        );
        let log = work.log.clone();
        assert_eq!(log.replay(&mesh).unwrap(), work.to_mesh().unwrap());
        let other = Mesh::uniform(5, 4).unwrap();
        assert!(log.replay(&other).is_err());
        assert_eq!(RefinementLog::parse(&log.to_text()).unwrap(), log);
    }

    #[test]
    fn config_rejects_bad_ranges() {
        assert!(RefineConfig::default().check().is_ok());
        let bad = RefineConfig {
            p_min: 5,
            ..RefineConfig::default()
        };
        assert!(bad.check().is_err());
        let bad = RefineConfig {
            epsilon: 0.0,
            ..RefineConfig::default()
        };
        assert!(bad.check().is_err());
    }
}

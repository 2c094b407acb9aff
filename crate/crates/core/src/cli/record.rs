//! Serialized run records and the text outputs derived from them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::{RunConfig, RunHistory, RunStatus};
use crate::error::{Error, Result};
use crate::jumpfun::Detection;
use crate::mesh::{IntervalTag, Mesh};
use crate::nlp::SolveStatus;
use crate::transcription::CollocationSolution;

/// Everything that determined a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub problem: String,
    pub run: RunConfig,
    pub seed: u64,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationEntry {
    pub iteration: usize,
    /// Mesh points on `[-1, 1]`.
    pub fractions: Vec<f64>,
    /// The same mesh points mapped to time with this iteration's `t0`, `tf`.
    pub times: Vec<f64>,
    pub degrees: Vec<usize>,
    pub tags: Vec<IntervalTag>,
    pub e_max: Vec<f64>,
    pub detections: Vec<Detection>,
    pub solver_status: SolveStatus,
    pub solver_iterations: usize,
    pub cost: f64,
    pub t0: f64,
    pub tf: f64,
}

impl IterationEntry {
    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::new(self.fractions.clone(), self.degrees.clone(), self.tags.clone())
    }
}

/// Final solution sampled on its own grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalGrid {
    pub cost: f64,
    pub t0: f64,
    pub tf: f64,
    /// State support points: every collocation point plus `tau = 1`.
    pub state_tau: Vec<f64>,
    pub state_t: Vec<f64>,
    /// One row per state support point.
    pub states: Vec<Vec<f64>>,
    pub control_tau: Vec<f64>,
    pub control_t: Vec<f64>,
    /// One row per collocation point.
    pub controls: Vec<Vec<f64>>,
}

impl FinalGrid {
    pub fn from_solution(sol: &CollocationSolution) -> Self {
        let mut state_tau = Vec::new();
        let mut states = Vec::new();
        for iv in &sol.intervals {
            state_tau.extend_from_slice(iv.colloc_pts());
            states.extend(iv.states[..iv.degree()].iter().cloned());
        }
        state_tau.push(1.0);
        states.push(sol.final_state().to_vec());
        let (control_tau, controls) = sol.collocation_controls();
        Self {
            cost: sol.cost,
            t0: sol.t0,
            tf: sol.tf,
            state_t: state_tau.iter().map(|&t| sol.time_at(t)).collect(),
            state_tau,
            states,
            control_t: control_tau.iter().map(|&t| sol.time_at(t)).collect(),
            control_tau,
            controls,
        }
    }
}

/// Wall-clock measurements; the only part of a record that varies
/// between identical invocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_times: Vec<f64>,
    pub median: f64,
}

impl Timing {
    pub fn new(wall_times: Vec<f64>) -> Self {
        let mut sorted = wall_times.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = match n {
            0 => 0.0,
            _ if n % 2 == 1 => sorted[n / 2],
            _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
        };
        Self { wall_times, median }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ConfigEcho,
    pub status: RunStatus,
    pub iterations: Vec<IterationEntry>,
    pub solution: Option<FinalGrid>,
    pub timing: Timing,
}

impl RunRecord {
    pub fn new(
        config: ConfigEcho,
        history: &RunHistory,
        solution: Option<&CollocationSolution>,
        timing: Timing,
    ) -> Self {
        let iterations = history
            .iterations
            .iter()
            .map(|r| {
                let map = |tau: f64| 0.5 * (r.tf - r.t0) * tau + 0.5 * (r.tf + r.t0);
                IterationEntry {
                    iteration: r.iteration,
                    fractions: r.mesh.fractions().to_vec(),
                    times: r.mesh.fractions().iter().map(|&t| map(t)).collect(),
                    degrees: r.mesh.degrees().to_vec(),
                    tags: r.mesh.tags().to_vec(),
                    e_max: r.e_max.clone(),
                    detections: r.detections.detections.clone(),
                    solver_status: r.status,
                    solver_iterations: r.solver_iterations,
                    cost: r.cost,
                    t0: r.t0,
                    tf: r.tf,
                }
            })
            .collect();
        Self {
            config,
            status: history.status,
            iterations,
            solution: solution.map(FinalGrid::from_solution),
            timing,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    /// Refinement counter of the last solved mesh.
    pub fn final_iteration(&self) -> usize {
        self.iterations.last().map_or(0, |e| e.iteration)
    }

    pub fn final_intervals(&self) -> usize {
        self.iterations.last().map_or(0, |e| e.degrees.len())
    }

    pub fn final_points(&self) -> usize {
        self.iterations.last().map_or(0, |e| e.degrees.iter().sum())
    }

    pub fn final_nonsmooth_segments(&self) -> usize {
        self.iterations.last().map_or(0, |e| {
            e.tags.iter().filter(|&&t| t == IntervalTag::BracketLeft).count()
        })
    }

    pub fn total_detections(&self) -> usize {
        self.iterations.iter().map(|e| e.detections.len()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json()?)
    }

    /// One row per interval per iteration.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,interval_index,T_left,T_right,degree,segment_kind,e_max\n");
        for e in &self.iterations {
            for k in 0..e.degrees.len() {
                let err = e.e_max.get(k).map_or(String::new(), |v| format!("{v:e}"));
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    e.iteration,
                    k,
                    e.fractions[k],
                    e.fractions[k + 1],
                    e.degrees[k],
                    e.tags[k].segment_kind(),
                    err
                );
            }
        }
        out
    }

    pub fn write_history(&self, path: &Path) -> Result<()> {
        write_file(path, &self.history_csv())
    }

    /// `tau,value` series: one file per control and state component of the
    /// final solution, and the mesh-point scatter of every iteration.
    pub fn write_plot_data(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|source| io_err(dir, source))?;
        if let Some(sol) = &self.solution {
            let n_u = sol.controls.first().map_or(0, |r| r.len());
            for c in 0..n_u {
                let rows = sol.control_tau.iter().zip(&sol.controls).map(|(t, u)| (*t, u[c]));
                write_file(&dir.join(format!("control_{c}.csv")), &series(rows))?;
            }
            let n_y = sol.states.first().map_or(0, |r| r.len());
            for c in 0..n_y {
                let rows = sol.state_tau.iter().zip(&sol.states).map(|(t, y)| (*t, y[c]));
                write_file(&dir.join(format!("state_{c}.csv")), &series(rows))?;
            }
        }
        let rows = self
            .iterations
            .iter()
            .flat_map(|e| e.fractions.iter().map(move |&t| (t, e.iteration as f64)));
        write_file(&dir.join("mesh_history.csv"), &series(rows))
    }
}

fn series(rows: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = String::from("tau,value\n");
    for (t, v) in rows {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(super) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| io_err(parent, source))?;
    }
    fs::write(path, contents).map_err(|source| io_err(path, source))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd_counts() {
        assert_eq!(Timing::new(vec![3.0, 1.0, 2.0]).median, 2.0);
        assert_eq!(Timing::new(vec![4.0, 1.0, 2.0, 3.0]).median, 2.5);
        assert_eq!(Timing::new(vec![]).median, 0.0);
    }

    #[test]
    fn series_format() {
        assert_eq!(series([(-1.0, 0.5), (1.0, 2.0)].into_iter()), "tau,value\n-1,0.5\n1,2\n");
    }
}

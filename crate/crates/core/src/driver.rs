//! The adaptive loop: solve, estimate errors, detect discontinuities,
//! refine, repeat.

use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::basis::Interpolant;
use crate::error::{Error, Result};
use crate::error_est::estimate_errors;
use crate::jumpfun::{detect, DetectionReport, JumpConfig};
use crate::mesh::{Mesh, DEFAULT_P_MAX, DEFAULT_P_MIN};
use crate::nlp::{solve, SolveStatus, SolverOptions};
use crate::problems::{validate, OcpProblem, Range};
use crate::refine::{refine, RefineConfig, RefinementLog};
use crate::transcription::{
    pack, transcribe, CollocationSolution, DecisionLayout, IntervalSolution,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub epsilon: f64,
    /// Largest refinement counter `M`; at most `max_iterations + 1` solves.
    pub max_iterations: usize,
    pub initial_intervals: usize,
    pub initial_degree: usize,
    pub p_min: usize,
    pub p_max: usize,
    pub jump: JumpConfig,
    /// When false the nonsmooth pass sees no detections and the run is
    /// plain ph refinement.
    pub detect_jumps: bool,
    pub solver: SolverOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iterations: 20,
            initial_intervals: 10,
            initial_degree: 4,
            p_min: DEFAULT_P_MIN,
            p_max: DEFAULT_P_MAX,
            jump: JumpConfig::default(),
            detect_jumps: true,
            solver: SolverOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn refine_config(&self) -> RefineConfig {
        RefineConfig {
            epsilon: self.epsilon,
            p_min: self.p_min,
            p_max: self.p_max,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.refine_config().check()?;
        self.jump.check()?;
        self.solver.check()?;
        if self.initial_intervals == 0 {
            return Err(Error::InvalidConfig("need at least one initial interval".into()));
        }
        if !(self.p_min..=self.p_max).contains(&self.initial_degree) {
            return Err(Error::InvalidConfig(format!(
                "initial degree {} outside [{}, {}]",
                self.initial_degree, self.p_min, self.p_max
            )));
        }
        Ok(())
    }
}

/// One solve of the loop and what was done with it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    /// Refinement counter `M` of the mesh that was solved.
    pub iteration: usize,
    pub mesh: Mesh,
    pub status: SolveStatus,
    pub solver_iterations: usize,
    pub cost: f64,
    pub t0: f64,
    pub tf: f64,
    /// Empty when the solve failed.
    pub e_max: Vec<f64>,
    /// Detections after widening and bound adjustment.
    pub detections: DetectionReport,
    /// Splices that turned `mesh` into the next iteration's mesh.
    pub refinement: RefinementLog,
    pub wall_time: f64,
}

impl IterationRecord {
    pub fn max_error(&self) -> f64 {
        self.e_max.iter().fold(0.0, |a: f64, &b| a.max(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    IterationLimit,
    SolverFailed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::IterationLimit => "iteration_limit",
            RunStatus::SolverFailed => "solver_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunHistory {
    pub iterations: Vec<IterationRecord>,
    pub status: RunStatus,
}

impl RunHistory {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    /// Refinement counter of the last solve.
    pub fn final_iteration(&self) -> usize {
        self.iterations.last().map_or(0, |r| r.iteration)
    }

    pub fn final_mesh(&self) -> &Mesh {
        &self.iterations.last().expect("a run records at least one solve").mesh
    }

    pub fn total_detections(&self) -> usize {
        self.iterations.iter().map(|r| r.detections.len()).sum()
    }

    pub fn wall_time(&self) -> f64 {
        self.iterations.iter().map(|r| r.wall_time).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub history: RunHistory,
    /// Last usable solution; `None` only if the first solve failed.
    pub solution: Option<CollocationSolution>,
}

fn endpoint_range(problem: &dyn OcpProblem, c: usize, tau: f64) -> Range {
    let b = problem.bounds();
    let mut r = b.state[c];
    if tau == -1.0 {
        r = r.intersect(&b.initial_state[c]);
    }
    if tau == 1.0 {
        r = r.intersect(&b.final_state[c]);
    }
    r
}

/// Straight-line states between the endpoint values, controls and times at
/// the middle of their bounds.
pub fn initial_solution(problem: &dyn OcpProblem, mesh: &Mesh) -> Result<CollocationSolution> {
    let b = problem.bounds();
    let n_y = problem.dims().n_y;
    let ends: Vec<(f64, f64)> = (0..n_y)
        .map(|c| {
            (
                endpoint_range(problem, c, -1.0).guess(),
                endpoint_range(problem, c, 1.0).guess(),
            )
        })
        .collect();
    let controls: Vec<f64> = b.control.iter().map(Range::guess).collect();
    let intervals = mesh
        .grids()?
        .into_iter()
        .map(|g| {
            let tau = g.support();
            IntervalSolution {
                left: g.left(),
                right: g.right(),
                states: tau
                    .iter()
                    .map(|&x| ends.iter().map(|&(a, e)| a + 0.5 * (e - a) * (x + 1.0)).collect())
                    .collect(),
                controls: vec![controls.clone(); g.degree()],
                tau,
            }
        })
        .collect();
    Ok(CollocationSolution {
        intervals,
        t0: b.t0.guess(),
        tf: b.tf.guess(),
        cost: 0.0,
    })
}

/// Decision vector of [`initial_solution`].
pub fn initial_guess(problem: &dyn OcpProblem, mesh: &Mesh) -> Result<Vec<f64>> {
    let d = problem.dims();
    pack(&initial_solution(problem, mesh)?, &DecisionLayout::new(mesh, d.n_y, d.n_u))
}

/// `prev` interpolated onto `mesh` with its interval-local bases and
/// clipped to the problem bounds.
pub fn warm_solution(
    problem: &dyn OcpProblem,
    prev: &CollocationSolution,
    mesh: &Mesh,
) -> Result<CollocationSolution> {
    let b = problem.bounds();
    let old = &prev.intervals;
    let mut bases: Vec<Option<(Interpolant, Interpolant)>> = vec![None; old.len()];
    let mut basis = |k: usize| -> Result<(Interpolant, Interpolant)> {
        if bases[k].is_none() {
            bases[k] = Some((Interpolant::new(&old[k].tau)?, Interpolant::new(old[k].colloc_pts())?));
        }
        Ok(bases[k].clone().expect("just filled"))
    };
    let owner = |tau: f64| old.partition_point(|iv| iv.right <= tau).min(old.len() - 1);
    let combine = |row: Vec<f64>, data: &[Vec<f64>]| -> Vec<f64> {
        let width = data[0].len();
        (0..width)
            .map(|c| row.iter().zip(data).map(|(l, v)| l * v[c]).sum())
            .collect()
    };

    let mut intervals = Vec::with_capacity(mesh.num_intervals());
    for g in mesh.grids()? {
        let tau = g.support();
        let mut states = Vec::with_capacity(tau.len());
        for &x in &tau {
            let k = owner(x);
            let (yb, _) = basis(k)?;
            let mut y = combine(yb.basis_row(x), &old[k].states);
            for (c, v) in y.iter_mut().enumerate() {
                *v = endpoint_range(problem, c, x).clamp(*v);
            }
            states.push(y);
        }
        let mut controls = Vec::with_capacity(g.degree());
        for &x in g.colloc_pts() {
            let k = owner(x);
            let (_, ub) = basis(k)?;
            let mut u = if old[k].controls[0].is_empty() {
                Vec::new()
            } else {
                combine(ub.basis_row(x), &old[k].controls)
            };
            for (c, v) in u.iter_mut().enumerate() {
                *v = b.control[c].clamp(*v);
            }
            controls.push(u);
        }
        intervals.push(IntervalSolution {
            left: g.left(),
            right: g.right(),
            tau,
            states,
            controls,
        });
    }
    Ok(CollocationSolution {
        intervals,
        t0: b.t0.clamp(prev.t0),
        tf: b.tf.clamp(prev.tf),
        cost: prev.cost,
    })
}

/// Decision vector of [`warm_solution`].
pub fn warm_start(
    problem: &dyn OcpProblem,
    prev: &CollocationSolution,
    mesh: &Mesh,
) -> Result<Vec<f64>> {
    let d = problem.dims();
    pack(&warm_solution(problem, prev, mesh)?, &DecisionLayout::new(mesh, d.n_y, d.n_u))
}

/// Runs the adaptive loop from a uniform mesh.
pub fn run(problem: &dyn OcpProblem, config: &RunConfig) -> Result<RunOutput> {
    let mesh = Mesh::uniform(config.initial_intervals, config.initial_degree)?;
    run_from(problem, config, mesh)
}

/// Runs the adaptive loop starting from `mesh`.
pub fn run_from(problem: &dyn OcpProblem, config: &RunConfig, mut mesh: Mesh) -> Result<RunOutput> {
    config.check()?;
    validate(problem)?;
    mesh.validate(config.p_min, config.p_max)?;
    let refine_config = config.refine_config();
    let mut z0 = initial_guess(problem, &mesh)?;
    let mut iterations = Vec::new();
    let mut solution: Option<CollocationSolution> = None;

    for m in 0..=config.max_iterations {
        let start = Instant::now();
        let tr = transcribe(problem, &mesh)?;
        let out = solve(&tr, &z0, &config.solver);
        let mut record = IterationRecord {
            iteration: m,
            mesh: mesh.clone(),
            status: out.status,
            solver_iterations: out.iterations,
            cost: out.objective,
            t0: f64::NAN,
            tf: f64::NAN,
            e_max: Vec::new(),
            detections: DetectionReport::default(),
            refinement: RefinementLog::default(),
            wall_time: 0.0,
        };
        info!(
            "M = {m}: K = {}, N = {}, solver {} after {} iterations, cost {:.10}",
            mesh.num_intervals(),
            mesh.total_points(),
            out.status.as_str(),
            out.iterations,
            out.objective
        );
        if !out.status.is_usable() {
            warn!("solve on mesh {m} failed: {}", out.message);
            record.wall_time = start.elapsed().as_secs_f64();
            iterations.push(record);
            return Ok(RunOutput {
                history: RunHistory {
                    iterations,
                    status: RunStatus::SolverFailed,
                },
                solution,
            });
        }
        let sol = tr.unpack(&out.z)?;
        record.t0 = sol.t0;
        record.tf = sol.tf;
        let report = estimate_errors(problem, &mesh, &sol)?;
        record.e_max = report.e_max();
        let worst = report.max();
        debug!("M = {m}: max relative error {worst:.3e}");

        let status = if worst <= config.epsilon {
            Some(RunStatus::Converged)
        } else if m == config.max_iterations {
            Some(RunStatus::IterationLimit)
        } else {
            None
        };
        if let Some(status) = status {
            record.wall_time = start.elapsed().as_secs_f64();
            iterations.push(record);
            return Ok(RunOutput {
                history: RunHistory { iterations, status },
                solution: Some(sol),
            });
        }

        let detections = if config.detect_jumps {
            detect(&sol, &report, config.epsilon, &config.jump)?
        } else {
            DetectionReport::default()
        };
        let step = refine(&mesh, &report, &detections, &refine_config)?;
        debug!(
            "M = {m}: {} detections at {:?}",
            step.detections.len(),
            step.detections.locations()
        );
        z0 = warm_start(problem, &sol, &step.mesh)?;
        record.detections = step.detections;
        record.refinement = step.log;
        mesh = step.mesh;
        record.wall_time = start.elapsed().as_secs_f64();
        iterations.push(record);
        solution = Some(sol);
    }
    unreachable!("the last pass through the loop always returns")
}

//! Horizon optimization: problem assembly, the desk-scale branch-and-bound
//! solver, the brute-force verification oracle, and the predictor-corrector
//! fixed-point loop.
//!
//! Vehicles are indexed locally within one solve: slots 0 and 1 are the two
//! subjects, `2..` are the monitored neighbors in roster order.

pub mod assemble;
pub mod bb;
pub mod evaluate;
pub mod oracle;
pub mod predict;
pub mod predictor;
pub mod qp;

use crate::constraints::LinearConstraintSet;
use crate::macroflow::CellLane;
use crate::relations::{CellGrid, RelationSnapshot};
use crate::scenario::{ControlInput2D, Kinematics2D, LaneGeometry, LimitSet, Phase, VehicleClass, VehicleParams};
use crate::weights::WeightConfig;

/// Solver outcome classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpcStatus {
    /// Search finished with the tree exhausted.
    Optimal,
    /// A feasible incumbent was returned under a budget cut-off.
    Feasible,
    /// The root relaxation (or every leaf) is infeasible.
    Infeasible,
    /// Budget exhausted without any incumbent.
    TimeLimit,
}

impl MpcStatus {
    pub fn has_solution(&self) -> bool {
        matches!(self, MpcStatus::Optimal | MpcStatus::Feasible)
    }
}

/// Objective decomposition of a candidate control sequence.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveBreakdown {
    pub j_u: f64,
    pub j_w: f64,
    pub j_y: f64,
    pub j_eta: f64,
    pub j_v: f64,
    pub j_z: f64,
}

impl ObjectiveBreakdown {
    /// Signed total for the given phase: catch-up drops the platooning
    /// terms, platooning drops the following reward.
    pub fn total(&self, phase: Phase) -> f64 {
        match phase {
            Phase::CatchUp => self.j_u + self.j_w - self.j_y - self.j_eta,
            Phase::Platooning => self.j_u + self.j_w - self.j_y + self.j_v + self.j_z,
        }
    }
}

/// Solution of one horizon optimization.
#[derive(Debug, Clone)]
pub struct MpcSolution {
    pub status: MpcStatus,
    /// Controls for both subjects, one entry per horizon step.
    pub controls: Vec<[ControlInput2D; 2]>,
    pub objective: f64,
    pub breakdown: ObjectiveBreakdown,
    /// Best-bound gap report: incumbent minus global lower bound.
    pub gap: f64,
    pub nodes: usize,
    pub wall_ms: f64,
    /// Whether the predictor-corrector loop reached its fixed point.
    pub predictor_converged: bool,
    pub predictor_iterations: usize,
}

impl MpcSolution {
    pub fn infeasible(nodes: usize) -> Self {
        Self {
            status: MpcStatus::Infeasible,
            controls: Vec::new(),
            objective: f64::INFINITY,
            breakdown: ObjectiveBreakdown::default(),
            gap: 0.0,
            nodes,
            wall_ms: 0.0,
            predictor_converged: true,
            predictor_iterations: 0,
        }
    }
}

/// Search budgets. The node budget keeps runs deterministic; the wall-clock
/// budget is a control-rate deadline and is disabled when zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveBudget {
    pub max_nodes: usize,
    pub max_millis: f64,
    /// Safety-row linearization refinements per node.
    pub refine_limit: usize,
    pub feas_tol: f64,
}

impl Default for SolveBudget {
    fn default() -> Self {
        Self { max_nodes: 20_000, max_millis: 800.0, refine_limit: 5, feas_tol: 1e-6 }
    }
}

impl SolveBudget {
    /// Deterministic variant with the wall-clock deadline disabled.
    pub fn deterministic(max_nodes: usize) -> Self {
        Self { max_nodes, max_millis: 0.0, ..Default::default() }
    }
}

/// One subject CAV in the solve.
#[derive(Debug, Clone)]
pub struct SubjectCtx {
    pub roster_index: usize,
    pub state: Kinematics2D,
    pub params: VehicleParams,
}

/// One monitored neighbor in the solve. `lane` is frozen for the horizon.
#[derive(Debug, Clone)]
pub struct NeighborCtx {
    pub roster_index: usize,
    pub class: VehicleClass,
    pub params: VehicleParams,
    pub state: Kinematics2D,
    pub lane: usize,
    /// HDV speed switches already committed from measurements before the
    /// horizon start: (global step, speed).
    pub pending_switches: Vec<(usize, f64)>,
    /// Frozen prediction leader among the other neighbors (local neighbor
    /// list index), for HDVs.
    pub frozen_leader: Option<usize>,
}

/// Macroscopic state entering the solve.
#[derive(Debug, Clone)]
pub struct FlowCtx {
    pub lanes: Vec<CellLane>,
    /// Boundary inflow demand per lane (veh/h).
    pub inflow: f64,
    /// Cells whose entering flow the objective rewards, per (lane, cell).
    pub boundary_cells: Vec<(usize, usize)>,
}

/// Everything one horizon optimization needs, with vehicles in local slots.
#[derive(Debug, Clone)]
pub struct MpcContext {
    pub geometry: LaneGeometry,
    pub grid: CellGrid,
    pub limits: LimitSet,
    pub delta: f64,
    pub horizon: usize,
    pub big_m: f64,
    pub monitoring_range: f64,
    pub desired_spacing: f64,
    pub phase: Phase,
    pub weights: WeightConfig,
    /// Global step index at the horizon start (anchors reaction epochs).
    pub t0: usize,
    pub subjects: [SubjectCtx; 2],
    pub neighbors: Vec<NeighborCtx>,
    pub flow: FlowCtx,
}

impl MpcContext {
    pub fn vehicle_count(&self) -> usize {
        2 + self.neighbors.len()
    }

    /// Initial states in local slot order.
    pub fn initial_states(&self) -> Vec<Kinematics2D> {
        let mut states = vec![self.subjects[0].state, self.subjects[1].state];
        states.extend(self.neighbors.iter().map(|n| n.state));
        states
    }

    pub fn initial_snapshot(&self) -> RelationSnapshot {
        crate::relations::evaluate_snapshot_with_cells(
            &self.initial_states(),
            &self.geometry,
            &self.grid,
            self.t0,
        )
    }

    /// Subject slot that follows the other per the initial snapshot, falling
    /// back to longitudinal order.
    pub fn follower_slot(&self) -> usize {
        let snap = self.initial_snapshot();
        if snap.following_leader(0) == Some(1) {
            0
        } else if snap.following_leader(1) == Some(0) {
            1
        } else if self.subjects[0].state.x <= self.subjects[1].state.x {
            0
        } else {
            1
        }
    }

    /// Initial-state conservative-gap violations for the subjects (the
    /// optimizer cannot start from these).
    pub fn initial_safety_violations(&self) -> Vec<String> {
        let snap = self.initial_snapshot();
        let states = self.initial_states();
        let mut out = Vec::new();
        for slot in 0..2 {
            let s = &self.subjects[slot];
            if let Some(leader) = snap.following_leader(slot) {
                let gap = states[leader].x - s.state.x;
                if let Ok(required) =
                    crate::micro::safety_gap(s.state.vx, s.params.length, s.params.reaction_time, &self.limits)
                {
                    if gap < required - 1e-9 {
                        out.push(format!(
                            "subject slot {slot} starts {gap:.3} m behind local vehicle {leader}, needs {required:.3} m"
                        ));
                    }
                }
            }
        }
        out
    }
}

/// Assembled problem: linear rows plus the quadratic safety descriptors and
/// the objective model over the decision variables.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    pub set: LinearConstraintSet,
    pub safety: Vec<assemble::SafetyRowSpec>,
    pub objective: assemble::ObjectiveModel,
    pub layout: assemble::ProblemLayout,
}

impl MpcProblem {
    /// Plain-text dump of variables, rows and the objective shape.
    pub fn dump(&self) -> String {
        use std::fmt::Write as _;
        let mut out = self.set.dump();
        let _ = writeln!(out, "\\ quadratic safety rows: {}", self.safety.len());
        let _ = writeln!(
            out,
            "\\ objective: dim {} constant {:.6} ridge_correction {:.3e}",
            self.objective.dim, self.objective.constant, self.objective.ridge_correction
        );
        out
    }
}

use serde::{Deserialize, Serialize};

use super::assembly::{AssemblyFailure, AssemblyPhase};
use super::stack::Stability;
use super::Clock;
use crate::geometry::RigidTransform;
use crate::mask::ObjectClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Stack,
    Assemble,
    PoseStability,
    GraspBench,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Stack => "stack",
            TaskKind::Assemble => "assemble",
            TaskKind::PoseStability => "pose_stability",
            TaskKind::GraspBench => "grasp_bench",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: String,
    pub ok: bool,
    /// Simulated seconds spent in the phase.
    pub sim_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairCount {
    pub correct: usize,
    pub total: usize,
}

/// One rock of a stacking run, in pick order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RockRecord {
    pub sorted_index: usize,
    pub object_id: Option<usize>,
    /// Pick position equals the rock's rank by true volume.
    pub volume_order_correct: bool,
    pub grasp_score: Option<f64>,
    /// Horizontal distance between the grasped centroid and the rock's
    /// center of mass (mm).
    pub grasp_offset: Option<f64>,
    pub height_estimate: Option<f64>,
    pub true_height: Option<f64>,
    pub alignment_error: Option<f64>,
    /// Placed on another rock rather than on the ground.
    pub on_rock: bool,
    pub stability: Option<Stability>,
    pub failure: Option<String>,
}

/// Outcome of an assembly run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyRecord {
    pub part_class: Option<ObjectClass>,
    pub part_id: Option<usize>,
    pub target_joint: Option<usize>,
    /// Last phase entered before finishing or failing.
    pub phase_reached: AssemblyPhase,
    pub failure: Option<AssemblyFailure>,
    pub grasp_success: bool,
    /// `None` when the run ended before joint detection.
    pub joint_detected: Option<bool>,
    pub attached: bool,
    pub attach_position_error: Option<f64>,
    pub attach_angle_error_deg: Option<f64>,
    /// True plug frame in the world after the final move.
    pub final_plug: Option<RigidTransform>,
    /// True socket frame of the target joint.
    pub socket: Option<RigidTransform>,
}

/// Pose-repeatability statistics for one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseBenchRecord {
    pub object_id: usize,
    pub class: ObjectClass,
    pub samples: usize,
    /// Sample standard deviation per axis (mm).
    pub sigma: [f64; 3],
    /// Standard deviation of z predicted from the depth noise model (mm);
    /// `None` when the prediction does not apply (dropout, even window).
    pub analytic_sigma_z: Option<f64>,
}

/// One grasp attempt of the grasp benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspBenchRecord {
    pub object_id: Option<usize>,
    pub class: ObjectClass,
    pub candidates: usize,
    pub success: bool,
    pub error: Option<String>,
}

/// Everything recorded about one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub task: TaskKind,
    pub success: bool,
    /// Set when the trial could not run at all (bad input, panic).
    #[serde(default)]
    pub failure: Option<String>,
    #[serde(default)]
    pub phases: Vec<PhaseRecord>,
    #[serde(default)]
    pub sim_time: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rocks: Vec<RockRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_pairs: Option<PairCount>,
    #[serde(default)]
    pub stack_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assembly: Option<AssemblyRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pose_bench: Vec<PoseBenchRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grasp_bench: Vec<GraspBenchRecord>,
}

impl TrialReport {
    pub fn new(task: TaskKind, seed: u64) -> Self {
        Self {
            trial: 0,
            seed,
            task,
            success: false,
            failure: None,
            phases: Vec::new(),
            sim_time: 0.0,
            rocks: Vec::new(),
            size_pairs: None,
            stack_count: 0,
            assembly: None,
            pose_bench: Vec::new(),
            grasp_bench: Vec::new(),
        }
    }

    /// Report for a trial that could not run.
    pub fn failed(task: TaskKind, seed: u64, message: impl Into<String>) -> Self {
        let mut r = Self::new(task, seed);
        r.failure = Some(message.into());
        r
    }

    pub(crate) fn finish(&mut self, clock: Clock) {
        self.sim_time = clock.now;
        self.phases = clock.phases;
    }
}

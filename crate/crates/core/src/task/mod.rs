//! Kinematic arm, rock stacking and part assembly.
//!
//! The arm is an end effector that teleports inside a reach box. A held
//! object follows the gripper rigidly. Every phase charges a fixed amount of
//! simulated time so reports never depend on the host machine.

mod arm;
mod assembly;
mod report;
mod stack;

pub use arm::{closing_contacts, execute_grasp, move_to, release, ArmState, ClosingContact, Held};
pub use assembly::{gripper_intersect, plug_visibility, run_assembly_task, AssemblyFailure, AssemblyPhase, AssemblyState, Visibility};
pub use report::{AssemblyRecord, GraspBenchRecord, PairCount, PhaseRecord, PoseBenchRecord, RockRecord, TaskKind, TrialReport};
pub use stack::{check_stack_stability, contact_cells, place_on_stack, run_stacking_task, Placement, Stability, StackState};
pub(crate) use stack::{grasp_first_that_holds, hand_camera_grasps};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp::{GraspConfig, HandGeometry};
use crate::pointcloud::{RansacParams, Workspace};
use crate::scene::SensorModel;

/// Simulated durations, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimTiming {
    /// End-effector speed (mm/s).
    pub move_speed: f64,
    pub move_overhead: f64,
    pub capture: f64,
    pub grasp_detection: f64,
    pub gripper: f64,
}

impl Default for SimTiming {
    fn default() -> Self {
        Self {
            move_speed: 250.0,
            move_overhead: 0.5,
            capture: 0.2,
            grasp_detection: 0.8,
            gripper: 1.0,
        }
    }
}

impl SimTiming {
    pub fn travel(&self, distance: f64) -> f64 {
        self.move_overhead + distance / self.move_speed
    }
}

/// Task-level constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskParams {
    /// Box the palm center must stay in.
    pub reach: Workspace,
    /// Distance backed off along the approach axis before grasping (mm).
    pub pre_grasp_offset: f64,
    /// Height of the eye-in-hand camera above the object when imaging it (mm).
    pub hand_camera_height: f64,
    /// Half-size of the crop box around the object for grasp detection (mm).
    pub crop_half: f64,
    pub stack_target: [f64; 2],
    /// Release height as a multiple of the estimated rock height.
    pub release_clearance: f64,
    /// Gap below which two rock surfaces count as touching (mm).
    pub contact_band: f64,
    /// Sampling pitch of the contact region (mm).
    pub contact_grid: f64,
    /// Palm position of the pre-assembly pose.
    pub pre_assembly: [f64; 3],
    pub attach_tolerance_mm: f64,
    pub attach_tolerance_deg: f64,
    /// Plugs seen at a larger angle from their outward axis are hidden.
    pub max_facing_deg: f64,
    /// Pixel stride of the base-camera cloud used for the plane fit.
    pub base_cloud_stride: u32,
    pub ransac: RansacParams,
    /// Candidates tried in order before a grasp counts as failed.
    pub grasp_attempts: usize,
    pub timing: SimTiming,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            reach: Workspace {
                min: [-100.0, -600.0, -50.0],
                max: [900.0, 600.0, 800.0],
            },
            pre_grasp_offset: 120.0,
            hand_camera_height: 300.0,
            crop_half: 80.0,
            stack_target: [375.0, 300.0],
            release_clearance: 1.05,
            contact_band: 2.0,
            contact_grid: 1.0,
            pre_assembly: [375.0, 0.0, 300.0],
            attach_tolerance_mm: 3.0,
            attach_tolerance_deg: 5.0,
            max_facing_deg: 100.0,
            base_cloud_stride: 4,
            ransac: RansacParams::default(),
            grasp_attempts: 1,
            timing: SimTiming::default(),
        }
    }
}

impl TaskParams {
    pub fn validate(&self) -> Result<()> {
        self.reach
            .validate()
            .map_err(|_| Error::config("task.reach", "min must be below max on every axis"))?;
        for (name, v) in [
            ("pre_grasp_offset", self.pre_grasp_offset),
            ("hand_camera_height", self.hand_camera_height),
            ("crop_half", self.crop_half),
            ("contact_band", self.contact_band),
            ("contact_grid", self.contact_grid),
            ("attach_tolerance_mm", self.attach_tolerance_mm),
            ("attach_tolerance_deg", self.attach_tolerance_deg),
            ("timing.move_speed", self.timing.move_speed),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("task.{name}"), "must be positive"));
            }
        }
        if !(self.release_clearance >= 1.0) {
            return Err(Error::config("task.release_clearance", "must be at least 1"));
        }
        if !(self.max_facing_deg > 0.0 && self.max_facing_deg <= 180.0) {
            return Err(Error::config("task.max_facing_deg", "must lie in (0, 180]"));
        }
        if self.base_cloud_stride == 0 {
            return Err(Error::config("task.base_cloud_stride", "must be at least 1"));
        }
        if self.grasp_attempts == 0 {
            return Err(Error::config("task.grasp_attempts", "must be at least 1"));
        }
        if self.ransac.iterations == 0 || !(self.ransac.tolerance > 0.0) {
            return Err(Error::config("task.ransac", "need iterations >= 1 and a positive tolerance"));
        }
        Ok(())
    }
}

/// Everything a task run needs besides the scene.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub sensor: SensorModel,
    pub grasp: GraspConfig,
    pub hand: HandGeometry,
    pub params: TaskParams,
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.grasp.validate()?;
        self.hand.validate()?;
        self.params.validate()
    }
}

/// Accumulates simulated time and phase records.
#[derive(Debug, Default)]
pub(crate) struct Clock {
    pub now: f64,
    pub phases: Vec<PhaseRecord>,
}

impl Clock {
    pub fn record(&mut self, phase: impl Into<String>, duration: f64, error: Option<String>) {
        self.now += duration;
        self.phases.push(PhaseRecord {
            phase: phase.into(),
            ok: error.is_none(),
            sim_time: duration,
            error,
        });
    }
}

/// Seed for a sub-step; keeps streams of different steps apart.
pub(crate) fn sub_seed(seed: u64, step: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(step.wrapping_mul(0xd1b5_4a32_d192_ed03))
        ^ step
}

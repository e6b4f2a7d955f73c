use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp::{GraspConfig, HandGeometry};
use crate::scene::{PartKind, SceneSpec, SensorModel};
use crate::task::{TaskConfig, TaskKind, TaskParams};

/// Version of the experiment config format.
pub const SCHEMA_VERSION: u32 = 1;

/// Settings of the pose-repeatability benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseBenchParams {
    /// Depth frames drawn per object.
    pub samples: usize,
}

impl Default for PoseBenchParams {
    fn default() -> Self {
        Self { samples: 1000 }
    }
}

/// One experiment: a task repeated over consecutive seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub task: TaskKind,
    pub trials: usize,
    /// Trial `i` runs with seed `base_seed + i`.
    pub base_seed: u64,
    pub scene: SceneSpec,
    /// Loose part used by trial `i` is `part_cycle[i % len]`; empty keeps
    /// the scene's own part.
    pub part_cycle: Vec<PartKind>,
    pub sensor: SensorModel,
    pub grasp: GraspConfig,
    pub hand: HandGeometry,
    pub params: TaskParams,
    pub pose_bench: PoseBenchParams,
    /// Also write `summary.csv`.
    pub csv: bool,
    /// Directory receiving the trial reports and the summary.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            task: TaskKind::Stack,
            trials: 1,
            base_seed: 0,
            scene: SceneSpec::default(),
            part_cycle: Vec::new(),
            sensor: SensorModel::nominal(),
            grasp: GraspConfig::default(),
            hand: HandGeometry::default(),
            params: TaskParams::default(),
            pose_bench: PoseBenchParams::default(),
            csv: false,
            output: None,
        }
    }
}

impl ExperimentConfig {
    /// Defaults suited to `task`: assembly-type tasks get the robot-part scene.
    pub fn for_task(task: TaskKind) -> Self {
        let mut cfg = Self { task, ..Self::default() };
        match task {
            TaskKind::Stack => {}
            TaskKind::Assemble => cfg.scene = SceneSpec::assembly(PartKind::Head),
            TaskKind::PoseStability | TaskKind::GraspBench => {
                cfg.scene = SceneSpec::assembly(PartKind::Head);
                cfg.part_cycle = vec![PartKind::Head, PartKind::Leg];
            }
        }
        cfg
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        self.scene.validate()?;
        self.task_config().validate()?;
        if self.task == TaskKind::Assemble && self.scene.assembly.is_none() {
            return Err(Error::config("scene.assembly", "assembly runs need robot parts"));
        }
        if self.task == TaskKind::PoseStability && self.pose_bench.samples < 2 {
            return Err(Error::config("pose_bench.samples", "must be at least 2"));
        }
        Ok(())
    }

    pub fn task_config(&self) -> TaskConfig {
        TaskConfig {
            sensor: self.sensor,
            grasp: self.grasp.clone(),
            hand: self.hand,
            params: self.params.clone(),
        }
    }

    pub fn seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    /// Scene spec of trial `i`.
    pub fn scene_for(&self, trial: usize) -> SceneSpec {
        let mut spec = self.scene.clone();
        if let (Some(a), false) = (spec.assembly.as_mut(), self.part_cycle.is_empty()) {
            a.part = self.part_cycle[trial % self.part_cycle.len()];
        }
        spec
    }
}

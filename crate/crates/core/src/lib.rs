//! Vision-guided rock stacking and robot-part assembly in a simulated lunar
//! sandbox: camera geometry, point-cloud processing, grasp detection, a
//! seeded scene simulator, perception, task execution and an experiment
//! harness.
//!
//! Units are millimeters and seconds; the world frame is the robot base
//! frame with z up.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod depth;
pub mod error;
pub mod geometry;
pub mod grasp;
pub mod harness;
pub mod mask;
pub mod perception;
pub mod pointcloud;
pub mod scene;
pub mod task;

pub use depth::DepthImage;
pub use error::{Error, Result};
pub use geometry::{Camera, CameraIntrinsics, PixelDepth, Point3, RigidTransform, Vec3};
pub use grasp::{detect_grasps, GraspCandidate, GraspConfig, HandGeometry};
pub use harness::{compute_metrics, run_experiment, ExperimentConfig, MetricsSummary};
pub use mask::{InstanceMask, ObjectClass};
pub use pointcloud::{Plane, PointCloud, Workspace};
pub use scene::{generate_scene, Scene, SceneSpec, SensorModel};
pub use task::{TaskConfig, TaskKind, TrialReport};

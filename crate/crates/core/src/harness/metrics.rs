use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::ObjectClass;
use crate::task::{PairCount, Stability, TaskKind, TrialReport};

/// Pooled pose repeatability of one object class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPose {
    pub class: ObjectClass,
    pub objects: usize,
    pub samples: usize,
    /// Pooled standard deviation per axis (mm).
    pub sigma: [f64; 3],
    /// Pooled analytic prediction of `sigma[2]`, when every object has one.
    pub analytic_sigma_z: Option<f64>,
}

/// Attempt counts of one object class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: ObjectClass,
    pub attempts: usize,
    pub grasp_successes: usize,
    /// Runs that reached joint detection, and how many of them saw the joint.
    pub joint_checks: usize,
    pub joints_detected: usize,
    pub attached: usize,
}

/// Wall-clock timings of a run. Never serialized, so output files stay
/// reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WallClock {
    pub total_s: f64,
    pub mean_trial_s: f64,
    pub max_trial_s: f64,
}

/// Aggregate of a set of trial reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub task: TaskKind,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Trials that failed before doing any work (bad input, panic).
    pub not_run: usize,
    pub size_pairs: PairCount,
    pub size_agreement: Option<f64>,
    pub height_samples: usize,
    pub height_relative_error_median: Option<f64>,
    /// Stable placements on another rock.
    pub alignment_samples: usize,
    pub mean_alignment_error: Option<f64>,
    pub grasp_attempts: usize,
    pub grasp_successes: usize,
    pub grasp_success_rate: Option<f64>,
    pub joint_detection_rate: Option<f64>,
    pub attach_rate: Option<f64>,
    pub classes: Vec<ClassRow>,
    pub pose: Vec<ClassPose>,
    /// Failure counts by cause.
    pub failures: BTreeMap<String, usize>,
    /// Mean simulated duration of a trial (s).
    pub mean_sim_time: f64,
    #[serde(skip)]
    pub wall_clock: Option<WallClock>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn cause(message: &str) -> String {
    message.split(':').next().unwrap_or(message).trim().to_string()
}

fn class_row(map: &mut BTreeMap<ObjectClass, ClassRow>, class: ObjectClass) -> &mut ClassRow {
    map.entry(class).or_insert_with(|| ClassRow {
        class,
        attempts: 0,
        grasp_successes: 0,
        joint_checks: 0,
        joints_detected: 0,
        attached: 0,
    })
}

#[derive(Default)]
struct PoseAcc {
    objects: usize,
    samples: usize,
    dof: usize,
    ss: [f64; 3],
    analytic_ss: f64,
    analytic_all: bool,
}

/// Folds trial reports into a summary. Pure: the same reports always give
/// the same summary.
pub fn compute_metrics(reports: &[TrialReport]) -> Result<MetricsSummary> {
    let first = reports.first().ok_or(Error::EmptyInput)?;
    let trials = reports.len();
    let successes = reports.iter().filter(|r| r.success).count();
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    let mut bump = |k: String| *failures.entry(k).or_default() += 1;
    let mut size_pairs = PairCount::default();
    let mut heights = Vec::new();
    let mut alignments = Vec::new();
    let (mut grasp_attempts, mut grasp_successes) = (0, 0);
    let (mut joint_checks, mut joints) = (0, 0);
    let (mut assembly_runs, mut attached) = (0, 0);
    let mut classes: BTreeMap<ObjectClass, ClassRow> = BTreeMap::new();
    let mut pose: BTreeMap<ObjectClass, PoseAcc> = BTreeMap::new();

    for r in reports {
        if let Some(f) = &r.failure {
            bump(format!("not_run: {}", cause(f)));
        }
        if let Some(p) = r.size_pairs {
            size_pairs.correct += p.correct;
            size_pairs.total += p.total;
        }
        for rock in &r.rocks {
            if let (Some(est), Some(truth)) = (rock.height_estimate, rock.true_height) {
                if truth > 0.0 {
                    heights.push((est - truth).abs() / truth);
                }
            }
            if let (true, Some(Stability::Stable), Some(e)) = (rock.on_rock, rock.stability, rock.alignment_error) {
                alignments.push(e);
            }
            let grasped = rock.grasp_score.is_some();
            let grasp_failed = rock.failure.as_deref().is_some_and(|f| f.starts_with("grasp"));
            if grasped || grasp_failed {
                grasp_attempts += 1;
                grasp_successes += grasped as usize;
                let c = class_row(&mut classes, ObjectClass::Rock);
                c.attempts += 1;
                c.grasp_successes += grasped as usize;
            }
            if let Some(f) = &rock.failure {
                bump(cause(f));
            }
        }
        if let Some(a) = &r.assembly {
            assembly_runs += 1;
            attached += a.attached as usize;
            let tried = a.grasp_success || a.failure == Some(crate::task::AssemblyFailure::GraspFail);
            if tried {
                grasp_attempts += 1;
                grasp_successes += a.grasp_success as usize;
            }
            if let Some(j) = a.joint_detected {
                joint_checks += 1;
                joints += j as usize;
            }
            if let Some(f) = a.failure {
                bump(f.as_str().to_string());
            }
            if let Some(class) = a.part_class {
                let c = class_row(&mut classes, class);
                c.attempts += 1;
                c.grasp_successes += a.grasp_success as usize;
                if let Some(j) = a.joint_detected {
                    c.joint_checks += 1;
                    c.joints_detected += j as usize;
                }
                c.attached += a.attached as usize;
            }
        }
        for g in &r.grasp_bench {
            let grasp_failed = g.error.as_deref().is_some_and(|f| f.starts_with("grasp"));
            if g.success || grasp_failed {
                grasp_attempts += 1;
                grasp_successes += g.success as usize;
                let c = class_row(&mut classes, g.class);
                c.attempts += 1;
                c.grasp_successes += g.success as usize;
            }
            if let Some(e) = &g.error {
                bump(cause(e));
            }
        }
        for p in &r.pose_bench {
            let acc = pose.entry(p.class).or_insert_with(|| PoseAcc {
                analytic_all: true,
                ..PoseAcc::default()
            });
            let dof = p.samples.saturating_sub(1);
            acc.objects += 1;
            acc.samples += p.samples;
            acc.dof += dof;
            for a in 0..3 {
                acc.ss[a] += dof as f64 * p.sigma[a] * p.sigma[a];
            }
            match p.analytic_sigma_z {
                Some(s) => acc.analytic_ss += dof as f64 * s * s,
                None => acc.analytic_all = false,
            }
        }
        if r.task == TaskKind::PoseStability {
            for ph in r.phases.iter().filter(|p| !p.ok) {
                bump(format!("pose: {}", cause(ph.error.as_deref().unwrap_or(""))));
            }
        }
    }
    let pose = pose
        .into_iter()
        .map(|(class, acc)| {
            let d = acc.dof.max(1) as f64;
            ClassPose {
                class,
                objects: acc.objects,
                samples: acc.samples,
                sigma: acc.ss.map(|s| (s / d).sqrt()),
                analytic_sigma_z: acc.analytic_all.then(|| (acc.analytic_ss / d).sqrt()),
            }
        })
        .collect();
    Ok(MetricsSummary {
        task: first.task,
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        not_run: reports.iter().filter(|r| r.failure.is_some()).count(),
        size_pairs,
        size_agreement: ratio(size_pairs.correct, size_pairs.total),
        height_samples: heights.len(),
        height_relative_error_median: median(heights),
        alignment_samples: alignments.len(),
        mean_alignment_error: (!alignments.is_empty()).then(|| alignments.iter().sum::<f64>() / alignments.len() as f64),
        grasp_attempts,
        grasp_successes,
        grasp_success_rate: ratio(grasp_successes, grasp_attempts),
        joint_detection_rate: ratio(joints, joint_checks),
        attach_rate: ratio(attached, assembly_runs),
        classes: classes.into_values().collect(),
        pose,
        failures,
        mean_sim_time: reports.iter().map(|r| r.sim_time).sum::<f64>() / trials as f64,
        wall_clock: None,
    })
}

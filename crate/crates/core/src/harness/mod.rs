//! Experiment runner: repeats a task over consecutive seeds, writes one
//! report per trial plus a summary, and folds reports into metrics.
//!
//! Trials run on the rayon pool; reports reach disk through a single writer
//! in trial order, so serial and parallel runs leave identical files.

mod bench;
mod config;
mod metrics;

pub use bench::{median_reading_sigma, run_grasp_bench, run_pose_bench};
pub use config::{ExperimentConfig, PoseBenchParams, SCHEMA_VERSION};
pub use metrics::{compute_metrics, ClassPose, ClassRow, MetricsSummary, WallClock};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scene::generate_scene;
use crate::task::{run_assembly_task, run_stacking_task, TaskKind, TrialReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// Runs one trial of `cfg`. Never fails: problems end up in the report.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> TrialReport {
    let seed = cfg.seed(trial);
    let task = cfg.task_config();
    let mut report = match generate_scene(&cfg.scene_for(trial), seed) {
        Err(e) => TrialReport::failed(cfg.task, seed, format!("scene: {e}")),
        Ok(scene) => match cfg.task {
            TaskKind::Stack => run_stacking_task(&scene, &task, seed),
            TaskKind::Assemble => run_assembly_task(&scene, &task, seed),
            TaskKind::PoseStability => run_pose_bench(&scene, &task, cfg.pose_bench.samples, seed),
            TaskKind::GraspBench => run_grasp_bench(&scene, &task, seed),
        },
    };
    report.trial = trial;
    report
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Vec<TrialReport>, MetricsSummary)> {
    run_experiment_with(cfg, Execution::Parallel)
}

pub fn run_experiment_with(cfg: &ExperimentConfig, exec: Execution) -> Result<(Vec<TrialReport>, MetricsSummary)> {
    cfg.validate()?;
    run_trials(cfg, exec, |i| run_trial(cfg, i))
}

/// Runs `trial` for every index of `cfg`, containing panics, and writes the
/// reports and summary under `cfg.output` when set.
pub fn run_trials<F>(cfg: &ExperimentConfig, exec: Execution, trial: F) -> Result<(Vec<TrialReport>, MetricsSummary)>
where
    F: Fn(usize) -> TrialReport + Sync,
{
    if cfg.trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    if let Some(dir) = &cfg.output {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let started = Instant::now();
    let guarded = |i: usize| -> (usize, TrialReport, f64) {
        let t = Instant::now();
        let mut r = catch_unwind(AssertUnwindSafe(|| trial(i)))
            .unwrap_or_else(|p| TrialReport::failed(cfg.task, cfg.seed(i), format!("panic: {}", panic_message(&p))));
        r.trial = i;
        r.seed = cfg.seed(i);
        (i, r, t.elapsed().as_secs_f64())
    };

    let (tx, rx) = mpsc::channel::<(usize, TrialReport, f64)>();
    let (reports, durations, write_err) = std::thread::scope(|s| {
        let writer = s.spawn(|| {
            let mut pending = BTreeMap::new();
            let mut reports = Vec::with_capacity(cfg.trials);
            let mut durations = Vec::with_capacity(cfg.trials);
            let mut err = None;
            for (i, r, dt) in rx {
                log::info!("trial {i} (seed {}) done: success={} [{dt:.2}s]", r.seed, r.success);
                pending.insert(i, (r, dt));
                while let Some((r, dt)) = pending.remove(&reports.len()) {
                    if let (Some(dir), None) = (&cfg.output, &err) {
                        err = write_json(&dir.join(format!("trial_{}.json", reports.len())), &r).err();
                    }
                    reports.push(r);
                    durations.push(dt);
                }
            }
            (reports, durations, err)
        });
        match exec {
            Execution::Parallel => (0..cfg.trials).into_par_iter().for_each_with(tx, |tx, i| {
                let _ = tx.send(guarded(i));
            }),
            Execution::Serial => {
                for i in 0..cfg.trials {
                    let _ = tx.send(guarded(i));
                }
                drop(tx);
            }
        }
        writer.join().expect("report writer panicked")
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let mut summary = compute_metrics(&reports)?;
    if let Some(dir) = &cfg.output {
        write_summary(dir, &summary, cfg.csv)?;
    }
    summary.wall_clock = Some(WallClock {
        total_s: started.elapsed().as_secs_f64(),
        mean_trial_s: durations.iter().sum::<f64>() / durations.len() as f64,
        max_trial_s: durations.iter().cloned().fold(0.0, f64::max),
    });
    Ok((reports, summary))
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".into()
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `summary.json`, and `summary.csv` when asked.
pub fn write_summary(dir: &Path, summary: &MetricsSummary, csv: bool) -> Result<()> {
    write_json(&dir.join("summary.json"), summary)?;
    if csv {
        let path = dir.join("summary.csv");
        std::fs::write(&path, summary_csv(summary)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Per-class table: pose spread when the summary has any, attempt counts
/// otherwise.
pub fn summary_csv(s: &MetricsSummary) -> String {
    let mut out = String::new();
    if !s.pose.is_empty() {
        out.push_str("object,sigma_x,sigma_y,sigma_z\n");
        for p in &s.pose {
            let _ = writeln!(out, "{},{:.4},{:.4},{:.4}", p.class, p.sigma[0], p.sigma[1], p.sigma[2]);
        }
        return out;
    }
    out.push_str("object,attempts,grasp_success,joint_detection\n");
    let rate = |n: usize, d: usize| {
        if d == 0 {
            String::new()
        } else {
            format!("{:.4}", n as f64 / d as f64)
        }
    };
    for c in &s.classes {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.class,
            c.attempts,
            rate(c.grasp_successes, c.attempts),
            rate(c.joints_detected, c.joint_checks)
        );
    }
    out
}

/// Reads every `trial_<i>.json` in `dir`, ordered by `i`.
pub fn load_reports(dir: &Path) -> Result<Vec<TrialReport>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(i) = name
            .strip_prefix("trial_")
            .and_then(|r| r.strip_suffix(".json"))
            .and_then(|i| i.parse().ok())
        {
            found.push((i, path));
        }
    }
    found.sort();
    found
        .into_iter()
        .map(|(_, p)| {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}

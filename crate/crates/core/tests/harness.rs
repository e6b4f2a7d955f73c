use lunarmanip_core::harness::{load_reports, run_trials, Execution};
use lunarmanip_core::task::{PairCount, RockRecord, Stability};
use lunarmanip_core::{compute_metrics, Error, ExperimentConfig, TaskKind, TrialReport};

fn rock(est: f64, truth: f64, align: Option<f64>, on_rock: bool, stable: bool) -> RockRecord {
    RockRecord {
        object_id: Some(0),
        grasp_score: Some(1.0),
        height_estimate: Some(est),
        true_height: Some(truth),
        alignment_error: align,
        on_rock,
        stability: Some(if stable { Stability::Stable } else { Stability::Toppled }),
        ..RockRecord::default()
    }
}

/// 50 stacking trials, 46 of them successful.
fn stacking_reports() -> Vec<TrialReport> {
    (0..50)
        .map(|i| {
            let mut r = TrialReport::new(TaskKind::Stack, 100 + i as u64);
            r.trial = i;
            r.success = i % 12 != 5;
            r.size_pairs = Some(PairCount { correct: 2, total: 3 });
            r.rocks = vec![
                rock(40.0, 40.0, None, false, true),
                rock(33.0, 30.0, Some(if r.success { 10.0 } else { 50.0 }), true, r.success),
            ];
            if !r.success {
                r.rocks[1].failure = Some("toppled: center of mass outside support".into());
            }
            r.sim_time = 20.0;
            r
        })
        .collect()
}

#[test]
fn metrics_match_hand_counts() {
    let reports = stacking_reports();
    assert_eq!(reports.iter().filter(|r| !r.success).count(), 4);
    let m = compute_metrics(&reports).unwrap();
    assert_eq!(m.trials, 50);
    assert_eq!(m.successes, 46);
    assert_eq!(m.success_rate, 0.92);
    assert_eq!(m.size_pairs, PairCount { correct: 100, total: 150 });
    assert!((m.size_agreement.unwrap() - 2.0 / 3.0).abs() < 1e-12);
    // 50 exact heights and 50 at 10 %: the median sits between 0 and 0.1.
    assert_eq!(m.height_samples, 100);
    assert!((m.height_relative_error_median.unwrap() - 0.05).abs() < 1e-12);
    // Only stable placements on a rock count toward alignment.
    assert_eq!(m.alignment_samples, 46);
    assert_eq!(m.mean_alignment_error, Some(10.0));
    assert_eq!(m.grasp_attempts, 100);
    assert_eq!(m.grasp_success_rate, Some(1.0));
    assert_eq!(m.failures.get("toppled"), Some(&4));
    assert_eq!(m.mean_sim_time, 20.0);
    for rate in [m.success_rate, m.size_agreement.unwrap(), m.grasp_success_rate.unwrap()] {
        assert!((0.0..=1.0).contains(&rate));
    }
}

#[test]
fn metrics_reject_empty_input() {
    assert!(matches!(compute_metrics(&[]), Err(Error::EmptyInput)));
}

#[test]
fn a_panicking_trial_is_contained() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        task: TaskKind::Stack,
        trials: 6,
        output: Some(dir.path().to_path_buf()),
        ..ExperimentConfig::default()
    };
    let template = stacking_reports();
    for exec in [Execution::Parallel, Execution::Serial] {
        let (reports, summary) = run_trials(&cfg, exec, |i| {
            if i == 3 {
                panic!("poisoned trial");
            }
            let mut r = template[i].clone();
            r.trial = i;
            r
        })
        .unwrap();
        assert_eq!(reports.len(), 6);
        let bad = &reports[3];
        assert!(!bad.success);
        assert!(bad.failure.as_deref().unwrap().contains("poisoned trial"));
        assert_eq!(bad.trial, 3);
        assert!(reports.iter().enumerate().all(|(i, r)| r.trial == i));
        assert_eq!(summary.not_run, 1);

        // Everything is on disk, and the summary is a fold over the files.
        for i in 0..6 {
            assert!(dir.path().join(format!("trial_{i}.json")).is_file());
        }
        let loaded = load_reports(dir.path()).unwrap();
        assert_eq!(loaded, reports);
        let again = compute_metrics(&loaded).unwrap();
        assert_eq!(serde_json::to_value(&again).unwrap(), serde_json::to_value(&summary).unwrap());
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use lunarmanip_core::harness::{self, compute_metrics, load_reports, write_json, write_summary, Execution};
use lunarmanip_core::pointcloud::io::load_cloud;
use lunarmanip_core::scene::{render_view, SceneSpec};
use lunarmanip_core::{detect_grasps, generate_scene, Error, ExperimentConfig, MetricsSummary, TaskKind};

#[derive(Parser)]
#[command(
    name = "lunarmanip",
    version,
    about = "Vision-based rock stacking and robot assembly in a simulated sandbox"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scene generation.
    #[command(subcommand)]
    Scene(SceneCmd),
    /// Grasp detection.
    #[command(subcommand)]
    Grasp(GraspCmd),
    /// Rock stacking benchmark.
    #[command(subcommand)]
    Stack(RunCmd),
    /// Part assembly benchmark.
    #[command(subcommand)]
    Assemble(RunCmd),
    /// Pose repeatability benchmark.
    PoseBench(RunArgs),
    /// Trial report tools.
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Subcommand)]
enum SceneCmd {
    /// Generate a scene and dump it with its base-camera view.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum GraspCmd {
    /// Detect grasps in a point cloud file.
    Detect {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write grasps.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grasp every rock and loose part over several scenes.
    Bench(RunArgs),
}

#[derive(Subcommand)]
enum RunCmd {
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write summary.csv next to summary.json.
    #[arg(long)]
    csv: bool,
    /// Run trials one at a time.
    #[arg(long)]
    serial: bool,
    /// Print the summary JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Recompute the summary from the trial reports in a directory.
    Summarize {
        dir: PathBuf,
        #[arg(long)]
        csv: bool,
        /// Where to write the summary; defaults to the report directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for I/O problems, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(Error::Io { .. }) = cause.downcast_ref::<Error>() {
            return 2;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn run(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Scene(SceneCmd::Gen { config, seed, out }) => scene_gen(config.as_deref(), seed, &out),
        Command::Grasp(GraspCmd::Detect { cloud, config, seed, out }) => grasp_detect(&cloud, config.as_deref(), seed, out.as_deref()),
        Command::Grasp(GraspCmd::Bench(a)) => experiment(TaskKind::GraspBench, a),
        Command::Stack(RunCmd::Run(a)) => experiment(TaskKind::Stack, a),
        Command::Assemble(RunCmd::Run(a)) => experiment(TaskKind::Assemble, a),
        Command::PoseBench(a) => experiment(TaskKind::PoseStability, a),
        Command::Report(ReportCmd::Summarize { dir, csv, out, json }) => summarize(&dir, csv, out.as_deref(), json),
    }
}

fn load_config(path: Option<&Path>, task: TaskKind) -> anyhow::Result<ExperimentConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.into(), source: e })?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            cfg.task = task;
            Ok(cfg)
        }
        None => Ok(ExperimentConfig::for_task(task)),
    }
}

fn scene_gen(config: Option<&Path>, seed: u64, out: &Path) -> anyhow::Result<ExitCode> {
    let cfg = load_config(config, TaskKind::Stack)?;
    let spec: &SceneSpec = &cfg.scene;
    let scene = generate_scene(spec, seed)?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.into(),
        source: e,
    })?;
    write_json(&out.join("scene.json"), &scene)?;
    let view = render_view(&scene, &scene.base_camera, &cfg.sensor, seed);
    view.depth.save_pgm(&out.join("depth.pgm"))?;
    for m in &view.masks {
        let path = out.join(format!("mask_{}.pbm", m.object_id));
        let file = std::fs::File::create(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        lunarmanip_core::depth::write_pbm(&m.mask, std::io::BufWriter::new(file)).map_err(|e| Error::Io { path, source: e })?;
    }
    log::info!(
        "scene {seed}: {} rocks, {} parts, {} visible objects -> {}",
        scene.rocks.len(),
        scene.parts.len(),
        view.masks.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn grasp_detect(cloud: &Path, config: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> anyhow::Result<ExitCode> {
    let cfg = load_config(config, TaskKind::GraspBench)?;
    let mut gcfg = cfg.grasp.clone();
    if let Some(s) = seed {
        gcfg.seed = s;
    }
    let c = load_cloud(cloud)?;
    let grasps = detect_grasps(&c, &cfg.hand, &gcfg, None)?;
    log::info!("{} points, {} grasps", c.len(), grasps.len());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
        write_json(&dir.join("grasps.json"), &grasps)?;
    }
    println!("{}", serde_json::to_string_pretty(&grasps)?);
    Ok(if grasps.is_empty() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn experiment(task: TaskKind, a: RunArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = load_config(a.config.as_deref(), task)?;
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if let Some(n) = a.trials {
        cfg.trials = n;
    }
    if a.out.is_some() {
        cfg.output = a.out;
    }
    cfg.csv |= a.csv;
    cfg.validate()?;
    let exec = if a.serial { Execution::Serial } else { Execution::Parallel };
    log::info!("{} x{} from seed {}", task.as_str(), cfg.trials, cfg.base_seed);
    let (_, summary) = harness::run_experiment_with(&cfg, exec)?;
    report(&summary, a.json)?;
    // A run where nothing succeeded counts as a task failure.
    Ok(if summary.successes == 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn summarize(dir: &Path, csv: bool, out: Option<&Path>, json: bool) -> anyhow::Result<ExitCode> {
    let reports = load_reports(dir)?;
    if reports.is_empty() {
        bail!("no trial reports in {}", dir.display());
    }
    let summary = compute_metrics(&reports)?;
    let target = out.unwrap_or(dir);
    std::fs::create_dir_all(target).map_err(|e| Error::Io {
        path: target.into(),
        source: e,
    })?;
    write_summary(target, &summary, csv)?;
    report(&summary, json)?;
    Ok(ExitCode::SUCCESS)
}

fn report(s: &MetricsSummary, json: bool) -> anyhow::Result<()> {
    eprintln!(
        "{}: {}/{} trials succeeded ({:.1}%)",
        s.task.as_str(),
        s.successes,
        s.trials,
        100.0 * s.success_rate
    );
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.1}%", 100.0 * v));
    if s.size_pairs.total > 0 {
        eprintln!("  size order agreement {}", pct(s.size_agreement));
    }
    if let Some(h) = s.height_relative_error_median {
        eprintln!("  height relative error (median) {:.1}%", 100.0 * h);
    }
    if let Some(a) = s.mean_alignment_error {
        eprintln!("  mean alignment error {a:.1} mm over {} placements", s.alignment_samples);
    }
    if s.grasp_attempts > 0 {
        eprintln!("  grasp success {} of {}", pct(s.grasp_success_rate), s.grasp_attempts);
    }
    if s.joint_detection_rate.is_some() {
        eprintln!("  joint detection {}, attach {}", pct(s.joint_detection_rate), pct(s.attach_rate));
    }
    for p in &s.pose {
        eprintln!(
            "  {:<10} sigma x {:.3} y {:.3} z {:.3} mm ({} samples)",
            p.class.as_str(),
            p.sigma[0],
            p.sigma[1],
            p.sigma[2],
            p.samples
        );
    }
    for (cause, n) in &s.failures {
        eprintln!("  failure {cause}: {n}");
    }
    if let Some(w) = s.wall_clock {
        eprintln!(
            "  wall clock {:.2} s (mean trial {:.2} s, max {:.2} s)",
            w.total_s, w.mean_trial_s, w.max_trial_s
        );
    }
    if json {
        println!("{}", serde_json::to_string_pretty(s)?);
    }
    Ok(())
}

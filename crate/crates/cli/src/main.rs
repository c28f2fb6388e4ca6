//! `cloi-seg`: instance segmentation of class-labeled point clouds.
//!
//! All lengths are in meters.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cloi_instance::boundary::{boundary_stats, detect_class_boundaries, BoundaryParams};
use cloi_instance::evaluation::{write_report_csv, DEFAULT_THRESHOLDS};
use cloi_instance::pointcloud::{class_histogram, save_pts, save_pts_with, PtsColumns};
use cloi_instance::segmentation::{segment_with_index, DEFAULT_EPSILON, DEFAULT_MU};
use cloi_instance::sweep::{
    facility_bias_report, sweep_epsilon, sweep_mu, sweep_radius_per_object, write_bias_csv, write_epsilon_csv,
    write_mu_csv, write_radius_csv, SweepSpec,
};
use cloi_instance::synth::{generate_scene, make_benchmark_suite, SceneSpec};
use cloi_instance::{
    load_pts, score, ClassLabel, InstanceLabeling, LabeledPointCloud, RadiusIndex, SegmentationParams,
};

const LENGTHS: &str = "All lengths (epsilon, radii) are in meters.";

#[derive(Parser, Debug)]
#[command(name = "cloi-seg", version, about = "Instance segmentation of class-labeled industrial point clouds", after_help = LENGTHS)]
struct Cli {
    /// Worker threads [default: available cores]. Results do not depend on it.
    #[arg(long, global = true, env = "CLOI_SEG_THREADS")]
    threads: Option<usize>,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labeled scene.
    #[command(after_help = LENGTHS)]
    Synth(SynthArgs),
    /// Flag class-boundary points (written as an extra column).
    #[command(after_help = LENGTHS)]
    Boundary(BoundaryArgs),
    /// Segment a cloud into instances (written into the prediction column).
    #[command(after_help = LENGTHS)]
    Segment(SegmentArgs),
    /// Score predictions against ground truth; CSV on stdout.
    Eval(EvalArgs),
    /// Run a parameter sweep; CSV output.
    #[command(after_help = LENGTHS)]
    Sweep(SweepArgs),
    /// Per-class instance, point and boundary counts; CSV on stdout.
    #[command(after_help = LENGTHS)]
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Benchmark profile: dense, sparse, close, cluttered, refinery-like, gapped.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    profile: Option<String>,
    /// Explicit scene description (JSON).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Seed for the profile; overrides the seed in --spec when given.
    #[arg(long)]
    seed: Option<u64>,
    /// Output cloud.
    #[arg(long)]
    out: PathBuf,
    /// Also write the scene description and expectations (JSON).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SegParams {
    /// Link radius.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Minimum instance size in points.
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: usize,
    /// Boundary radius [default: epsilon].
    #[arg(long)]
    boundary_radius: Option<f64>,
}

impl SegParams {
    fn build(&self) -> anyhow::Result<SegmentationParams> {
        Ok(SegmentationParams::new(self.epsilon, self.mu, self.boundary_radius)?)
    }
}

#[derive(Args, Debug)]
struct BoundaryArgs {
    input: PathBuf,
    output: PathBuf,
    /// Boundary radius.
    #[arg(long, default_value_t = 0.04)]
    radius: f64,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    params: SegParams,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Cloud with a prediction column.
    pred: PathBuf,
    /// Cloud with ground-truth instances, same points in the same order.
    gt: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_THRESHOLDS)]
    thresholds: Vec<f64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    /// Size filter grid at fixed epsilon.
    Mu,
    /// Link radius grid at fixed mu.
    Epsilon,
    /// Per-object fragmentation over a link radius grid.
    Radius,
    /// Spread of scores across several clouds.
    Bias,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Input clouds; bias mode needs at least two, other modes exactly one.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Grid values: mu for `mu`, epsilon for `epsilon` and `radius`
    /// [default: 10,20,50,100,150,200 or 0.01..0.07].
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// IoU thresholds; `mu` and `bias` take one [default: 0.5 for those,
    /// 0.25,0.5,0.75 otherwise].
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    #[command(flatten)]
    params: SegParams,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    input: PathBuf,
    /// Boundary radius for the boundary column.
    #[arg(long, default_value_t = 0.04)]
    radius: f64,
}

/// Failure kinds mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

fn usage<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn data<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Data)
}

fn load(path: &Path) -> anyhow::Result<LabeledPointCloud> {
    Ok(load_pts(path)?)
}

/// The error and its causes, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let s = cause.to_string();
        if text.contains(&s) {
            continue;
        }
        if !text.is_empty() {
            text.push_str(": ");
        }
        text.push_str(&s);
    }
    text
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn single_threshold(ts: &[f64]) -> anyhow::Result<f64> {
    match ts {
        [] => Ok(0.5),
        [t] => Ok(*t),
        _ => bail!("this mode takes a single threshold"),
    }
}

fn run_synth(a: &SynthArgs) -> Result<(), Failure> {
    let (spec, manifest) = if let Some(path) = &a.spec {
        let text = data(std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())))?;
        let mut spec = data(SceneSpec::from_json(&text).with_context(|| format!("parsing {}", path.display())))?;
        if let Some(seed) = a.seed {
            spec.seed = seed;
        }
        (spec, None)
    } else {
        let profile = a.profile.as_deref().expect("clap requires profile or spec");
        let mut suite = usage(make_benchmark_suite(profile, a.seed.unwrap_or(0)).map_err(Into::into))?;
        let (spec, manifest) = suite.remove(0);
        (spec, Some(manifest))
    };
    let cloud = data(generate_scene(&spec).map_err(Into::into))?;
    log::info!("generated {} points in {} shapes", cloud.len(), spec.shapes.len());
    data(save_pts(&cloud, &a.out, false).with_context(|| format!("writing {}", a.out.display())))?;
    if let Some(path) = &a.manifest {
        let doc = serde_json::json!({ "scene": spec, "manifest": manifest });
        let text = serde_json::to_string_pretty(&doc).expect("serializable");
        data(std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())))?;
    }
    Ok(())
}

fn run_boundary(a: &BoundaryArgs) -> Result<(), Failure> {
    let params = usage(BoundaryParams::new(a.radius).map_err(Into::into))?;
    let cloud = data(load(&a.input))?;
    let index = data(RadiusIndex::build(&cloud.positions()).map_err(Into::into))?;
    let flags = detect_class_boundaries(&cloud, &index, params);
    let s = boundary_stats(&flags);
    log::info!("{} boundary and {} interior points ({:.4})", s.boundary, s.interior, s.ratio);
    let flagged = data(cloud.with_boundary_flags(&flags).map_err(Into::into))?;
    let columns = PtsColumns {
        predictions: true,
        boundary: true,
    };
    data(save_pts_with(&flagged, &a.output, columns).with_context(|| format!("writing {}", a.output.display())))
}

fn run_segment(a: &SegmentArgs) -> Result<(), Failure> {
    let params = usage(a.params.build())?;
    let cloud = data(load(&a.input))?;
    let index = data(RadiusIndex::build(&cloud.positions()).map_err(Into::into))?;
    let pred = data(segment_with_index(&cloud, &index, &params).map_err(Into::into))?;
    log::info!("{} instances, {} noise points", pred.num_instances(), pred.noise_count());
    let out = data(cloud.with_predictions(pred.assignment()).map_err(Into::into))?;
    data(save_pts(&out, &a.output, true).with_context(|| format!("writing {}", a.output.display())))
}

fn run_eval(a: &EvalArgs) -> Result<(), Failure> {
    usage(check_thresholds(&a.thresholds))?;
    let pred_cloud = data(load(&a.pred))?;
    let gt_cloud = data(load(&a.gt))?;
    if !pred_cloud.has_predictions() {
        return Err(Failure::Data(anyhow!("{} has no prediction column", a.pred.display())));
    }
    if !gt_cloud.has_ground_truth() {
        return Err(Failure::Data(anyhow!("{} lacks ground-truth instances", a.gt.display())));
    }
    let pred = data(InstanceLabeling::predictions(&pred_cloud).map_err(Into::into))?;
    let gt = InstanceLabeling::ground_truth(&gt_cloud);
    let report = data(score(&pred, &gt, &a.thresholds).map_err(Into::into))?;
    let mut out = data(output(a.out.as_deref()))?;
    data(write_report_csv(&report, &mut out).and_then(|_| out.flush()).map_err(Into::into))
}

fn check_thresholds(ts: &[f64]) -> anyhow::Result<()> {
    for &t in ts {
        if !(t > 0.0 && t <= 1.0) {
            bail!("threshold {t} outside (0, 1]");
        }
    }
    Ok(())
}

fn run_sweep(a: &SweepArgs) -> Result<(), Failure> {
    let params = usage(a.params.build())?;
    let mut spec = SweepSpec {
        boundary_radius: a.params.boundary_radius,
        ..SweepSpec::default()
    };
    if !a.thresholds.is_empty() {
        spec.thresholds = a.thresholds.clone();
    }
    let single = matches!(a.mode, Mode::Mu | Mode::Bias);
    if single {
        spec.thresholds = vec![usage(single_threshold(&a.thresholds))?];
    }
    if !a.grid.is_empty() {
        match a.mode {
            Mode::Mu => {
                spec.mus = usage(
                    a.grid
                        .iter()
                        .map(|&g| {
                            if g.fract() == 0.0 && g >= 1.0 {
                                Ok(g as usize)
                            } else {
                                Err(anyhow!("mu grid values must be positive integers, got {g}"))
                            }
                        })
                        .collect(),
                )?
            }
            Mode::Epsilon | Mode::Radius => spec.epsilons = a.grid.clone(),
            Mode::Bias => return Err(Failure::Usage(anyhow!("bias mode takes no grid"))),
        }
    }
    usage(spec.validate().map_err(Into::into))?;
    let one_input = || -> Result<&Path, Failure> {
        match a.inputs.as_slice() {
            [p] => Ok(p),
            _ => Err(Failure::Usage(anyhow!("this mode takes exactly one input cloud"))),
        }
    };

    let mut buf = Vec::new();
    match a.mode {
        Mode::Mu => {
            let cloud = data(load(one_input()?))?;
            let rows = sweep_mu(&cloud, params.epsilon(), &spec.mus, spec.thresholds[0], spec.boundary_radius);
            write_mu_csv(&data(rows.map_err(Into::into))?, &mut buf).expect("in-memory write");
        }
        Mode::Epsilon => {
            let cloud = data(load(one_input()?))?;
            let rows = sweep_epsilon(&cloud, &spec.epsilons, params.mu(), &spec.thresholds, spec.boundary_radius);
            write_epsilon_csv(&data(rows.map_err(Into::into))?, &mut buf).expect("in-memory write");
        }
        Mode::Radius => {
            let cloud = data(load(one_input()?))?;
            let sweep = data(sweep_radius_per_object(&cloud, &spec.epsilons, &spec.thresholds).map_err(Into::into))?;
            match sweep.selected_epsilon {
                Some(e) => log::info!("selected epsilon {e}"),
                None => log::warn!("no epsilon reaches the recall target"),
            }
            write_radius_csv(&sweep, &mut buf).expect("in-memory write");
        }
        Mode::Bias => {
            if a.inputs.len() < 2 {
                return Err(Failure::Usage(anyhow!("bias mode needs at least two input clouds")));
            }
            let mut clouds = Vec::new();
            for p in &a.inputs {
                let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into());
                clouds.push((name, data(load(p))?));
            }
            let report = data(facility_bias_report(&clouds, &params, spec.thresholds[0]).map_err(Into::into))?;
            write_bias_csv(&report, &mut buf).expect("in-memory write");
        }
    }
    let mut out = data(output(a.out.as_deref()))?;
    data(out.write_all(&buf).and_then(|_| out.flush()).map_err(Into::into))
}

fn run_stats(a: &StatsArgs) -> Result<(), Failure> {
    let params = usage(BoundaryParams::new(a.radius).map_err(Into::into))?;
    let cloud = data(load(&a.input))?;
    let index = data(RadiusIndex::build(&cloud.positions()).map_err(Into::into))?;
    let flags = detect_class_boundaries(&cloud, &index, params);
    let hist = class_histogram(&cloud);
    let mut rows = String::from("class,instances,points,boundary_points\n");
    let (mut ti, mut tp) = (0, 0);
    for c in ClassLabel::ALL {
        let (inst, pts) = hist[&c];
        let b = cloud
            .points()
            .iter()
            .zip(&flags)
            .filter(|(p, f)| **f && p.class_label == c)
            .count();
        rows.push_str(&format!("{c},{inst},{pts},{b}\n"));
        ti += inst;
        tp += pts;
    }
    rows.push_str(&format!("total,{ti},{tp},{}\n", boundary_stats(&flags).boundary));
    let mut out = data(output(None))?;
    data(out.write_all(rows.as_bytes()).and_then(|_| out.flush()).map_err(Into::into))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }

    let result = match &cli.command {
        Command::Synth(a) => run_synth(a),
        Command::Boundary(a) => run_boundary(a),
        Command::Segment(a) => run_segment(a),
        Command::Eval(a) => run_eval(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Stats(a) => run_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

//! Command-line front end: phantom generation, segmentation, scoring and the
//! contrast sweep.
//!
//! Exit codes: 0 success, 1 bad input or I/O failure, 2 segmentation stopped
//! at the iteration limit, 3 segmentation ended in region collapse.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use statseg::config::RunConfig;
use statseg::energy::bhattacharyya;
use statseg::eval::{aggregate, aggregate_csv, fpf_tpf, realization_seed, run_sweep, SweepResult};
use statseg::io::{read_image, read_mask, write_mask, write_pgm16, write_text_grid};
use statseg::levelset::{segment, Initialization};
use statseg::synth::{calibrate, corrupt, make_phantom};
use statseg::{Error, EvolveStatus, ExpFamily, Family, Result, ScalarField, SpeedLaw};

const EXIT_INPUT: u8 = 1;
const EXIT_MAX_ITER: u8 = 2;
const EXIT_COLLAPSE: u8 = 3;

#[derive(Parser)]
#[command(name = "statseg", version, about = "Region-based active contours with exponential-family likelihoods")]
struct Cli {
    /// Configuration file of `key = value` lines; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed for every random stream.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the noise-free phantom, its ground truth and noisy realizations.
    Generate(GenerateArgs),
    /// Segment one image.
    Segment(SegmentArgs),
    /// Score a segmentation mask against a ground-truth mask.
    Evaluate(EvaluateArgs),
    /// Run every functional over a range of contrasts and noise types.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Noise family: poisson, rayleigh or gaussian.
    #[arg(long)]
    noise: Option<String>,
    /// Target Bhattacharyya distance between foreground and background.
    #[arg(long = "d", value_name = "FLOAT")]
    target_d: Option<f64>,
    /// Number of noisy realizations.
    #[arg(long)]
    realizations: Option<usize>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Image to segment (P2/P5 graymap or text grid).
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Region model: gauss, poisson, rayleigh or chanvese.
    #[arg(long)]
    model: Option<String>,
    /// Parameter estimator: ml or moments (moments needs the Rayleigh model).
    #[arg(long)]
    estimator: Option<String>,
    /// Weight of the contour length term.
    #[arg(long, value_name = "FLOAT")]
    lambda: Option<f64>,
    /// Nominal time step, reduced per step to keep updates below 0.45.
    #[arg(long, value_name = "FLOAT")]
    dt: Option<f64>,
    /// Iteration budget.
    #[arg(long = "max-iter", value_name = "INT")]
    max_iter: Option<usize>,
    /// Initial contour: circles, local_mean[:radius], or a mask image path.
    #[arg(long)]
    init: Option<String>,
    /// Ground-truth mask; when given, FPF and TPF are reported.
    #[arg(long, value_name = "PATH")]
    gt: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Segmentation mask (non-zero is foreground).
    #[arg(long, value_name = "PATH")]
    mask: PathBuf,
    /// Ground-truth mask.
    #[arg(long, value_name = "PATH")]
    gt: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated Bhattacharyya distances.
    #[arg(long = "d-values", value_name = "CSV")]
    d_values: Option<String>,
    /// Realizations per contrast level.
    #[arg(long)]
    realizations: Option<usize>,
    /// Comma-separated noise families.
    #[arg(long)]
    noise: Option<String>,
    /// Weight of the contour length term.
    #[arg(long, value_name = "FLOAT")]
    lambda: Option<f64>,
    /// Iteration budget per run.
    #[arg(long = "max-iter", value_name = "INT")]
    max_iter: Option<usize>,
    /// Shared initial contour: circles or local_mean[:radius].
    #[arg(long)]
    init: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out_flag = cli.out.clone();
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    match cli.command {
        Command::Generate(a) => generate(cfg, a),
        Command::Segment(a) => segment_cmd(cfg, a),
        Command::Evaluate(a) => evaluate(a, out_flag.as_deref()),
        Command::Sweep(a) => sweep(cfg, a),
    }
}

fn set_opt<T: ToString>(cfg: &mut RunConfig, key: &str, v: &Option<T>) -> Result<()> {
    match v {
        Some(v) => cfg.set(key, &v.to_string()),
        None => Ok(()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn join(params: &[f64]) -> String {
    params.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
}

fn generate(mut cfg: RunConfig, a: GenerateArgs) -> Result<ExitCode> {
    set_opt(&mut cfg, "noise", &a.noise)?;
    set_opt(&mut cfg, "target_d", &a.target_d)?;
    set_opt(&mut cfg, "realizations", &a.realizations)?;
    let noise = cfg.noise[0];
    let spec = cfg.benchmark_spec(noise, cfg.target_d);
    spec.validate()?;
    let (labels, gt) = make_phantom(&spec)?;
    let bg = spec.bg_param;
    let fg = calibrate(noise, &bg, spec.target_d)?;
    let achieved = bhattacharyya(
        noise,
        &noise.natural_from_conventional(&fg)?,
        &noise.natural_from_conventional(&bg)?,
    )?;

    create_dir(&cfg.out)?;
    // noise-free image: every pixel at its region's mean
    let mean = |p: &[f64]| match noise {
        Family::Rayleigh => p[0] * (std::f64::consts::PI / 2.0).sqrt(),
        _ => p[0],
    };
    let (mf, mb) = (mean(&fg), mean(&bg));
    let phantom = labels.map(|&l| if l { mf } else { mb });
    write_text_grid(&cfg.out.join("phantom.txt"), &phantom)?;
    write_pgm16(&cfg.out.join("phantom.pgm"), &phantom)?;
    write_mask(&cfg.out.join("gt.pgm"), &gt)?;

    let mut manifest = String::new();
    let _ = writeln!(manifest, "noise = {noise}");
    let _ = writeln!(manifest, "width = {}", spec.width);
    let _ = writeln!(manifest, "height = {}", spec.height);
    let _ = writeln!(manifest, "bg_param = {}", join(&bg));
    let _ = writeln!(manifest, "fg_param = {}", join(&fg));
    let _ = writeln!(manifest, "target_d = {}", spec.target_d);
    let _ = writeln!(manifest, "achieved_d = {achieved}");
    let _ = writeln!(manifest, "base_seed = {}", cfg.seed);
    let _ = writeln!(manifest, "foreground_pixels = {}", gt.count());
    for r in 0..spec.realizations {
        let seed = realization_seed(cfg.seed, noise, r);
        let field = corrupt(&labels, noise, &fg, &bg, seed)?;
        let stem = format!("realization_{r:03}");
        write_text_grid(&cfg.out.join(format!("{stem}.txt")), &field)?;
        write_pgm16(&cfg.out.join(format!("{stem}.pgm")), &field)?;
        let _ = writeln!(manifest, "{stem} = seed {seed}");
    }
    write_file(&cfg.out.join("manifest.txt"), &manifest)?;
    println!(
        "wrote {} realizations to {} (D = {achieved})",
        spec.realizations,
        cfg.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn segment_cmd(mut cfg: RunConfig, a: SegmentArgs) -> Result<ExitCode> {
    set_opt(&mut cfg, "model", &a.model)?;
    set_opt(&mut cfg, "estimator", &a.estimator)?;
    set_opt(&mut cfg, "lambda", &a.lambda)?;
    set_opt(&mut cfg, "dt", &a.dt)?;
    set_opt(&mut cfg, "max_iter", &a.max_iter)?;
    let evolve = cfg.evolve_config()?;
    let field: ScalarField = read_image(&a.input)?;

    let init_mask = match a.init.as_deref() {
        Some(spec) => match Initialization::parse(spec) {
            Ok(init) => init.build(&field),
            Err(_) => read_mask(Path::new(spec))?,
        },
        None => cfg.init.unwrap_or(Initialization::CircleGrid).build(&field),
    };
    if !init_mask.same_shape(&field) {
        return Err(Error::Shape("initial mask and image differ in size".into()));
    }
    let seg = segment(&field, &init_mask, &evolve)?;

    create_dir(&cfg.out)?;
    write_mask(&cfg.out.join("mask.pgm"), &seg.mask)?;
    let mut trace = String::from("iter,region_inner,region_outer,boundary,lambda,total\n");
    for (i, e) in seg.trace.iter().enumerate() {
        let _ = writeln!(
            trace,
            "{i},{},{},{},{},{}",
            e.region_terms[0], e.region_terms[1], e.boundary_term, e.lambda, e.total
        );
    }
    write_file(&cfg.out.join("trace.csv"), &trace)?;

    let status = match seg.status {
        EvolveStatus::Converged => "converged",
        EvolveStatus::MaxIter => "max_iter",
        EvolveStatus::Collapsed => "collapsed",
        EvolveStatus::Running => "running",
    };
    let mut summary = format!(
        "functional = {}\nstatus = {status}\niterations = {}\ninitial_energy = {}\nfinal_energy = {}\n",
        evolve.speed_law,
        seg.iterations,
        seg.initial_energy(),
        seg.final_energy()
    );
    if let Some(gt_path) = &a.gt {
        let (fpf, tpf) = fpf_tpf(&seg.mask, &read_mask(gt_path)?)?;
        let _ = writeln!(summary, "fpf = {fpf}\ntpf = {tpf}");
    }
    write_file(&cfg.out.join("summary.txt"), &summary)?;
    print!("{summary}");

    Ok(match seg.status {
        EvolveStatus::MaxIter => ExitCode::from(EXIT_MAX_ITER),
        EvolveStatus::Collapsed => ExitCode::from(EXIT_COLLAPSE),
        _ => ExitCode::SUCCESS,
    })
}

fn evaluate(a: EvaluateArgs, out: Option<&Path>) -> Result<ExitCode> {
    let (fpf, tpf) = fpf_tpf(&read_mask(&a.mask)?, &read_mask(&a.gt)?)?;
    let body = format!("fpf,tpf\n{fpf},{tpf}\n");
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("evaluation.csv"), &body)?;
    }
    print!("{body}");
    Ok(ExitCode::SUCCESS)
}

fn sweep(mut cfg: RunConfig, a: SweepArgs) -> Result<ExitCode> {
    set_opt(&mut cfg, "d_values", &a.d_values)?;
    set_opt(&mut cfg, "realizations", &a.realizations)?;
    set_opt(&mut cfg, "noise", &a.noise)?;
    set_opt(&mut cfg, "lambda", &a.lambda)?;
    set_opt(&mut cfg, "max_iter", &a.max_iter)?;
    set_opt(&mut cfg, "init", &a.init)?;
    let evolve = cfg.evolve_config()?;
    let init = cfg.init.unwrap_or(Initialization::SWEEP_DEFAULT);
    let laws = SpeedLaw::benchmark_set();

    let mut result = SweepResult::default();
    for &noise in &cfg.noise {
        let spec = cfg.benchmark_spec(noise, cfg.target_d);
        spec.validate()?;
        result.extend(run_sweep(&spec, &cfg.d_values, &laws, &evolve, init)?);
    }
    let agg = aggregate(&result)?;

    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("results.csv"), &result.to_csv())?;
    write_file(&cfg.out.join("aggregate.csv"), &aggregate_csv(&agg))?;
    write_file(&cfg.out.join("plot_sweep.py"), PLOT_SCRIPT)?;
    let mut used = cfg.clone();
    used.init = Some(init);
    write_file(&cfg.out.join("config.txt"), &used.to_text())?;

    println!("{:<9} {:>6} {:>12} {:>9} {:>9}", "noise", "D", "functional", "FPF", "TPF");
    for r in &agg {
        println!(
            "{:<9} {:>6} {:>12} {:>9.4} {:>9.4}",
            r.noise.to_string(),
            r.d,
            r.functional.name(),
            r.mean_fpf,
            r.mean_tpf
        );
    }
    println!("wrote {} runs to {}", result.rows.len(), cfg.out.display());
    Ok(ExitCode::SUCCESS)
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Mean FPF and TPF against contrast, one row of panels per noise type.

Reads aggregate.csv from the directory holding this script and writes
sweep.png next to it.
"""
import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
series = defaultdict(list)
with open(os.path.join(here, "aggregate.csv"), newline="") as fh:
    for row in csv.DictReader(fh):
        series[(row["noise"], row["functional"])].append(
            (float(row["D"]), float(row["mean_fpf"]), float(row["std_fpf"]),
             float(row["mean_tpf"]), float(row["std_tpf"]))
        )

noises = sorted({n for n, _ in series})
fig, axes = plt.subplots(len(noises), 2, figsize=(10, 4 * len(noises)), squeeze=False)
for i, noise in enumerate(noises):
    for (n, functional), pts in sorted(series.items()):
        if n != noise:
            continue
        pts.sort()
        d = [p[0] for p in pts]
        axes[i][0].errorbar(d, [p[1] for p in pts], yerr=[p[2] for p in pts], marker="o", capsize=3, label=functional)
        axes[i][1].errorbar(d, [p[3] for p in pts], yerr=[p[4] for p in pts], marker="o", capsize=3, label=functional)
    for j, name in enumerate(("FPF", "TPF")):
        ax = axes[i][j]
        ax.set_xscale("log", base=2)
        ax.set_xlabel("Bhattacharyya distance D")
        ax.set_ylabel("mean " + name)
        ax.set_title(f"{name}, {noise} noise")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(os.path.join(here, "sweep.png"), dpi=120)
"#;

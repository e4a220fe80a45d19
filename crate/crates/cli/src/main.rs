mod figs;
mod spec;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use cascadia::io::write_json;
use clap::{Args, Parser, Subcommand};

use figs::{FigName, FigOverrides};
use spec::{Axis, Format, SweepModel, SweepSpec};

const EXIT_SPEC: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;

#[derive(Parser)]
#[command(name = "cascadia", version, about = "Driven emitter chains in a waveguide: sweeps and figure data")]
struct Cli {
    /// Worker threads (default: CASCADIA_JOBS, then all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a solver on a parameter grid.
    Sweep(SweepArgs),
    /// Produce the data behind one of the canned figures.
    Fig(FigArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// JSON spec file; flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// BWM, EAM, DM, UWM, CE2-UWM or DOPPLER.
    #[arg(long)]
    model: Option<SweepModel>,
    /// Grid axis, e.g. `s0=log:2.4..80:7`; repeat for a second axis.
    #[arg(long = "axis")]
    axes: Vec<Axis>,
    #[arg(long = "N", alias = "n")]
    n_emitters: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    detuning: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Doppler width in units of the decay rate.
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    residual: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
}

#[derive(Args)]
struct FigArgs {
    #[arg(value_enum)]
    name: FigName,
    #[arg(long, default_value = "cascadia-fig")]
    out: PathBuf,
    /// Input saturation(s); repeat to give several.
    #[arg(long)]
    s0: Vec<f64>,
    /// CE2 chain length.
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long = "N", alias = "n")]
    n_emitters: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Ensemble size.
    #[arg(long = "M", alias = "realizations")]
    realizations: Option<usize>,
    /// Grid resolution of the figure's main axis.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn build_spec(a: &SweepArgs) -> Result<SweepSpec, String> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str::<SweepSpec>(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => SweepSpec::new(a.model.ok_or("either --spec or --model is required")?),
    };
    if let Some(m) = a.model {
        spec.model = m;
    }
    if !a.axes.is_empty() {
        spec.axes = a.axes.clone();
    }
    let p = &mut spec.params;
    if let Some(v) = a.n_emitters {
        p.n_emitters = v;
    }
    if let Some(v) = a.beta {
        p.beta = v;
    }
    if let Some(v) = a.s0 {
        p.s0 = v;
    }
    if let Some(v) = a.eta {
        p.eta = v;
    }
    if let Some(v) = a.detuning {
        p.detuning = v;
    }
    if let Some(v) = a.seed {
        p.seed = v;
    }
    if let Some(v) = a.xi {
        p.xi_delta = v;
    }
    if a.d_max.is_some() {
        p.d_max = a.d_max;
    }
    if let Some(v) = a.residual {
        spec.solver.residual = v;
    }
    if let Some(v) = a.t_max {
        spec.solver.t_max = v;
    }
    if let Some(v) = &a.out {
        spec.output.path = v.clone();
    }
    if let Some(v) = &a.format {
        spec.output.format = if v == "json" { Format::Json } else { Format::Csv };
    }
    spec.validate()?;
    Ok(spec)
}

fn resolve_jobs(flag: Option<usize>, spec: Option<usize>) -> Result<usize, String> {
    if let Some(j) = flag.or(spec) {
        return if j == 0 { Err("--jobs must be at least 1".into()) } else { Ok(j) };
    }
    match std::env::var("CASCADIA_JOBS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(j) if j > 0 => Ok(j),
            _ => Err(format!("CASCADIA_JOBS: expected a positive integer, got `{v}`")),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool")
}

fn spec_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_SPEC)
}

fn finish(unresolved: usize, unstable: usize) -> ExitCode {
    if unresolved > 0 {
        eprintln!("warning: {unresolved} cell(s) did not converge; recorded as unresolved");
    }
    if unstable > 0 {
        eprintln!("error: {unstable} cell(s) hit a numerical instability");
        return ExitCode::from(EXIT_UNSTABLE);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep(args) => {
            let spec = match build_spec(&args) {
                Ok(s) => s,
                Err(e) => return spec_error(e),
            };
            let jobs = match resolve_jobs(cli.jobs, spec.jobs) {
                Ok(j) => j,
                Err(e) => return spec_error(e),
            };
            match pool(jobs).install(|| sweep::run_sweep(&spec)) {
                Ok(sum) => {
                    for f in &sum.files {
                        println!("{}", f.display());
                    }
                    finish(sum.unresolved, sum.unstable)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Fig(args) => {
            let jobs = match resolve_jobs(cli.jobs, None) {
                Ok(j) => j,
                Err(e) => return spec_error(e),
            };
            let o = FigOverrides {
                s0: args.s0.clone(),
                sites: args.sites,
                n_emitters: args.n_emitters,
                beta: args.beta,
                realizations: args.realizations,
                points: args.points,
                seed: args.seed,
            };
            let start = Instant::now();
            let out = match pool(jobs).install(|| figs::run(args.name, &o, &args.out)) {
                Ok(out) => out,
                Err(e) => return spec_error(e),
            };
            let name = format!("{:?}", args.name).to_lowercase();
            let manifest = serde_json::json!({
                "command": "fig",
                "figure": name,
                "overrides": {
                    "s0": args.s0, "sites": args.sites, "N": args.n_emitters, "beta": args.beta,
                    "M": args.realizations, "points": args.points, "seed": args.seed,
                },
                "params": out.params,
                "version": env!("CARGO_PKG_VERSION"),
                "wall_time_s": start.elapsed().as_secs_f64(),
                "unresolved_cells": out.unresolved,
                "unstable_cells": out.unstable,
                "outputs": out.files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
            });
            let mpath = args.out.join(format!("{name}_manifest.json"));
            if let Err(e) = write_json(&mpath, &manifest) {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
            for f in out.files.iter().chain(std::iter::once(&mpath)) {
                println!("{}", f.display());
            }
            finish(out.unresolved, out.unstable)
        }
    }
}

//! Batch CLI: simulate phantom tilt series, reconstruct them with RESIRE,
//! SIRT, or FBP, and evaluate reconstructions against ground truth.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 solver
//! divergence.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use resire_core::baselines::{FbpConfig, SirtConfig, fbp_solve, sirt_solve};
use resire_core::io::{
    read_mrc, read_tilt_series, write_mrc, write_mrc_projections, write_tilt_series,
};
use resire_core::metrics::{default_shell_width, fsc, rfactor};
use resire_core::phantom::{NoiseSpec, make_vesicle_phantom, preset, simulate_stack, tilt_range};
use resire_core::solver::{SolveTrace, SolverConfig, resire_solve};
use resire_core::{Error, ProjectionStack, ProjectorConfig};

#[derive(Parser)]
#[command(
    name = "resire",
    about = "Tomographic reconstruction engine: RESIRE gradient descent with SIRT and FBP baselines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Algo {
    Resire,
    Sirt,
    Fbp,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a phantom, simulate its tilt series, and write truth.mrc,
    /// stack.mrc, and angles.tlt
    Simulate {
        /// Phantom preset name (vesicle64, ball32)
        #[arg(long)]
        phantom: String,
        /// Tilt range as start,end,step in degrees (single axis)
        #[arg(long, allow_hyphen_values = true)]
        tilt: String,
        /// Gaussian noise sigma as a fraction of mean positive intensity
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// Noise seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a stack and write recon.mrc and trace.csv
    Reconstruct {
        #[arg(long, value_enum)]
        algo: Algo,
        /// Measured projections (MRC, nz = projection count)
        #[arg(long)]
        stack: PathBuf,
        /// Tilt series text file
        #[arg(long)]
        angles: PathBuf,
        /// Reconstruction volume dimensions X,Y,Z
        #[arg(long)]
        dims: String,
        /// Iteration count (resire/sirt)
        #[arg(long)]
        iters: Option<usize>,
        /// Normalized step (resire) or relaxation (sirt)
        #[arg(long)]
        step: Option<f64>,
        /// Oversampling ratio of the forward model
        #[arg(long)]
        oversample: Option<f64>,
        /// Clamp negatives after each update (resire)
        #[arg(long)]
        positivity: bool,
        /// Stop when the trace R-factor reaches this value (resire)
        #[arg(long)]
        rfactor_target: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a reconstruction to ground truth and measurements; writes
    /// fsc.csv and rfactor.csv
    Evaluate {
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        stack: PathBuf,
        #[arg(long)]
        angles: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all three algorithms on one simulated directory and print a
    /// summary table
    Compare {
        /// Directory containing stack.mrc and angles.tlt (as written by
        /// simulate)
        #[arg(long)]
        dir: PathBuf,
        /// Iteration count for the iterative algorithms
        #[arg(long, default_value_t = 400)]
        iters: usize,
        /// Volume thickness (defaults to the projection width)
        #[arg(long)]
        thickness: Option<usize>,
    },
}

enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli.command) {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run 'resire --help' for usage");
            std::process::exit(1);
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Divergence { .. } => 3,
                _ => 2,
            };
            std::process::exit(code);
        }
    }
}

fn parse_triple<T: std::str::FromStr>(text: &str, what: &str) -> Result<[T; 3], CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "{what} must be three comma-separated values, got '{text}'"
        )));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(p.trim().parse::<T>().map_err(|_| {
            CliError::Usage(format!("{what}: cannot parse '{p}'"))
        })?);
    }
    Ok(out.try_into().map_err(|_| unreachable!()).unwrap())
}

fn write_text_atomic(path: &Path, text: &str) -> Result<(), Error> {
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, text).map_err(|e| Error::Io {
        path: tmp.clone(),
        source: e,
    })?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn trace_csv(trace: &SolveTrace) -> String {
    let mut out = String::from("iter,sse,rfactor,seconds\n");
    for (i, ((sse, rf), sec)) in trace
        .sse_history
        .iter()
        .zip(&trace.rfactor_history)
        .zip(&trace.wall_time)
        .enumerate()
    {
        out.push_str(&format!("{i},{sse},{rf},{sec}\n"));
    }
    out
}

fn load_stack(stack: &Path, angles: &Path) -> Result<ProjectionStack, CliError> {
    let data = read_mrc(stack)?;
    let tilt = read_tilt_series(angles)?;
    let projections = data.into_projections()?;
    if projections.len() != tilt.len() {
        return Err(CliError::Core(Error::InvalidArgument(format!(
            "stack {} holds {} projections but tilt file {} lists {} angles",
            stack.display(),
            projections.len(),
            angles.display(),
            tilt.len()
        ))));
    }
    Ok(ProjectionStack::new(projections, tilt)?)
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            phantom,
            tilt,
            noise,
            seed,
            out,
        } => {
            let [start, end, step] = parse_triple::<f64>(&tilt, "--tilt")?;
            let spec = preset(&phantom)?;
            let truth = make_vesicle_phantom(&spec)?;
            let angles = tilt_range(start, end, step)?;
            let noise = NoiseSpec::gaussian(noise, seed)?;
            let cfg = ProjectorConfig::new(truth.dims())?;
            let stack = simulate_stack(&truth, &angles, &noise, &cfg)?;
            ensure_dir(&out)?;
            write_mrc(out.join("truth.mrc"), &truth)?;
            write_mrc_projections(out.join("stack.mrc"), stack.projections())?;
            write_tilt_series(out.join("angles.tlt"), stack.angles())?;
            println!(
                "simulated {} projections of '{}' into {}",
                stack.len(),
                phantom,
                out.display()
            );
            Ok(())
        }
        Command::Reconstruct {
            algo,
            stack,
            angles,
            dims,
            iters,
            step,
            oversample,
            positivity,
            rfactor_target,
            out,
        } => {
            let [nx, ny, nz] = parse_triple::<usize>(&dims, "--dims")?;
            let stack = load_stack(&stack, &angles)?;
            ensure_dir(&out)?;
            let (volume, trace) = match algo {
                Algo::Resire => {
                    let cfg = SolverConfig {
                        iterations: iters.unwrap_or(400),
                        step_t: step.unwrap_or(2.0),
                        oversampling_ratio: oversample.unwrap_or(2.0),
                        nonnegativity: positivity,
                        rfactor_target,
                    };
                    resire_solve(&stack, (nx, ny, nz), &cfg)?
                }
                Algo::Sirt => {
                    let cfg = SirtConfig {
                        iterations: iters.unwrap_or(400),
                        relaxation: step.unwrap_or(1.0),
                    };
                    sirt_solve(&stack, (nx, ny, nz), &cfg)?
                }
                Algo::Fbp => {
                    let v = fbp_solve(&stack, (nx, ny, nz), &FbpConfig::default())?;
                    (v, SolveTrace::default())
                }
            };
            write_mrc(out.join("recon.mrc"), &volume)?;
            write_text_atomic(&out.join("trace.csv"), &trace_csv(&trace))?;
            if let Some(rf) = trace.rfactor_history.last() {
                println!(
                    "reconstructed {} iterations, final trace R-factor {rf:.6}",
                    trace.rfactor_history.len()
                );
            } else {
                println!("reconstructed (single-step method)");
            }
            Ok(())
        }
        Command::Evaluate {
            recon,
            truth,
            stack,
            angles,
            out,
        } => {
            let recon = read_mrc(&recon)?.into_volume()?;
            let truth = read_mrc(&truth)?.into_volume()?;
            let stack = load_stack(&stack, &angles)?;
            ensure_dir(&out)?;
            let curve = fsc(&recon, &truth, default_shell_width(recon.dims()))?;
            write_text_atomic(&out.join("fsc.csv"), &curve.to_csv())?;
            let cfg = ProjectorConfig::new(recon.dims())?;
            let report = rfactor(&stack, &recon, &cfg)?;
            write_text_atomic(&out.join("rfactor.csv"), &report.to_csv(stack.angles())?)?;
            println!("aggregate R-factor {:.6}", report.aggregate);
            Ok(())
        }
        Command::Compare { dir, iters, thickness } => {
            let stack = load_stack(&dir.join("stack.mrc"), &dir.join("angles.tlt"))?;
            let (nx, ny) = stack.projection_dims();
            let dims = (nx, ny, thickness.unwrap_or(nx));
            let pcfg = ProjectorConfig::new(dims)?;

            let mut rows = Vec::new();
            let started = Instant::now();
            let (v, _) = resire_solve(
                &stack,
                dims,
                &SolverConfig {
                    iterations: iters,
                    ..SolverConfig::default()
                },
            )?;
            rows.push(("resire", rfactor(&stack, &v, &pcfg)?.aggregate, started.elapsed()));

            let started = Instant::now();
            let (v, _) = sirt_solve(
                &stack,
                dims,
                &SirtConfig {
                    iterations: iters,
                    ..SirtConfig::default()
                },
            )?;
            rows.push(("sirt", rfactor(&stack, &v, &pcfg)?.aggregate, started.elapsed()));

            let started = Instant::now();
            let v = fbp_solve(&stack, dims, &FbpConfig::default())?;
            rows.push(("fbp", rfactor(&stack, &v, &pcfg)?.aggregate, started.elapsed()));

            println!("{:<10} {:>10} {:>10}", "algorithm", "rfactor", "seconds");
            for (name, rf, dt) in rows {
                println!("{name:<10} {rf:>10.4} {:>10.2}", dt.as_secs_f64());
            }
            Ok(())
        }
    }
}

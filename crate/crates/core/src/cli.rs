//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, RunConfig};
use crate::design::{grid_search, refine, write_ranked_csv};
use crate::error::{Error, Result};
use crate::fe::{verify_against_closed_form, write_path_csv};
use crate::mechanism::aggregate_ring_force;
use crate::report::{
    write_curve_csv, write_d1_csv, write_file, write_grasper_csv, write_verify_csv,
};
use crate::tebc::{force_curve, peak_force};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "graspsynth",
    version,
    about = "Sizing and verification of flexure-based grasper triggers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form force curve of the configured flexures.
    Curve(CommonArgs),
    /// Bistability margin over the sweep.
    D1(CommonArgs),
    /// Grid search and pattern refinement of the flexure geometry.
    Design(CommonArgs),
    /// Finite-element check of the closed-form curve.
    Verify(CommonArgs),
    /// Whole-grasper response over the calibrated ring travel.
    Grasper(CommonArgs),
    /// Every table above, written into one directory.
    Report(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the configured one, then the current one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the sweep sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Overrides the sweep travel, mm.
    #[arg(long)]
    travel: Option<f64>,
    /// Only report warnings and errors.
    #[arg(long)]
    quiet: bool,
}

/// A failure tagged with the stage that produced it.
struct StageError {
    stage: &'static str,
    error: Error,
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };

    let (name, args) = match &cli.command {
        Command::Curve(a) => ("curve", a),
        Command::D1(a) => ("d1", a),
        Command::Design(a) => ("design", a),
        Command::Verify(a) => ("verify", a),
        Command::Grasper(a) => ("grasper", a),
        Command::Report(a) => ("report", a),
    };
    let level = if args.quiet {
        log::LevelFilter::Warn
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("GRASPSYNTH_LOG")
        .try_init();
    log::set_max_level(level);

    match run(&cli.command, args) {
        Ok(()) => EXIT_OK,
        Err(StageError { stage, error }) => {
            eprintln!("graspsynth {name}: {stage}: {error}");
            exit_code(&error)
        }
    }
}

struct Context {
    config: RunConfig,
    out: PathBuf,
    travel: f64,
    samples: usize,
}

fn load(args: &CommonArgs) -> std::result::Result<Context, StageError> {
    let mut config = load_config(&args.config).stage("loading config")?;
    if let Some(t) = args.travel {
        config.sweep.travel_max = t;
    }
    if let Some(n) = args.samples {
        config.sweep.n_samples = n;
    }
    config.validate().stage("applying command-line overrides")?;
    let out = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Context {
        travel: config.sweep.travel_max,
        samples: config.sweep.n_samples,
        config,
        out,
    })
}

fn run(command: &Command, args: &CommonArgs) -> std::result::Result<(), StageError> {
    let ctx = load(args)?;
    match command {
        Command::Curve(_) => curve(&ctx),
        Command::D1(_) => d1(&ctx),
        Command::Design(_) => design(&ctx),
        Command::Verify(_) => verify(&ctx),
        Command::Grasper(_) => grasper(&ctx),
        Command::Report(_) => {
            curve(&ctx)?;
            d1(&ctx)?;
            grasper(&ctx)?;
            verify(&ctx)?;
            if ctx.config.design.is_some() {
                design(&ctx)?;
            } else {
                log::info!("no design block in the config; skipping design");
            }
            Ok(())
        }
    }
}

fn emit(
    out: &Path,
    file: &str,
    write: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> std::result::Result<(), StageError> {
    let mut buf = Vec::new();
    write(&mut buf).stage("formatting output")?;
    let path = out.join(file);
    write_file(&path, &buf).stage("writing output")?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn curve(ctx: &Context) -> std::result::Result<(), StageError> {
    let geom = ctx.config.geometry().stage("curve setup")?;
    let mat = ctx.config.material_model().stage("curve setup")?;
    let n = ctx.config.mechanism.n_beams;
    let double = force_curve(&geom, &mat, ctx.travel, ctx.samples).stage("closed-form sweep")?;
    let ring = aggregate_ring_force(&double, n).stage("ring aggregation")?;
    let (at, peak) = peak_force(&ring).stage("ring aggregation")?;
    log::info!("peak ring force {peak:.4} N at {at:.4} mm for {n} flexures");
    emit(&ctx.out, "curve.csv", |w| write_curve_csv(&double, n, w))
}

fn d1(ctx: &Context) -> std::result::Result<(), StageError> {
    let geom = ctx.config.geometry().stage("d1 setup")?;
    emit(&ctx.out, "d1.csv", |w| write_d1_csv(&geom, ctx.travel, ctx.samples, w))
}

fn grasper(ctx: &Context) -> std::result::Result<(), StageError> {
    let cfg = ctx.config.mechanism_config().stage("grasper setup")?;
    let max = cfg.max_calibrated_trigger();
    emit(&ctx.out, "grasper.csv", |w| {
        write_grasper_csv(&cfg, max, ctx.samples, w)
    })
}

fn verify(ctx: &Context) -> std::result::Result<(), StageError> {
    let geom = ctx.config.geometry().stage("verify setup")?;
    let mat = ctx.config.material_model().stage("verify setup")?;
    let (report, path) =
        verify_against_closed_form(&geom, &mat, ctx.travel, ctx.samples, &ctx.config.fe)
            .stage("finite-element verification")?;
    log::info!(
        "FE vs closed form: rms_rel {:.4}, peak location diff {:.4} mm",
        report.single.rms_rel,
        report.single.peak_location_diff
    );
    emit(&ctx.out, "verify_report.csv", |w| write_verify_csv(&report, w))?;
    emit(&ctx.out, "fe_path.csv", |w| {
        write_path_csv(&path, w).map_err(|e| Error::io("<fe path csv>", e))
    })
}

fn design(ctx: &Context) -> std::result::Result<(), StageError> {
    let Some((spec, grid, max_evals)) = ctx.config.design_spec().stage("design setup")? else {
        return Err(StageError {
            stage: "design setup",
            error: Error::validation("the config has no design block"),
        });
    };
    let ranked = grid_search(&spec, &grid).stage("grid search")?;
    emit(&ctx.out, "design_ranked.csv", |w| {
        write_ranked_csv(&ranked, w).map_err(|e| Error::io("<design csv>", e))
    })?;
    let best = ranked.first().expect("grid has at least one point");
    let refined = refine(&spec, best, max_evals).stage("pattern refinement")?;
    if refined.exhausted {
        log::warn!("refinement stopped after {} evaluations", refined.evaluations);
    }
    log::info!(
        "best objective {:.3e} (grid {:.3e})",
        refined.candidate.objective,
        best.objective
    );
    emit(&ctx.out, "design_refined.csv", |w| {
        write_ranked_csv(std::slice::from_ref(&refined.candidate), w)
            .map_err(|e| Error::io("<design csv>", e))
    })
}

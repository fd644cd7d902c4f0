use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use critsys::config::ExperimentConfig;
use critsys::energy::NehariReport;
use critsys::experiments::runs::{
    discrete_sobolev_constant, limits_records, solve_record, upper_bound_csv, validate_record,
};
use critsys::experiments::sign::{nodal_csv, sign_changing_bn};
use critsys::experiments::sweep::{seeded, sweep_to_infinity, sweep_to_zero, SweepOutput};
use critsys::experiments::two_group::two_group_scan;
use critsys::experiments::{build_report, read_records, write_records, Start, SweepRecord};
use critsys::io::{check_grid, io_context, read_state, write_state};
use critsys::solver::{minimize, minimize_from};
use critsys::{Error, Result};

#[derive(Parser)]
#[command(
    name = "critsys",
    version,
    about = "Least-energy solutions of critical coupled Schrödinger systems on radial balls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Run {
    /// TOML experiment configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Least-energy solution of the configured model.
    Solve {
        #[command(flatten)]
        run: Run,
        /// Continue from a saved state file instead of the seeds.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Cross couplings along the schedule towards zero.
    SweepZero(Run),
    /// Cross couplings along the schedule towards minus infinity.
    SweepInfinity(Run),
    /// Nodal solution of the scalar equation from a symmetric competing pair.
    SignChanging(Run),
    /// Within-group coupling scan for groups {1,2},{3}.
    TwoGroup(Run),
    /// Sobolev constant, limit levels, f_max and cutoff-bubble upper bounds.
    Limits(Run),
    /// Checks the structural hypotheses of the configured model.
    Validate(Run),
    /// Re-renders the report of a saved records file.
    Report {
        records: PathBuf,
        /// Check names not enforced.
        #[arg(long)]
        skip: Vec<String>,
    },
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out.join("fields")).map_err(io_context(out))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_context(path))
}

/// Writes records and report; returns whether every enforced check passed.
fn finish(out: &Path, records: &[SweepRecord], skip: &[String]) -> Result<bool> {
    write_records(&out.join("records.csv"), records)?;
    let report = build_report(records, skip)?;
    let text = report.render();
    write(&out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(report.passed())
}

fn write_fields(out: &Path, sweep: &SweepOutput) -> Result<()> {
    for (i, u) in sweep.states.iter().enumerate() {
        write_state(&out.join("fields").join(format!("point_{i:03}.csv")), u)?;
    }
    Ok(())
}

fn run(command: Command) -> Result<bool> {
    let name = match &command {
        Command::Solve { .. } => "solve",
        Command::SweepZero(_) => "sweep-zero",
        Command::SweepInfinity(_) => "sweep-infinity",
        Command::SignChanging(_) => "sign-changing",
        Command::TwoGroup(_) => "two-group",
        Command::Limits(_) => "limits",
        Command::Validate(_) | Command::Report { .. } => "validate",
    };
    let (run, resume) = match command {
        Command::Report { records, skip } => {
            let records = read_records(&records)?;
            let report = build_report(&records, &skip)?;
            print!("{}", report.render());
            return Ok(report.passed());
        }
        Command::Solve { run, resume } => (run, resume),
        Command::SweepZero(r)
        | Command::SweepInfinity(r)
        | Command::SignChanging(r)
        | Command::TwoGroup(r)
        | Command::Limits(r)
        | Command::Validate(r) => (r, None),
    };
    let cfg = ExperimentConfig::load(&run.config)?;
    let grid = cfg.build_grid()?;
    let model = cfg.build_model(&grid)?;
    let out = run.out.as_path();
    prepare(out)?;
    write(
        &out.join("config.toml"),
        &fs::read_to_string(&run.config).map_err(io_context(&run.config))?,
    )?;
    let solver = seeded(&cfg.solver, &model);
    let skip = &cfg.checks.skip;
    let threshold = cfg.schedule.support_threshold;
    match name {
        "solve" => {
            let (result, start) = match resume {
                Some(path) => {
                    let initial = read_state(&path)?;
                    check_grid(&initial, &grid)?;
                    (
                        minimize_from(&model, &solver, &initial, None)?,
                        Start::Resume,
                    )
                }
                None => (minimize(&model, &grid, &solver)?, Start::Cold),
            };
            write_state(&out.join("fields").join("state.csv"), &result.state)?;
            write(
                &out.join("nehari.csv"),
                &format!(
                    "{}\n{}\n",
                    NehariReport::csv_header(model.m()),
                    result.report.csv_row()
                ),
            )?;
            let sobolev = discrete_sobolev_constant(&grid, &solver)?;
            let record = solve_record(
                &model,
                &grid,
                &solver,
                &result,
                start,
                sobolev,
                cfg.checks.mass_floor,
                threshold,
            )?;
            finish(out, &[record], skip)
        }
        "sweep-zero" | "sweep-infinity" => {
            let sweep = if name == "sweep-zero" {
                sweep_to_zero(&model, &grid, &solver, &cfg.schedule)?
            } else {
                sweep_to_infinity(&model, &grid, &solver, &cfg.schedule)?
            };
            write_fields(out, &sweep)?;
            finish(out, &sweep.records, skip)
        }
        "sign-changing" => {
            let sweep = sign_changing_bn(
                &model,
                &grid,
                &solver,
                &cfg.schedule,
                cfg.sign_changing.band,
            )?;
            write_fields(out, &sweep)?;
            for (i, u) in sweep.states.iter().enumerate() {
                write(
                    &out.join("fields").join(format!("nodal_{i:03}.csv")),
                    &nodal_csv(u),
                )?;
            }
            finish(out, &sweep.records, skip)
        }
        "two-group" => {
            let tg = cfg
                .two_group
                .as_ref()
                .ok_or_else(|| Error::Config("two-group needs a [two_group] block".into()))?;
            let sobolev = discrete_sobolev_constant(&grid, &solver)?;
            let sweep = two_group_scan(
                &model,
                &grid,
                &cfg.solver,
                tg.sigma0,
                tg.sigma1,
                &cfg.schedule.values,
                sobolev,
                threshold,
            )?;
            write_fields(out, &sweep)?;
            finish(out, &sweep.records, skip)
        }
        "limits" => {
            let records = limits_records(&model, &grid, &cfg.limits.eps)?;
            write(&out.join("upper_bound.csv"), &upper_bound_csv(&records))?;
            finish(out, &records, skip)
        }
        _ => {
            let (record, messages) = validate_record(&model, &grid)?;
            for m in &messages {
                println!("{m}");
            }
            finish(out, &[record], skip)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

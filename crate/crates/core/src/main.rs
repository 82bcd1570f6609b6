use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use iga_lbm::benchmarks::{
    centerline_extract, compare_ghia, convergence_study, l2_error, Centerline, GhiaReference,
};
use iga_lbm::io::{
    parse_config, write_centerline_csv, write_diagnostics_csv, write_study_csv, write_vtk, CaseConfig,
    FieldSnapshot, RunConfig, CASES,
};
use iga_lbm::nurbs::GeometryKind;
use iga_lbm::solver::Solver;
use iga_lbm::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "iga-lbm", version, about = "Isogeometric lattice Boltzmann solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one case and write diagnostics, snapshots and profiles.
    Run(RunArgs),
    /// Taylor-Green refinement study.
    ConvergenceStudy(RunArgs),
    /// Print registered cases and geometry builders.
    ListCases,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides the config and the environment default.
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Overrides solver.n_max.
    #[arg(long, value_name = "N")]
    max_steps: Option<usize>,
    /// Reserved; the solver has no stochastic components.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// `1` for the deterministic serial path, `auto` for all cores.
    #[arg(long, default_value = "1", value_parser = parse_threads)]
    threads: Threads,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Threads {
    One,
    Auto,
}

fn parse_threads(s: &str) -> std::result::Result<Threads, String> {
    match s {
        "1" => Ok(Threads::One),
        "auto" => Ok(Threads::Auto),
        _ => Err(format!("expected 1 or auto, got '{s}'")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => load(&a).and_then(|c| run(&c)),
        Command::ConvergenceStudy(a) => load(&a).and_then(|c| study(&c)),
        Command::ListCases => {
            list_cases();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_divergence() { 2 } else { 1 })
        }
    }
}

fn load(a: &RunArgs) -> Result<RunConfig> {
    let mut c = parse_config(&a.config)?;
    if let Some(dir) = &a.output {
        c.output.dir = dir.clone();
    }
    if let Some(n) = a.max_steps {
        c.solver.n_max = n;
    }
    if let Some(seed) = a.seed {
        info!("seed {seed} accepted but unused: the solver is deterministic");
    }
    c.solver.parallel = a.threads == Threads::Auto;
    std::fs::create_dir_all(&c.output.dir)
        .map_err(|e| Error::Config(vec![format!("cannot create {}: {e}", c.output.dir.display())]))?;
    Ok(c)
}

fn list_cases() {
    println!("cases:");
    for c in CASES {
        let note = match c {
            "taylor_green" => "decaying periodic vortex (periodic_box; curved_quad exploratory)",
            _ => "lid-driven square cavity (unit_square, curved_quad, quarter_annulus)",
        };
        println!("  {c:<14} {note}");
    }
    println!("geometry builders:");
    for k in GeometryKind::ALL {
        println!("  {}", k.name());
    }
}

fn run(c: &RunConfig) -> Result<()> {
    let case = c.case_spec()?;
    let mut solver = Solver::new(&case, c.solver.clone())?;
    let dir = &c.output.dir;
    let mut history = Vec::new();
    let every = c.output.vtk_every;
    let outcome = solver.run(|s, d| {
        history.push(*d);
        if c.output.vtk && every > 0 && d.step % every == 0 {
            write_vtk(&FieldSnapshot::from_solver(s), &dir.join(format!("snapshot_{:08}.vtk", d.step)))?;
        }
        Ok(())
    });
    // keep whatever was recorded, including the lead-up to a divergence
    if c.output.diagnostics {
        write_diagnostics_csv(&history, &dir.join("diagnostics.csv"))?;
    }
    let summary = outcome?;
    if c.output.vtk {
        write_vtk(&FieldSnapshot::from_solver(&solver), &dir.join("final.vtk"))?;
    }
    println!(
        "{}: {:?} after {} steps, t = {:.6e}",
        case.name, summary.stop, summary.steps, summary.time
    );
    match &c.case {
        CaseConfig::TaylorGreen(p) if c.geometry.kind == GeometryKind::PeriodicBox => {
            let exact = p.exact_fields(&solver.disc, solver.state.time);
            println!("relative L2 velocity error vs exact: {:.6e}", l2_error(&solver.fields, &exact)?);
        }
        CaseConfig::LidCavity(p) if c.output.centerlines => cavity_profiles(&solver, p.u_lid, dir)?,
        _ => {}
    }
    Ok(())
}

fn cavity_profiles(solver: &Solver, u_lid: f64, dir: &Path) -> Result<()> {
    if solver.disc.patch.is_rational() || solver.disc.colloc.periodic() != [false, false] {
        warn!("centerline profiles need a box geometry; skipped");
        return Ok(());
    }
    let reference = GhiaReference::bundled();
    for (line, table, file) in [
        (Centerline::Vertical, &reference.u_vertical, "centerline_u.csv"),
        (Centerline::Horizontal, &reference.v_horizontal, "centerline_v.csv"),
    ] {
        let stations: Vec<f64> = table.iter().map(|r| r.0).collect();
        let samples = match centerline_extract(&solver.disc, &solver.fields, line, &stations) {
            Ok(s) => s,
            Err(e) => {
                warn!("centerline extraction skipped: {e}");
                return Ok(());
            }
        };
        write_centerline_csv(&samples, &dir.join(file))?;
        let err = compare_ghia(&samples, table, u_lid)?;
        println!("{file}: rms {:.4}% max {:.4}% of the lid speed", 100.0 * err.rms, 100.0 * err.max);
    }
    Ok(())
}

fn study(c: &RunConfig) -> Result<()> {
    let CaseConfig::TaylorGreen(p) = &c.case else {
        return Err(Error::Config(vec!["convergence-study requires case = \"taylor_green\"".into()]));
    };
    if c.geometry.kind != GeometryKind::PeriodicBox {
        return Err(Error::Config(vec!["convergence-study runs on periodic_box".into()]));
    }
    let rows = convergence_study(
        p,
        &c.study.resolutions,
        c.geometry.params.degree,
        c.study.final_time,
        &c.solver,
        c.study.mode,
    )?;
    write_study_csv(&rows, &c.output.dir.join("study.csv"))?;
    println!("{:>6} {:>12} {:>8} {:>14} {:>8} {:>12}", "points", "h", "steps", "L2 error", "order", "mass drift");
    let fmt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$e}"));
    for r in &rows {
        println!(
            "{:>6} {:>12.4e} {:>8} {:>14} {:>8} {:>12}",
            r.points,
            r.h,
            r.steps,
            fmt(r.error, 4),
            r.order.map_or("-".to_string(), |o| format!("{o:.3}")),
            fmt(r.mass_drift, 2)
        );
    }
    if let Some((points, (step, reason))) = rows.iter().find_map(|r| Some((r.points, r.failure.clone()?))) {
        return Err(Error::Divergence {
            step,
            reason: format!("{points}-point run: {reason}"),
            last_good: None,
        });
    }
    Ok(())
}

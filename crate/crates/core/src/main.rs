use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use pseudo_equator::angle::Angle;
use pseudo_equator::engine::{iterate_with, Engine, IterOptions, IterationRecord, Status};
use pseudo_equator::io::{format_point, render_sphere, report_text, CurveDump, RunConfig, View};
use pseudo_equator::lamination::limb_of;
use pseudo_equator::mating::{base_schedule, fsr_valid, schedule_at, Mating, MatingError};

const EXIT_STRUCTURAL: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(name = "pseudo-equator", version, about = "Approximate geometric matings of critically preperiodic quadratics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check mateability, the Jordan condition and the subdivision rule.
    Check { alpha: Angle, beta: Angle },
    /// Print the marked parameters of the curve at a level.
    Schedule {
        alpha: Angle,
        beta: Angle,
        #[arg(long, default_value_t = 0)]
        level: usize,
    },
    /// Run the pullback iteration.
    Mate {
        alpha: Angle,
        beta: Angle,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Iterations to run before convergence may be declared.
        #[arg(long, default_value_t = 1)]
        min_iters: usize,
        /// Samples between consecutive marks in the initial curve.
        #[arg(long, default_value_t = 64)]
        samples: usize,
        /// Sample budget kept after pruning.
        #[arg(long, default_value_t = 4096)]
        budget: usize,
        /// Write the report and one curve dump per iteration here.
        #[arg(long, env = "PSEUDO_EQUATOR_DUMP_DIR")]
        dump: Option<PathBuf>,
        /// Write SVG renders of the initial and final curves.
        #[arg(long)]
        render: bool,
        /// Lift arcs on one thread.
        #[arg(long)]
        sequential: bool,
    },
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn require_preperiodic(angles: &[Angle]) -> Result<(), ExitCode> {
    for a in angles {
        if !a.is_preperiodic() {
            return Err(usage(format!("{a} is periodic; angles must be strictly preperiodic")));
        }
    }
    Ok(())
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn check(alpha: Angle, beta: Angle) -> ExitCode {
    if let Err(c) = require_preperiodic(&[alpha, beta]) {
        return c;
    }
    for (name, a) in [("alpha", alpha), ("beta", beta)] {
        match limb_of(a) {
            Ok(Some(l)) => println!("limb {name} {l}"),
            Ok(None) => println!("limb {name} none"),
            Err(e) => return usage(e),
        }
    }
    let mut ok = true;
    let mut mating = match Mating::new(alpha, beta) {
        Ok(m) => {
            println!("mateable yes");
            m
        }
        Err(e @ MatingError::NotMateable(..)) => {
            println!("mateable no: {e}");
            return ExitCode::from(EXIT_STRUCTURAL);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_STRUCTURAL);
        }
    };
    match mating.pinch() {
        Ok(None) => println!("jordan yes"),
        Ok(Some(p)) => {
            println!("jordan no: {p}");
            ok = false;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_STRUCTURAL);
        }
    }
    match fsr_valid(alpha, beta) {
        Ok(v) => {
            println!("fsr {}", yes(v));
            ok &= v;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_STRUCTURAL);
        }
    }
    match base_schedule(alpha, beta) {
        Ok(s) => {
            println!("postcritical {}", s.postcritical_count());
            if let Some(w) = s.orbifold_warning() {
                println!("warning {w}");
            }
        }
        Err(e) => {
            println!("schedule no: {e}");
            ok = false;
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_STRUCTURAL)
    }
}

fn schedule(alpha: Angle, beta: Angle, level: usize) -> ExitCode {
    if let Err(c) = require_preperiodic(&[alpha, beta]) {
        return c;
    }
    match schedule_at(alpha, beta, level) {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_STRUCTURAL)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn dump_curve(dir: &Path, id: &str, engine: &Engine, record: &IterationRecord) -> Result<(), String> {
    let dump = CurveDump {
        curve: engine.curve.clone(),
        map: Some((record.u, record.v)),
    };
    write_file(&dir.join(format!("{id}.curve-{:04}.txt", record.n)), &dump.to_string())
}

fn render_curve(dir: &Path, id: &str, engine: &Engine, n: usize) -> Result<(), String> {
    for view in View::presets() {
        let svg = render_sphere(&engine.curve, &view);
        write_file(&dir.join(format!("{id}.curve-{n:04}.{}.svg", view.name)), &svg)?;
    }
    Ok(())
}

fn mate(config: RunConfig) -> ExitCode {
    if let Err(c) = require_preperiodic(&[config.alpha, config.beta]) {
        return c;
    }
    let id = config.run_id();
    let out_dir = config.dump_dir.clone().or_else(|| config.render.then(|| PathBuf::from(".")));
    if let Some(d) = &out_dir {
        if let Err(e) = fs::create_dir_all(d) {
            eprintln!("error: cannot create {}: {e}", d.display());
            return ExitCode::from(EXIT_IO);
        }
    }
    let mut io_error: Option<String> = None;
    let mut last: Option<Engine> = None;
    let report = iterate_with(config.alpha, config.beta, config.options, |engine, record| {
        if io_error.is_some() {
            return;
        }
        let result = (|| {
            if let Some(d) = &config.dump_dir {
                dump_curve(d, &id, engine, record)?;
            }
            if config.render && record.n == 0 {
                render_curve(out_dir.as_deref().expect("render has a directory"), &id, engine, 0)?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            io_error = Some(e);
        }
        if config.render {
            last = Some(engine.clone());
        }
    });
    if let (Some(engine), Some(d)) = (&last, &out_dir) {
        if io_error.is_none() && engine.iteration > 0 {
            if let Err(e) = render_curve(d, &id, engine, engine.iteration) {
                io_error = Some(e);
            }
        }
    }
    let text = report_text(&config, &report);
    match &config.dump_dir {
        Some(d) => {
            let path = d.join(format!("{id}.report.txt"));
            if let Err(e) = write_file(&path, &text) {
                io_error.get_or_insert(e);
            } else {
                println!("report {}", path.display());
            }
        }
        None => print!("{text}"),
    }
    println!("run-id {id}");
    println!("status {}", report.status.label());
    if let Some(r) = report.last() {
        println!("final n {}", r.n);
        println!("final u {}", format_point(r.u, 12));
        println!("final v {}", format_point(r.v, 12));
    }
    if let Some(e) = io_error {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_IO);
    }
    match &report.status {
        Status::Converged | Status::MaxIterations => ExitCode::SUCCESS,
        Status::StructuralError(m) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_STRUCTURAL)
        }
        Status::NumericError(m) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_NUMERIC)
        }
        Status::Diverged => {
            eprintln!("error: iteration diverged");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Check { alpha, beta } => check(alpha, beta),
        Command::Schedule { alpha, beta, level } => schedule(alpha, beta, level),
        Command::Mate {
            alpha,
            beta,
            iters,
            tol,
            min_iters,
            samples,
            budget,
            dump,
            render,
            sequential,
        } => {
            if tol.is_nan() || tol <= 0.0 || samples == 0 || budget == 0 {
                return usage("--tol, --samples and --budget must be positive");
            }
            let options = IterOptions {
                max_iters: iters,
                tol,
                min_iters,
                samples_per_arc: samples,
                budget,
                parallel: !sequential,
                ..IterOptions::default()
            };
            let mut config = RunConfig::new(alpha, beta, options);
            config.dump_dir = dump;
            config.render = render;
            mate(config)
        }
    }
}

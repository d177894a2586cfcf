//! The `bq` command line.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::dynamics::{simulate, InvariantReport, RunConfig};
use crate::error::{Error, Result};
use crate::estimates::ConstantOptions;
use crate::harness::{sweep, SweepConfig, SweepReport, Verdict};
use crate::io::json::run_report_json;
use crate::io::svg::{convergence_plot, gap_plot, nu_stem, smallness_plot, theta_plot, write_plot_svg};
use crate::io::{
    parse_config, read_report_json, read_trace_csv, write_checkpoint, write_gaps_csv, write_report_json,
    write_trace_csv, ConfigFile, RunReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

pub const REPORT_FILE: &str = "report.json";
pub const REFERENCE_TRACE: &str = "reference.csv";

#[derive(Parser, Debug)]
#[command(name = "bq", version, about = "Boussinesq inviscid-limit experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate a single run and check its invariants.
    Run {
        config: PathBuf,
        /// Output directory; overrides `run.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a viscosity sweep against the inviscid reference.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-evaluate a sweep report under different universal constants.
    Envelope {
        report: PathBuf,
        #[arg(long)]
        c0: Option<f64>,
        #[arg(long)]
        e1: Option<f64>,
        #[arg(long)]
        c_univ: Option<f64>,
        /// Where to write the re-evaluated report; defaults to `report.envelope.json` beside the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run every verdict of a sweep report from its stored series.
    Check { report: PathBuf },
    /// Write SVG plots for a sweep report.
    Plot {
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_verdicts(verdicts: &[Verdict]) -> bool {
    let mut ok = true;
    for v in verdicts {
        let tag = if v.passed {
            "PASS"
        } else if v.masked {
            "MASKED"
        } else {
            ok = false;
            "FAIL"
        };
        println!("{tag:6} {}", v.name);
    }
    ok
}

fn exit_for(ok: bool) -> i32 {
    if ok {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    }
}

fn run_command(config: RunConfig, out: Option<PathBuf>) -> Result<i32> {
    let dir = out.unwrap_or_else(|| config.output_dir.clone());
    std::fs::create_dir_all(&dir)?;
    let output = simulate(&config)?;
    write_trace_csv(&output.trace, &dir.join("trace.csv"))?;
    let mut names = Vec::new();
    for (i, state) in output.checkpoints.iter().enumerate() {
        let name = format!("checkpoint_{i:03}.bqchk");
        write_checkpoint(state, &dir.join(&name))?;
        names.push(name);
    }
    let report = RunReport {
        config,
        steps: output.steps,
        abort: output.abort.clone(),
        invariants: output.invariants.clone(),
        checkpoints: names,
    };
    std::fs::write(dir.join("run.json"), run_report_json(&report)?)?;
    let mut ok = output.abort.is_none();
    if let Some(a) = &output.abort {
        println!("FAIL   aborted at t = {}: {}", a.t, a.reason);
    }
    for v in &output.invariants.verdicts {
        println!("{:6} {} = {:e} (limit {:e})", if v.passed { "PASS" } else { "FAIL" }, v.name, v.value, v.threshold);
        ok &= v.passed;
    }
    Ok(exit_for(ok))
}

/// Writes a sweep's report, traces and gap series into `dir`.
pub fn write_sweep_outputs(config: &SweepConfig, dir: &Path) -> Result<SweepReport> {
    std::fs::create_dir_all(dir)?;
    let outcome = sweep(config)?;
    write_report_json(&outcome.report, &dir.join(REPORT_FILE))?;
    write_trace_csv(&outcome.traces[0], &dir.join(REFERENCE_TRACE))?;
    for (run, trace) in outcome.report.runs.iter().zip(&outcome.traces[1..]) {
        let stem = nu_stem(run.nu);
        write_trace_csv(trace, &dir.join(format!("{stem}.csv")))?;
        write_gaps_csv(&run.fine, &dir.join(format!("{stem}_gaps.csv")))?;
    }
    log::info!(
        "sweep took {:.1} s on {} workers",
        outcome.wall_time,
        outcome.report.metadata.workers
    );
    Ok(outcome.report)
}

fn sweep_command(config: SweepConfig, out: Option<PathBuf>) -> Result<i32> {
    let dir = out.unwrap_or_else(|| config.template.output_dir.clone());
    let report = write_sweep_outputs(&config, &dir)?;
    if report.partial {
        println!("report is partial: at least one run aborted");
    }
    for fit in &report.orders {
        println!("order p = {}: {:.4} (residual {:.2e})", fit.p, fit.order, fit.residual);
    }
    Ok(exit_for(print_verdicts(&report.verdicts())))
}

fn envelope_command(path: &Path, c0: Option<f64>, e1: Option<f64>, c_univ: Option<f64>, out: Option<PathBuf>) -> Result<i32> {
    let report = read_report_json(path)?;
    let base = report.metadata.options.clone();
    let opts = ConstantOptions {
        c0: c0.unwrap_or(base.c0),
        e1: e1.unwrap_or(base.e1),
        c_univ: c_univ.unwrap_or(base.c_univ),
        ..base
    };
    let errs = opts.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let updated = report.with_options(&opts)?;
    let out = out.unwrap_or_else(|| path.with_file_name("report.envelope.json"));
    write_report_json(&updated, &out)?;
    println!("constants: c_k = {}, c0 = {}, c_univ = {}, e1 = {}", opts.c_k, opts.c0, opts.c_univ, opts.e1);
    Ok(exit_for(print_verdicts(&updated.verdicts())))
}

/// Recomputes the invariants of every trace stored beside the report; `None` when a file is absent.
fn stored_invariants(report: &SweepReport, dir: &Path) -> Result<Vec<(String, Option<InvariantReport>)>> {
    let kappa = report.metadata.kappa;
    let mut out = Vec::new();
    let mut one = |name: String, nu: f64| -> Result<()> {
        let path = dir.join(&name);
        let inv = if path.exists() {
            Some(InvariantReport::from_trace(&read_trace_csv(&path, nu, kappa)?))
        } else {
            None
        };
        out.push((name, inv));
        Ok(())
    };
    one(REFERENCE_TRACE.to_string(), 0.0)?;
    for run in &report.runs {
        one(format!("{}.csv", nu_stem(run.nu)), run.nu)?;
    }
    Ok(out)
}

/// Re-evaluates a stored report; returns the verdicts and any disagreement with what was stored.
pub fn recheck(path: &Path) -> Result<(Vec<Verdict>, Vec<String>)> {
    let stored = read_report_json(path)?;
    let mut fresh = stored.clone();
    fresh.evaluate_checks()?;
    let mut mismatches = Vec::new();
    for (a, b) in stored.runs.iter().zip(&fresh.runs) {
        if serde_json::to_value(&a.checks)? != serde_json::to_value(&b.checks)? {
            mismatches.push(format!("stored checks for nu = {} differ from re-evaluation", a.nu));
        }
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let recomputed = stored_invariants(&stored, dir)?;
    let mut expected = vec![&stored.reference.invariants];
    expected.extend(stored.runs.iter().map(|r| &r.invariants));
    for ((name, inv), want) in recomputed.into_iter().zip(expected) {
        match inv {
            Some(inv) if serde_json::to_value(&inv)? != serde_json::to_value(want)? => {
                mismatches.push(format!("invariants recomputed from {name} differ from the report"));
            }
            Some(_) => {}
            None => log::info!("{name} not found; stored invariants taken as recorded"),
        }
    }
    Ok((fresh.verdicts(), mismatches))
}

fn check_command(path: &Path) -> Result<i32> {
    let (verdicts, mismatches) = recheck(path)?;
    let mut ok = print_verdicts(&verdicts);
    for m in &mismatches {
        println!("FAIL   {m}");
        ok = false;
    }
    Ok(exit_for(ok))
}

fn plot_command(path: &Path, out: Option<PathBuf>) -> Result<i32> {
    let report = read_report_json(path)?;
    let dir = out.unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).join("plots"));
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    if report.runs.iter().filter(|r| r.nu > 0.0).count() >= 2 {
        let f = dir.join("convergence.svg");
        write_plot_svg(&convergence_plot(&report), &f)?;
        written.push(f);
    }
    for run in &report.runs {
        let stem = nu_stem(run.nu);
        let plot = gap_plot(&report, run);
        if plot.series.iter().any(|s| !s.points.is_empty()) {
            let f = dir.join(format!("{stem}_vorticity_gap.svg"));
            write_plot_svg(&plot, &f)?;
            written.push(f);
        }
        if let Some(c) = &report.constants {
            if !run.fine.is_empty() {
                let f = dir.join(format!("{stem}_smallness.svg"));
                write_plot_svg(&smallness_plot(run, c)?, &f)?;
                written.push(f);
                let f = dir.join(format!("{stem}_theta.svg"));
                write_plot_svg(&theta_plot(run, c), &f)?;
                written.push(f);
            }
        }
    }
    for f in written {
        println!("wrote {}", f.display());
    }
    Ok(EXIT_OK)
}

pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, out } => match parse_config(&config)? {
            ConfigFile::Run(c) => run_command(c, out),
            ConfigFile::Sweep(_) => Err(Error::InvalidArgument(format!(
                "{} describes a sweep; use `bq sweep`",
                config.display()
            ))),
        },
        Command::Sweep { config, out } => match parse_config(&config)? {
            ConfigFile::Sweep(c) => sweep_command(c, out),
            ConfigFile::Run(_) => Err(Error::InvalidArgument(format!(
                "{} has no [sweep] table; use `bq run`",
                config.display()
            ))),
        },
        Command::Envelope {
            report,
            c0,
            e1,
            c_univ,
            out,
        } => envelope_command(&report, c0, e1, c_univ, out),
        Command::Check { report } => check_command(&report),
        Command::Plot { report, out } => plot_command(&report, out),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

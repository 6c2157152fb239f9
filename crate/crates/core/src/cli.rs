//! `snls-lab` command line: parse, validate, dispatch, write a run directory.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{ConvergenceAxis, Expectation, LabConfig};
use crate::error::{Error, Result};
use crate::lab::fit::{fit_rate, write_rates_csv, Axis, ConvergenceReport};
use crate::lab::lemmas::run_lemma_suite;
use crate::lab::moments::moment_diagnostic;
use crate::lab::observables::observables;
use crate::lab::plan::ExperimentPlan;
use crate::lab::strong::{strong_error, ErrorTable};
use crate::noise::{sample_path, PathSeed};
use crate::solver::Stepper;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Length of the digest prefix naming a run directory.
const DIR_DIGEST_LEN: usize = 16;

#[derive(Parser, Debug)]
#[command(
    name = "snls-lab",
    version,
    about = "Convergence laboratory for the stochastic semiclassical NLS solver"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the Monte Carlo path count.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Parent directory for run directories.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for path-level parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Only report errors.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Strong-error table and rate fit along one axis.
    RunConvergence {
        #[arg(long, value_enum)]
        axis: ConvergenceAxis,
        #[command(flatten)]
        common: Common,
    },
    /// Randomized checks of the semigroup estimates.
    RunLemmaTests {
        #[command(flatten)]
        common: Common,
    },
    /// Pick an admissible (N, τ) pair for a target error and measure it.
    RunMeshing {
        #[command(flatten)]
        common: Common,
    },
    /// Moment curves and Hölder increments.
    RunMoments {
        #[command(flatten)]
        common: Common,
    },
    /// Validate the configuration and print the effective plan without running it.
    PrintPlan {
        #[arg(long, value_enum)]
        axis: Option<ConvergenceAxis>,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::RunConvergence { common, .. }
            | Command::RunLemmaTests { common }
            | Command::RunMeshing { common }
            | Command::RunMoments { common }
            | Command::PrintPlan { common, .. } => common,
        }
    }

    fn label(&self) -> String {
        match self {
            Command::RunConvergence { axis, .. } => format!("run-convergence:{axis}"),
            Command::RunLemmaTests { .. } => "run-lemma-tests".into(),
            Command::RunMeshing { .. } => "run-meshing".into(),
            Command::RunMoments { .. } => "run-moments".into(),
            Command::PrintPlan { .. } => "print-plan".into(),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    digest: &'a str,
    seed: u64,
    paths: usize,
    timestamp: u64,
    version: &'static str,
    status: &'a str,
    summary: &'a [String],
    outputs: &'a [String],
    config: &'a LabConfig,
}

/// Outcome of a completed experiment.
struct Outcome {
    pass: bool,
    summary: Vec<String>,
    outputs: Vec<String>,
}

fn load_config(cmd: &Command) -> Result<LabConfig> {
    let common = cmd.common();
    let mut cfg = match (&common.config, cmd) {
        (Some(path), _) => LabConfig::load(path)?,
        (None, Command::RunLemmaTests { .. }) => LabConfig::lemma_default(),
        (None, _) => return Err(Error::Config("--config is required for this subcommand".into())),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = common.paths {
        cfg.paths = paths;
    }
    Ok(cfg)
}

fn check_fit_points(plan: &ExperimentPlan, axis: ConvergenceAxis) -> Result<()> {
    let distinct = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    let (what, count) = match axis.fit_axis() {
        Axis::Eps => ("eps values", distinct(plan.eps.clone())),
        Axis::N => (
            "K_cut values",
            distinct(plan.ladder.iter().map(|p| p.k_cut as f64).collect()),
        ),
        Axis::Tau | Axis::Lag => (
            "step counts",
            distinct(plan.ladder.iter().map(|p| p.steps as f64).collect()),
        ),
    };
    if count < 3 {
        return Err(Error::Config(format!(
            "{axis} convergence needs >= 3 distinct {what}, got {count}"
        )));
    }
    Ok(())
}

/// Check every precondition of `cmd` without computing anything.
fn validate(cmd: &Command, cfg: &LabConfig) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    match cmd {
        Command::RunConvergence { axis, .. } => {
            let plan = cfg.experiment_plan()?;
            plan.validate()?;
            check_fit_points(&plan, *axis)?;
            lines.push(format!(
                "convergence: {} ladder points, reference K = {}, M = {}, {} eps values",
                plan.ladder.len(),
                plan.reference.k_cut,
                plan.reference.steps,
                plan.eps.len()
            ));
        }
        Command::RunLemmaTests { .. } => {
            let s = cfg.lemma_settings();
            if s.tuples == 0 || s.max_power == 0 {
                return Err(Error::Config("lemmas: tuples and max_power must be positive".into()));
            }
            lines.push(format!(
                "lemmas: {} tuples, K = {}, m <= {}",
                s.tuples, s.k, s.max_power
            ));
        }
        Command::RunMeshing { .. } => {
            let plan = cfg.meshing_plan()?;
            plan.validate()?;
            lines.push(format!(
                "meshing: candidates K = {:?}, calibration K = {:?}",
                plan.candidates, plan.calibration
            ));
        }
        Command::RunMoments { .. } => {
            let plan = cfg.moment_plan()?;
            plan.validate()?;
            lines.push(format!(
                "moments: {} eps values, M = {}, K = {}",
                plan.eps.len(),
                plan.steps,
                plan.k_cut
            ));
        }
        Command::PrintPlan { axis, .. } => {
            if let Some(axis) = axis {
                lines.extend(validate(
                    &Command::RunConvergence {
                        axis: *axis,
                        common: cmd.common().clone(),
                    },
                    cfg,
                )?);
            }
            if cfg.convergence.is_some() && axis.is_none() {
                cfg.experiment_plan()?.validate()?;
                lines.push("convergence section valid".into());
            }
            if cfg.moments.is_some() {
                cfg.moment_plan()?.validate()?;
                lines.push("moments section valid".into());
            }
            if cfg.meshing.is_some() {
                cfg.meshing_plan()?.validate()?;
                lines.push("meshing section valid".into());
            }
        }
    }
    Ok(lines)
}

fn create(dir: &Path, name: &str, outputs: &mut Vec<String>) -> Result<BufWriter<File>> {
    outputs.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn judge(report: ConvergenceReport, expect: Option<Expectation>) -> ConvergenceReport {
    match expect {
        Some(e) => report.with_expectation(e.rate, e.tolerance),
        None => report,
    }
}

fn describe(label: &str, r: &ConvergenceReport) -> String {
    let verdict = match (r.expected, r.tolerance, r.pass) {
        (Some(e), Some(t), Some(p)) => format!(" (expected {e:.3} ± {t}) {}", if p { "PASS" } else { "FAIL" }),
        _ => " (informational)".into(),
    };
    let mut line = format!("{label}: slope vs {} = {:.4} ± {:.4}{verdict}", r.axis, r.slope, r.ci95);
    if let Some(n) = &r.notice {
        line.push_str(&format!("; {n}"));
    }
    line
}

fn convergence_fits(
    table: &ErrorTable,
    plan: &ExperimentPlan,
    axis: ConvergenceAxis,
    expect: Option<Expectation>,
) -> Result<Vec<(String, ConvergenceReport)>> {
    let mut fits = Vec::new();
    match axis {
        ConvergenceAxis::Epsilon => {
            for p in &plan.ladder {
                let rows: Vec<_> = table
                    .rows
                    .iter()
                    .filter(|r| r.k_cut == p.k_cut && r.steps == p.steps)
                    .cloned()
                    .collect();
                let label = format!("K={},M={}", p.k_cut, p.steps);
                fits.push((label, judge(fit_rate(&rows, Axis::Eps)?, expect)));
            }
        }
        _ => {
            for &eps in &plan.eps {
                let label = format!("eps={eps}");
                fits.push((label, judge(fit_rate(&table.for_eps(eps), axis.fit_axis())?, expect)));
            }
        }
    }
    Ok(fits)
}

fn execute(cmd: &Command, cfg: &LabConfig, dir: &Path) -> Result<Outcome> {
    let mut outputs = Vec::new();
    let mut summary = Vec::new();
    let pass = match cmd {
        Command::RunConvergence { axis, .. } => {
            let plan = cfg.experiment_plan()?;
            let table = strong_error(&plan)?;
            table.write_csv(create(dir, "errors.csv", &mut outputs)?)?;
            let fits = convergence_fits(&table, &plan, *axis, cfg.expectation(*axis)?)?;
            write_rates_csv(create(dir, "rates.csv", &mut outputs)?, &fits)?;
            for row in &table.rows {
                summary.push(format!(
                    "eps={} K={} M={}: error {:.6e} ± {:.2e}",
                    row.eps, row.k_cut, row.steps, row.error, row.stderr
                ));
            }
            summary.extend(fits.iter().map(|(l, r)| describe(l, r)));
            fits.iter().all(|(_, r)| r.pass != Some(false))
        }
        Command::RunLemmaTests { .. } => {
            let report = run_lemma_suite(&cfg.lemma_settings(), cfg.seed)?;
            report.write_csv(create(dir, "lemmas.csv", &mut outputs)?)?;
            let failed = report.failures().count();
            summary.push(format!("{} checks, {failed} violated", report.rows.len()));
            for row in report.failures().take(10) {
                summary.push(format!(
                    "violated {} (tuple {}): defect {:e} > bound {:e} [{}]",
                    row.lemma, row.tuple, row.defect, row.bound, row.params
                ));
            }
            failed == 0
        }
        Command::RunMeshing { .. } => {
            let plan = cfg.meshing_plan()?;
            let report = plan.run()?;
            report
                .calibration
                .write_csv(create(dir, "calibration.csv", &mut outputs)?)?;
            {
                let mut w = csv::Writer::from_writer(create(dir, "meshing.csv", &mut outputs)?);
                for c in &report.candidates {
                    w.serialize(c)?;
                }
                w.flush()?;
            }
            let selected = ErrorTable {
                rows: report.result.iter().cloned().collect(),
            };
            selected.write_csv(create(dir, "errors.csv", &mut outputs)?)?;
            summary.push(format!(
                "fitted C = {:.6e}, delta = {:.6e}",
                report.constant, report.delta
            ));
            match (&report.selected, &report.result) {
                (Some(p), Some(r)) => summary.push(format!(
                    "selected K = {} (N = {}), M = {}: error {:.6e} ± {:.2e} vs 2 delta = {:.6e} {}",
                    p.k_cut,
                    p.modes(),
                    p.steps,
                    r.error,
                    r.stderr,
                    2.0 * report.delta,
                    if report.pass() { "PASS" } else { "FAIL" }
                )),
                _ => summary.push(report.notice.clone().unwrap_or_default()),
            }
            report.pass()
        }
        Command::RunMoments { .. } => {
            let plan = cfg.moment_plan()?;
            let report = moment_diagnostic(&plan)?;
            report.write_csv(create(dir, "moments.csv", &mut outputs)?)?;
            let cs = plan.coefficients()?;
            let damped_additive = cs.is_additive() && cs.linear_alpha().is_some_and(|a| a > 0.0);
            let mut fits = Vec::new();
            if let Some(f) = &report.level_fit {
                let expect = damped_additive.then_some(Expectation {
                    rate: -0.5,
                    tolerance: 0.2,
                });
                fits.push(("moment-level".to_string(), judge(f.clone(), expect)));
            }
            for (eps, f) in &report.holder_fits {
                let expect = damped_additive.then_some(Expectation {
                    rate: 0.5,
                    tolerance: 0.15,
                });
                fits.push((format!("holder eps={eps}"), judge(f.clone(), expect)));
            }
            write_rates_csv(create(dir, "rates.csv", &mut outputs)?, &fits)?;
            for l in &report.levels {
                summary.push(format!(
                    "eps={}: sup_m moment {:.6e} ± {:.2e}",
                    l.eps, l.level, l.stderr
                ));
            }
            if let Some(c) = report.min_constant {
                summary.push(format!("minimal constant C = {c:.6e}"));
            }
            summary.extend(fits.iter().map(|(l, r)| describe(l, r)));

            let mut w = csv::Writer::from_writer(create(dir, "observables.csv", &mut outputs)?);
            w.write_record(["eps", "x", "density", "current"])?;
            let u0 = plan.initial.field(&plan.grid())?;
            let path = sample_path(cs.noise(), PathSeed::derive(plan.seed, 0), plan.steps, plan.t_end)?;
            for &eps in &plan.eps {
                let (u, _) = Stepper::new(&plan.solver_config(eps), &cs)?.integrate_with(&u0, &path, |_, _| {})?;
                let o = observables(&u, eps);
                for ((x, n), j) in o.points.iter().zip(&o.density).zip(&o.current) {
                    w.write_record([eps.to_string(), x.to_string(), n.to_string(), j.to_string()])?;
                }
                summary.push(format!("eps={eps}: terminal mass on path 0 = {:.6e}", o.mass));
            }
            w.flush()?;
            fits.iter().all(|(_, r)| r.pass != Some(false))
        }
        Command::PrintPlan { .. } => true,
    };
    Ok(Outcome { pass, summary, outputs })
}

fn write_manifest(dir: &Path, manifest: &Manifest<'_>) -> Result<()> {
    let file = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(file, manifest).map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn dispatch(cmd: Command) -> i32 {
    let cfg = match load_config(&cmd) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let plan_lines = match validate(&cmd, &cfg) {
        Ok(lines) => lines,
        Err(e) => {
            eprintln!("error: invalid configuration: {e}");
            return EXIT_USAGE;
        }
    };
    let label = cmd.label();
    let extra = BTreeMap::from([("command".to_string(), label.clone())]);
    let digest = match cfg.digest(&extra) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let common = cmd.common();

    if let Command::PrintPlan { .. } = cmd {
        match serde_json::to_string_pretty(&cfg) {
            Ok(json) => println!("{json}"),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
        println!("digest: {digest}");
        for line in plan_lines {
            println!("{line}");
        }
        return EXIT_OK;
    }

    let dir = common.out.join(&digest[..DIR_DIGEST_LEN]);
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return EXIT_FAILURE;
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    let result = pool.install(|| execute(&cmd, &cfg, &dir));
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let (status, summary, outputs, code) = match result {
        Ok(o) => {
            let code = if o.pass { EXIT_OK } else { EXIT_FAILURE };
            (if o.pass { "pass" } else { "fail" }, o.summary, o.outputs, code)
        }
        Err(e) => ("error", vec![format!("error: {e}")], Vec::new(), EXIT_FAILURE),
    };
    if !common.quiet {
        for line in &summary {
            println!("{line}");
        }
    }
    let manifest = Manifest {
        command: &label,
        digest: &digest,
        seed: cfg.seed,
        paths: cfg.paths,
        timestamp,
        version: env!("CARGO_PKG_VERSION"),
        status,
        summary: &summary,
        outputs: &outputs,
        config: &cfg,
    };
    if let Err(e) = write_manifest(&dir, &manifest) {
        eprintln!("error: writing manifest: {e}");
        return EXIT_FAILURE;
    }
    if !common.quiet {
        println!("run directory: {}", dir.display());
        println!("status: {status}");
    }
    code
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(cli.command),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["snls-lab", "no-such-command"]), EXIT_USAGE);
        assert_eq!(run(["snls-lab", "run-moments"]), EXIT_USAGE);
        assert_eq!(run(["snls-lab", "run-convergence", "--axis", "diagonal"]), EXIT_USAGE);
    }
}

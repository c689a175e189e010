//! `bifurcate`: classify an elementary bifurcation of a one-dimensional map
//! and write a JSON report plus CSV data.
//!
//! Exit codes: 0 success, 1 bad config or arguments, 2 degenerate or
//! unsupported classification, 3 numeric failure (the report is still written).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bifurcate_core::expr::{MapConfig, MapSpec};
use bifurcate_core::kinds::Registry;
use bifurcate_core::pipeline::{self, Options, Report, Stage, DEFAULT_CONJ_MU, DEFAULT_SAMPLES};
use bifurcate_core::skeleton::MuGrid;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bifurcate", version, about = "Elementary bifurcations of interval maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Identify the bifurcation at the origin.
    Classify(Args),
    /// Fixed-point branches: series and Newton samples.
    Skeleton(Args),
    /// Match the extended normal form's multipliers over a μ grid.
    Fit(Args),
    /// Build conjugacies on basins and probe their derivatives.
    Conjugacy(Args),
    /// Cross-check against finite differences and root isolation.
    Verify(Args),
    /// Every stage.
    All(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// Map config (TOML).
    config: PathBuf,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// μ grid as `a:b:n` with an optional `log` or `lin` suffix.
    #[arg(long, value_name = "GRID")]
    mu_grid: Option<String>,
    /// Tolerance for the classification tests.
    #[arg(long)]
    tol: Option<f64>,
    /// Jet degree.
    #[arg(long)]
    degree: Option<usize>,
    /// Leave wall-clock timings out of the report.
    #[arg(long)]
    no_timings: bool,
    /// Force a strategy instead of the classified kind.
    #[arg(long, value_name = "NAME")]
    kind: Option<String>,
    /// μ at which conjugacies are built (both signs are used).
    #[arg(long, default_value_t = DEFAULT_CONJ_MU)]
    conj_mu: f64,
    /// Residual samples per conjugacy.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Report format on stdout.
    #[arg(long, value_enum, default_value_t = Summary::Text)]
    summary: Summary,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Summary {
    Text,
    None,
}

fn split(cmd: Command) -> (Stage, Args) {
    match cmd {
        Command::Classify(a) => (Stage::Classify, a),
        Command::Skeleton(a) => (Stage::Skeleton, a),
        Command::Fit(a) => (Stage::Fit, a),
        Command::Conjugacy(a) => (Stage::Conjugacy, a),
        Command::Verify(a) => (Stage::Verify, a),
        Command::All(a) => (Stage::All, a),
    }
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn load(args: &Args) -> Result<(MapSpec, Options), String> {
    let config = MapConfig::load(&args.config).map_err(|e| e.to_string())?;
    let mut spec = config.build().map_err(|e| e.to_string())?;
    if let Some(d) = args.degree {
        spec = spec.with_degree(d).map_err(|e| e.to_string())?;
    }
    let mut opts = Options {
        conj_mu: args.conj_mu,
        samples: args.samples,
        timings: !args.no_timings,
        kind: args.kind.clone(),
        ..Options::default()
    };
    if let Some(t) = args.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(format!("--tol must be a positive finite number, got {t}"));
        }
        opts.tol = t;
    }
    if let Some(g) = &args.mu_grid {
        opts.mu_grid = Some(g.parse::<MuGrid>()?);
    }
    if !(opts.conj_mu.is_finite() && opts.conj_mu != 0.0 && opts.conj_mu.abs() <= spec.trust_mu()) {
        return Err(format!(
            "--conj-mu must be nonzero with |mu| <= trust_mu = {}, got {}",
            spec.trust_mu(),
            opts.conj_mu
        ));
    }
    if opts.samples < 2 {
        return Err(format!("--samples must be at least 2, got {}", opts.samples));
    }
    Ok((spec, opts))
}

fn write_outputs(dir: &Path, report: &Report) -> Result<(), Box<dyn std::error::Error>> {
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;

    if report.skeleton.is_some() {
        let mut w = csv::Writer::from_path(dir.join("skeleton.csv"))?;
        w.write_record(["mu", "branch", "x", "multiplier", "series_x", "abs_err"])?;
        for r in report.skeleton_rows() {
            w.serialize((r.mu, &r.branch, r.x, r.multiplier, r.series_x, r.abs_err))?;
        }
        w.flush()?;
    }
    if report.normal_form.is_some() {
        let mut w = csv::Writer::from_path(dir.join("fit.csv"))?;
        w.write_record(["mu", "nu", "a", "b", "residual"])?;
        for r in report.fit_rows() {
            w.serialize((r.mu, r.nu, r.a, r.b, r.residual))?;
        }
        w.flush()?;
    }
    if report.conjugacy.is_some() {
        let mut w = csv::Writer::from_path(dir.join("conjugacy.csv"))?;
        w.write_record(["x", "h_x", "residual"])?;
        for r in report.conjugacy_rows() {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn print_summary(report: &Report) {
    if let Some(c) = &report.classification {
        println!("kind: {}", c.classification.kind);
    }
    if let Some(f) = &report.normal_form {
        print!("nu'(0) = {}, a0 = {}", f.leading.nu_prime_0, f.leading.a0);
        if let Some(b) = f.leading.b0 {
            print!(", b0 = {b}");
        }
        println!();
    }
    if let Some(c) = &report.conjugacy {
        for k in &c.checks {
            let verdict = k.probe.as_ref().and_then(|p| p.verdict());
            println!("conjugacy {} (mu = {}): residual {:.3e}, probe {:?}", k.label, k.mu, k.residual_sup, verdict);
        }
    }
    if let Some(v) = &report.verification {
        let failed = v.checks.iter().filter(|c| !c.passed).count();
        println!("verify: {} checks, {failed} failed", v.checks.len());
    }
    for e in &report.errors {
        println!("error: {e}");
    }
    println!("status: {:?}", report.status);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (stage, args) = split(cli.command);
    let (spec, opts) = match load(&args) {
        Ok(v) => v,
        Err(e) => return config_error(e),
    };
    let report = pipeline::run(&spec, stage, &opts, &Registry::builtin());
    if let Err(e) = write_outputs(&args.out, &report) {
        eprintln!("error: cannot write outputs to {}: {e}", args.out.display());
        return ExitCode::from(3);
    }
    if matches!(args.summary, Summary::Text) {
        print_summary(&report);
    }
    ExitCode::from(report.status.exit_code() as u8)
}

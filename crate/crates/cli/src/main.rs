//! `ctbt` — simulate and analyze behavior tree models written in `.btm`.
//!
//! Exit codes: 0 success/pass, 1 usage or model error, 2 runtime failure or
//! failed analysis.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ctbt::dsl::{self, Model};
use ctbt::regions::region_grid_csv;
use ctbt::{
    batch_integrate, certify, check_partition, initial_conditions, integrate, DomainBox, InitKind, IntegratorConfig, Sampler,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "ctbt", version, about = "Continuous-time behavior trees as discontinuous dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Inits {
    Grid,
    Random,
}

#[derive(clap::Args)]
struct Integration {
    /// Integration step.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long = "t-end", default_value_t = 30.0)]
    t_end: f64,
    /// Width of the bracket an event is localized to.
    #[arg(long = "event-tol", default_value_t = 1e-6)]
    event_tol: f64,
    /// Keep integrating after the root reports Success.
    #[arg(long = "continue-after-success")]
    continue_after_success: bool,
}

impl Integration {
    fn config(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.dt,
            t_end: self.t_end,
            event_tol: self.event_tol,
            stop_on_root_success: !self.continue_after_success,
            ..IntegratorConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory.
    Simulate {
        model: PathBuf,
        /// Initial state, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[command(flatten)]
        integration: Integration,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Dump operating-region owners and root status over a grid as CSV.
    Regions {
        model: PathBuf,
        /// `lo1:hi1,lo2:hi2,...`; defaults to the model's domain.
        #[arg(long = "box", allow_hyphen_values = true)]
        domain: Option<String>,
        /// Points per axis.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that leaf operating regions partition sampled states and agree with ticking.
    CheckPartition {
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long = "box", allow_hyphen_values = true)]
        domain: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Simulate a batch and build a convergence certificate.
    Certify {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "grid")]
        inits: Inits,
        #[arg(long, default_value_t = 25)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long = "box", allow_hyphen_values = true)]
        domain: Option<String>,
        #[command(flatten)]
        integration: Integration,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Parse and check a model.
    Validate { model: PathBuf },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn runtime(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CmdResult = Result<u8, Failure>;

fn load(path: &Path) -> Result<Model, Failure> {
    let src = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    dsl::load(&src).map_err(|e| usage(format!("{}:{e} ({})", path.display(), e.kind())))
}

fn parse_vector(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| usage(format!("`{text}` is not a comma-separated list of numbers")))
        })
        .collect()
}

fn domain_for(model: &Model, text: Option<&str>) -> Result<DomainBox, Failure> {
    let domain = match text {
        Some(t) => DomainBox::parse(t).map_err(|e| usage(e.to_string()))?,
        None => model
            .domain
            .clone()
            .ok_or_else(|| usage("model declares no domain; pass --box"))?,
    };
    if domain.dim() != model.bt.state_dim() {
        return Err(usage(format!(
            "DimensionMismatch: box has {} axes, model state has {}",
            domain.dim(),
            model.bt.state_dim()
        )));
    }
    Ok(domain)
}

/// Refuses to start work that would fail only when writing the result.
fn check_output(path: Option<&PathBuf>) -> Result<(), Failure> {
    if let Some(p) = path {
        let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !dir.is_dir() {
            return Err(usage(format!("{}: directory does not exist", dir.display())));
        }
    }
    Ok(())
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| runtime(format!("{}: {e}", p.display()))),
        None => Ok(()),
    }
}

fn validated(cfg: IntegratorConfig) -> Result<IntegratorConfig, Failure> {
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn simulate(path: &Path, x0: &str, integration: &Integration, out: Option<&PathBuf>, format: Format) -> CmdResult {
    check_output(out)?;
    let model = load(path)?;
    let x0 = parse_vector(x0)?;
    let n = model.bt.state_dim();
    if x0.len() != n {
        return Err(usage(format!("DimensionMismatch: --x0 has {} components, model state has {n}", x0.len())));
    }
    let cfg = validated(integration.config())?;
    let tr = integrate(&model.plant, &model.bt, &x0, &cfg)
        .map_err(|e| runtime(format!("integration failed: {e}")))?
        .with_model(model.name.clone());
    let text = match format {
        Format::Json => tr.to_json(),
        Format::Csv => tr.to_csv(),
    };
    write_output(out, &text)?;
    let last = tr.last();
    println!(
        "t = {:.6}  status = {}  leaf = {}  events = {}",
        last.t,
        last.status,
        last.leaf,
        tr.events.len()
    );
    Ok(0)
}

fn regions(path: &Path, domain: Option<&str>, grid: usize, out: Option<&PathBuf>) -> CmdResult {
    check_output(out)?;
    if grid < 2 {
        return Err(usage(format!("--grid needs at least 2 points per axis, got {grid}")));
    }
    let model = load(path)?;
    let domain = domain_for(&model, domain)?;
    let csv = region_grid_csv(&model.bt, &domain, grid).map_err(|e| runtime(e.to_string()))?;
    match out {
        Some(_) => {
            write_output(out, &csv)?;
            println!("{} grid points written", csv.lines().count() - 1);
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

fn partition(path: &Path, samples: usize, seed: u64, domain: Option<&str>, report: Option<&PathBuf>) -> CmdResult {
    check_output(report)?;
    if samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let model = load(path)?;
    let domain = domain_for(&model, domain)?;
    let sampler = Sampler::uniform(domain.clone(), samples, seed);
    let r = check_partition(&model.bt, &sampler).map_err(|e| runtime(e.to_string()))?;
    let doc = json!({
        "model": model.name,
        "samples": samples,
        "seed": seed,
        "box": domain.lo().iter().zip(domain.hi()).map(|(l, h)| [*l, *h]).collect::<Vec<_>>(),
        "passed": r.passed(),
        "report": r,
    });
    write_output(report, &(serde_json::to_string_pretty(&doc).expect("serializable") + "\n"))?;
    println!(
        "{}: {} samples, {} disjointness, {} coverage, {} equivalence, {} sibling violations; witnessed leaves {:?}",
        if r.passed() { "PASS" } else { "FAIL" },
        r.samples_tested,
        r.disjointness_violations.len(),
        r.coverage_violations.len(),
        r.equivalence_violations.len(),
        r.sibling_violations.len(),
        r.witnessed_leaves.iter().map(|l| l.0).collect::<Vec<_>>(),
    );
    Ok(if r.passed() { 0 } else { 2 })
}

#[allow(clippy::too_many_arguments)]
fn certify_cmd(
    path: &Path,
    inits: Inits,
    count: usize,
    seed: u64,
    domain: Option<&str>,
    integration: &Integration,
    report: Option<&PathBuf>,
) -> CmdResult {
    check_output(report)?;
    let model = load(path)?;
    let domain = domain_for(&model, domain)?;
    let cfg = validated(integration.config())?;
    let kind = match inits {
        Inits::Grid => InitKind::Grid,
        Inits::Random => InitKind::Random,
    };
    let x0s = initial_conditions(&domain, &model.avoid, kind, count, seed).map_err(|e| usage(e.to_string()))?;
    let batch: Vec<_> = batch_integrate(&model.plant, &model.bt, &x0s, &cfg)
        .into_iter()
        .map(|r| r.map(|t| t.with_model(model.name.clone()).with_seed(Some(seed))))
        .collect();
    let cert = certify(&batch, &model.bt).map_err(|e| runtime(e.to_string()))?;
    let doc = json!({
        "model": model.name,
        "inits": match inits { Inits::Grid => "grid", Inits::Random => "random" },
        "count": x0s.len(),
        "seed": seed,
        "config": cfg,
        "certificate": cert,
    });
    write_output(report, &(serde_json::to_string_pretty(&doc).expect("serializable") + "\n"))?;
    print!("{}", cert.summary(Some(&model.bt)));
    Ok(if cert.pass { 0 } else { 2 })
}

fn validate(path: &Path) -> CmdResult {
    let model = load(path)?;
    println!(
        "ok: model \"{}\": {} nodes, {} leaves, state_dim {}, control_dim {}",
        model.name,
        model.bt.tree().node_count(),
        model.bt.leaves().len(),
        model.bt.state_dim(),
        model.bt.control_dim()
    );
    Ok(0)
}

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Simulate {
            model,
            x0,
            integration,
            out,
            format,
        } => simulate(model, x0, integration, out.as_ref(), *format),
        Command::Regions { model, domain, grid, out } => regions(model, domain.as_deref(), *grid, out.as_ref()),
        Command::CheckPartition {
            model,
            samples,
            seed,
            domain,
            report,
        } => partition(model, *samples, *seed, domain.as_deref(), report.as_ref()),
        Command::Certify {
            model,
            inits,
            count,
            seed,
            domain,
            integration,
            report,
        } => certify_cmd(model, *inits, *count, *seed, domain.as_deref(), integration, report.as_ref()),
        Command::Validate { model } => validate(model),
    }
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
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

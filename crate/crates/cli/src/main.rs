//! `conecert` command-line front end.

mod artifacts;
mod demo;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use conecert::cones::{flow_cone_check, FlowBlocks, FlowConeConstants};
use conecert::manifold::{certify, ManifoldCertificate, ManifoldKind};
use conecert::prover::{
    check_homoclinic, manifold_stage, EndpointReport, ProofConfig, ProofReport,
};
use conecert::rtbp::{jordan_basis, libration_l1, RtbpParams};
use conecert::{IBox, IMatrix, Interval};

#[derive(Parser, Debug)]
#[command(
    name = "conecert",
    version,
    about = "Cone-condition manifold certificates and the L1 homoclinic proof"
)]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encloses L1, its eigenvalues and the chart residual.
    L1 {
        /// Mass parameter as a decimal literal.
        #[arg(long)]
        mu: String,
    },
    /// Certifies the unstable manifold of L1, or of a linear toy field.
    Manifold {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Runs the full homoclinic proof.
    Homoclinic {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Didactic examples with pass/fail lines.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DemoName {
    Toymap,
    Graphtransform,
    Gronwall,
}

/// Outcome of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Verified,
    Inconclusive,
    Failed,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Verified => 0,
            Status::Inconclusive => 2,
            Status::Failed => 3,
        }
    }
}

/// Marks errors caused by the user rather than by the numerics.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<conecert::Error>() {
        Some(
            conecert::Error::InvalidConfig(_)
            | conecert::Error::ParseDecimal(_)
            | conecert::Error::InvalidBounds { .. },
        ) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<Status> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return usage("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("building the worker pool")?;
    }
    match &cli.command {
        Command::L1 { mu } => cmd_l1(mu),
        Command::Manifold { config } => cmd_manifold(config.as_deref(), cli),
        Command::Homoclinic { config } => cmd_homoclinic(config.as_deref(), cli),
        Command::Demo { name } => Ok(demo::run(*name)),
    }
}

fn cmd_l1(mu: &str) -> anyhow::Result<Status> {
    let p = RtbpParams::from_decimal(mu)?;
    let l1 = libration_l1(&p)?;
    println!("mu     = {}", p.mu());
    println!("L1 X   = {:.17}", l1[0]);
    println!("width  = {:e}", l1[0].width());
    let chart = jordan_basis(&p)?;
    println!("lambda = {:.12}", chart.lambda);
    println!("v      = {:.12}", chart.v);
    let off = chart
        .residual_pattern()
        .into_iter()
        .filter(|(_, _, e)| *e == Interval::ZERO)
        .map(|(_, r, _)| r.mag())
        .fold(0.0_f64, f64::max);
    println!("chart residual, largest off-pattern entry: {off:e}");
    if chart.residual_consistent() {
        Ok(Status::Verified)
    } else {
        println!("chart residual is inconsistent with diag(lambda, -lambda, [0 v; -v 0])");
        Ok(Status::Inconclusive)
    }
}

fn read_config(path: Option<&Path>) -> anyhow::Result<String> {
    let Some(path) = path else {
        return usage("--config is required");
    };
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) => usage(format!("cannot read config {}: {e}", path.display())),
    }
}

fn proof_config(text: &str) -> anyhow::Result<ProofConfig> {
    match ProofConfig::from_json(text) {
        Ok(c) => Ok(c),
        Err(e) => usage(e.to_string()),
    }
}

fn out_dir(cli: &Cli) -> anyhow::Result<&Path> {
    fs::create_dir_all(&cli.out)
        .map_err(|e| UsageError(format!("cannot create {}: {e}", cli.out.display())))?;
    Ok(&cli.out)
}

/// A linear field `x′ = A x` with the unstable coordinates first.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearConfig {
    field: Vec<Vec<f64>>,
    u_dim: usize,
    alpha_h: f64,
    alpha_v: f64,
    c_h: f64,
    c_v: f64,
}

#[derive(Serialize)]
struct LabeledCertificate<'a> {
    label: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<Interval>,
    verified: bool,
    cones: &'a FlowConeConstants,
    certificate: Option<&'a ManifoldCertificate>,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    errors: &'a [String],
}

fn endpoint_certificate(e: &EndpointReport) -> LabeledCertificate<'_> {
    LabeledCertificate {
        label: &e.label,
        mu: Some(e.mu),
        verified: e.certificate.is_some(),
        cones: &e.cones,
        certificate: e.certificate.as_ref(),
        errors: &e.errors,
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_manifold(config: Option<&Path>, cli: &Cli) -> anyhow::Result<Status> {
    let text = read_config(config)?;
    let value: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => return usage(format!("config is not JSON: {e}")),
    };
    if value.get("field").is_some() {
        let cfg: LinearConfig = match serde_json::from_value(value) {
            Ok(c) => c,
            Err(e) => return usage(format!("linear config: {e}")),
        };
        return linear_manifold(&cfg, cli);
    }
    let cfg = proof_config(&text)?;
    let (left, right) = cfg.validate()?;
    let run = |label: &str, mu: Interval| manifold_stage(label, mu, &cfg, &mut Vec::new());
    let (l, r) = rayon::join(|| run("left", left), || run("right", right));
    let (l, r) = (l?.0, r?.0);
    let dir = out_dir(cli)?;
    write_json(
        &dir.join("certificate.json"),
        &[endpoint_certificate(&l), endpoint_certificate(&r)],
    )?;
    fs::write(dir.join("u_boxes.csv"), artifacts::u_boxes_csv(&[&l, &r]))?;
    for e in [&l, &r] {
        let verdict = if e.certificate.is_some() {
            "verified"
        } else {
            "NOT verified"
        };
        println!(
            "[{}] mu = {}: cones (c_h = {}, c_v = {}) {verdict}",
            e.label, e.mu, cfg.c_h, cfg.c_v
        );
        if cli.verbose {
            for err in &e.errors {
                println!("  {err}");
            }
        }
    }
    println!(
        "wrote certificate.json and u_boxes.csv to {}",
        dir.display()
    );
    if l.certificate.is_some() && r.certificate.is_some() {
        Ok(Status::Verified)
    } else {
        Ok(Status::Failed)
    }
}

fn linear_manifold(cfg: &LinearConfig, cli: &Cli) -> anyhow::Result<Status> {
    let n = cfg.field.len();
    if n == 0 || cfg.field.iter().any(|r| r.len() != n) {
        return usage("field must be a non-empty square matrix");
    }
    if cfg.u_dim == 0 || cfg.u_dim >= n {
        return usage(format!("u_dim must lie in 1..{n}"));
    }
    let a = IMatrix::from_rows(
        cfg.field
            .iter()
            .map(|r| r.iter().map(|&x| Interval::point(x)).collect())
            .collect(),
    );
    let bl = FlowBlocks::split(&a, cfg.u_dim);
    let cones = match flow_cone_check(
        &bl.a,
        &bl.b,
        &bl.eps1,
        &bl.eps2,
        cfg.alpha_h,
        cfg.alpha_v,
        cfg.c_h,
        cfg.c_v,
    ) {
        Ok(c) => c,
        Err(e) => return usage(e.to_string()),
    };
    let origin = IBox::zeros(n);
    let cert = if cones.verified {
        Some(certify(
            ManifoldKind::FlowUnstable,
            &cones.horizontal.certificate(),
            &cones.vertical.certificate(),
            cfg.alpha_h,
            cfg.alpha_v,
            &origin,
        )?)
    } else {
        None
    };
    let dir = out_dir(cli)?;
    let labeled = LabeledCertificate {
        label: "linear",
        mu: None,
        verified: cert.is_some(),
        cones: &cones,
        certificate: cert.as_ref(),
        errors: &[],
    };
    write_json(&dir.join("certificate.json"), &[labeled])?;
    if let Some(c) = &cert {
        fs::write(
            dir.join("u_boxes.csv"),
            artifacts::window_csv("linear", &c.graph_window),
        )?;
    }
    let diag: Vec<f64> = (0..n).map(|i| cfg.field[i][i]).collect();
    println!("diagonal of A: {diag:?}");
    println!(
        "rates c_h = {}, c_v = {}: {}",
        cfg.c_h,
        cfg.c_v,
        if cones.verified {
            "verified"
        } else {
            "NOT verified"
        }
    );
    Ok(if cert.is_some() {
        Status::Verified
    } else {
        Status::Failed
    })
}

fn cmd_homoclinic(config: Option<&Path>, cli: &Cli) -> anyhow::Result<Status> {
    let text = read_config(config)?;
    let cfg = proof_config(&text)?;
    let report = check_homoclinic(&cfg)?;
    let dir = out_dir(cli)?;
    fs::write(dir.join("report.json"), report.to_json() + "\n")?;
    write_json(
        &dir.join("certificate.json"),
        &[
            endpoint_certificate(&report.left),
            endpoint_certificate(&report.right),
        ],
    )?;
    artifacts::write_enclosures(&dir.join("enclosures.csv"), &cfg)?;
    let orbit = artifacts::float_orbit(&cfg)?;
    fs::write(dir.join("orbit.csv"), artifacts::orbit_csv(&orbit))?;
    fs::write(dir.join("orbit.svg"), artifacts::orbit_svg(&orbit, &cfg)?)?;
    if cli.verbose {
        print!("{}", report.render_text());
        for (name, secs) in &report.timings {
            println!("  {name:<24} {secs:.3} s");
        }
    } else {
        for s in &report.stages {
            println!(
                "{:<16} {}",
                s.name,
                if s.verified { "ok" } else { "FAILED" }
            );
        }
        println!("verdict: {:?}", report.verdict);
    }
    println!(
        "wrote report.json, certificate.json, enclosures.csv, orbit.csv, orbit.svg to {}",
        dir.display()
    );
    Ok(homoclinic_status(&report))
}

/// Definite failures (unverified cones, wrong signs) outrank numerical ones.
fn homoclinic_status(r: &ProofReport) -> Status {
    if r.verdict == conecert::prover::Verdict::Proved {
        return Status::Verified;
    }
    let definite = [&r.left, &r.right]
        .iter()
        .any(|e| e.certificate.is_none() || e.poincare.as_ref().is_some_and(|p| !p.verified));
    if definite {
        Status::Failed
    } else {
        Status::Inconclusive
    }
}

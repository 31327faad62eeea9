//! Command-line front end: solve SDPA files, generate SDP instances from
//! graphs and raw data, and run benchmark sweeps that emit JSON records and
//! a CSV table.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use ssnsdp::generators::{self, Graph};
use ssnsdp::report::{RunRecord, CSV_HEADER};
use ssnsdp::sdpa;
use ssnsdp::solver::{solve, Preset, SolveReport, SolveStatus, SolverConfig};
use ssnsdp::warmstart::{admm_warmstart, WarmstartConfig};
use ssnsdp::{SdpProblem, SymMat};

#[derive(Parser)]
#[command(
    name = "ssnsdp",
    about = "Smoothing-Newton SDP solver",
    version,
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single-block SDPA sparse file and print a JSON run record.
    ///
    /// Exit code 0 on optimal, 2 on a non-optimal solver status, 1 on I/O
    /// or parse errors.
    Solve(SolveArgs),
    /// Generate an SDP instance in SDPA format from a source file.
    Generate(GenerateArgs),
    /// Solve every instance of a manifest and write a CSV table.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// SDPA sparse file (.dat-s).
    path: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    /// Skip the ADMM warm start and begin from X = Z = I, y = 0.
    #[arg(long)]
    cold: bool,
    /// Write the per-iteration trace as JSON lines to this path.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
}

/// Solver knobs shared by `solve` and `bench`. Precedence is
/// flag > preset > built-in default.
#[derive(Args, Clone)]
struct Tuning {
    /// Parameter preset: maxcut, theta, biq or clustering.
    #[arg(long, value_name = "FAMILY")]
    preset: Option<String>,
    /// Relative KKT tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Newton iteration cap.
    #[arg(long, value_name = "N")]
    max_iter: Option<usize>,
    /// Initial smoothing parameter.
    #[arg(long, value_name = "EPS")]
    eps_hat: Option<f64>,
    /// Rescaling of Z in the smoothed complementarity block.
    #[arg(long)]
    nu: Option<f64>,
    /// Complementarity perturbation coefficient.
    #[arg(long)]
    kappa_c: Option<f64>,
    /// Seed for randomized internals (SPD probes, er: graph sources).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Tuning {
    fn configs(&self) -> Result<(SolverConfig, WarmstartConfig)> {
        let preset = match &self.preset {
            Some(name) => Some(
                Preset::parse(name)
                    .ok_or_else(|| anyhow!("unknown preset `{name}` (expected maxcut, theta, biq or clustering)"))?,
            ),
            None => None,
        };
        let mut cfg = preset.map_or_else(SolverConfig::default, |p| p.solver_config());
        let wc = preset.map_or_else(WarmstartConfig::default, |p| p.warmstart_config());
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        if let Some(mi) = self.max_iter {
            cfg.max_newton = mi;
        }
        if let Some(e) = self.eps_hat {
            cfg.eps_hat = e;
        }
        if let Some(nu) = self.nu {
            cfg.nu = nu;
        }
        if let Some(kc) = self.kappa_c {
            cfg.kappa_c = kc;
        }
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok((cfg, wc))
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Problem family: maxcut, theta, biq or clustering.
    family: String,
    /// Source file. Graph families also accept `er:<n>:<p>` for a random
    /// Erdős–Rényi graph (seeded by --seed).
    source: String,
    /// Output SDPA file.
    out: PathBuf,
    /// Seed for `er:` sources.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Manifest: one `<file> <preset>` pair per line; `#` comments allowed.
    manifest: PathBuf,
    /// Output CSV path.
    out_csv: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Generate(args) => cmd_generate(args).map(|()| ExitCode::SUCCESS),
        Command::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_problem(path: &Path) -> Result<SdpProblem> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut p = sdpa::read_sdpa(&text)
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    p.set_name(stem);
    Ok(p)
}

/// Warm start (unless cold) plus Newton solve; the returned wall-clock time
/// covers both and excludes parsing.
fn run(
    p: &SdpProblem,
    cfg: &SolverConfig,
    wc: &WarmstartConfig,
    cold: bool,
) -> Result<(SolveReport, f64)> {
    let t0 = Instant::now();
    let start = if cold {
        None
    } else {
        Some(admm_warmstart(p, wc)?.into_starting_point())
    };
    let rep = solve(p, cfg, start)?;
    Ok((rep, t0.elapsed().as_secs_f64()))
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let (cfg, wc) = args.tuning.configs()?;
    let p = load_problem(&args.path)?;
    let (rep, cpu) = run(&p, &cfg, &wc, args.cold)?;

    if let Some(trace_path) = &args.trace {
        let mut f = fs::File::create(trace_path)
            .with_context(|| format!("cannot create {}", trace_path.display()))?;
        for rec in &rep.trace {
            writeln!(f, "{}", serde_json::to_string(rec)?)?;
        }
    }

    let mut record = RunRecord::from_report(p.name(), p.n(), p.m(), &rep);
    record.cpu_seconds = cpu;
    println!("{}", record.to_json());

    Ok(if rep.status == SolveStatus::Optimal {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn parse_graph_source(source: &str, seed: u64) -> Result<Graph> {
    if let Some(spec) = source.strip_prefix("er:") {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 2 {
            bail!("er: source must look like er:<n>:<p>");
        }
        let n: usize = parts[0].parse().context("er: bad vertex count")?;
        let prob: f64 = parts[1].parse().context("er: bad edge probability")?;
        if !(0.0..=1.0).contains(&prob) {
            bail!("er: edge probability must lie in [0, 1]");
        }
        return Ok(Graph::erdos_renyi(n, prob, seed));
    }
    let text = fs::read_to_string(source).with_context(|| format!("cannot read {source}"))?;
    Ok(generators::read_graph(&text)?)
}

fn parse_reals(line: &str, expect: usize, what: &str) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
    let vals = vals.with_context(|| format!("bad {what} line: `{line}`"))?;
    if vals.len() != expect {
        bail!("{what}: expected {expect} values, got {}", vals.len());
    }
    Ok(vals)
}

/// BIQ source: first line `n`, then n rows of Q, then one row of c.
fn parse_biq_source(text: &str) -> Result<(SymMat, DVector<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let n: usize = lines
        .next()
        .ok_or_else(|| anyhow!("empty biq source"))?
        .trim()
        .parse()
        .context("bad dimension line")?;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| anyhow!("missing Q row {}", i + 1))?;
        rows.push(parse_reals(line, n, "Q row")?);
    }
    let c_line = lines.next().ok_or_else(|| anyhow!("missing c line"))?;
    let c = parse_reals(c_line, n, "c")?;
    let q = SymMat::from_fn(n, |i, j| 0.5 * (rows[i][j] + rows[j][i]))
        .map_err(|e| anyhow!("Q matrix: {e}"))?;
    Ok((q, DVector::from_vec(c)))
}

/// Clustering source: first line `n k`, then n rows of the affinity matrix.
fn parse_clustering_source(text: &str) -> Result<(SymMat, usize)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| anyhow!("empty clustering source"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 {
        bail!("clustering header must be `n k`");
    }
    let n: usize = toks[0].parse().context("bad n")?;
    let k: usize = toks[1].parse().context("bad k")?;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| anyhow!("missing affinity row {}", i + 1))?;
        rows.push(parse_reals(line, n, "affinity row")?);
    }
    let aff = SymMat::from_fn(n, |i, j| 0.5 * (rows[i][j] + rows[j][i]))
        .map_err(|e| anyhow!("affinity matrix: {e}"))?;
    Ok((aff, k))
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let problem = match args.family.as_str() {
        "maxcut" => generators::maxcut_sdp(&parse_graph_source(&args.source, args.seed)?),
        "theta" => generators::theta_sdp(&parse_graph_source(&args.source, args.seed)?),
        "biq" => {
            let text = fs::read_to_string(&args.source)
                .with_context(|| format!("cannot read {}", args.source))?;
            let (q, c) = parse_biq_source(&text)?;
            generators::biq_sdp(&q, &c)?
        }
        "clustering" => {
            let text = fs::read_to_string(&args.source)
                .with_context(|| format!("cannot read {}", args.source))?;
            let (aff, k) = parse_clustering_source(&text)?;
            generators::clustering_sdp(&aff, k)?
        }
        other => bail!("unknown family `{other}` (expected maxcut, theta, biq or clustering)"),
    };
    fs::write(&args.out, sdpa::write_sdpa(&problem))
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.manifest)
        .with_context(|| format!("cannot read {}", args.manifest.display()))?;

    // Parse the whole manifest up front; any error aborts before solving.
    let mut jobs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            bail!(
                "{}:{}: expected `<file> <preset>`, got `{line}`",
                args.manifest.display(),
                idx + 1
            );
        }
        let preset = Preset::parse(toks[1]).ok_or_else(|| {
            anyhow!(
                "{}:{}: unknown preset `{}`",
                args.manifest.display(),
                idx + 1,
                toks[1]
            )
        })?;
        jobs.push((PathBuf::from(toks[0]), preset));
    }

    let mut rows = Vec::new();
    let mut all_optimal = true;
    let mut hard_failures = 0usize;
    for (path, preset) in &jobs {
        let mut cfg = preset.solver_config();
        let wc = preset.warmstart_config();
        if let Some(tol) = args.tuning.tol {
            cfg.tol = tol;
        }
        if let Some(mi) = args.tuning.max_iter {
            cfg.max_newton = mi;
        }
        cfg.seed = args.tuning.seed;
        let outcome = load_problem(path).and_then(|p| {
            let (rep, cpu) = run(&p, &cfg, &wc, false)?;
            let mut record = RunRecord::from_report(p.name(), p.n(), p.m(), &rep);
            record.cpu_seconds = cpu;
            Ok(record)
        });
        match outcome {
            Ok(record) => {
                if record.status != SolveStatus::Optimal {
                    all_optimal = false;
                }
                println!("{}", record.to_json());
                rows.push(record);
            }
            Err(err) => {
                hard_failures += 1;
                all_optimal = false;
                eprintln!("error: {}: {err:#}", path.display());
            }
        }
    }

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv_row());
        csv.push('\n');
    }
    fs::write(&args.out_csv, csv)
        .with_context(|| format!("cannot write {}", args.out_csv.display()))?;

    Ok(if hard_failures > 0 {
        ExitCode::FAILURE
    } else if all_optimal {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

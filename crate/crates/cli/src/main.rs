//! `mcld`: simulations, truncation reports, coupling sweeps, frozen
//! percolation scaling runs and self-tests.
//!
//! Exit codes: 0 success, 1 a check failed, 2 invalid input, 3 internal
//! invariant violated.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mcld::acceptance::{quick_suite, run_criterion, CriterionResult, Scale};
use mcld::clock::parse_seed;
use mcld::feller::{feller_sweep, SweepConfig};
use mcld::frozen::{fp_mcld_compare, fp_samples, CompareConfig, FpConfig};
use mcld::json::{fmt_f64, to_json_string};
use mcld::stats::quantile;
use mcld::truncation::{truncation_report, TruncationReport};
use mcld::{ClockField, Error, OrderedMassVector};

#[derive(Parser)]
#[command(name = "mcld", version, about = "Multiplicative coalescent with linear deletion")]
struct Cli {
    /// Worker threads for replica fan-out (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and write trajectory.csv and events.json.
    Simulate(SimulateArgs),
    /// Sandwich reports for truncation levels over a range of seeds.
    Truncation(TruncationArgs),
    /// Coupled distances between a reference vector and its truncations.
    Feller(FellerArgs),
    /// Frozen percolation scaling runs and comparison against a reference size.
    Fp(FpArgs),
    /// Run the quick or the full self-test suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Clone)]
#[group(multiple = false)]
struct MassSource {
    /// Comma-separated non-increasing masses.
    #[arg(long, allow_hyphen_values = true)]
    masses: Option<String>,
    /// File holding a JSON array or whitespace/comma-separated masses.
    #[arg(long)]
    masses_file: Option<PathBuf>,
    /// Generator rule: `power:EXPONENT:LEN` (i^-EXPONENT) or `const:VALUE:LEN`.
    #[arg(long)]
    gen: Option<String>,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed, decimal or 0x-hex.
    #[arg(long, env = "MCLD_SEED", default_value = "0")]
    seed: String,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: MassSource,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Horizon; the grid is then `0,t`.
    #[arg(long, conflicts_with = "grid")]
    t: Option<f64>,
    /// Comma-separated strictly increasing observation times.
    #[arg(long)]
    grid: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TruncationArgs {
    #[command(flatten)]
    source: MassSource,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Comma-separated truncation levels.
    #[arg(long)]
    truncate: String,
    /// Number of clock fields, seeded `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    replicas: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FellerArgs {
    /// Reference vector (default `power:0.6:4096`).
    #[command(flatten)]
    source: MassSource,
    #[arg(long, default_value = "256,1024,2048")]
    n_list: String,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 500)]
    replicas: usize,
    #[arg(long, default_value_t = 0.2)]
    threshold: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FpArgs {
    /// JSON `{n, lambda_rescaled, u, t_list, top_r, replicas, seed}`; flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "20000")]
    n_list: String,
    /// Rescaled lightning rate λ in λ(n) = λ n^{-1/3}.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    u: f64,
    #[arg(long, conflicts_with = "grid")]
    t: Option<f64>,
    /// Comma-separated rescaled times.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 5)]
    top_r: usize,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    /// Reference size; enables the KS comparison (needs a single time).
    #[arg(long)]
    n_ref: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    ref_replicas: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Suite {
    Quick,
    Full,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, value_enum, default_value_t = Suite::Quick)]
    suite: Suite,
    /// Restrict the full suite to these comma-separated criteria.
    #[arg(long)]
    only: Option<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Negative control: drive the pathwise suite with unstable clocks.
    #[arg(long, hide = true)]
    corrupt_clocks: bool,
}

enum Failure {
    Input(String),
    Check(String),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant(_) => Failure::Invariant(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Failure::Input(format!("cannot parse {what} entry {s:?}")))
        })
        .collect()
}

fn generate(rule: &str) -> CliResult<OrderedMassVector> {
    let parts: Vec<&str> = rule.split(':').collect();
    let bad = || Failure::Input(format!("generator {rule:?} is not power:EXP:LEN or const:VALUE:LEN"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let value: f64 = parts[1].parse().map_err(|_| bad())?;
    let len: usize = parts[2].parse().map_err(|_| bad())?;
    match parts[0] {
        "power" if value.is_finite() => Ok(OrderedMassVector::power_law(value, len)),
        "const" => Ok(OrderedMassVector::new(vec![value; len])?),
        _ => Err(bad()),
    }
}

impl MassSource {
    fn load(&self, default: Option<&str>) -> CliResult<OrderedMassVector> {
        if let Some(text) = &self.masses {
            return Ok(OrderedMassVector::new(parse_list(text, "mass")?)?);
        }
        if let Some(path) = &self.masses_file {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
            let trimmed = text.trim();
            let values: Vec<f64> = if trimmed.starts_with('[') {
                serde_json::from_str(trimmed).map_err(|e| Failure::Input(format!("bad mass file: {e}")))?
            } else {
                parse_list(trimmed, "mass")?
            };
            return Ok(OrderedMassVector::new(values)?);
        }
        match (&self.gen, default) {
            (Some(rule), _) => generate(rule),
            (None, Some(rule)) => generate(rule),
            (None, None) => Err(Failure::Input("one of --masses, --masses-file, --gen is required".into())),
        }
    }
}

fn grid_from(t: Option<f64>, grid: &Option<String>) -> CliResult<Vec<f64>> {
    match (t, grid) {
        (_, Some(g)) => parse_list(g, "grid"),
        (Some(t), None) if t > 0.0 => Ok(vec![0.0, t]),
        (Some(t), None) => Ok(vec![t]),
        (None, None) => Err(Failure::Input("one of --t, --grid is required".into())),
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn json_line<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = to_json_string(value);
    s.push('\n');
    s
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let masses = args.source.load(None)?;
    let grid = grid_from(args.t, &args.grid)?;
    if !(args.lambda >= 0.0 && args.lambda.is_finite()) {
        return Err(Failure::Input("--lambda must be finite and nonnegative".into()));
    }
    let seed = parse_seed(&args.common.seed)?;
    let traj = mcld::graphical::trajectory(&masses, &ClockField::new(seed), args.lambda, &grid)?;
    let csv = write_out(&args.common.out_dir, "trajectory.csv", &traj.to_csv())?;
    let mut events = traj.events_json();
    events.push('\n');
    let log = write_out(&args.common.out_dir, "events.json", &events)?;
    let last = traj.states.last().expect("nonempty grid");
    let phi = traj.deleted_mass_up_to(traj.horizon)?;
    println!("final state at t = {}: {}", traj.horizon, to_json_string(last));
    println!("deleted mass Φ(t) = {}", fmt_f64(phi));
    println!("events: {}", traj.events.len());
    println!("wrote {} and {}", csv.display(), log.display());
    Ok(())
}

#[derive(Serialize)]
struct LevelSummary {
    m: usize,
    median_gap: f64,
    median_distance: f64,
    all_hold: bool,
}

#[derive(Serialize)]
struct TruncationOutput {
    lambda: f64,
    t: f64,
    levels: Vec<LevelSummary>,
    reports: Vec<TruncationReport>,
}

fn cmd_truncation(args: &TruncationArgs) -> CliResult<()> {
    use rayon::prelude::*;
    let masses = args.source.load(None)?;
    let levels: Vec<usize> = parse_list(&args.truncate, "truncation level")?;
    if levels.is_empty() || args.replicas == 0 {
        return Err(Failure::Input("need at least one level and one replica".into()));
    }
    let base = parse_seed(&args.common.seed)?;
    let seeds: Vec<u64> = (0..args.replicas).map(|r| base.wrapping_add(r)).collect();
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    for &m in &levels {
        let batch: Vec<TruncationReport> = seeds
            .par_iter()
            .map(|&s| truncation_report(&masses, s, args.lambda, args.t, m))
            .collect::<Result<_, _>>()?;
        let gaps: Vec<f64> = batch.iter().map(|r| r.gap).collect();
        let dists: Vec<f64> = batch.iter().map(|r| r.distance).collect();
        summaries.push(LevelSummary {
            m,
            median_gap: quantile(&gaps, 0.5),
            median_distance: quantile(&dists, 0.5),
            all_hold: batch.iter().all(|r| r.holds),
        });
        reports.extend(batch);
    }
    let out = TruncationOutput {
        lambda: args.lambda,
        t: args.t,
        levels: summaries,
        reports,
    };
    let path = write_out(&args.common.out_dir, "truncation_report.json", &json_line(&out))?;
    for l in &out.levels {
        println!(
            "m = {:>6}: median gap {}, median distance {}, sandwich {}",
            l.m,
            fmt_f64(l.median_gap),
            fmt_f64(l.median_distance),
            if l.all_hold { "holds" } else { "VIOLATED" }
        );
    }
    println!("wrote {}", path.display());
    if let Some(r) = out.reports.iter().find(|r| !r.holds) {
        return Err(Failure::Invariant(format!("sandwich check failed at m = {}, seed {}", r.m, r.seed)));
    }
    Ok(())
}

fn cmd_feller(args: &FellerArgs) -> CliResult<()> {
    let reference = args.source.load(Some("power:0.6:4096"))?;
    let cfg = SweepConfig {
        reference,
        n_list: parse_list(&args.n_list, "level")?,
        lambda: args.lambda,
        t: args.t,
        replicas: args.replicas,
        seed: parse_seed(&args.common.seed)?,
        threshold: args.threshold,
    };
    let report = feller_sweep(&cfg)?;
    let summary = serde_json::json!({
        "n_list": report.n_list,
        "quantiles": report.quantiles,
        "replicas": report.replicas,
        "threshold": report.threshold,
        "seeds": report.seeds,
    });
    let json = write_out(&args.common.out_dir, "coupling_report.json", &json_line(&summary))?;
    let csv = write_out(&args.common.out_dir, "distances.csv", &report.distances_csv())?;
    for n in &report.n_list {
        let q = report.quantiles[n];
        println!(
            "n = {n:>6}: p50 {}, p90 {}, P(d > {}) {}",
            fmt_f64(q.p50),
            fmt_f64(q.p90),
            args.threshold,
            fmt_f64(q.exceed)
        );
    }
    println!("wrote {} and {}", json.display(), csv.display());
    Ok(())
}

fn fp_configs(args: &FpArgs) -> CliResult<Vec<FpConfig>> {
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
        let cfg: FpConfig =
            serde_json::from_str(&text).map_err(|e| Failure::Input(format!("bad fp config: {e}")))?;
        return Ok(vec![cfg]);
    }
    let t_list = match (args.t, &args.grid) {
        (_, Some(g)) => parse_list(g, "time")?,
        (Some(t), None) => vec![t],
        (None, None) => vec![1.0],
    };
    let seed = parse_seed(&args.common.seed)?;
    parse_list::<usize>(&args.n_list, "n")?
        .into_iter()
        .map(|n| {
            Ok(FpConfig {
                n,
                lambda_rescaled: args.lambda,
                u: args.u,
                t_list: t_list.clone(),
                top_r: args.top_r,
                replicas: args.replicas,
                seed,
            })
        })
        .collect()
}

fn cmd_fp(args: &FpArgs) -> CliResult<()> {
    let configs = fp_configs(args)?;
    let mut csv = String::from("n,replica,t,rank,scaled_mass\n");
    for cfg in &configs {
        let samples = fp_samples(cfg)?;
        for (r, row) in samples.iter().enumerate() {
            for s in row {
                for k in 0..cfg.top_r {
                    let _ = writeln!(csv, "{},{r},{},{},{}", cfg.n, fmt_f64(s.t), k + 1, fmt_f64(s.masses.get(k)));
                }
            }
        }
    }
    let path = write_out(&args.common.out_dir, "fp_samples.csv", &csv)?;
    println!("wrote {}", path.display());
    if let Some(n_ref) = args.n_ref {
        let first = &configs[0];
        if first.t_list.len() != 1 {
            return Err(Failure::Input("the comparison needs a single time".into()));
        }
        let cmp = fp_mcld_compare(&CompareConfig {
            n_list: configs.iter().map(|c| c.n).collect(),
            lambda_rescaled: first.lambda_rescaled,
            u: first.u,
            t: first.t_list[0],
            replicas: first.replicas,
            top_r: first.top_r,
            n_ref,
            ref_replicas: args.ref_replicas,
            seed: first.seed,
        })?;
        for s in &cmp.sizes {
            let ks: Vec<String> = s.ks_vs_reference.iter().map(|k| format!("{k:.4}")).collect();
            println!("n = {:>8}: KS vs reference by rank [{}]", s.n, ks.join(", "));
        }
        let path = write_out(&args.common.out_dir, "fp_comparison.json", &json_line(&cmp))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_selftest(args: &SelftestArgs) -> CliResult<()> {
    let results: Vec<CriterionResult> = match args.suite {
        Suite::Quick => {
            let r = quick_suite(args.corrupt_clocks);
            for c in &r {
                println!("{}", c.line());
            }
            r
        }
        Suite::Full => {
            let ids: Vec<u32> = match &args.only {
                Some(list) => parse_list(list, "criterion")?,
                None => (1..=10).collect(),
            };
            let scale = Scale::default();
            let mut out = Vec::new();
            for id in ids {
                let r = run_criterion(id, &scale)?;
                println!("{}", r.line());
                write_out(&args.out_dir, &format!("criterion_{id:02}.json"), &format!("{}\n", r.report_json()))?;
                out.push(r);
            }
            out
        }
    };
    if args.suite == Suite::Full {
        let summary: Vec<serde_json::Value> = results
            .iter()
            .map(|r| serde_json::json!({"id": r.id, "name": r.name, "passed": r.passed, "detail": r.detail}))
            .collect();
        let path = write_out(&args.out_dir, "selftest_results.json", &json_line(&summary))?;
        println!("wrote {}", path.display());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::Check(format!("{failed} self-test checks failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Truncation(a) => cmd_truncation(a),
        Command::Feller(a) => cmd_feller(a),
        Command::Fp(a) => cmd_fp(a),
        Command::Selftest(a) => cmd_selftest(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

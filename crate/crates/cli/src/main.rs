use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use hypersimplex::bench::{doubling_ratios, scaling_study, BenchConfig};
use hypersimplex::trainer::{format_summary, read_records_csv, summarize, sweep, write_records_csv, LossKind, SweepConfig};
use hypersimplex::verify::{self, CheckOutcome};
use hypersimplex::{hard_topk, project, Error, HypersimplexSpec, ProjectionResult};

#[derive(Parser)]
#[command(name = "hypersimplex", version, about = "Soft binary-argmax@k: projection, checks, benchmarks and sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project a score vector onto the (n, k)-hypersimplex at temperature tau
    Project(ProjectArgs),
    /// Compare the fast solver with the brute-force oracle and run the invariant suite
    Verify(VerifyArgs),
    /// Compare analytic derivatives with central finite differences
    Gradcheck(GradcheckArgs),
    /// Time the projection and its JVP over doubling sizes
    Bench(BenchArgs),
    /// Run a (loss x batch x seed) training sweep from a JSON config
    Sweep(SweepArgs),
    /// Summarize a sweep CSV into a batch-wise comparison table
    Report(ReportArgs),
}

#[derive(Args)]
struct ProjectArgs {
    /// Comma-separated scores, e.g. 3,1,0.5,-2
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', conflicts_with = "file", required_unless_present = "file")]
    x: Vec<f64>,
    /// File with one score per line
    #[arg(long)]
    file: Option<PathBuf>,
    /// Target sum of the output
    #[arg(long)]
    k: usize,
    /// Temperature
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Print the hard top-k indicator instead
    #[arg(long)]
    hard: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random instances per check
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    /// Largest dimension handed to the brute-force oracle (at most 12)
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Largest dimension for the invariant checks
    #[arg(long, default_value_t = 64)]
    n_invariants: usize,
    #[arg(long, hide = true)]
    corrupt_theta: Option<f64>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Screened JVP points
    #[arg(long, default_value_t = 500)]
    cases: usize,
    /// Largest dimension
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Random networks per loss
    #[arg(long, default_value_t = 5)]
    networks: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Smallest size as a power of two
    #[arg(long, default_value_t = 14)]
    min_log2: u32,
    /// Largest size as a power of two
    #[arg(long, default_value_t = 22)]
    max_log2: u32,
    /// Timed repetitions per size
    #[arg(long, default_value_t = 21)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// k as a fraction of n
    #[arg(long, default_value_t = 0.25)]
    k_fraction: f64,
    /// Skip the separate sort / isotonic timings
    #[arg(long)]
    no_phases: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep configuration
    #[arg(long)]
    config: PathBuf,
    /// Output CSV, overriding out_csv in the config; stdout when neither is set
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep CSV
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value = "ce")]
    baseline: LossKind,
    #[arg(long, default_value = "hypersimplex")]
    candidate: LossKind,
}

enum Failure {
    Usage(String),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Project(a) => cmd_project(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_vector(path: &PathBuf) -> Result<Vec<f64>, Failure> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Failure::Usage(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn cmd_project(a: ProjectArgs) -> Result<(), Failure> {
    let x = match &a.file {
        Some(path) => read_vector(path)?,
        None => a.x,
    };
    let out = if a.hard {
        json!({ "y": hard_topk(&x, a.k)? })
    } else {
        let spec = HypersimplexSpec::new(x.len(), a.k, a.tau)?;
        let r = project(&x, &spec)?;
        json!({ "y": r.y, "theta": r.theta, "active": r.active })
    };
    println!("{out}");
    Ok(())
}

fn print_table(rows: &[CheckOutcome]) -> bool {
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{:<40} {:>7} {:>8} {:>11} {:>8}  result", "check", "cases", "failures", "worst", "tol");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<40} {:>7} {:>8} {:>11.3e} {:>8.0e}  {}",
            r.name,
            r.cases,
            r.failures,
            r.worst,
            r.tol,
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    rows.iter().all(CheckOutcome::passed)
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let offset = a.corrupt_theta.unwrap_or(0.0);
    let solver = move |x: &[f64], spec: &HypersimplexSpec| -> hypersimplex::Result<ProjectionResult> {
        let mut r = project(x, spec)?;
        if offset != 0.0 {
            r.theta += offset;
            r.y = x.iter().map(|v| (v / spec.tau - r.theta).clamp(0.0, 1.0)).collect();
        }
        Ok(r)
    };
    let n = a.n_invariants.max(2);
    let mut rows = vec![
        verify::oracle_agreement(&mut rng, a.cases, a.n, &[0.1, 1.0, 10.0], &solver)?,
        verify::feasibility(&mut rng, a.cases, n, &solver)?,
        verify::order_preservation(&mut rng, a.cases, n)?,
        verify::translation_invariance(&mut rng, a.cases, n)?,
    ];
    for (tau, name) in [(0.5, "lipschitz (tau 0.5)"), (1.0, "lipschitz (tau 1)"), (2.0, "lipschitz (tau 2)")] {
        let mut c = verify::lipschitz(&mut rng, a.cases, n, tau)?;
        c.name = name;
        rows.push(c);
    }
    rows.push(verify::solver_agreement(&mut rng, a.cases, n)?);
    rows.push(verify::idempotence(&mut rng, a.cases, n)?);
    rows.push(verify::isotonic_reduction(&mut rng, a.cases, n)?);
    if print_table(&rows) {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let rows = [
        verify::jvp_gradcheck(&mut rng, a.cases, a.n)?,
        verify::mlp_gradcheck(&mut rng, a.networks)?,
    ];
    let ok = print_table(&rows);
    let worst = rows.iter().map(|r| r.worst).fold(0.0, f64::max);
    println!("worst relative error: {worst:.3e}");
    if ok {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    if a.min_log2 < 1 || a.min_log2 > a.max_log2 || a.max_log2 > 30 {
        return Err(Failure::Usage("need 1 <= min-log2 <= max-log2 <= 30".into()));
    }
    let cfg = BenchConfig {
        reps: a.reps,
        seed: a.seed,
        tau: a.tau,
        k_fraction: a.k_fraction,
        phases: !a.no_phases,
    };
    let sizes: Vec<usize> = (a.min_log2..=a.max_log2).map(|p| 1usize << p).collect();
    let rows = scaling_study(&sizes, &cfg)?;
    let mut out = io::stdout().lock();
    writeln!(out, "n,project_ns,jvp_ns,sort_ns,isotonic_ns")?;
    for r in &rows {
        writeln!(out, "{},{:.0},{:.0},{:.0},{:.0}", r.n, r.project_ns, r.jvp_ns, r.sort_ns, r.isotonic_ns)?;
    }
    writeln!(out)?;
    writeln!(out, "n_from,n_to,project_ratio,jvp_ratio")?;
    for d in doubling_ratios(&rows) {
        writeln!(out, "{},{},{:.3},{:.3}", d.n_from, d.n_to, d.project, d.jvp)?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.config)?;
    let config: SweepConfig =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", a.config.display())))?;
    let dataset = config.load_dataset()?;
    let records = sweep(&config, &dataset)?;
    let diverged = records.iter().filter(|r| r.diverged).count();
    if diverged > 0 {
        eprintln!("warning: {diverged} of {} runs diverged", records.len());
    }
    match a.out.or_else(|| config.out_csv.clone()) {
        Some(path) => write_records_csv(fs::File::create(path)?, &records)?,
        None => write_records_csv(io::stdout().lock(), &records)?,
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<(), Failure> {
    let rows = read_records_csv(fs::File::open(&a.csv)?)?;
    let summary = summarize(&rows, a.baseline, a.candidate)?;
    print!("{}", format_summary(&summary, a.baseline, a.candidate));
    Ok(())
}

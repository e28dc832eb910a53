use std::path::PathBuf;
use std::process::ExitCode;

use bt_bounds::num::parse_q;
use bt_bounds::suite::{replay, run_suite, Group, Span, SuiteConfig, SuiteName, SuiteReport};
use clap::Parser;

const EXIT_CONFIG: u8 = 3;

/// Runs the bound and identity verification suites and writes a JSON report.
#[derive(Parser, Debug)]
#[command(name = "bt-bounds", version)]
struct Args {
    /// lattice | epimv | fixed-points | above | bermaat | orbital | weyl | summability | all
    #[arg(long, default_value = "all")]
    suite: String,
    /// Restrict to these primes (comma separated).
    #[arg(long, value_delimiter = ',')]
    p: Vec<u64>,
    /// Relative precision of p-adic elements.
    #[arg(long)]
    prec: Option<i64>,
    /// gl2 | gl3 | sl2
    #[arg(long)]
    group: Option<String>,
    /// Finite level N (overrides the suite default).
    #[arg(long)]
    level: Option<u32>,
    /// Epsilon values for summability sums (comma separated rationals).
    #[arg(long, value_delimiter = ',')]
    eps: Vec<String>,
    /// Enumeration cap per case.
    #[arg(long)]
    cap: Option<u128>,
    /// Write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Seed for randomized families.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Range of m in gamma = diag(1, 1+p^m), as a..b.
    #[arg(long, default_value = "1..3")]
    sd: String,
    /// Range of y-depth offsets above m, as a..b.
    #[arg(long, default_value = "0..2")]
    depth: String,
    /// Re-run every case of an existing report and compare outputs.
    #[arg(long, conflicts_with = "json")]
    rerun: Option<PathBuf>,
}

fn config(args: &Args) -> Result<SuiteConfig, String> {
    let suite: SuiteName = args.suite.parse().map_err(|e| format!("{e}"))?;
    let mut cfg = SuiteConfig::new(suite);
    cfg.primes = args.p.clone();
    cfg.prec = args.prec;
    cfg.group = args.group.as_deref().map(str::parse::<Group>).transpose().map_err(|e| e.to_string())?;
    cfg.level = args.level;
    if !args.eps.is_empty() {
        let eps = args.eps.iter().map(|s| parse_q(s).ok_or_else(|| format!("bad eps {s:?}")));
        cfg.eps = Some(eps.collect::<Result<_, _>>()?);
    }
    cfg.cap = args.cap;
    cfg.seed = args.seed;
    cfg.sd = args.sd.parse::<Span>().map_err(|e| e.to_string())?;
    cfg.depth = args.depth.parse::<Span>().map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("BT_BOUNDS_THREADS") else { return Ok(()) };
    let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| format!("BT_BOUNDS_THREADS={v:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn print_table(report: &SuiteReport) {
    for c in &report.cases {
        let ms = report.timing_ms.get(&c.key).copied().unwrap_or(0.0);
        let tag = match c.status {
            bt_bounds::suite::Status::Ok => "ok",
            bt_bounds::suite::Status::Violation => "VIOLATION",
            bt_bounds::suite::Status::Precision => "precision",
            bt_bounds::suite::Status::Error => "error",
        };
        let detail = c.error.as_deref().unwrap_or("");
        println!("{tag:<10} {:>9.1} ms  {} {detail}", ms, c.key);
    }
    let s = &report.summary;
    println!(
        "{}: {} cases, {} ok, {} violations, {} precision, {} errors{}",
        report.suite,
        s.cases,
        s.ok,
        s.violations,
        s.precision,
        s.errors,
        if report.vacuous { " (vacuous)" } else { "" }
    );
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = init_threads() {
        eprintln!("config error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Some(path) = &args.rerun {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        };
        let value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("bad report: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        };
        return match replay(&value) {
            Ok(r) => {
                println!("{}", serde_json::to_string_pretty(&r).unwrap());
                ExitCode::from(if r.mismatches.is_empty() { 0 } else { 1 })
            }
            Err(e) => {
                eprintln!("bad report: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        };
    }
    let cfg = match config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let report = match run_suite(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    print_table(&report);
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&report.to_json()).unwrap();
        if let Err(e) = std::fs::write(path, text + "\n") {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    ExitCode::from(report.exit_code as u8)
}

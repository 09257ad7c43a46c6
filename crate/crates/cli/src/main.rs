use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use bifrac::calibration::{calibrate, ORDERS};
use bifrac::generate::{gen_instance, GenSpec};
use bifrac::io::{InstanceFile, ReportFile};
use bifrac::operators::{DEFAULT_K_MAX, DEFAULT_K_MIN};
use bifrac::par;
use bifrac::testing::{exhaustive_norm_oracle, verify_with, Instance, OptimizerConfig, VerifyOptions, DEFAULT_RESOLUTION};

const EXIT_PARSE: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_SINGULAR: u8 = 3;

#[derive(Parser)]
#[command(name = "bifrac", version, about = "Testing constants and norm estimates for bilinear fractional integrals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random instance file.
    Gen(GenArgs),
    /// Verify one instance file and write its report.
    Verify(VerifyArgs),
    /// Verify a seeded batch and write one CSV row per instance.
    Sweep(SweepArgs),
    /// Measure and freeze C2 and R_max over a seeded batch.
    Calibrate(CalibrateArgs),
    /// Compare the optimizer with the exhaustive grid search on tiny instances.
    Oracle(OracleArgs),
}

#[derive(Args, Clone)]
struct InstanceArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    p1: f64,
    #[arg(long, default_value_t = 2.0)]
    p2: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Atom counts of sigma1, sigma2 and w.
    #[arg(long, value_parser = parse_atoms, default_value = "4,4,4")]
    atoms: [usize; 3],
    /// Coordinates are drawn from [0, spread).
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = DEFAULT_K_MIN, allow_negative_numbers = true)]
    kmin: i32,
    #[arg(long, default_value_t = DEFAULT_K_MAX, allow_negative_numbers = true)]
    kmax: i32,
    #[arg(long)]
    force_exponents: bool,
}

fn parse_atoms(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| "expected three counts A,B,C".to_string())
}

impl InstanceArgs {
    fn spec(&self, seed: u64) -> GenSpec {
        GenSpec {
            exponents: (self.p1, self.p2, self.q),
            atoms: self.atoms,
            spread: self.spread,
            k_min: self.kmin,
            k_max: self.kmax,
            force: self.force_exponents,
            ..GenSpec::new(seed, self.n, self.alpha)
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    file: PathBuf,
    /// Overrides the delta stored in the file.
    #[arg(long)]
    delta: Option<f64>,
    /// Run the exhaustive oracle at this resolution (at most 3 atoms per sigma).
    #[arg(long)]
    oracle: Option<usize>,
    #[arg(long)]
    allow_singular: bool,
    /// Record the wall time in the report.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// First seed of the batch.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    count: u64,
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    count: u64,
    /// Restrict to one dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Restrict to one order.
    #[arg(long)]
    alpha: Option<f64>,
    /// Also print the tables as Rust source.
    #[arg(long)]
    rust: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    count: u64,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: usize,
    #[command(flatten)]
    instance: InstanceArgs,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn optimizer_for(inst: &Instance) -> OptimizerConfig {
    OptimizerConfig {
        seed: inst.seed.unwrap_or(0),
        ..OptimizerConfig::default()
    }
}

fn run_gen(args: &GenArgs) -> Result<u8> {
    let file = gen_instance(&args.instance.spec(args.seed))?;
    emit(args.out.as_deref(), &file.to_json())?;
    Ok(0)
}

fn run_verify(args: &VerifyArgs) -> Result<u8> {
    let start = Instant::now();
    let parsed = fs::read_to_string(&args.file)
        .with_context(|| format!("reading {}", args.file.display()))
        .and_then(|text| Ok(InstanceFile::from_json(&text)?))
        .and_then(|file| Ok(file.to_instance()?));
    let mut inst = match parsed {
        Ok(inst) => inst,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(EXIT_PARSE);
        }
    };
    if let Some(d) = args.delta {
        inst = match inst.with_delta(d) {
            Ok(i) => i,
            Err(e) => {
                eprintln!("error: {e}");
                return Ok(EXIT_PARSE);
            }
        };
    }
    let opts = VerifyOptions {
        oracle_resolution: args.oracle,
    };
    let report = verify_with(&inst, &optimizer_for(&inst), &opts);
    let singular = report.singular;
    let violations = report.violations.clone();
    let mut file = ReportFile::new(&inst, report);
    if args.timing {
        file.wall_ms = Some(start.elapsed().as_millis() as u64);
    }
    emit(args.out.as_deref(), &file.to_json())?;
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {}", serde_json::to_string(v)?);
        }
        return Ok(EXIT_VIOLATION);
    }
    if singular && !args.allow_singular {
        eprintln!("singular instance: a w-atom coincides with common atoms of sigma1 and sigma2");
        return Ok(EXIT_SINGULAR);
    }
    Ok(0)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn run_sweep(args: &SweepArgs) -> Result<u8> {
    let seeds: Vec<u64> = (args.seed..args.seed + args.count).collect();
    let a = &args.instance;
    let rows = par::map(&seeds, |&seed| -> Result<(String, bool)> {
        let start = Instant::now();
        let mut inst = gen_instance(&a.spec(seed))?.to_instance()?;
        if let Some(d) = args.delta {
            inst = inst.with_delta(d)?;
        }
        let r = verify_with(&inst, &optimizer_for(&inst), &VerifyOptions::default());
        let row = format!(
            "{seed},{},{},{},{},{},{}/{}/{},{},{},{},{},{},{},{},{}",
            a.n,
            a.alpha,
            a.p1,
            a.p2,
            a.q,
            a.atoms[0],
            a.atoms[1],
            a.atoms[2],
            r.t,
            r.t1_star,
            r.t2_star,
            r.n_lower,
            r.nweak_lower,
            fmt_opt(r.ratio_strong),
            fmt_opt(r.ratio_weak),
            start.elapsed().as_millis()
        );
        Ok((row, r.passed()))
    });
    let mut csv = String::from("seed,n,alpha,p1,p2,q,atoms,T,T1star,T2star,N_lower,Nweak_lower,ratio_strong,ratio_weak,wall_ms\n");
    let mut failed = 0;
    for row in rows {
        let (line, ok) = row?;
        csv += &line;
        csv.push('\n');
        failed += usize::from(!ok);
    }
    emit(args.out.as_deref(), &csv)?;
    if failed > 0 {
        eprintln!("{failed} instance(s) violated a certified check");
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}

fn run_calibrate(args: &CalibrateArgs) -> Result<u8> {
    let orders: Vec<(usize, f64)> = ORDERS
        .iter()
        .copied()
        .filter(|(n, a)| args.n.is_none_or(|m| m == *n) && args.alpha.is_none_or(|b| b == *a))
        .collect();
    if orders.is_empty() {
        return Err(anyhow!("no calibrated order matches the filter"));
    }
    let table = calibrate(&orders, args.seed..args.seed + args.count, &OptimizerConfig::default());
    emit(args.out.as_deref(), &(serde_json::to_string_pretty(&table)? + "\n"))?;
    if args.rust {
        eprint!("{}", table.rust_tables());
    }
    Ok(0)
}

fn run_oracle(args: &OracleArgs) -> Result<u8> {
    let seeds: Vec<u64> = (args.seed..args.seed + args.count).collect();
    let results = par::map(&seeds, |&seed| -> Result<String> {
        let inst = gen_instance(&args.instance.spec(seed))?.to_instance()?;
        let r = verify_with(&inst, &optimizer_for(&inst), &VerifyOptions::default());
        let o = exhaustive_norm_oracle(&inst, args.resolution)?;
        let ok = (r.n_lower - o.value).abs() <= o.gap * (1.0 + 1e-9) + 1e-12;
        Ok(format!(
            "{seed},{},{},{},{},{}",
            r.n_lower,
            o.value,
            o.gap,
            r.n_lower - o.value,
            if ok { "agree" } else { "DISAGREE" }
        ))
    });
    println!("seed,N_lower,N_exhaustive,gap,difference,status");
    let mut disagree = 0;
    for line in results {
        let line = line?;
        disagree += usize::from(line.ends_with("DISAGREE"));
        println!("{line}");
    }
    Ok(if disagree > 0 { EXIT_VIOLATION } else { 0 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Verify(a) => run_verify(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Oracle(a) => run_oracle(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_PARSE)
        }
    }
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shallowtree::experiment::{reference_run, run_experiment, RunConfig};
use shallowtree::io::{export_tree, fmt_f64, load_csv, tree_from_json, ExportFormat};
use shallowtree::{calibrate_lambda, CalibrationGoal, Error, LloydConfig, Strategy, DEFAULT_LAMBDA};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "shallowtree",
    version,
    about = "Shallow threshold trees for explainable k-means"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build one tree from a single seeded k-means solution.
    Cluster(ClusterArgs),
    /// Sweep seeds and strategies and write a result table.
    Bench(BenchArgs),
    /// Search lambda for cost and WAES goals.
    Calibrate(CalibrateArgs),
    /// Re-serialize a tree saved as JSON.
    Export(ExportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Numeric CSV, optional header row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    /// Number of seeds (0..N) or a comma-separated list of seeds.
    #[arg(long, default_value = "1")]
    seeds: Seeds,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "exshallow")]
    strategy: Strategy,
    /// Only used by exshallow.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
    /// Tree formats to write, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "json")]
    format: Vec<ExportFormat>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated strategy names, or `all`.
    #[arg(long, default_value = "exshallow")]
    strategy: String,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Maximum acceptable normalized cost.
    #[arg(long)]
    c_star: f64,
    /// Target WAES.
    #[arg(long)]
    w_star: f64,
    /// Starting lambda.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "json")]
    format: Vec<ExportFormat>,
}

#[derive(Args)]
struct ExportArgs {
    /// Tree JSON as written by `cluster`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "dot")]
    format: ExportFormat,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

impl std::str::FromStr for Seeds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.contains(',') {
            let seeds = s
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse::<u64>().map_err(|e| format!("bad seed {t:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            if seeds.is_empty() {
                return Err("empty seed list".into());
            }
            return Ok(Seeds(seeds));
        }
        let count: u64 = s.parse().map_err(|e| format!("bad seed count {s:?}: {e}"))?;
        if count == 0 {
            return Err("seed count must be >= 1".into());
        }
        Ok(Seeds((0..count).collect()))
    }
}

fn with_lambda(strategy: Strategy, lambda: f64) -> shallowtree::Result<Strategy> {
    match strategy {
        Strategy::ExShallow { .. } => Strategy::exshallow(lambda),
        other => Ok(other),
    }
}

fn parse_strategies(list: &str, lambda: f64) -> shallowtree::Result<Vec<Strategy>> {
    let names: Vec<&str> = if list.trim().eq_ignore_ascii_case("all") {
        vec!["exshallow", "exgreedy", "imm", "exkmc"]
    } else {
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    };
    let mut out = Vec::new();
    for name in names {
        let s = with_lambda(name.parse()?, lambda)?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> shallowtree::Result<()> {
    fs::write(path, contents)?;
    Ok(())
}

fn summary_lines(csv: &str) -> String {
    let mut out = String::new();
    for line in csv.lines().filter(|l| l.split(',').nth(2) == Some("mean")) {
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| f[i].parse::<f64>().unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{:<10} cost {:.4}  waes {:.4}  wad {:.4}  nmi {:.4}",
            f[0],
            num(3),
            num(4),
            num(5),
            num(6)
        );
    }
    out
}

fn cluster(args: ClusterArgs) -> shallowtree::Result<()> {
    let data = load_csv(&args.data.input)?;
    let strategy = with_lambda(args.strategy, args.lambda)?;
    let seed = args.data.seeds.0[0];
    let cfg = RunConfig::new(args.data.k, vec![strategy], vec![seed]);
    let exp = run_experiment(&data, &cfg)?;
    fs::create_dir_all(&args.out)?;
    let results = exp.results_csv();
    write_file(&args.out.join("results.csv"), &results)?;
    write_file(&args.out.join("timings.csv"), &exp.timings_csv())?;
    for format in &args.format {
        let name = format!("tree.{}", format.extension());
        write_file(&args.out.join(name), &export_tree(&exp.runs[0].tree, *format))?;
    }
    print!("{}", summary_lines(&results));
    Ok(())
}

fn bench(args: BenchArgs) -> shallowtree::Result<()> {
    let data = load_csv(&args.data.input)?;
    let strategies = parse_strategies(&args.strategy, args.lambda)?;
    let cfg = RunConfig::new(args.data.k, strategies, args.data.seeds.0);
    let exp = run_experiment(&data, &cfg)?;
    fs::create_dir_all(&args.out)?;
    let results = exp.results_csv();
    write_file(&args.out.join("results.csv"), &results)?;
    write_file(&args.out.join("timings.csv"), &exp.timings_csv())?;
    print!("{}", summary_lines(&results));
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> shallowtree::Result<()> {
    let data = load_csv(&args.data.input)?;
    let mut goal = CalibrationGoal::new(args.c_star, args.w_star);
    goal.lambda_init = args.lambda;
    goal.lambda_hi = goal.lambda_hi.max(args.lambda);
    fs::create_dir_all(&args.out)?;
    let mut table = String::from("seed,lambda,status,builds,normalized_cost,waes,wad,nmi\n");
    for &seed in &args.data.seeds.0 {
        let reference = reference_run(&data, args.data.k, seed, &LloydConfig::default())?;
        let outcome = calibrate_lambda(&data, &reference.centers, &goal)?;
        let r = &outcome.report;
        let _ = writeln!(
            table,
            "{seed},{},{:?},{},{},{},{},{}",
            fmt_f64(outcome.lambda),
            outcome.status,
            outcome.probes.len(),
            fmt_f64(r.normalized_cost),
            fmt_f64(r.waes),
            fmt_f64(r.wad),
            fmt_f64(r.nmi_vs_reference)
        );
        println!(
            "seed {seed}: lambda {:.6}  {:?}  cost {:.4}  waes {:.4}",
            outcome.lambda, outcome.status, r.normalized_cost, r.waes
        );
        for format in &args.format {
            let name = format!("tree_seed{seed}.{}", format.extension());
            write_file(&args.out.join(name), &export_tree(&outcome.tree, *format))?;
        }
    }
    write_file(&args.out.join("calibration.csv"), &table)
}

fn export(args: ExportArgs) -> shallowtree::Result<()> {
    let text = fs::read_to_string(&args.input)?;
    let tree = tree_from_json(&text)?;
    let rendered = export_tree(&tree, args.format);
    match args.out {
        Some(path) => write_file(&path, &rendered),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SHALLOWTREE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("SHALLOWTREE_THREADS must be a non-negative integer, got {raw:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::DegenerateNode { .. } => EXIT_DEGENERATE,
        Error::Parse { .. } | Error::MalformedTree(_) | Error::Io(_) => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match cli.command {
        Command::Cluster(a) => cluster(a),
        Command::Bench(a) => bench(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Export(a) => export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

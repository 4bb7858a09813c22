use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fusim::eval::{self, BenchConfig, CountingAllocator};
use fusim::graph::load_graph;
use fusim::oracle::exact_influence;
use fusim::pipeline::{self, Algorithm};
use fusim::{par, EdgeHashTable, Error, Graph, SimulationRandoms, WeightScheme};

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

/// Influence maximization under the Independent Cascade model.
#[derive(Debug, Parser)]
#[command(name = "fusim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select K seed vertices.
    Select(SelectArgs),
    /// Estimate the influence of a seed set with independent simulations.
    Evaluate(EvaluateArgs),
    /// Emit the CDF of hash-based sampling probabilities (TSV) and its KS distance.
    Cdf(CdfArgs),
    /// Run the rows of a benchmark config and write a CSV report.
    Bench(BenchArgs),
    /// Exact influence of a seed set by enumerating all worlds (tiny graphs only).
    Exact(ExactArgs),
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Edge list (`u v [w]` per line) or binary graph cache.
    #[arg(long)]
    graph: PathBuf,
    /// Edge weights: const:P | uniform:LO,HI | normal:MEAN,STD | wc | file.
    #[arg(long, default_value = "const:0.01")]
    weights: WeightScheme,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Number of seeds.
    #[arg(long)]
    k: usize,
    /// Number of Monte-Carlo simulations.
    #[arg(long, default_value_t = 256)]
    r: usize,
    /// Master seed for simulation randoms and random weights.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all available cores).
    #[arg(long, env = "FUSIM_THREADS", default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "infuser")]
    algo: Algorithm,
    /// Also write the seeds, one original vertex ID per line, to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the lazy-greedy queue trace as CSV (infuser only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// File with one original vertex ID per line.
    #[arg(long)]
    seeds_file: PathBuf,
    /// Number of independent simulated worlds.
    #[arg(long, default_value_t = 10_000)]
    r_eval: usize,
    /// Seed for the evaluation RNG (and random weights).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all available cores).
    #[arg(long, env = "FUSIM_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Args)]
struct CdfArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = 256)]
    r: usize,
    #[arg(long, default_value_t = 100)]
    bins: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the TSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// TOML file with one `[[row]]` table per run.
    #[arg(long)]
    config: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write `NA` for seconds and peak bytes so reports are reproducible.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Debug, Args)]
struct ExactArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Edge weights: const:P | uniform:LO,HI | normal:MEAN,STD | wc | file.
    #[arg(long, default_value = "file")]
    weights: WeightScheme,
    /// File with one original vertex ID per line.
    #[arg(long)]
    seeds_file: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) => 1,
        Error::Constraint(_) => 3,
        Error::Io { .. } | Error::Parse { .. } | Error::Format(_) | Error::EmptyGraph | Error::Internal(_) => 2,
    }
}

fn run(command: Command) -> fusim::Result<()> {
    match command {
        Command::Select(a) => select(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Cdf(a) => cdf(a),
        Command::Bench(a) => bench(a),
        Command::Exact(a) => exact(a),
    }
}

fn load(path: &Path, weights: &WeightScheme, seed: u64) -> fusim::Result<Graph> {
    let mut g = load_graph(path, false)?;
    g.apply_weights(weights, seed)?;
    Ok(g)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads original vertex IDs (one per line, `#` comments allowed) and maps
/// them to internal IDs.
fn read_seeds(g: &Graph, path: &Path) -> fusim::Result<Vec<u32>> {
    let file = File::open(path).map_err(io_err(path))?;
    let lookup = g.id_lookup();
    let mut seeds = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        let id: u64 = text
            .parse()
            .map_err(|_| parse_err(format!("`{text}` is not a vertex ID")))?;
        let v = *lookup
            .get(&id)
            .ok_or_else(|| parse_err(format!("vertex {id} is not in the graph")))?;
        if !seeds.contains(&v) {
            seeds.push(v);
        }
    }
    Ok(seeds)
}

fn create(path: &Path) -> fusim::Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn select(a: SelectArgs) -> fusim::Result<()> {
    let g = load(&a.graph.graph, &a.graph.weights, a.seed)?;
    let start = Instant::now();
    let (seeds, influence, trace) = par::with_threads(a.threads, || -> fusim::Result<_> {
        if a.algo == Algorithm::Infuser {
            let sel = pipeline::infuser(&g, a.k, a.r, a.seed)?;
            Ok((sel.seeds.clone(), sel.influence(), Some(sel)))
        } else {
            let set = pipeline::select(&g, a.algo, a.k, a.r, a.seed)?;
            Ok((set.seeds, set.influence, None))
        }
    })??;
    let seconds = start.elapsed().as_secs_f64();
    let ids: Vec<u64> = seeds.iter().map(|&v| g.original_id(v)).collect();

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let line = ids.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
    writeln!(out, "seeds: {line}").map_err(io_err(Path::new("<stdout>")))?;
    writeln!(out, "sigma/R: {influence:.6}").map_err(io_err(Path::new("<stdout>")))?;
    eprintln!("time: {seconds:.6} s ({} threads)", resolved_threads(a.threads));

    if let Some(path) = &a.out {
        let mut f = create(path)?;
        for id in &ids {
            writeln!(f, "{id}").map_err(io_err(path))?;
        }
        f.flush().map_err(io_err(path))?;
    }
    if let Some(path) = &a.trace {
        let sel = trace.ok_or_else(|| Error::InvalidParameter("--trace requires --algo infuser".into()))?;
        let mut f = create(path)?;
        sel.write_trace_csv(&mut f).map_err(io_err(path))?;
        f.flush().map_err(io_err(path))?;
    }
    Ok(())
}

fn resolved_threads(threads: usize) -> usize {
    if threads == 0 {
        par::max_threads()
    } else {
        threads
    }
}

fn evaluate(a: EvaluateArgs) -> fusim::Result<()> {
    let g = load(&a.graph.graph, &a.graph.weights, a.seed)?;
    let seeds = read_seeds(&g, &a.seeds_file)?;
    let est = par::with_threads(a.threads, || eval::evaluate_seeds(&g, &seeds, a.r_eval, a.seed))??;
    println!("sigma: {:.6}", est.mean);
    println!("std_error: {:.6}", est.std_error);
    println!("worlds: {}", est.worlds);
    Ok(())
}

fn cdf(a: CdfArgs) -> fusim::Result<()> {
    if a.r == 0 {
        return Err(Error::InvalidParameter("R must be at least 1".into()));
    }
    let g = load(&a.graph.graph, &a.graph.weights, a.seed)?;
    let table = EdgeHashTable::build(&g);
    let randoms = SimulationRandoms::generate(a.seed, a.r);
    let report = eval::sampling_cdf(&g, &table, &randoms, a.bins)?;
    match &a.out {
        Some(path) => {
            let mut f = create(path)?;
            report.write_tsv(&mut f).map_err(io_err(path))?;
            f.flush().map_err(io_err(path))?;
        }
        None => report
            .write_tsv(io::stdout().lock())
            .map_err(io_err(Path::new("<stdout>")))?,
    }
    eprintln!(
        "ks: {:.6} over {} samples ({})",
        report.ks,
        report.samples,
        if report.is_uniform() { "uniform" } else { "NOT uniform" }
    );
    Ok(())
}

fn bench(a: BenchArgs) -> fusim::Result<()> {
    let config = BenchConfig::load(&a.config)?;
    let rows = eval::run_benchmark(&config);
    match &a.out {
        Some(path) => {
            let mut f = create(path)?;
            eval::write_csv(&rows, a.omit_timing, &mut f).map_err(io_err(path))?;
            f.flush().map_err(io_err(path))?;
        }
        None => eval::write_csv(&rows, a.omit_timing, io::stdout().lock()).map_err(io_err(Path::new("<stdout>")))?,
    }
    eprint!("{}", eval::format_table(&rows));
    Ok(())
}

fn exact(a: ExactArgs) -> fusim::Result<()> {
    let g = load(&a.graph, &a.weights, 0)?;
    let seeds = read_seeds(&g, &a.seeds_file)?;
    let value = exact_influence(&g, &seeds)?;
    println!("influence: {value:.6}");
    Ok(())
}

use std::io::{self, BufReader};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use segbench::bench::bench_eval;
use segbench::config::{parse_algorithms, parse_problems, ExperimentConfig};
use segbench::data::{data_dir, load_or_build, synthetic_table, train_surrogate, REPORT_FILE, SURROGATE_FILE};
use segbench::report::{render_table, report};
use segbench::runner::run_experiment;
use segbench::sample::{parse_metrics, sample_metrics, write_csv};
use segbench::serve::Server;
use segbench_core::problems::get_problem;

#[derive(Parser)]
#[command(name = "segbench", version, about = "Hardware-aware segmentation NAS benchmark suite")]
struct Cli {
    /// Directory holding the cost table and surrogate (default: $SEGBENCH_DATA_DIR or ./segbench-data)
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run algorithms on problems and write per-run records and a summary
    Run(RunArgs),
    /// Write raw metrics of randomly sampled architectures as CSV
    Sample {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated metric names, or "all"
        #[arg(long, default_value = "all")]
        metrics: String,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the error surrogate on synthetic oracle pairs and save it
    TrainSurrogate {
        #[arg(long, default_value_t = segbench::data::TRAINING_PAIRS)]
        pairs: usize,
        #[arg(long, default_value_t = segbench::data::TRAINING_SEED)]
        seed: u64,
    },
    /// Time batch evaluation on one problem
    BenchEval {
        #[arg(long, default_value_t = 1)]
        problem: usize,
        #[arg(long, default_value_t = 100)]
        batch: usize,
        #[arg(long, default_value_t = 31)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the JSON-lines evaluation protocol over TCP or stdio
    Serve {
        /// TCP port on 127.0.0.1; ignored with --stdio
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        stdio: bool,
        /// Default to unperturbed hardware objectives
        #[arg(long)]
        no_perturb: bool,
    },
    /// Rebuild the summary and plot data of an output directory
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Problem ids: comma list, ranges like 1-5, or "all"
    #[arg(long, default_value = "all")]
    problem: String,
    /// Algorithms: comma list or "all"
    #[arg(long, default_value = "all")]
    algo: String,
    #[arg(long, default_value_t = segbench::config::DEFAULT_RUNS)]
    runs: usize,
    #[arg(long, default_value_t = segbench::config::DEFAULT_EVALUATIONS)]
    evals: usize,
    /// Run r uses seed + r
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Concurrent runs (default: available cores)
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    no_perturb: bool,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let dir = data_dir(cli.data_dir.as_deref());
    match cli.command {
        Command::Run(a) => {
            let mut cfg = ExperimentConfig::new(parse_problems(&a.problem)?, parse_algorithms(&a.algo)?, a.out);
            cfg.runs = a.runs;
            cfg.evaluations = a.evals;
            cfg.seed_base = a.seed;
            cfg.perturbation = !a.no_perturb;
            cfg.validate()?;
            let evaluators = load_or_build(&dir)?;
            let jobs = a.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let outcome = run_experiment(&cfg, &evaluators, jobs)?;
            eprintln!("{} runs executed, {} already complete", outcome.executed, outcome.skipped);
            print!("{}", render_table(&outcome.summary));
        }
        Command::Sample { n, seed, metrics, out } => {
            let metrics = parse_metrics(&metrics)?;
            let table = load_or_build(&dir)?.table.expect("load_or_build provides a table");
            let rows = sample_metrics(&table, n, seed, &metrics)?;
            match out {
                Some(path) => {
                    let f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_csv(f, &metrics, &rows)?
                }
                None => write_csv(io::stdout().lock(), &metrics, &rows)?,
            }
        }
        Command::TrainSurrogate { pairs, seed } => {
            std::fs::create_dir_all(&dir)?;
            let table = synthetic_table()?;
            let (model, rep) = train_surrogate(&table, pairs, seed)?;
            std::fs::write(dir.join(SURROGATE_FILE), model.to_json())?;
            std::fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(&rep)?)?;
            println!(
                "train {} / holdout {}: MAE {:.4e}, Pearson {:.4}, Spearman {:.4}",
                rep.train_size, rep.holdout_size, rep.mae, rep.pearson, rep.spearman
            );
        }
        Command::BenchEval { problem, batch, repeats, seed } => {
            let p = get_problem(problem)?;
            let evaluators = load_or_build(&dir)?;
            let r = bench_eval(&p, &evaluators, batch, repeats, seed)?;
            println!(
                "{}: {} architectures, {} repeats: {:.6} s +- {:.6} s",
                p.name(),
                r.batch,
                r.repeats,
                r.mean_seconds,
                r.std_seconds
            );
        }
        Command::Serve { port, host, stdio, no_perturb } => {
            let evaluators = load_or_build(&dir)?;
            let server = Server::new(&evaluators, !no_perturb);
            if stdio {
                server.serve_stream(BufReader::new(io::stdin().lock()), io::stdout().lock())?;
            } else {
                let host = host.unwrap_or_else(|| "127.0.0.1".into());
                server.serve_tcp((host.as_str(), port), |addr| eprintln!("listening on {addr}"))?;
            }
        }
        Command::Report { out } => {
            let summary = report(&out)?;
            print!("{}", render_table(&summary));
        }
    }
    Ok(())
}

//! `element`: run exploration experiments, self-check the library and
//! benchmark the graph memory.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use element_core::agents::{run_element, RunOutput};
use element_core::checks::{self, BenchOptions, BenchRow, VerifyOptions};
use element_core::envs::PointMassWorld;
use element_core::knn_graph::SearchConfig;

use crate::config::{ConfigError, EnvironmentKind, ExperimentConfig};

/// Setting this to a number scales the denominator of the optimal episodic
/// reward inside `element verify`. Used to confirm the check can fail.
const FAULT_ENV: &str = "ELEMENT_VERIFY_FAULT";
const OUTPUT_ENV: &str = "ELEMENT_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "element", version, about = "Episodic and lifelong state-entropy exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent per seed and write logs, heatmaps and the final graph.
    Run { config: PathBuf },
    /// Run the built-in checks and print a pass/fail table.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Time graph search against brute force on a random-walk stream.
    Bench {
        /// Largest graph size; rows are emitted at 10^3, 10^4, 10^5 up to this.
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        r1: usize,
        #[arg(long, default_value_t = 20)]
        r2: usize,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failures split by exit code: bad input is 2, anything at runtime is 1.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Verify { seed } => cmd_verify(seed),
        Command::Bench {
            n,
            dim,
            k,
            r1,
            r2,
            depth,
            queries,
            seed,
            out,
        } => cmd_bench(n, dim, k, (r1, r2, depth), queries, seed, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(path: &Path) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(path)?;
    let run = cfg.run_config()?;
    let encoder = cfg.encoder()?;
    let root = std::env::var_os(OUTPUT_ENV).map_or_else(|| cfg.output_dir.clone(), PathBuf::from);
    let maze = match cfg.environment {
        EnvironmentKind::Maze => Some(cfg.maze().map_err(Failure::Usage)?),
        EnvironmentKind::Pointmass => None,
    };

    let jobs: Vec<(u64, PathBuf)> = cfg
        .seeds
        .iter()
        .map(|&s| {
            let dir = if cfg.seeds.len() == 1 {
                root.clone()
            } else {
                root.join(format!("seed_{s}"))
            };
            (s, dir)
        })
        .collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    for chunk in jobs.chunks(workers) {
        let results: Vec<anyhow::Result<()>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(seed, dir)| {
                    let (run, encoder, maze, cfg) = (&run, &encoder, &maze, &cfg);
                    scope.spawn(move || -> anyhow::Result<()> {
                        let out = match maze {
                            Some(m) => run_element(&mut m.clone(), encoder, run, *seed),
                            None => run_element(&mut PointMassWorld::new(cfg.pointmass())?, encoder, run, *seed),
                        }
                        .with_context(|| format!("seed {seed}"))?;
                        write_outputs(&out, dir, run.graph_degree, *seed, &run.search)
                            .with_context(|| format!("writing outputs for seed {seed}"))?;
                        let last = out.log.records.last();
                        println!(
                            "seed {seed}: {} episodes, {} cells covered, memory {} -> {}",
                            out.log.records.len(),
                            last.map_or(0, |r| r.unique_cells),
                            out.memory.len(),
                            dir.display()
                        );
                        Ok(())
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("worker panicked"))))
                .collect()
        });
        for r in results {
            r.map_err(Failure::Runtime)?;
        }
    }
    Ok(())
}

fn write_outputs(out: &RunOutput, dir: &Path, degree: usize, seed: u64, search: &SearchConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    out.log.write_csv(&dir.join("run.csv"))?;
    out.coverage.grid().write_pgm(&dir.join("coverage.pgm"))?;
    let graph = out.memory.to_graph(degree, seed, search)?;
    let path = dir.join("graph.knng");
    std::fs::write(&path, graph.save()).with_context(|| format!("writing {}", path.display()))?;
    for snap in &out.log.snapshots {
        for (name, grid) in [
            ("lifelong", &snap.lifelong),
            ("episodic", &snap.episodic),
            ("visits", &snap.visits),
        ] {
            grid.write_pgm(&dir.join(format!("{name}_ep{}.pgm", snap.episode)))?;
        }
    }
    Ok(())
}

fn cmd_verify(seed: u64) -> Result<(), Failure> {
    let mut opts = VerifyOptions {
        seed,
        ..VerifyOptions::default()
    };
    if let Some(v) = std::env::var_os(FAULT_ENV) {
        let text = v.to_string_lossy();
        opts.prop1_denominator_scale = text
            .parse()
            .map_err(|_| Failure::Usage(anyhow::anyhow!("{FAULT_ENV} must be a number, got {text:?}")))?;
    }
    let outcomes = checks::run_all(&opts).map_err(|e| Failure::Runtime(e.into()))?;
    let width = outcomes.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &outcomes {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        println!("{verdict}  {:width$}  {}", c.name, c.detail);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        println!("all {} checks passed", outcomes.len());
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow::anyhow!("failed checks: {}", failed.join(", "))))
    }
}

fn cmd_bench(
    n: usize,
    dim: usize,
    k: usize,
    (r1, r2, depth): (usize, usize, usize),
    queries: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if n < 1_000 {
        return Err(Failure::Usage(anyhow::anyhow!("--n must be >= 1000, got {n}")));
    }
    if dim == 0 || k == 0 || queries == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--dim, --k and --queries must be >= 1")));
    }
    let search = SearchConfig::new(r1, r2, depth).map_err(|e| Failure::Usage(e.into()))?;
    let mut sizes: Vec<usize> = [1_000, 10_000, 100_000].into_iter().filter(|&s| s < n).collect();
    sizes.push(n);
    let rows = checks::bench(&BenchOptions {
        sizes,
        dim,
        k,
        search,
        queries,
        seed,
    })
    .map_err(|e| Failure::Runtime(e.into()))?;
    let mut csv = String::from(BenchRow::CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    print!("{csv}");
    if let Some(path) = out {
        std::fs::write(path, &csv)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Runtime)?;
    }
    Ok(())
}

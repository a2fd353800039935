use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mht_assoc::experiments::{
    run_dense_bench, run_gate_sweep, run_gibbs_bench, run_mimo_bench, write_csv, BenchConfig, GibbsConfig,
};
use mht_assoc::fusion::{run_fusion_sweep, SimParams};
use mht_assoc::oracle::kbest_bruteforce;
use mht_assoc::{gate_matrix, kbest_single, AssocError, OutputSet, SparseCostMatrix, Version, MISS};

#[derive(Parser)]
#[command(name = "mht-assoc", version, about = "K-best data association solver and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// K best associations of a cost matrix file
    Solve {
        /// Matrix file (`-` for stdin)
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Config::V3)]
        config: Config,
        /// Keep only the S cheapest pairs of each row
        #[arg(long)]
        gate: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// K best associations by exhaustive enumeration
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmarks on random instances
    Bench {
        #[arg(value_enum)]
        kind: BenchKind,
        #[command(flatten)]
        opts: BenchOpts,
    },
    /// Three-sensor fusion simulation swept over hypothesis counts
    FusionSim {
        #[arg(long, value_delimiter = ',', default_values_t = [1, 10, 100, 1000])]
        k_list: Vec<usize>,
        #[arg(long, default_value_t = 25)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Config {
    V1,
    V2,
    V3,
    V4,
}

impl Config {
    fn version(self) -> Version {
        match self {
            Config::V1 => Version::V1,
            Config::V2 => Version::V2,
            Config::V3 => Version::V3,
            Config::V4 => Version::V4,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchKind {
    Dense,
    Mimo,
    Gibbs,
    GateSweep,
}

#[derive(Args)]
struct BenchOpts {
    /// Matrix sizes (gibbs uses the first)
    #[arg(long, value_delimiter = ',', default_values_t = [100])]
    sizes: Vec<usize>,
    /// Output count [default: 200]; for gibbs, the deterministic counts [default: 10,1000]
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Gibbs sample counts
    #[arg(long, value_delimiter = ',', default_values_t = [10, 10000])]
    samples: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    gate: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Config::V1, Config::V2, Config::V3, Config::V4])]
    versions: Vec<Config>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Skip the untimed warm-up run
    #[arg(long)]
    no_warmup: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Io(String),
}

impl From<AssocError> for Failure {
    fn from(e: AssocError) -> Self {
        match e {
            AssocError::Io(m) => Failure::Io(m),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn read_matrix(path: &PathBuf) -> Result<SparseCostMatrix, Failure> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?
    };
    Ok(SparseCostMatrix::parse_text(&text)?)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_outputs(out: &OutputSet, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "# rank\ttotal\tassignment (row -> column, - for missing)")?;
    for (rank, e) in out.iter().enumerate() {
        let cols: Vec<String> =
            e.association.row_to.iter().map(|&c| if c == MISS { "-".into() } else { c.to_string() }).collect();
        writeln!(w, "{}\t{}\t{}", rank + 1, e.total, cols.join(" "))?;
    }
    w.flush()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { input, k, config, gate, out } => {
            let mut m = read_matrix(&input)?;
            let version = config.version();
            if let Some(s) = gate.or(version.gated().then_some(30)) {
                if s == 0 {
                    return Err(Failure::Input("gate must be at least 1".into()));
                }
                m = gate_matrix(&m, s);
            }
            let res = kbest_single(&m, k, version.config())?;
            print_outputs(&res, &mut *output(&out)?)?;
        }
        Command::Oracle { input, k, out } => {
            let m = read_matrix(&input)?;
            if k == 0 {
                return Err(Failure::Input("K must be at least 1".into()));
            }
            let res = kbest_bruteforce(&m, k)?;
            print_outputs(&res, &mut *output(&out)?)?;
        }
        Command::Bench { kind, opts } => {
            let mut w = output(&opts.out)?;
            let cfg = BenchConfig {
                sizes: opts.sizes.clone(),
                k: opts.k.as_ref().map_or(200, |k| k.first().copied().unwrap_or(0)),
                trials: opts.trials,
                seed: opts.seed,
                gate: opts.gate,
                versions: opts.versions.iter().map(|c| c.version()).collect(),
                threads: opts.threads,
                warmup: !opts.no_warmup,
            };
            match kind {
                BenchKind::Dense => write_csv(&run_dense_bench(&cfg)?, &mut w)?,
                BenchKind::Mimo => write_csv(&run_mimo_bench(&cfg)?, &mut w)?,
                BenchKind::GateSweep => write_csv(&run_gate_sweep(&cfg)?, &mut w)?,
                BenchKind::Gibbs => {
                    let k_list = opts.k.clone().unwrap_or_else(|| vec![10, 1000]);
                    let g = GibbsConfig {
                        size: opts.sizes.first().copied().unwrap_or(0),
                        trials: opts.trials,
                        seed: opts.seed,
                        k_list,
                        samples: opts.samples.clone(),
                        threads: opts.threads,
                    };
                    write_csv(&run_gibbs_bench(&g)?, &mut w)?
                }
            }
        }
        Command::FusionSim { k_list, trials, seed, threads, out } => {
            let (rows, _) = run_fusion_sweep(&SimParams::default(), &k_list, trials, seed, threads)?;
            write_csv(&rows, output(&out)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

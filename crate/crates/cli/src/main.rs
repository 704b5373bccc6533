use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use gce_core::evaluate::{benchmark, f1_scores, Algorithm, BenchmarkConfig, ScoringMode};
use gce_core::orient_fci::fcigce;
use gce_core::simulate::{generate, StructureId};
use gce_core::{pcgce, EstimatorConfig, ExtendedSummaryGraph, SkeletonOptions, TimeSeriesDataset};

/// Minimum rows beyond `gamma` that `discover` accepts.
const MIN_EXTRA_ROWS: usize = 50;

#[derive(Parser, Debug)]
#[command(name = "gce", version, about = "Causal discovery on extended summary graphs of time series")]
struct Cli {
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a graph from a CSV file (header row, one column per series).
    Discover {
        input: PathBuf,
        /// Graph file to write.
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the independence-test log as CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Score the result against this truth graph (JSON).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Generate a benchmark dataset with its ground truth.
    Simulate {
        structure: String,
        #[arg(default_value_t = 1000)]
        length: usize,
        /// Defaults to `--seed`.
        #[arg(id = "dataset_seed", value_name = "SEED")]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Average scores over simulated datasets.
    Bench {
        /// Comma-separated structure ids, or "all".
        #[arg(long, default_value = "all")]
        structures: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long = "length", visible_alias = "T", default_value_t = 1000)]
        length: usize,
        /// Writes `<out>.md` and `<out>.csv`; prints Markdown otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug)]
enum Format {
    Json,
    Dot,
}

/// Settings shared by all commands. Each may come from a flag, a `GCE_`
/// environment variable, or the `--config` file, in that order.
#[derive(Args, Debug)]
struct Settings {
    #[arg(long, global = true, env = "GCE_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "GCE_ALGORITHM")]
    algorithm: Option<String>,
    #[arg(long, global = true, env = "GCE_GAMMA")]
    gamma: Option<usize>,
    #[arg(long, global = true, env = "GCE_K")]
    k: Option<usize>,
    #[arg(long, global = true, env = "GCE_K_PERM")]
    k_perm: Option<usize>,
    #[arg(long, global = true, env = "GCE_N_PERM")]
    n_perm: Option<usize>,
    #[arg(long, global = true, env = "GCE_ALPHA")]
    alpha: Option<f64>,
    #[arg(long, global = true, env = "GCE_MAX_LEVEL")]
    max_level: Option<usize>,
    #[arg(long, global = true, env = "GCE_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "GCE_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, env = "GCE_FORMAT")]
    format: Option<String>,
    #[arg(long, global = true, env = "GCE_SCORING")]
    scoring: Option<String>,
}

/// Fully resolved settings.
#[derive(Debug)]
struct RunConfig {
    algorithm: Algorithm,
    estimator: EstimatorConfig,
    alpha_given: bool,
    options: SkeletonOptions,
    threads: Option<usize>,
    format: Format,
    scoring: ScoringMode,
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Internal(_) => 4,
        }
    }
}

impl From<gce_core::Error> for Failure {
    fn from(e: gce_core::Error) -> Self {
        use gce_core::Error as E;
        match e {
            E::InsufficientData { .. } | E::InsufficientSamples { .. } => Failure::Data(e.into()),
            E::InvariantViolation(_) | E::MissingEdge(..) => Failure::Internal(e.into()),
            _ => Failure::Usage(e.into()),
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| usage(anyhow!("{}:{}: expected key=value", path.display(), i + 1)))?;
        let key = key.trim().replace('-', "_");
        const KEYS: [&str; 11] = [
            "algorithm",
            "gamma",
            "k",
            "k_perm",
            "n_perm",
            "alpha",
            "max_level",
            "seed",
            "threads",
            "format",
            "scoring",
        ];
        if !KEYS.contains(&key.as_str()) {
            return Err(usage(anyhow!("{}:{}: unknown key {key:?}", path.display(), i + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

/// The flag (or environment) value if set, else the config file's.
fn pick<T: FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, Failure>
where
    T::Err: std::fmt::Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    file.get(key).map(|v| v.parse::<T>().map_err(|e| usage(anyhow!("config value {key}={v}: {e}")))).transpose()
}

fn resolve(s: Settings) -> Result<RunConfig, Failure> {
    let file = match &s.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    let algorithm: Algorithm =
        pick(s.algorithm, &file, "algorithm")?.map(|a: String| a.parse()).transpose()?.unwrap_or(Algorithm::Pcgce);
    let base = algorithm.default_config();
    let alpha = pick(s.alpha, &file, "alpha")?;
    let estimator = EstimatorConfig {
        gamma: pick(s.gamma, &file, "gamma")?.unwrap_or(base.gamma),
        k: pick(s.k, &file, "k")?.unwrap_or(base.k),
        k_perm: pick(s.k_perm, &file, "k_perm")?.unwrap_or(base.k_perm),
        n_perm: pick(s.n_perm, &file, "n_perm")?.unwrap_or(base.n_perm),
        alpha: alpha.unwrap_or(base.alpha),
        seed: pick(s.seed, &file, "seed")?.unwrap_or(base.seed),
    };
    estimator.validate()?;
    let format = match pick(s.format, &file, "format")?.as_deref() {
        None | Some("json") => Format::Json,
        Some("dot") => Format::Dot,
        Some(other) => return Err(usage(anyhow!("unknown format {other:?} (json, dot)"))),
    };
    let scoring = pick(s.scoring, &file, "scoring")?.map(|m: String| m.parse()).transpose()?.unwrap_or_default();
    let threads = pick(s.threads, &file, "threads")?;
    if threads == Some(0) {
        return Err(usage(anyhow!("--threads must be at least 1")));
    }
    Ok(RunConfig {
        algorithm,
        estimator,
        alpha_given: alpha.is_some(),
        options: SkeletonOptions { max_level: pick(s.max_level, &file, "max_level")?, ..SkeletonOptions::default() },
        threads,
        format,
        scoring,
    })
}

fn render(graph: &ExtendedSummaryGraph, format: Format) -> String {
    match format {
        Format::Json => graph.to_json(),
        Format::Dot => graph.to_dot(),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display())).map_err(usage)
}

fn discover(
    cfg: &RunConfig,
    input: &Path,
    output: &Path,
    log: Option<&Path>,
    truth: Option<&Path>,
) -> Result<(), Failure> {
    let ds = TimeSeriesDataset::read_csv_path(input).map_err(|e| usage(anyhow!("{}: {e}", input.display())))?;
    if ds.d() < 2 {
        return Err(usage(anyhow!("{}: at least 2 series are needed, found {}", input.display(), ds.d())));
    }
    let needed = cfg.estimator.gamma + MIN_EXTRA_ROWS;
    if ds.len() < needed {
        return Err(gce_core::Error::InsufficientData { needed, available: ds.len() }.into());
    }
    let start = Instant::now();
    let found = match cfg.algorithm {
        Algorithm::Pcgce => pcgce(&ds, &cfg.estimator, &cfg.options)?,
        Algorithm::Fcigce => fcigce(&ds, &cfg.estimator, &cfg.options)?,
    };
    let elapsed = start.elapsed();
    write(output, &render(&found.graph, cfg.format))?;
    if let Some(path) = log {
        write(path, &found.log.to_csv(ds.names()))?;
    }
    print!("{}", found.graph);
    println!("{} edges, {} tests, {:.2}s", found.graph.edge_count(), found.log.total_tests, elapsed.as_secs_f64());
    for c in &found.conflicts {
        println!("conflict: {c}");
    }
    if let Some(path) = truth {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
        let truth = ExtendedSummaryGraph::from_json(&text)?;
        let r = f1_scores(&found.graph, &truth, cfg.scoring)?;
        print!("F1 cross {:.3}", r.f1_cross);
        match r.f1_self {
            Some(f) => println!(", self {f:.3}"),
            None => println!(),
        }
    }
    Ok(())
}

fn parse_structure(s: &str) -> Result<StructureId, Failure> {
    s.parse().map_err(|_| {
        let valid: Vec<&str> = StructureId::ALL.iter().map(|id| id.name()).collect();
        usage(anyhow!("unknown structure {s:?}; valid ids: {}", valid.join(", ")))
    })
}

fn simulate(structure: &str, length: usize, seed: u64, out_dir: &Path) -> Result<(), Failure> {
    let id = parse_structure(structure)?;
    let (ds, truth) = generate(id, length, seed)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display())).map_err(usage)?;
    ds.write_csv_path(out_dir.join("data.csv"))?;
    write(&out_dir.join("truth.json"), &truth.extended_graph.to_json())?;
    let meta = serde_json::to_string_pretty(&truth.metadata()).map_err(|e| Failure::Internal(e.into()))?;
    write(&out_dir.join("meta.json"), &meta)?;
    println!("wrote {} series x {} rows to {}", ds.d(), ds.len(), out_dir.display());
    Ok(())
}

fn bench(cfg: &RunConfig, structures: &str, n: usize, length: usize, out: Option<&Path>) -> Result<(), Failure> {
    if n == 0 {
        return Err(usage(anyhow!("--n must be at least 1")));
    }
    let ids: Vec<StructureId> = if structures == "all" {
        StructureId::ALL.to_vec()
    } else {
        structures.split(',').map(|s| parse_structure(s.trim())).collect::<Result<_, _>>()?
    };
    let bc = BenchmarkConfig {
        n_datasets: n,
        length,
        seed: cfg.estimator.seed,
        estimator: cfg.estimator.clone(),
        alpha: cfg.alpha_given.then_some(cfg.estimator.alpha),
        options: cfg.options.clone(),
        scoring: cfg.scoring,
    };
    let report = benchmark(&ids, &bc)?;
    match out {
        Some(prefix) => {
            write(&prefix.with_extension("md"), &report.to_markdown())?;
            write(&prefix.with_extension("csv"), &report.to_csv())?;
            print!("{}", report.to_markdown());
        }
        None => print!("{}", report.to_markdown()),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve(cli.settings)?;
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| Failure::Internal(e.into()))?;
    }
    match cli.command {
        Command::Discover { input, output, log, truth } => {
            discover(&cfg, &input, &output, log.as_deref(), truth.as_deref())
        }
        Command::Simulate { structure, length, seed, out_dir } => {
            simulate(&structure, length, seed.unwrap_or(cfg.estimator.seed), &out_dir)
        }
        Command::Bench { structures, n, length, out } => bench(&cfg, &structures, n, length, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Data(e) | Failure::Internal(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vsetsearch::bundle::{load_bundle, read_meta, save_bundle, storage_report};
use vsetsearch::centroid_ann::AnnMode;
use vsetsearch::eval::{evaluate, run_bench, BenchConfig, GroundTruth};
use vsetsearch::partition_index::{DispersionBranch, PartitionMode};
use vsetsearch::pipeline::{BuildConfig, Index, SearchParams, DEFAULT_K, DEFAULT_PHI_C, DEFAULT_TAU};
use vsetsearch::pruning::Pruner;
use vsetsearch::repository::{
    export_queries, export_repository, generate_synthetic, ingest_queries, ingest_repository, SyntheticConfig,
};
use vsetsearch::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(
    name = "vsetsearch",
    version,
    about = "Top-k vector-set search over table embeddings"
)]
struct Cli {
    /// Worker threads for parallel stages (all cores when unset).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index bundle from a repository manifest.
    Build(BuildArgs),
    /// Search a bundle with every query in a manifest.
    Search(SearchArgs),
    /// Report recall of the pipeline against exact unionability.
    Eval(EvalArgs),
    /// Run a parameter sweep described by a TOML config.
    Bench(BenchArgs),
    /// Print index statistics of a bundle.
    Inspect(InspectArgs),
    /// Write a synthetic repository and query manifest.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    repo: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Codebook size; ceil(sqrt(total vectors)) when unset.
    #[arg(long = "n-c")]
    n_c: Option<usize>,
    #[arg(long = "rho-l")]
    rho_l: Option<f64>,
    #[arg(long = "rho-h")]
    rho_h: Option<f64>,
    /// Graph degree of the centroid index.
    #[arg(long = "m")]
    graph_m: Option<usize>,
    #[arg(long)]
    ef_construction: Option<usize>,
    #[arg(long)]
    kmeans_iters: Option<usize>,
    #[arg(long, value_enum)]
    graph: Option<Toggle>,
    /// Keep every set as one partition.
    #[arg(long)]
    single_partition: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
    Auto,
}

#[derive(Args, Clone)]
struct QueryParams {
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long = "phi-c", default_value_t = DEFAULT_PHI_C)]
    phi_c: usize,
    /// Defaults to 5k.
    #[arg(long = "phi-ref")]
    phi_ref: Option<usize>,
    /// Defaults to 3k.
    #[arg(long = "phi-r")]
    phi_r: Option<usize>,
    #[arg(long, default_value = "enhanced", value_parser = parse_pruner)]
    pruner: Pruner,
    #[arg(long)]
    ef_search: Option<usize>,
    #[arg(long, value_enum)]
    ann: Option<AnnArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnnArg {
    Exact,
    Graph,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Query manifest; each record is one query table.
    #[arg(long)]
    query: PathBuf,
    #[command(flatten)]
    params: QueryParams,
    /// Append per-query stage diagnostics as JSON.
    #[arg(long)]
    explain: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[command(flatten)]
    params: QueryParams,
    /// Cache directory for ground truth; computed by the exact oracle when absent.
    #[arg(long)]
    truth_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML config; built-in defaults when unset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    print_config: bool,
    /// Overrides the build and workload seeds.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    bundle: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    sets: usize,
    #[arg(long, default_value_t = 5)]
    cols_min: usize,
    #[arg(long, default_value_t = 15)]
    cols_max: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 64)]
    topics: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 50)]
    queries: usize,
    #[arg(long, default_value_t = 3)]
    query_cols_min: usize,
    #[arg(long, default_value_t = 10)]
    query_cols_max: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn parse_pruner(s: &str) -> std::result::Result<Pruner, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl QueryParams {
    fn resolve(&self, index: &Index) -> SearchParams {
        let mut p = SearchParams {
            tau: self.tau,
            phi_c: self.phi_c,
            pruner: self.pruner,
            ef_search: self.ef_search,
            ann_mode: self.ann.map(|a| match a {
                AnnArg::Exact => AnnMode::Exact,
                AnnArg::Graph => AnnMode::Graph,
            }),
            ..SearchParams::with_k(self.k)
        };
        let n = index.repo.len();
        if self.k >= n {
            if self.k > n {
                eprintln!(
                    "warning: k={} exceeds the repository size {n}; returning all sets",
                    self.k
                );
            }
            p.k = n;
            p.phi_c = p.phi_c.max(index.n_centroids());
            p.phi_ref = n;
            p.phi_r = n;
        }
        if let Some(v) = self.phi_ref {
            p.phi_ref = v;
        }
        if let Some(v) = self.phi_r {
            p.phi_r = v;
        }
        p
    }
}

fn build_cmd(a: &BuildArgs) -> Result<()> {
    let repo = ingest_repository(&a.repo)?;
    let d = BuildConfig::default();
    let cfg = BuildConfig {
        n_centroids: a.n_c,
        rho_low: a.rho_l.unwrap_or(d.rho_low),
        rho_high: a.rho_h.unwrap_or(d.rho_high),
        graph_m: a.graph_m.unwrap_or(d.graph_m),
        ef_construction: a.ef_construction.unwrap_or(d.ef_construction),
        kmeans_iters: a.kmeans_iters.unwrap_or(d.kmeans_iters),
        centroid_graph: match a.graph {
            Some(Toggle::On) => Some(true),
            Some(Toggle::Off) => Some(false),
            Some(Toggle::Auto) | None => None,
        },
        partition_mode: if a.single_partition {
            PartitionMode::Single
        } else {
            PartitionMode::Adaptive
        },
        seed: a.seed,
        ..d
    };
    cfg.validate()?;
    let t = Instant::now();
    let index = Index::build(repo, &cfg)?;
    let build_ms = t.elapsed().as_secs_f64() * 1e3;
    let meta = save_bundle(&index, &a.out)?;
    let s = storage_report(&index);
    println!("sets\t{}", meta.n_sets);
    println!("total_vectors\t{}", meta.total_vectors);
    println!("n_centroids\t{}", meta.n_centroids);
    for (name, c) in &meta.components {
        println!("component\t{name}\t{}\t{}", c.file, c.bytes);
    }
    println!("raw_vector_bytes\t{}", s.raw_vector_bytes);
    println!("quantized_bytes\t{}", s.quantized_bytes());
    println!("quantized_ratio\t{:.4}", s.ratio());
    println!("build_ms\t{build_ms:.1}");
    Ok(())
}

fn search_cmd(a: &SearchArgs) -> Result<()> {
    let index = load_bundle(&a.bundle)?;
    let queries = ingest_queries(&a.query)?;
    let params = a.params.resolve(&index);
    let results = index.search_batch(&queries, &params)?;
    println!("query\trank\tset_id\tscore\tcardinality");
    for (qi, r) in results.iter().enumerate() {
        for (rank, h) in r.hits.iter().enumerate() {
            println!("{qi}\t{}\t{}\t{:.6}\t{}", rank + 1, h.set_id, h.score, h.cardinality);
        }
    }
    if a.explain {
        for (qi, r) in results.iter().enumerate() {
            let line = serde_json::json!({
                "query": qi,
                "params": params,
                "diagnostics": r.diagnostics,
                "refined_ids": r.refined_ids,
                "filtered_ids": r.filtered_ids,
            });
            println!("{line}");
        }
    }
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let index = load_bundle(&a.bundle)?;
    let queries = ingest_queries(&a.queries)?;
    let params = a.params.resolve(&index);
    params.validate()?;
    let truth = match &a.truth_dir {
        Some(dir) => GroundTruth::load_or_compute(dir, &index.repo, &queries, params.tau)?,
        None => GroundTruth::compute(&index.repo, &queries, params.tau)?,
    };
    let report = evaluate(&index, &queries, &truth, &params)?;
    println!("query\trecall\tscore_calls\tlatency_ms");
    for q in &report.per_query {
        println!("{}\t{:.4}\t{}\t{:.3}", q.query, q.recall, q.score_calls, q.latency_ms);
    }
    println!("mean_recall\t{:.4}", report.mean_recall);
    println!("mean_score_calls\t{:.2}", report.mean_score_calls);
    Ok(())
}

fn bench_cmd(a: &BenchArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => BenchConfig::from_toml(&fs::read_to_string(p).map_err(|e| io_error(p, e))?)?,
        None => BenchConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.build.seed = seed;
        config.workload.synthetic.seed = seed;
        config.workload.query_seed = seed.wrapping_add(1);
    }
    if a.print_config {
        print!("{}", config.to_toml()?);
        return Ok(());
    }
    let report = run_bench(&config)?;
    eprintln!(
        "build_ms={:.1} quantized_ratio={:.4}",
        report.build_ms,
        report.storage.ratio()
    );
    match a.format {
        Format::Tsv => print!("{}", report.to_tsv()),
        Format::Json => print!("{}", report.to_json_lines()),
    }
    Ok(())
}

fn histogram_line(name: &str, h: &BTreeMap<String, usize>) {
    for (bucket, count) in h {
        println!("{name}\t{bucket}\t{count}");
    }
}

fn inspect_cmd(a: &InspectArgs) -> Result<()> {
    let meta = read_meta(&a.bundle)?;
    let index = load_bundle(&a.bundle)?;
    let n_c = index.n_centroids();
    let n_sets = index.repo.len();
    println!("format_version\t{}", meta.format_version);
    println!("dim\t{}", index.repo.dim());
    println!("sets\t{n_sets}");
    println!("total_vectors\t{}", index.repo.total_vectors());
    println!("n_centroids\t{n_c}");
    println!("seed\t{}", index.config.seed);
    println!("graph\t{}", if index.graph.is_some() { "yes" } else { "no" });

    let mut dispersion = BTreeMap::new();
    let mut groups = BTreeMap::new();
    let mut branches = BTreeMap::new();
    let mut cap_sum = 0;
    for set in index.repo.sets() {
        let distinct = index.weights.weights(set.set_id).count();
        let rho = distinct as f64 / set.len() as f64;
        let lo = ((rho * 10.0).ceil() as usize).clamp(1, 10) - 1;
        let bucket = format!("{:.1}-{:.1}", lo as f64 / 10.0, (lo + 1) as f64 / 10.0);
        *dispersion.entry(bucket).or_insert(0) += 1;
        let p = index.partitions.get(set.set_id)?;
        *groups.entry(format!("{:>3}", p.groups.len())).or_insert(0) += 1;
        let branch = match p.branch {
            DispersionBranch::Low => "low",
            DispersionBranch::Middle => "middle",
            DispersionBranch::High => "high",
            DispersionBranch::Single => "single",
        };
        *branches.entry(branch.to_string()).or_insert(0) += 1;
        cap_sum += p.capacities().iter().sum::<usize>();
    }
    histogram_line("dispersion", &dispersion);
    histogram_line("partitions", &groups);
    histogram_line("branch", &branches);
    println!("cascade_centroids\t{}", index.partitions.total_cascade_centroids());
    println!("capacity_sum\t{cap_sum}");
    println!("capacity_matches_total\t{}", cap_sum == index.repo.total_vectors());
    let nnz = index.weights.nnz();
    println!("iw_nonzeros\t{nnz}");
    println!("iw_density\t{:.6}", nnz as f64 / (n_sets * n_c) as f64);
    println!("iw_mean_centroids_per_set\t{:.3}", nnz as f64 / n_sets as f64);
    let s = storage_report(&index);
    println!("raw_vector_bytes\t{}", s.raw_vector_bytes);
    println!("quantized_bytes\t{}", s.quantized_bytes());
    println!("quantized_ratio\t{:.4}", s.ratio());
    Ok(())
}

fn generate_cmd(a: &GenerateArgs) -> Result<()> {
    let syn = generate_synthetic(&SyntheticConfig {
        n_sets: a.sets,
        cols_min: a.cols_min,
        cols_max: a.cols_max,
        dim: a.dim,
        n_topics: a.topics,
        noise: a.noise,
        seed: a.seed,
    })?;
    let repo = export_repository(&syn.repo, &a.out, "repository")?;
    println!("repository\t{}", repo.display());
    if a.queries > 0 {
        let qs = syn.sample_queries(a.queries, a.query_cols_min, a.query_cols_max, a.seed.wrapping_add(1))?;
        let path = export_queries(&qs, &a.out, "queries")?;
        println!("queries\t{}", path.display());
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::MissingFile(path.to_path_buf())
    } else {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Build(a) => build_cmd(a),
        Command::Search(a) => search_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Inspect(a) => inspect_cmd(a),
        Command::Generate(a) => generate_cmd(a),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!(
                "error: kind=usage tag=arguments msg={}",
                one_line(first.trim_start_matches("error: "))
            );
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match e.kind() {
                ErrorKind::Usage => ("usage", 2),
                ErrorKind::Data => ("data", 3),
                ErrorKind::Internal => ("internal", 4),
            };
            eprintln!("error: kind={kind} tag={} msg={}", e.tag(), one_line(&e.to_string()));
            ExitCode::from(code)
        }
    }
}

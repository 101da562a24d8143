use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kstc::engine::{Indexes, QueryEngine, SortedList, Variant, VariantConfig};
use kstc::harness::{
    emit_clusters, generate_corpus, generate_queries, ingest, run_benchmark, scale_dataset,
    write_csv, BenchmarkPlan, CorpusConfig, Dataset, OutputFormat, SweepParam, TextFormat,
};
use kstc::irtree::DEFAULT_FANOUT;
use kstc::model::{Rect, ScoringConfig, StcQuery};
use kstc::sgpl::DEFAULT_ORDER;
use kstc::textindex::Vocabulary;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "kstc",
    version,
    about = "Top-k spatial textual cluster queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus as TSV, optionally with a query workload.
    Generate(GenerateArgs),
    /// Build indexes over a TSV dataset and serialize them.
    Build(BuildArgs),
    /// Run one k-STC query.
    Query(QueryArgs),
    /// Sweep one parameter and report per-variant means as CSV.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Auto,
    Weighted,
    Raw,
}

impl From<InputFormat> for TextFormat {
    fn from(f: InputFormat) -> Self {
        match f {
            InputFormat::Auto => TextFormat::Auto,
            InputFormat::Weighted => TextFormat::Weighted,
            InputFormat::Raw => TextFormat::Raw,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Basic,
    Adv1,
    Adv2,
    Adv3,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Basic => Variant::Basic,
            VariantArg::Adv1 => Variant::Adv1,
            VariantArg::Adv2 => Variant::Adv2,
            VariantArg::Adv3 => Variant::Adv3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Geojson,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoringArg {
    MinMax,
    MeanMean,
}

impl From<ScoringArg> for ScoringConfig {
    fn from(s: ScoringArg) -> Self {
        match s {
            ScoringArg::MinMax => ScoringConfig::MIN_MAX,
            ScoringArg::MeanMean => ScoringConfig::MEAN_MEAN,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FirstList {
    Spatial,
    Textual,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    K,
    Keywords,
    Epsilon,
    Minpts,
    H,
    Alpha,
    Size,
}

impl From<SweepArg> for SweepParam {
    fn from(s: SweepArg) -> Self {
        match s {
            SweepArg::K => SweepParam::K,
            SweepArg::Keywords => SweepParam::Keywords,
            SweepArg::Epsilon => SweepParam::Epsilon,
            SweepArg::Minpts => SweepParam::Minpts,
            SweepArg::H => SweepParam::H,
            SweepArg::Alpha => SweepParam::Alpha,
            SweepArg::Size => SweepParam::Size,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 100_000)]
    objects: usize,
    #[arg(long, default_value_t = 202)]
    vocabulary: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write this many queries as JSON to --queries-out.
    #[arg(long, requires = "queries_out")]
    queries: Option<usize>,
    #[arg(long, default_value_t = 2)]
    keywords: usize,
    #[arg(long)]
    queries_out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    input_format: InputFormat,
    /// SGPL orders to build, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "6")]
    grid_orders: Vec<u8>,
    #[arg(long, default_value_t = DEFAULT_FANOUT)]
    fanout: usize,
}

#[derive(Args)]
struct QueryArgs {
    /// Serialized indexes from `build`.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    index: Option<PathBuf>,
    /// TSV dataset, indexed on the fly.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    input_format: InputFormat,
    /// Query y coordinate, in the dataset's original units.
    #[arg(long, allow_negative_numbers = true)]
    lat: f64,
    /// Query x coordinate, in the dataset's original units.
    #[arg(long, allow_negative_numbers = true)]
    lon: f64,
    /// Comma-separated query keywords.
    #[arg(long, value_delimiter = ',', required = true)]
    keywords: Vec<String>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Neighborhood radius in normalized distance units.
    #[arg(long, default_value_t = 0.001)]
    epsilon: f64,
    #[arg(long, default_value_t = 50)]
    minpts: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "adv3")]
    variant: VariantArg,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    grid_order: u8,
    #[arg(long, value_enum, default_value = "geojson")]
    format: FormatArg,
    #[arg(long, value_enum, default_value = "min-max")]
    scoring: ScoringArg,
    /// Sorted list read first during seed selection.
    #[arg(long, value_enum, default_value = "spatial")]
    first_list: FirstList,
    /// Print query statistics to stderr.
    #[arg(long)]
    stats: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    sweep: SweepArg,
    /// Override the standard values of the swept parameter.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    values: Option<Vec<f64>>,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "basic,adv1,adv2,adv3"
    )]
    variants: Vec<VariantArg>,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// TSV dataset; a synthetic corpus is generated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    input_format: InputFormat,
    /// Size of the generated corpus.
    #[arg(long, default_value_t = 100_000)]
    objects: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave out the timing column.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    vocabulary: Vocabulary,
    labels: Vec<String>,
    mbr: Rect,
    indexes: Indexes,
}

impl IndexFile {
    fn dataset(&self) -> Dataset {
        Dataset {
            objects: self.indexes.objects.clone(),
            vocabulary: self.vocabulary.clone(),
            labels: self.labels.clone(),
            mbr: self.mbr,
        }
    }
}

fn open_out(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let cfg = CorpusConfig {
        objects: args.objects,
        vocabulary: args.vocabulary,
        ..CorpusConfig::default()
    };
    let data = generate_corpus(&cfg, args.seed)?;
    fs::write(&args.out, data.to_tsv())
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let (Some(n), Some(path)) = (args.queries, args.queries_out) {
        let seeds = generate_queries(&data, n, args.keywords, args.seed)?;
        let entries: Vec<serde_json::Value> = seeds
            .iter()
            .map(|s| {
                let (x, y) = data.denormalize(s.location);
                let words: Vec<&str> = s
                    .terms
                    .iter()
                    .filter_map(|&t| data.vocabulary.term(t))
                    .collect();
                serde_json::json!({ "lon": x, "lat": y, "keywords": words })
            })
            .collect();
        let mut w = open_out(Some(&path))?;
        serde_json::to_writer_pretty(&mut w, &entries)?;
        writeln!(w)?;
    }
    Ok(())
}

fn build(args: BuildArgs) -> anyhow::Result<()> {
    let data = ingest(&args.input, args.input_format.into())?;
    let indexes = Indexes::build(
        data.objects,
        data.vocabulary.len(),
        args.fanout,
        &args.grid_orders,
    )?;
    let file = IndexFile {
        vocabulary: data.vocabulary,
        labels: data.labels,
        mbr: data.mbr,
        indexes,
    };
    let mut w = open_out(Some(&args.out))?;
    serde_json::to_writer(&mut w, &file)?;
    w.flush()?;
    Ok(())
}

fn query(args: QueryArgs) -> anyhow::Result<()> {
    let variant = Variant::from(args.variant);
    let (data, indexes) = match (&args.index, &args.input) {
        (Some(path), _) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file: IndexFile = serde_json::from_str(&text)
                .with_context(|| format!("{} is not a kstc index file", path.display()))?;
            (file.dataset(), file.indexes)
        }
        (None, Some(path)) => {
            let data = ingest(path, args.input_format.into())?;
            let orders: &[u8] = if variant.prunes_sparse() {
                &[args.grid_order]
            } else {
                &[]
            };
            let idx = Indexes::build(
                data.objects.clone(),
                data.vocabulary.len(),
                DEFAULT_FANOUT,
                orders,
            )?;
            (data, idx)
        }
        (None, None) => bail!("one of --index or --input is required"),
    };
    let terms = data
        .vocabulary
        .resolve(args.keywords.iter().map(String::as_str));
    let location = data.normalize(args.lon, args.lat);
    let cfg = VariantConfig::new(variant)
        .with_scoring(args.scoring.into())
        .with_grid_order(args.grid_order)
        .with_first_list(match args.first_list {
            FirstList::Spatial => SortedList::Spatial,
            FirstList::Textual => SortedList::Textual,
        });
    let clusters = if terms.is_empty() {
        // no keyword is in the vocabulary, so nothing is relevant
        Vec::new()
    } else {
        let q = StcQuery::new(
            location,
            terms,
            args.k,
            args.epsilon,
            args.minpts,
            args.alpha,
        )?;
        let (clusters, stats) = QueryEngine::new(&indexes).run_query(&q, cfg)?;
        if args.stats {
            eprintln!(
                "variant={} elapsed_ms={:.3} range_queries={} skipped={} pruned={}",
                variant,
                stats.elapsed.as_secs_f64() * 1e3,
                stats.range_queries,
                stats.skipped,
                stats.pruned
            );
        }
        clusters
    };
    let format = match args.format {
        FormatArg::Geojson => OutputFormat::GeoJson,
        FormatArg::Csv => OutputFormat::Csv,
    };
    let mut out = io::stdout().lock();
    out.write_all(emit_clusters(&clusters, &data, format).as_bytes())?;
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let mut plan = BenchmarkPlan::new(args.sweep.into());
    if let Some(v) = args.values {
        plan.values = v;
    }
    plan.variants = args.variants.into_iter().map(Variant::from).collect();
    plan.queries = args.queries;
    plan.seed = args.seed;
    let data = match &args.input {
        Some(path) => ingest(path, args.input_format.into())?,
        None => {
            let cfg = CorpusConfig {
                objects: args.objects,
                ..CorpusConfig::default()
            };
            generate_corpus(&cfg, args.seed)?
        }
    };
    let data = if plan.sweep == SweepParam::Size {
        // sizes below the base keep the base
        let smallest = plan.values.iter().copied().fold(f64::INFINITY, f64::min) as usize;
        if smallest > data.len() {
            scale_dataset(&data, smallest, plan.jitter, plan.seed)
        } else {
            data
        }
    } else {
        data
    };
    let rows = run_benchmark(&plan, &data)?;
    let mut w = open_out(args.out.as_deref())?;
    write_csv(&rows, &mut w, !args.no_timing)?;
    w.flush()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<kstc::Error>() {
        Some(kstc::Error::InvalidQuery(_) | kstc::Error::InvalidConfig(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

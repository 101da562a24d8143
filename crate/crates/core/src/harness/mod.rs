//! Data plumbing around the engine: TSV ingest, synthetic corpora and
//! workloads, benchmark sweeps and result rendering.

mod bench;
mod dataset;
mod output;
mod synth;

pub use bench::{run_benchmark, write_csv, BenchRow, BenchmarkPlan, Defaults, SweepParam};
pub use dataset::{ingest, parse_tsv, Dataset, TextFormat};
pub use output::{clusters_csv, clusters_geojson, emit_clusters, OutputFormat};
pub use synth::{generate_corpus, generate_queries, scale_dataset, CorpusConfig, QuerySeed};

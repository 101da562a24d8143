//! Parameter sweeps over the four variants.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{Indexes, QueryEngine, Variant, VariantConfig};
use crate::error::{Error, Result};
use crate::irtree::DEFAULT_FANOUT;
use crate::model::ScoringConfig;

use super::synth::{generate_queries, scale_dataset};
use super::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    K,
    Keywords,
    Epsilon,
    Minpts,
    H,
    Alpha,
    Size,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::K,
        SweepParam::Keywords,
        SweepParam::Epsilon,
        SweepParam::Minpts,
        SweepParam::H,
        SweepParam::Alpha,
        SweepParam::Size,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::Keywords => "keywords",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Minpts => "minpts",
            SweepParam::H => "h",
            SweepParam::Alpha => "alpha",
            SweepParam::Size => "size",
        }
    }

    /// The swept values used in the experiments.
    pub fn standard_values(self) -> Vec<f64> {
        match self {
            SweepParam::K => vec![5.0, 10.0, 15.0, 20.0],
            SweepParam::Keywords => vec![1.0, 2.0, 3.0, 4.0],
            SweepParam::Epsilon => vec![0.0001, 0.0005, 0.001, 0.005, 0.01],
            SweepParam::Minpts => vec![10.0, 20.0, 50.0, 100.0, 200.0],
            SweepParam::H => (3..=10).map(f64::from).collect(),
            SweepParam::Alpha => vec![0.1, 0.3, 0.5, 0.7, 0.9],
            SweepParam::Size => vec![
                100_000.0,
                200_000.0,
                400_000.0,
                600_000.0,
                800_000.0,
                1_000_000.0,
            ],
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown sweep parameter `{s}`")))
    }
}

/// Fixed parameter values while another one is swept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub k: usize,
    pub keywords: usize,
    pub epsilon: f64,
    pub minpts: usize,
    pub h: u8,
    pub alpha: f64,
    pub size: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            k: 10,
            keywords: 2,
            epsilon: 0.001,
            minpts: 50,
            h: 6,
            alpha: 0.5,
            size: 100_000,
        }
    }
}

impl Defaults {
    fn with(mut self, param: SweepParam, v: f64) -> Result<Self> {
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidConfig(format!(
                    "{param} needs an integer, got {v}"
                )))
            }
        };
        match param {
            SweepParam::K => self.k = count(v)?,
            SweepParam::Keywords => self.keywords = count(v)?,
            SweepParam::Epsilon => self.epsilon = v,
            SweepParam::Minpts => self.minpts = count(v)?,
            SweepParam::H => {
                self.h = u8::try_from(count(v)?)
                    .map_err(|_| Error::InvalidConfig(format!("grid order {v} too large")))?
            }
            SweepParam::Alpha => self.alpha = v,
            SweepParam::Size => self.size = count(v)?,
        }
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    pub sweep: SweepParam,
    pub values: Vec<f64>,
    pub defaults: Defaults,
    pub variants: Vec<Variant>,
    pub queries: usize,
    pub seed: u64,
    pub scoring: ScoringConfig,
    /// Disc radius used when scaling to a larger `size`.
    pub jitter: f64,
}

impl BenchmarkPlan {
    pub fn new(sweep: SweepParam) -> Self {
        Self {
            sweep,
            values: sweep.standard_values(),
            defaults: Defaults::default(),
            variants: Variant::ALL.to_vec(),
            queries: 100,
            seed: 42,
            scoring: ScoringConfig::default(),
            jitter: 0.001,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub param: SweepParam,
    pub value: f64,
    pub variant: Variant,
    pub queries: usize,
    pub mean_range_queries: f64,
    pub mean_skipped: f64,
    pub mean_pruned: f64,
    pub mean_clusters: f64,
    /// Fraction of queries that returned no cluster.
    pub empty_fraction: f64,
    pub mean_elapsed_ms: f64,
}

/// Run every (value, variant) pair over a freshly generated query set.
///
/// Indexes are built outside the timed section; only query execution is timed.
/// `data` must contain at most the smallest requested size; larger sizes are
/// produced with [`scale_dataset`].
pub fn run_benchmark(plan: &BenchmarkPlan, data: &Dataset) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &value in &plan.values {
        let p = plan.defaults.with(plan.sweep, value)?;
        let scaled;
        let data = if plan.sweep == SweepParam::Size && p.size > data.len() {
            scaled = scale_dataset(data, p.size, plan.jitter, plan.seed ^ p.size as u64);
            &scaled
        } else {
            data
        };
        let needs_grid = plan.variants.iter().any(|v| v.prunes_sparse());
        let orders: &[u8] = if needs_grid { &[p.h] } else { &[] };
        let indexes = Indexes::build(
            data.objects.clone(),
            data.vocabulary.len(),
            DEFAULT_FANOUT,
            orders,
        )?;
        let engine = QueryEngine::new(&indexes);
        let seeds = generate_queries(data, plan.queries, p.keywords, plan.seed)?;
        let queries = seeds
            .iter()
            .map(|s| s.to_query(p.k, p.epsilon, p.minpts, p.alpha))
            .collect::<Result<Vec<_>>>()?;
        for &variant in &plan.variants {
            let mut cfg = VariantConfig::new(variant).with_scoring(plan.scoring);
            if variant.prunes_sparse() {
                cfg = cfg.with_grid_order(p.h);
            }
            let mut sums = [0.0f64; 6];
            for q in &queries {
                let (clusters, stats) = engine.run_query(q, cfg)?;
                sums[0] += stats.range_queries as f64;
                sums[1] += stats.skipped as f64;
                sums[2] += stats.pruned as f64;
                sums[3] += clusters.len() as f64;
                sums[4] += f64::from(u8::from(clusters.is_empty()));
                sums[5] += stats.elapsed.as_secs_f64() * 1e3;
            }
            let n = queries.len().max(1) as f64;
            rows.push(BenchRow {
                param: plan.sweep,
                value,
                variant,
                queries: queries.len(),
                mean_range_queries: sums[0] / n,
                mean_skipped: sums[1] / n,
                mean_pruned: sums[2] / n,
                mean_clusters: sums[3] / n,
                empty_fraction: sums[4] / n,
                mean_elapsed_ms: sums[5] / n,
            });
        }
    }
    Ok(rows)
}

/// CSV with a header row. The timing column comes last and is left out when
/// `with_timing` is false, so runs can be compared byte for byte.
pub fn write_csv(rows: &[BenchRow], mut out: impl Write, with_timing: bool) -> io::Result<()> {
    write!(
        out,
        "param,value,variant,queries,mean_range_queries,mean_skipped,mean_pruned,mean_clusters,empty_fraction"
    )?;
    if with_timing {
        write!(out, ",mean_elapsed_ms")?;
    }
    writeln!(out)?;
    for r in rows {
        write!(
            out,
            "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3}",
            r.param,
            r.value,
            r.variant,
            r.queries,
            r.mean_range_queries,
            r.mean_skipped,
            r.mean_pruned,
            r.mean_clusters,
            r.empty_fraction
        )?;
        if with_timing {
            write!(out, ",{:.4}", r.mean_elapsed_ms)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_bold_values() {
        let d = Defaults::default();
        assert_eq!(
            (d.k, d.keywords, d.minpts, d.h, d.size),
            (10, 2, 50, 6, 100_000)
        );
        assert_eq!((d.epsilon, d.alpha), (0.001, 0.5));
        for p in SweepParam::ALL {
            assert_eq!(p.as_str().parse::<SweepParam>().unwrap(), p);
        }
        let eps = SweepParam::Epsilon.standard_values();
        assert!(eps.contains(&d.epsilon));
    }

    #[test]
    fn fractional_counts_are_rejected() {
        assert!(Defaults::default().with(SweepParam::K, 2.5).is_err());
        assert_eq!(Defaults::default().with(SweepParam::H, 3.0).unwrap().h, 3);
    }
}

//! Rendering query results.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::error::Error;
use crate::model::Cluster;

use super::Dataset;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    GeoJson,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "geojson" | "json" => Ok(OutputFormat::GeoJson),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::InvalidConfig(format!(
                "unknown output format `{other}`"
            ))),
        }
    }
}

/// GeoJSON `FeatureCollection` with one `MultiPoint` per cluster, in original coordinates.
pub fn clusters_geojson(clusters: &[Cluster], data: &Dataset) -> Value {
    let features: Vec<Value> = clusters
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let coords: Vec<[f64; 2]> = c
                .members
                .iter()
                .map(|&m| {
                    let (x, y) = data.denormalize(data.objects[m as usize].location);
                    [x, y]
                })
                .collect();
            let ids: Vec<&str> = c
                .members
                .iter()
                .map(|&m| data.labels[m as usize].as_str())
                .collect();
            json!({
                "type": "Feature",
                "geometry": { "type": "MultiPoint", "coordinates": coords },
                "properties": {
                    "rank": i + 1,
                    "score": c.score,
                    "min_dist": c.min_dist,
                    "max_tr": c.max_tr,
                    "size": c.len(),
                    "ids": ids,
                },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

/// One row per (cluster rank, member object).
pub fn clusters_csv(clusters: &[Cluster], data: &Dataset) -> String {
    let mut out = String::from("rank,score,object_id,x,y\n");
    for (i, c) in clusters.iter().enumerate() {
        for &m in &c.members {
            let (x, y) = data.denormalize(data.objects[m as usize].location);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                c.score,
                data.labels[m as usize],
                x,
                y
            );
        }
    }
    out
}

pub fn emit_clusters(clusters: &[Cluster], data: &Dataset, format: OutputFormat) -> String {
    match format {
        OutputFormat::GeoJson => {
            let mut s = serde_json::to_string_pretty(&clusters_geojson(clusters, data))
                .expect("json values always serialize");
            s.push('\n');
            s
        }
        OutputFormat::Csv => clusters_csv(clusters, data),
    }
}

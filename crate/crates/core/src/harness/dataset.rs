//! Datasets and the TSV ingest format.
//!
//! One object per line:
//!
//! ```text
//! id<TAB>x<TAB>y<TAB>coffee:0.5 tea:0.5
//! id<TAB>x<TAB>y<TAB>raw document text
//! ```
//!
//! Blank lines and lines starting with `#` are ignored, except for an optional
//! `#bounds min_x min_y max_x max_y` directive that fixes the normalization
//! box instead of deriving it from the data.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GeoObject, GeoPoint, ObjectId, Rect, TermId, TermVector};
use crate::textindex::{tokenize, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Locations normalized to the unit square; `objects[i].id == i`.
    pub objects: Vec<GeoObject>,
    pub vocabulary: Vocabulary,
    /// External id of each object.
    pub labels: Vec<String>,
    /// Original coordinate bounds.
    pub mbr: Rect,
}

fn span(lo: f64, hi: f64) -> f64 {
    hi - lo
}

impl Dataset {
    pub fn empty() -> Self {
        Self {
            objects: Vec::new(),
            vocabulary: Vocabulary::new(),
            labels: Vec::new(),
            mbr: Rect::UNIT,
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Map an original coordinate into the unit square. A zero-width axis maps to 0.
    pub fn normalize(&self, x: f64, y: f64) -> GeoPoint {
        let f = |v: f64, lo: f64, hi: f64| {
            let s = span(lo, hi);
            if s > 0.0 {
                (v - lo) / s
            } else {
                0.0
            }
        };
        GeoPoint::new(
            f(x, self.mbr.min_x, self.mbr.max_x),
            f(y, self.mbr.min_y, self.mbr.max_y),
        )
    }

    pub fn denormalize(&self, p: GeoPoint) -> (f64, f64) {
        (
            self.mbr.min_x + p.x * span(self.mbr.min_x, self.mbr.max_x),
            self.mbr.min_y + p.y * span(self.mbr.min_y, self.mbr.max_y),
        )
    }

    /// Write the dataset back out in the weighted TSV form.
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "#bounds {} {} {} {}\n",
            self.mbr.min_x, self.mbr.min_y, self.mbr.max_x, self.mbr.max_y
        );
        for (o, label) in self.objects.iter().zip(&self.labels) {
            let (x, y) = self.denormalize(o.location);
            let terms: Vec<String> = o
                .doc
                .entries()
                .iter()
                .map(|&(t, w)| format!("{}:{}", self.vocabulary.term(t).unwrap_or("?"), w))
                .collect();
            out.push_str(&format!("{label}\t{x}\t{y}\t{}\n", terms.join(" ")));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TextFormat {
    /// Weighted if every token of a line looks like `term:weight`, raw otherwise.
    #[default]
    Auto,
    Weighted,
    Raw,
}

struct Row {
    line: usize,
    label: String,
    x: f64,
    y: f64,
    doc: Vec<(String, f64)>,
}

fn parse_weighted(text: &str) -> Option<Vec<(String, f64)>> {
    text.split_whitespace()
        .map(|tok| {
            let (term, w) = tok.rsplit_once(':')?;
            Some((term.to_owned(), w.parse().ok()?))
        })
        .collect()
}

/// Term frequency over document length.
fn tf_weights(text: &str) -> Vec<(String, f64)> {
    let tokens: Vec<String> = tokenize(text).collect();
    let total = tokens.len() as f64;
    let mut counts: Vec<(String, usize)> = Vec::new();
    for t in tokens {
        match counts.iter_mut().find(|(s, _)| *s == t) {
            Some((_, c)) => *c += 1,
            None => counts.push((t, 1)),
        }
    }
    counts
        .into_iter()
        .map(|(t, c)| (t, c as f64 / total))
        .collect()
}

/// Parse TSV text; `path` is only used in error messages.
pub fn parse_tsv(text: &str, path: &Path, format: TextFormat) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut bounds = None;
    let mut rows = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(b) = rest.strip_prefix("bounds") {
                let v: Vec<f64> = b
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| err(line, format!("bad #bounds value: {e}")))?;
                let [min_x, min_y, max_x, max_y] = v[..] else {
                    return Err(err(line, "#bounds needs four numbers".into()));
                };
                if !(min_x <= max_x && min_y <= max_y) {
                    return Err(err(line, "#bounds min exceeds max".into()));
                }
                bounds = Some(Rect {
                    min_x,
                    min_y,
                    max_x,
                    max_y,
                });
            }
            continue;
        }
        let mut cols = raw.splitn(4, '\t');
        let (Some(label), Some(xs), Some(ys)) = (cols.next(), cols.next(), cols.next()) else {
            return Err(err(line, "expected id, x, y and text columns".into()));
        };
        let label = label.trim().to_owned();
        if label.is_empty() {
            return Err(err(line, "empty id".into()));
        }
        let coord = |s: &str, name: &str| -> Result<f64> {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| err(line, format!("invalid {name} coordinate `{}`", s.trim())))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(line, format!("non-finite {name} coordinate")))
            }
        };
        let x = coord(xs, "x")?;
        let y = coord(ys, "y")?;
        let text = cols.next().unwrap_or("");
        let doc = match format {
            TextFormat::Raw => tf_weights(text),
            TextFormat::Weighted => parse_weighted(text)
                .ok_or_else(|| err(line, "expected term:weight pairs".into()))?,
            TextFormat::Auto => parse_weighted(text).unwrap_or_else(|| tf_weights(text)),
        };
        if let Some(prev) = seen.insert(label.clone(), line) {
            return Err(err(
                line,
                format!("duplicate id `{label}` (first on line {prev})"),
            ));
        }
        rows.push(Row {
            line,
            label,
            x,
            y,
            doc,
        });
    }

    let mbr = bounds.unwrap_or_else(|| {
        let mut it = rows.iter();
        match it.next() {
            None => Rect::UNIT,
            Some(first) => {
                let mut r = Rect::from_point(GeoPoint::new(first.x, first.y));
                for row in it {
                    r.expand_point(GeoPoint::new(row.x, row.y));
                }
                r
            }
        }
    });
    let mut data = Dataset {
        objects: Vec::with_capacity(rows.len()),
        vocabulary: Vocabulary::new(),
        labels: Vec::with_capacity(rows.len()),
        mbr,
    };
    for (i, row) in rows.into_iter().enumerate() {
        let mut entries: Vec<(TermId, f64)> = Vec::with_capacity(row.doc.len());
        for (term, w) in &row.doc {
            let id = data.vocabulary.intern(term);
            if entries.iter().any(|&(t, _)| t == id) {
                return Err(err(row.line, format!("term `{term}` repeated")));
            }
            entries.push((id, *w));
        }
        let doc = TermVector::new(entries).map_err(|e| err(row.line, e.to_string()))?;
        let location = data.normalize(row.x, row.y).clamped();
        data.objects.push(GeoObject {
            id: i as ObjectId,
            location,
            doc,
        });
        data.labels.push(row.label);
    }
    Ok(data)
}

pub fn ingest(path: impl AsRef<Path>, format: TextFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_tsv(&text, path, format)
}

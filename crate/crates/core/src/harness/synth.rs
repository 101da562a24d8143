//! Synthetic corpora, dataset scaling and query workloads.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GeoObject, GeoPoint, ObjectId, Rect, StcQuery, TermId, TermVector};
use crate::textindex::Vocabulary;

use super::Dataset;

/// Shape of the generated corpus.
///
/// Objects are placed in Gaussian "towns" of Zipf-distributed size over a
/// sparse uniform background. Each town favours a few specialty terms, so a
/// term is spatially clustered the way cuisine words are in restaurant data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub objects: usize,
    pub vocabulary: usize,
    pub towns: usize,
    /// Fraction of objects placed uniformly instead of in a town.
    pub background: f64,
    /// Town spread range (standard deviation, coordinate units).
    pub sigma: (f64, f64),
    pub specialties: usize,
    /// Probability that a document term is drawn from the town's specialties.
    pub specialty_bias: f64,
    /// Inclusive range of distinct terms per document.
    pub terms_per_doc: (usize, usize),
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            objects: 100_000,
            vocabulary: 202,
            towns: 1_000,
            background: 0.05,
            sigma: (0.0005, 0.003),
            specialties: 3,
            specialty_bias: 0.7,
            terms_per_doc: (1, 5),
        }
    }
}

struct Town {
    center: GeoPoint,
    sigma: f64,
    specialties: Vec<TermId>,
}

pub fn generate_corpus(cfg: &CorpusConfig, seed: u64) -> Result<Dataset> {
    if cfg.vocabulary == 0 || cfg.terms_per_doc.0 == 0 || cfg.terms_per_doc.1 > cfg.vocabulary {
        return Err(Error::InvalidConfig(
            "terms per document must lie in 1..=vocabulary".into(),
        ));
    }
    if cfg.terms_per_doc.0 > cfg.terms_per_doc.1 || cfg.towns == 0 {
        return Err(Error::InvalidConfig(
            "empty corpus configuration range".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vocabulary = (0..cfg.vocabulary).map(|i| format!("t{i:03}")).collect();
    let popularity = Zipf::new(cfg.vocabulary as f64, 1.0).expect("valid zipf");
    let town_size = Zipf::new(cfg.towns as f64, 1.0).expect("valid zipf");
    let draw_term = |rng: &mut ChaCha8Rng| popularity.sample(rng) as TermId - 1;

    let towns: Vec<Town> = (0..cfg.towns)
        .map(|_| Town {
            center: GeoPoint::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)),
            sigma: rng.random_range(cfg.sigma.0..=cfg.sigma.1),
            specialties: (0..cfg.specialties).map(|_| draw_term(&mut rng)).collect(),
        })
        .collect();
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");

    let mut objects = Vec::with_capacity(cfg.objects);
    for id in 0..cfg.objects {
        let town = if rng.random_bool(cfg.background) {
            None
        } else {
            Some(&towns[town_size.sample(&mut rng) as usize - 1])
        };
        let location = match town {
            None => GeoPoint::new(rng.random(), rng.random()),
            Some(t) => GeoPoint::new(
                t.center.x + t.sigma * std_normal.sample(&mut rng),
                t.center.y + t.sigma * std_normal.sample(&mut rng),
            )
            .clamped(),
        };
        let m = rng.random_range(cfg.terms_per_doc.0..=cfg.terms_per_doc.1);
        let mut terms: Vec<(TermId, u32)> = Vec::with_capacity(m);
        while terms.len() < m {
            let t = match town {
                Some(t) if rng.random_bool(cfg.specialty_bias) => *t
                    .specialties
                    .choose(&mut rng)
                    .expect("at least one specialty"),
                _ => draw_term(&mut rng),
            };
            if terms.iter().all(|&(s, _)| s != t) {
                terms.push((t, rng.random_range(1..=3)));
            }
        }
        let total: u32 = terms.iter().map(|&(_, c)| c).sum();
        let doc = TermVector::new(terms.into_iter().map(|(t, c)| (t, c as f64 / total as f64)))?;
        objects.push(GeoObject {
            id: id as ObjectId,
            location,
            doc,
        });
    }
    Ok(Dataset {
        labels: (0..objects.len()).map(|i| i.to_string()).collect(),
        objects,
        vocabulary: vocab,
        mbr: Rect::UNIT,
    })
}

/// Grow `base` to `target_size` by copying uniformly chosen objects and
/// displacing each copy uniformly within a disc of radius `jitter` (coordinate
/// units), clamped to the unit square. Text is copied unchanged.
pub fn scale_dataset(base: &Dataset, target_size: usize, jitter: f64, seed: u64) -> Dataset {
    assert!(
        target_size >= base.len(),
        "target size {target_size} is below the base size {}",
        base.len()
    );
    let mut out = base.clone();
    if base.is_empty() {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.objects.reserve(target_size - base.len());
    for id in base.len()..target_size {
        let src = &base.objects[rng.random_range(0..base.len())];
        let r = jitter * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        out.objects.push(GeoObject {
            id: id as ObjectId,
            location: GeoPoint::new(src.location.x + r * a.cos(), src.location.y + r * a.sin())
                .clamped(),
            doc: src.doc.clone(),
        });
        out.labels
            .push(format!("{}~{id}", base.labels[src.id as usize]));
    }
    out
}

/// Query location and keywords; the density parameters come from the plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerySeed {
    pub location: GeoPoint,
    pub terms: Vec<TermId>,
}

impl QuerySeed {
    pub fn to_query(&self, k: usize, epsilon: f64, minpts: usize, alpha: f64) -> Result<StcQuery> {
        StcQuery::new(
            self.location,
            self.terms.iter().copied(),
            k,
            epsilon,
            minpts,
            alpha,
        )
    }
}

/// `n` queries, each at the location of a random object with `keyword_count`
/// distinct terms drawn from that object's document, so D_ψ is never empty.
pub fn generate_queries(
    data: &Dataset,
    n: usize,
    keyword_count: usize,
    seed: u64,
) -> Result<Vec<QuerySeed>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let eligible: Vec<&GeoObject> = data
        .objects
        .iter()
        .filter(|o| keyword_count > 0 && o.doc.len() >= keyword_count)
        .collect();
    if eligible.is_empty() {
        return Err(Error::KeywordCount(keyword_count));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let o = eligible.choose(&mut rng).expect("non-empty");
            let mut terms: Vec<TermId> = o.doc.terms().collect();
            terms.shuffle(&mut rng);
            terms.truncate(keyword_count);
            terms.sort_unstable();
            QuerySeed {
                location: o.location,
                terms,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        let cfg = CorpusConfig {
            objects: 2_000,
            ..Default::default()
        };
        generate_corpus(&cfg, 7).unwrap()
    }

    #[test]
    fn corpus_matches_requested_shape() {
        let d = small();
        assert_eq!(d.len(), 2_000);
        assert_eq!(d.vocabulary.len(), 202);
        let mean = d.objects.iter().map(|o| o.doc.len()).sum::<usize>() as f64 / 2_000.0;
        assert!((2.5..=3.5).contains(&mean), "mean terms per doc {mean}");
        assert!(d.objects.iter().all(|o| Rect::UNIT.contains(o.location)));
        assert_eq!(
            generate_corpus(
                &CorpusConfig {
                    objects: 2_000,
                    ..Default::default()
                },
                7
            )
            .unwrap(),
            d
        );
    }

    #[test]
    fn scaling_copies_text_and_stays_close() {
        let base = small();
        assert_eq!(scale_dataset(&base, base.len(), 0.001, 1), base);
        let big = scale_dataset(&base, 5_000, 0.001, 1);
        assert_eq!(big.len(), 5_000);
        assert_eq!(big.vocabulary, base.vocabulary);
        for o in &big.objects[2_000..] {
            let near = base.objects.iter().any(|b| {
                b.doc == o.doc
                    && crate::model::coord_radius(crate::model::normalized_distance(
                        b.location, o.location,
                    )) <= 0.001 + 1e-12
            });
            assert!(near, "object {} not within jitter of any source", o.id);
        }
        assert_eq!(scale_dataset(&base, 5_000, 0.001, 1), big);
    }

    #[test]
    fn queries_are_reproducible_and_relevant() {
        let d = small();
        assert!(generate_queries(&d, 0, 2, 3).unwrap().is_empty());
        let qs = generate_queries(&d, 100, 2, 3).unwrap();
        assert_eq!(qs.len(), 100);
        assert_eq!(qs, generate_queries(&d, 100, 2, 3).unwrap());
        for q in &qs {
            assert_eq!(q.terms.len(), 2);
            assert!(d
                .objects
                .iter()
                .any(|o| o.location == q.location && o.doc.matches_any(&q.terms)));
        }
        assert!(matches!(
            generate_queries(&d, 5, 9, 3),
            Err(Error::KeywordCount(9))
        ));
    }
}

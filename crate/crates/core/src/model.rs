//! Domain types shared by every index and by the query engine.
//!
//! Locations live in the normalized unit square. Distances between them are
//! reported in *normalized distance units*: the Euclidean distance divided by
//! the diagonal of the unit square, so every distance falls in `[0, 1]`. The
//! query radius `epsilon` is expressed in the same units; [`coord_radius`]
//! converts it back to coordinate space for geometric tests.

use std::cmp::Ordering;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense object identifier, contiguous from 0 within a dataset.
pub type ObjectId = u32;
/// Index into the vocabulary.
pub type TermId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Clamp both coordinates into `[0, 1]`.
    pub fn clamped(self) -> Self {
        Self::new(self.x.clamp(0.0, 1.0), self.y.clamp(0.0, 1.0))
    }
}

/// Euclidean distance scaled by `1/√2`; `[0, 1]` for points in the unit square.
#[inline]
pub fn normalized_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (dx, dy) = (a.x - b.x, a.y - b.y);
    (dx * dx + dy * dy).sqrt() / SQRT_2
}

/// Coordinate-space radius of a circle whose radius is `epsilon` normalized units.
#[inline]
pub fn coord_radius(epsilon: f64) -> f64 {
    epsilon * SQRT_2
}

/// Axis-aligned rectangle in coordinate space (closed on all sides).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        min_x: 0.0,
        min_y: 0.0,
        max_x: 1.0,
        max_y: 1.0,
    };

    pub fn from_point(p: GeoPoint) -> Self {
        Self {
            min_x: p.x,
            min_y: p.y,
            max_x: p.x,
            max_y: p.y,
        }
    }

    /// Circumscribed square of the circle of `epsilon` normalized units around `center`.
    pub fn circumscribed_square(center: GeoPoint, epsilon: f64) -> Self {
        let r = coord_radius(epsilon);
        Self {
            min_x: center.x - r,
            min_y: center.y - r,
            max_x: center.x + r,
            max_y: center.y + r,
        }
    }

    pub fn expand_point(&mut self, p: GeoPoint) {
        self.min_x = self.min_x.min(p.x);
        self.min_y = self.min_y.min(p.y);
        self.max_x = self.max_x.max(p.x);
        self.max_y = self.max_y.max(p.y);
    }

    pub fn expand_rect(&mut self, r: &Rect) {
        self.min_x = self.min_x.min(r.min_x);
        self.min_y = self.min_y.min(r.min_y);
        self.max_x = self.max_x.max(r.max_x);
        self.max_y = self.max_y.max(r.max_y);
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint::new(
            (self.min_x + self.max_x) * 0.5,
            (self.min_y + self.max_y) * 0.5,
        )
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Intersection with another rectangle, or `None` when disjoint.
    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let r = Rect {
            min_x: self.min_x.max(other.min_x),
            min_y: self.min_y.max(other.min_y),
            max_x: self.max_x.min(other.max_x),
            max_y: self.max_y.min(other.max_y),
        };
        (r.min_x <= r.max_x && r.min_y <= r.max_y).then_some(r)
    }

    /// Minimum normalized distance from `p` to any point of the rectangle.
    ///
    /// Never exceeds `normalized_distance(p, q)` for a point `q` inside the
    /// rectangle, including under floating-point rounding.
    pub fn min_distance(&self, p: GeoPoint) -> f64 {
        let dx = if p.x < self.min_x {
            self.min_x - p.x
        } else if p.x > self.max_x {
            p.x - self.max_x
        } else {
            0.0
        };
        let dy = if p.y < self.min_y {
            self.min_y - p.y
        } else if p.y > self.max_y {
            p.y - self.max_y
        } else {
            0.0
        };
        (dx * dx + dy * dy).sqrt() / SQRT_2
    }

    /// Maximum normalized distance from `p` to any point of the rectangle.
    pub fn max_distance(&self, p: GeoPoint) -> f64 {
        let dx = (p.x - self.min_x).abs().max((self.max_x - p.x).abs());
        let dy = (p.y - self.min_y).abs().max((self.max_y - p.y).abs());
        (dx * dx + dy * dy).sqrt() / SQRT_2
    }
}

/// Sparse term-weight vector, sorted by term id, all weights in `(0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TermVector {
    entries: Vec<(TermId, f64)>,
}

impl TermVector {
    /// Zero weights are dropped. Weights outside `[0, 1]` and repeated terms are rejected.
    pub fn new(entries: impl IntoIterator<Item = (TermId, f64)>) -> Result<Self> {
        let mut entries: Vec<(TermId, f64)> = entries.into_iter().collect();
        for &(term, weight) in &entries {
            if !(0.0..=1.0).contains(&weight) {
                return Err(Error::InvalidWeight { term, weight });
            }
        }
        entries.retain(|&(_, w)| w > 0.0);
        entries.sort_unstable_by_key(|&(t, _)| t);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateTerm(w[0].0));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(TermId, f64)] {
        &self.entries
    }

    pub fn terms(&self) -> impl Iterator<Item = TermId> + '_ {
        self.entries.iter().map(|&(t, _)| t)
    }

    pub fn weight(&self, term: TermId) -> Option<f64> {
        self.entries
            .binary_search_by_key(&term, |&(t, _)| t)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when the document shares at least one term with `terms` (sorted).
    pub fn matches_any(&self, terms: &[TermId]) -> bool {
        terms.iter().any(|&t| self.weight(t).is_some())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoObject {
    pub id: ObjectId,
    pub location: GeoPoint,
    pub doc: TermVector,
}

/// Sum of the document's weights over the query terms, clamped to 1.
///
/// `terms` must be sorted and free of duplicates, as [`StcQuery`] keeps them.
pub fn text_relevance(doc: &TermVector, terms: &[TermId]) -> f64 {
    let sum: f64 = terms.iter().filter_map(|&t| doc.weight(t)).sum();
    sum.min(1.0)
}

/// A k-STC query: location, keywords, k, density parameters and the score weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StcQuery {
    pub location: GeoPoint,
    /// Sorted, deduplicated.
    pub terms: Vec<TermId>,
    pub k: usize,
    /// Neighborhood radius in normalized distance units.
    pub epsilon: f64,
    pub minpts: usize,
    pub alpha: f64,
}

impl StcQuery {
    pub fn new(
        location: GeoPoint,
        terms: impl IntoIterator<Item = TermId>,
        k: usize,
        epsilon: f64,
        minpts: usize,
        alpha: f64,
    ) -> Result<Self> {
        let mut terms: Vec<TermId> = terms.into_iter().collect();
        terms.sort_unstable();
        terms.dedup();
        let q = Self {
            location,
            terms,
            k,
            epsilon,
            minpts,
            alpha,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidQuery(m.to_owned()));
        if self.k == 0 {
            return fail("k must be at least 1");
        }
        if self.minpts == 0 {
            return fail("minpts must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return fail("epsilon must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail("alpha must lie in [0, 1]");
        }
        if self.terms.is_empty() {
            return fail("at least one keyword is required");
        }
        if self.terms.windows(2).any(|w| w[0] >= w[1]) {
            return fail("terms must be sorted and distinct");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistAgg {
    #[default]
    Min,
    Mean,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelAgg {
    #[default]
    Max,
    Mean,
}

/// How member distances and relevances are aggregated into a cluster score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub dist_agg: DistAgg,
    pub tr_agg: RelAgg,
}

impl ScoringConfig {
    pub const MIN_MAX: ScoringConfig = ScoringConfig {
        dist_agg: DistAgg::Min,
        tr_agg: RelAgg::Max,
    };
    pub const MEAN_MEAN: ScoringConfig = ScoringConfig {
        dist_agg: DistAgg::Mean,
        tr_agg: RelAgg::Mean,
    };
}

/// `alpha * D + (1 - alpha) * (1 - T)` where `D` and `T` aggregate the member
/// distances and relevances according to `cfg`.
///
/// Panics when `dists` is empty or the two slices differ in length.
pub fn cluster_score(dists: &[f64], rels: &[f64], alpha: f64, cfg: ScoringConfig) -> f64 {
    assert!(!dists.is_empty(), "cluster_score on an empty cluster");
    assert_eq!(dists.len(), rels.len());
    let n = dists.len() as f64;
    let d = match cfg.dist_agg {
        DistAgg::Min => dists.iter().copied().fold(f64::INFINITY, f64::min),
        DistAgg::Mean => dists.iter().sum::<f64>() / n,
    };
    let t = match cfg.tr_agg {
        RelAgg::Max => rels.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        RelAgg::Mean => rels.iter().sum::<f64>() / n,
    };
    alpha * d + (1.0 - alpha) * (1.0 - t)
}

/// A scored spatial textual cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Sorted ascending.
    pub members: Vec<ObjectId>,
    pub min_dist: f64,
    pub max_tr: f64,
    pub score: f64,
}

impl Cluster {
    /// Score `members` against `query`. `objects` is indexed by object id.
    pub fn new(
        mut members: Vec<ObjectId>,
        objects: &[GeoObject],
        query: &StcQuery,
        cfg: ScoringConfig,
    ) -> Self {
        members.sort_unstable();
        members.dedup();
        let dists: Vec<f64> = members
            .iter()
            .map(|&id| normalized_distance(query.location, objects[id as usize].location))
            .collect();
        let rels: Vec<f64> = members
            .iter()
            .map(|&id| text_relevance(&objects[id as usize].doc, &query.terms))
            .collect();
        let score = cluster_score(&dists, &rels, query.alpha, cfg);
        Self {
            min_dist: dists.iter().copied().fold(f64::INFINITY, f64::min),
            max_tr: rels.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            members,
            score,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Result ordering: ascending score, ties by smallest member id.
    pub fn rank_cmp(&self, other: &Cluster) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| self.members.first().cmp(&other.members.first()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COFFEE: TermId = 0;
    const TEA: TermId = 1;

    fn doc(entries: &[(TermId, f64)]) -> TermVector {
        TermVector::new(entries.iter().copied()).unwrap()
    }

    #[test]
    fn relevance_sums_shared_terms() {
        let p3 = doc(&[(COFFEE, 0.5)]);
        let p7 = doc(&[(COFFEE, 0.5), (TEA, 0.5)]);
        assert_eq!(text_relevance(&p3, &[COFFEE, TEA]), 0.5);
        assert_eq!(text_relevance(&p7, &[COFFEE, TEA]), 1.0);
        assert_eq!(text_relevance(&p7, &[7, 9]), 0.0);
    }

    #[test]
    fn relevance_is_clamped() {
        let d = doc(&[(0, 0.8), (1, 0.7)]);
        assert_eq!(text_relevance(&d, &[0, 1]), 1.0);
    }

    #[test]
    fn distance_examples() {
        let o = GeoPoint::new(0.0, 0.0);
        assert_eq!(normalized_distance(o, o), 0.0);
        assert!((normalized_distance(o, GeoPoint::new(1.0, 1.0)) - 1.0).abs() < 1e-15);
        assert!(
            (normalized_distance(o, GeoPoint::new(1.0, 0.0)) - std::f64::consts::FRAC_1_SQRT_2)
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn score_examples_from_worked_cluster() {
        // {p3, p5}: distances 0.11, 0.15, relevances 0.5, 0.5
        let d = [0.11, 0.15];
        let t = [0.5, 0.5];
        assert!((cluster_score(&d, &t, 0.5, ScoringConfig::MEAN_MEAN) - 0.315).abs() < 1e-12);
        assert!((cluster_score(&d, &t, 0.5, ScoringConfig::MIN_MAX) - 0.305).abs() < 1e-12);
        assert!((cluster_score(&d, &t, 0.0, ScoringConfig::MIN_MAX) - 0.5).abs() < 1e-12);
        assert!((cluster_score(&[0.9], &t[..1], 0.0, ScoringConfig::MIN_MAX) - 0.5).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "empty cluster")]
    fn score_of_empty_cluster_panics() {
        cluster_score(&[], &[], 0.5, ScoringConfig::default());
    }

    #[test]
    fn default_scoring_is_min_max() {
        assert_eq!(ScoringConfig::default(), ScoringConfig::MIN_MAX);
    }

    #[test]
    fn term_vector_rejects_bad_input() {
        assert!(matches!(
            TermVector::new([(0, 1.5)]),
            Err(Error::InvalidWeight { .. })
        ));
        assert!(matches!(
            TermVector::new([(3, 0.2), (3, 0.1)]),
            Err(Error::DuplicateTerm(3))
        ));
        let v = TermVector::new([(2, 0.0), (1, 0.3)]).unwrap();
        assert_eq!(v.entries(), &[(1, 0.3)]);
    }

    #[test]
    fn query_validation() {
        let at = GeoPoint::new(0.5, 0.5);
        assert!(StcQuery::new(at, [1, 0, 1], 1, 0.1, 2, 0.5).is_ok());
        assert_eq!(
            StcQuery::new(at, [1, 0, 1], 1, 0.1, 2, 0.5).unwrap().terms,
            vec![0, 1]
        );
        assert!(StcQuery::new(at, [0], 0, 0.1, 2, 0.5).is_err());
        assert!(StcQuery::new(at, [0], 1, 0.0, 2, 0.5).is_err());
        assert!(StcQuery::new(at, [0], 1, 0.1, 0, 0.5).is_err());
        assert!(StcQuery::new(at, [0], 1, 0.1, 2, 1.5).is_err());
        assert!(StcQuery::new(at, [], 1, 0.1, 2, 0.5).is_err());
    }

    #[test]
    fn rect_distances_bracket_contained_points() {
        let r = Rect {
            min_x: 0.2,
            min_y: 0.2,
            max_x: 0.4,
            max_y: 0.5,
        };
        let p = GeoPoint::new(0.0, 0.9);
        let inside = [GeoPoint::new(0.2, 0.5), GeoPoint::new(0.4, 0.2), r.center()];
        for q in inside {
            let d = normalized_distance(p, q);
            assert!(r.min_distance(p) <= d && d <= r.max_distance(p));
        }
        assert_eq!(r.min_distance(GeoPoint::new(0.3, 0.3)), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn point() -> impl Strategy<Value = GeoPoint> {
            (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(x, y)| GeoPoint::new(x, y))
        }

        proptest! {
            #[test]
            fn distance_is_a_metric(a in point(), b in point(), c in point()) {
                let ab = normalized_distance(a, b);
                prop_assert_eq!(ab, normalized_distance(b, a));
                prop_assert!((0.0..=1.0 + 1e-15).contains(&ab));
                prop_assert!(ab <= normalized_distance(a, c) + normalized_distance(c, b) + 1e-12);
            }

            #[test]
            fn min_max_score_ignores_member_order(
                pairs in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..20),
                alpha in 0.0..=1.0f64,
                seed in any::<u64>(),
            ) {
                let (d, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
                let mut shuffled = pairs.clone();
                // deterministic rotation as a cheap permutation
                let shift = (seed as usize) % shuffled.len();
                shuffled.rotate_left(shift);
                shuffled.reverse();
                let (d2, t2): (Vec<f64>, Vec<f64>) = shuffled.into_iter().unzip();
                prop_assert_eq!(
                    cluster_score(&d, &t, alpha, ScoringConfig::MIN_MAX),
                    cluster_score(&d2, &t2, alpha, ScoringConfig::MIN_MAX)
                );
            }

            #[test]
            fn better_member_never_raises_min_max_score(
                pairs in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..20),
                extra in (0.0..1.0f64, 0.0..1.0f64),
                alpha in 0.0..=1.0f64,
            ) {
                let (mut d, mut t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
                let before = cluster_score(&d, &t, alpha, ScoringConfig::MIN_MAX);
                let min_d = d.iter().copied().fold(f64::INFINITY, f64::min);
                let max_t = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                d.push(extra.0.min(min_d));
                t.push(extra.1.max(max_t));
                prop_assert!(cluster_score(&d, &t, alpha, ScoringConfig::MIN_MAX) <= before);
            }

            #[test]
            fn relevance_of_union_dominates_parts(
                weights in prop::collection::vec(0.0..=1.0f64, 10),
                split in prop::collection::vec(any::<bool>(), 10),
            ) {
                let d = TermVector::new(weights.iter().enumerate().map(|(i, &w)| (i as TermId, w))).unwrap();
                let a: Vec<TermId> = (0..10).filter(|&i| split[i as usize]).collect();
                let b: Vec<TermId> = (0..10).filter(|&i| !split[i as usize]).collect();
                let unclamped = |ts: &[TermId]| ts.iter().filter_map(|&t| d.weight(t)).sum::<f64>();
                let all: Vec<TermId> = (0..10).collect();
                prop_assert!(unclamped(&all) + 1e-12 >= unclamped(&a).max(unclamped(&b)));
                prop_assert!(text_relevance(&d, &all) >= text_relevance(&d, &a).max(text_relevance(&d, &b)));
            }
        }
    }
}

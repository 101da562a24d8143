//! k-STC query execution.
//!
//! All variants share the same driver: relevant objects are sorted by
//! distance (`slist`) and by converted relevance (`tlist`), seeds are drawn by
//! alternating sorted access, and each seed is expanded into a density-based
//! cluster. The run stops once the lower bound on every unfound cluster's
//! score reaches the score of the k-th candidate.
//!
//! * [`Variant::Basic`] probes every neighborhood with an IR-tree range query.
//! * [`Variant::Adv1`] expands neighbors farthest-first and skips objects
//!   whose ε-circle is covered by circles already probed.
//! * [`Variant::Adv2`] additionally rejects sparse neighborhoods when the SGPL
//!   count over the circumscribed square is below `minpts`.
//! * [`Variant::Adv3`] additionally answers exact probes from the merged SGPL
//!   sets instead of the IR-tree.

mod cover;
mod oracle;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use cover::{circle_covered_by_union, Circle, MAX_DEPTH as COVER_MAX_DEPTH};
pub use oracle::{oracle_topk, oracle_topk_with};

use crate::error::{Error, Result};
use crate::irtree::IrTree;
use crate::model::{
    normalized_distance, text_relevance, Cluster, GeoObject, GeoPoint, ObjectId, Rect,
    ScoringConfig, StcQuery,
};
use crate::sgpl::{Sgpl, DEFAULT_ORDER};
use crate::textindex::InvertedFile;
use cover::CoverSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Basic,
    Adv1,
    Adv2,
    Adv3,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Basic, Variant::Adv1, Variant::Adv2, Variant::Adv3];

    pub fn skips_objects(self) -> bool {
        self != Variant::Basic
    }

    pub fn prunes_sparse(self) -> bool {
        matches!(self, Variant::Adv2 | Variant::Adv3)
    }

    pub fn uses_fast_range(self) -> bool {
        self == Variant::Adv3
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::Adv1 => "adv1",
            Variant::Adv2 => "adv2",
            Variant::Adv3 => "adv3",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Ok(Variant::Basic),
            "adv1" => Ok(Variant::Adv1),
            "adv2" => Ok(Variant::Adv2),
            "adv3" => Ok(Variant::Adv3),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

/// Which sorted list the alternating access starts with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SortedList {
    #[default]
    Spatial,
    Textual,
}

impl SortedList {
    fn other(self) -> Self {
        match self {
            SortedList::Spatial => SortedList::Textual,
            SortedList::Textual => SortedList::Spatial,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub variant: Variant,
    pub scoring: ScoringConfig,
    /// SGPL order; required by `Adv2`/`Adv3`, ignored otherwise.
    pub grid_order: Option<u8>,
    pub first_list: SortedList,
}

impl VariantConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            scoring: ScoringConfig::default(),
            grid_order: variant.prunes_sparse().then_some(DEFAULT_ORDER),
            first_list: SortedList::default(),
        }
    }

    pub fn with_scoring(mut self, scoring: ScoringConfig) -> Self {
        self.scoring = scoring;
        self
    }

    pub fn with_grid_order(mut self, order: u8) -> Self {
        self.grid_order = Some(order);
        self
    }

    pub fn with_first_list(mut self, first: SortedList) -> Self {
        self.first_list = first;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant.prunes_sparse() && self.grid_order.is_none() {
            return Err(Error::InvalidConfig(format!(
                "{} requires a grid order",
                self.variant
            )));
        }
        Ok(())
    }
}

/// Everything a query needs, built once per dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Indexes {
    pub objects: Vec<GeoObject>,
    pub inverted: InvertedFile,
    pub irtree: IrTree,
    /// One SGPL per requested grid order, ascending by order.
    pub sgpls: Vec<Sgpl>,
}

impl Indexes {
    pub fn build(
        objects: Vec<GeoObject>,
        vocabulary_len: usize,
        fanout: usize,
        grid_orders: &[u8],
    ) -> Result<Self> {
        let inverted = InvertedFile::build(&objects, vocabulary_len)?;
        if let Some((position, o)) = objects
            .iter()
            .enumerate()
            .find(|(i, o)| o.id as usize != *i)
        {
            return Err(Error::NonContiguousIds { position, id: o.id });
        }
        if fanout < 2 {
            return Err(Error::InvalidConfig("fanout must be at least 2".into()));
        }
        let irtree = IrTree::build(&objects, fanout);
        let mut orders = grid_orders.to_vec();
        orders.sort_unstable();
        orders.dedup();
        let sgpls = orders
            .into_iter()
            .map(|h| Sgpl::build(&objects, vocabulary_len, h))
            .collect::<Result<_>>()?;
        Ok(Self {
            objects,
            inverted,
            irtree,
            sgpls,
        })
    }

    pub fn sgpl(&self, order: u8) -> Option<&Sgpl> {
        self.sgpls.iter().find(|s| s.order() == order)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryStats {
    pub elapsed: Duration,
    /// Exact neighborhood computations (IR-tree range queries or FastRange calls).
    pub range_queries: usize,
    pub skipped: usize,
    pub pruned: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// The bound reached the k-th candidate's score.
    Bound,
    /// Every relevant object was clustered or marked noise.
    Exhausted,
    /// No object is relevant to the query.
    NoRelevantObjects,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceEvent {
    Access {
        list: SortedList,
        object: ObjectId,
    },
    /// Exact neighborhood probe.
    Probe {
        object: ObjectId,
        neighbors: usize,
    },
    Pruned {
        object: ObjectId,
    },
    /// `gathered` holds the cluster members collected when the skip happened.
    Skipped {
        object: ObjectId,
        gathered: Vec<ObjectId>,
    },
    Noise {
        object: ObjectId,
    },
    ClusterFound {
        cluster: Cluster,
        tau: f64,
    },
    Bound {
        sb: f64,
        tb: f64,
        bound: f64,
        tau: f64,
    },
    Stop {
        reason: StopReason,
    },
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub trace: bool,
    /// Keep clustering after the stop condition first holds (for checking the bound).
    pub continue_past_stop: bool,
}

#[derive(Clone, Debug)]
pub struct QueryOutcome {
    pub clusters: Vec<Cluster>,
    pub stats: QueryStats,
    pub trace: Vec<TraceEvent>,
    /// With `continue_past_stop`: τ when the stop condition first held.
    pub stop_tau: Option<f64>,
    /// With `continue_past_stop`: clusters found after that point.
    pub post_stop_clusters: Vec<Cluster>,
}

/// Result of probing one ε-neighborhood.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Probe {
    /// At least `minpts` relevant objects, ascending by id.
    Dense(Vec<ObjectId>),
    /// Fewer than `minpts`; the members when an exact probe was made.
    Sparse(Option<Vec<ObjectId>>),
}

impl Probe {
    pub fn is_dense(&self) -> bool {
        matches!(self, Probe::Dense(_))
    }
}

/// Lower bound on the score of any cluster not found yet.
pub fn compute_bound(sb: f64, tb: f64, alpha: f64) -> f64 {
    alpha * sb + (1.0 - alpha) * tb
}

/// Neighbors ordered farthest-first from `center`, ties by ascending id.
pub fn expansion_order(
    mut neighbors: Vec<ObjectId>,
    center: GeoPoint,
    objects: &[GeoObject],
) -> Vec<ObjectId> {
    neighbors.sort_by(|&a, &b| {
        let da = normalized_distance(center, objects[a as usize].location);
        let db = normalized_distance(center, objects[b as usize].location);
        db.total_cmp(&da).then(a.cmp(&b))
    });
    neighbors
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Pending,
    Noise,
    Clustered,
}

struct NoiseEntry {
    object: ObjectId,
    /// Exact neighborhood, resolved lazily for pruned objects.
    neighbors: Option<Vec<ObjectId>>,
}

#[derive(PartialEq)]
struct Key(f64, u32);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Query-local processing state.
struct State<'a> {
    indexes: &'a Indexes,
    query: &'a StcQuery,
    cfg: VariantConfig,
    sgpl: Option<&'a Sgpl>,
    /// D_ψ, ascending by id; local index = position.
    relevant: Vec<ObjectId>,
    status: Vec<Status>,
    dist: Vec<f64>,
    /// 1 - relevance
    conv: Vec<f64>,
    slist: Vec<u32>,
    tlist: Vec<u32>,
    s_head: usize,
    t_head: usize,
    next_list: SortedList,
    pending: usize,
    noise: Vec<NoiseEntry>,
    /// Candidate noise entries for the bound, keyed by distance / converted relevance.
    noise_by_dist: BinaryHeap<Reverse<Key>>,
    noise_by_conv: BinaryHeap<Reverse<Key>>,
    rlist: Vec<Cluster>,
    tau: f64,
    stats: QueryStats,
    trace: Option<Vec<TraceEvent>>,
}

impl<'a> State<'a> {
    fn new(
        indexes: &'a Indexes,
        query: &'a StcQuery,
        cfg: VariantConfig,
        trace: bool,
    ) -> Result<Self> {
        let sgpl = match (cfg.variant.prunes_sparse(), cfg.grid_order) {
            (true, Some(h)) => Some(indexes.sgpl(h).ok_or(Error::MissingGrid(h))?),
            _ => None,
        };
        let relevant = indexes.inverted.relevant_objects(&query.terms);
        let n = relevant.len();
        let dist: Vec<f64> = relevant
            .iter()
            .map(|&id| normalized_distance(query.location, indexes.objects[id as usize].location))
            .collect();
        let conv: Vec<f64> = relevant
            .iter()
            .map(|&id| 1.0 - text_relevance(&indexes.objects[id as usize].doc, &query.terms))
            .collect();
        let mut slist: Vec<u32> = (0..n as u32).collect();
        slist.sort_by(|&a, &b| {
            dist[a as usize]
                .total_cmp(&dist[b as usize])
                .then(a.cmp(&b))
        });
        let mut tlist: Vec<u32> = (0..n as u32).collect();
        tlist.sort_by(|&a, &b| {
            conv[a as usize]
                .total_cmp(&conv[b as usize])
                .then(a.cmp(&b))
        });
        Ok(Self {
            indexes,
            query,
            cfg,
            sgpl,
            relevant,
            status: vec![Status::Pending; n],
            dist,
            conv,
            slist,
            tlist,
            s_head: 0,
            t_head: 0,
            next_list: cfg.first_list,
            pending: n,
            noise: Vec::new(),
            noise_by_dist: BinaryHeap::new(),
            noise_by_conv: BinaryHeap::new(),
            rlist: Vec::new(),
            tau: f64::INFINITY,
            stats: QueryStats::default(),
            trace: trace.then(Vec::new),
        })
    }

    fn record(&mut self, event: impl FnOnce() -> TraceEvent) {
        if let Some(t) = self.trace.as_mut() {
            t.push(event());
        }
    }

    fn local(&self, id: ObjectId) -> usize {
        self.relevant
            .binary_search(&id)
            .expect("probe returned an irrelevant object")
    }

    fn location(&self, id: ObjectId) -> GeoPoint {
        self.indexes.objects[id as usize].location
    }

    fn advance_heads(&mut self) {
        while self.s_head < self.slist.len()
            && self.status[self.slist[self.s_head] as usize] != Status::Pending
        {
            self.s_head += 1;
        }
        while self.t_head < self.tlist.len()
            && self.status[self.tlist[self.t_head] as usize] != Status::Pending
        {
            self.t_head += 1;
        }
    }

    /// Next seed by alternating sorted access.
    fn next_seed(&mut self) -> Option<ObjectId> {
        if self.pending == 0 {
            return None;
        }
        self.advance_heads();
        let list = self.next_list;
        self.next_list = list.other();
        let local = match list {
            SortedList::Spatial => self.slist[self.s_head],
            SortedList::Textual => self.tlist[self.t_head],
        };
        let object = self.relevant[local as usize];
        self.record(|| TraceEvent::Access { list, object });
        Some(object)
    }

    fn exact_neighbors(&self, p: GeoPoint) -> Vec<ObjectId> {
        match self.sgpl {
            Some(s) if self.cfg.variant.uses_fast_range() => {
                s.range_query(p, self.query.epsilon, &self.query.terms)
            }
            _ => self
                .indexes
                .irtree
                .range_query(p, self.query.epsilon, &self.query.terms),
        }
    }

    fn probe(&mut self, object: ObjectId) -> Probe {
        let p = self.location(object);
        let q = self.query;
        let neighbors = match self.sgpl {
            Some(sgpl) => {
                let square = Rect::circumscribed_square(p, q.epsilon);
                if self.cfg.variant.uses_fast_range() {
                    match sgpl.probe(&q.terms, p, q.epsilon, q.minpts) {
                        (_, Some(found)) => found,
                        (_, None) => {
                            self.stats.pruned += 1;
                            self.record(|| TraceEvent::Pruned { object });
                            return Probe::Sparse(None);
                        }
                    }
                } else {
                    if sgpl.merge_counts(&q.terms, &square).total() < q.minpts {
                        self.stats.pruned += 1;
                        self.record(|| TraceEvent::Pruned { object });
                        return Probe::Sparse(None);
                    }
                    self.indexes.irtree.range_query(p, q.epsilon, &q.terms)
                }
            }
            None => self.indexes.irtree.range_query(p, q.epsilon, &q.terms),
        };
        self.stats.range_queries += 1;
        let n = neighbors.len();
        self.record(|| TraceEvent::Probe {
            object,
            neighbors: n,
        });
        if n >= q.minpts {
            Probe::Dense(neighbors)
        } else {
            Probe::Sparse(Some(neighbors))
        }
    }

    fn mark_noise(&mut self, object: ObjectId, neighbors: Option<Vec<ObjectId>>) {
        let l = self.local(object);
        self.status[l] = Status::Noise;
        self.pending -= 1;
        let slot = self.noise.len() as u32;
        self.noise.push(NoiseEntry { object, neighbors });
        self.noise_by_dist.push(Reverse(Key(self.dist[l], slot)));
        self.noise_by_conv.push(Reverse(Key(self.conv[l], slot)));
        self.record(|| TraceEvent::Noise { object });
    }

    /// Claim `id` for the cluster being grown. Returns the previous status.
    fn claim(&mut self, id: ObjectId, members: &mut Vec<ObjectId>) -> Status {
        let l = self.local(id);
        let prev = self.status[l];
        match prev {
            Status::Pending => {
                self.pending -= 1;
                self.status[l] = Status::Clustered;
                members.push(id);
            }
            Status::Noise => {
                self.status[l] = Status::Clustered;
                members.push(id);
            }
            Status::Clustered => {}
        }
        prev
    }

    fn order(&self, ids: Vec<ObjectId>, center: GeoPoint) -> Vec<ObjectId> {
        if self.cfg.variant.skips_objects() {
            expansion_order(ids, center, &self.indexes.objects)
        } else {
            ids
        }
    }

    fn get_cluster(&mut self, seed: ObjectId) -> Option<Cluster> {
        let neighbors = match self.probe(seed) {
            Probe::Sparse(members) => {
                self.mark_noise(seed, members);
                return None;
            }
            Probe::Dense(n) => n,
        };
        let seed_at = self.location(seed);
        let mut members = Vec::with_capacity(neighbors.len());
        let mut fresh = Vec::with_capacity(neighbors.len());
        for id in neighbors {
            if self.claim(id, &mut members) == Status::Pending && id != seed {
                fresh.push(id);
            }
        }
        let mut queue: VecDeque<ObjectId> = self.order(fresh, seed_at).into();

        let skipping = self.cfg.variant.skips_objects();
        let mut covers = CoverSet::new(self.query.epsilon);
        if skipping {
            covers.insert(seed_at);
        }
        while let Some(pi) = queue.pop_front() {
            let at = self.location(pi);
            if skipping && covers.covers(at) {
                self.stats.skipped += 1;
                let gathered = self.trace.is_some().then(|| members.clone());
                self.record(|| TraceEvent::Skipped {
                    object: pi,
                    gathered: gathered.unwrap_or_default(),
                });
                continue;
            }
            let Probe::Dense(found) = self.probe(pi) else {
                continue;
            };
            if skipping {
                covers.insert(at);
            }
            let mut fresh = Vec::new();
            for id in found {
                if self.claim(id, &mut members) == Status::Pending {
                    fresh.push(id);
                }
            }
            queue.extend(self.order(fresh, at));
        }
        Some(Cluster::new(
            members,
            &self.indexes.objects,
            self.query,
            self.cfg.scoring,
        ))
    }

    fn noise_is_open(&mut self, slot: usize) -> bool {
        let object = self.noise[slot].object;
        if self.status[self.local(object)] != Status::Noise {
            return false;
        }
        if self.noise[slot].neighbors.is_none() {
            // only pruned objects get here; the SGPL holding them is at hand
            let found = self.exact_neighbors(self.location(object));
            self.noise[slot].neighbors = Some(found);
        }
        let neighbors = self.noise[slot].neighbors.as_ref().unwrap();
        neighbors.iter().any(|&id| {
            self.relevant
                .binary_search(&id)
                .is_ok_and(|l| self.status[l] == Status::Pending)
        })
    }

    /// (sb, tb): the smallest distance / converted relevance an unfound cluster can have.
    ///
    /// Covers pending objects and noise objects that a pending core could still
    /// absorb as border members.
    fn bound_inputs(&mut self) -> (f64, f64) {
        self.advance_heads();
        let mut sb = self.dist[self.slist[self.s_head] as usize];
        let mut tb = self.conv[self.tlist[self.t_head] as usize];
        while let Some(&Reverse(Key(d, slot))) = self.noise_by_dist.peek() {
            if d >= sb {
                break;
            }
            if self.noise_is_open(slot as usize) {
                sb = d;
                break;
            }
            self.noise_by_dist.pop();
        }
        while let Some(&Reverse(Key(t, slot))) = self.noise_by_conv.peek() {
            if t >= tb {
                break;
            }
            if self.noise_is_open(slot as usize) {
                tb = t;
                break;
            }
            self.noise_by_conv.pop();
        }
        (sb, tb)
    }

    fn add_candidate(&mut self, c: Cluster) {
        let pos = self
            .rlist
            .partition_point(|x| x.rank_cmp(&c) != std::cmp::Ordering::Greater);
        self.rlist.insert(pos, c);
        if self.rlist.len() >= self.query.k {
            self.tau = self.rlist[self.query.k - 1].score;
        }
    }

    fn run(mut self, opts: &RunOptions) -> QueryOutcome {
        let start = Instant::now();
        let mut reason = if self.pending == 0 {
            StopReason::NoRelevantObjects
        } else {
            StopReason::Exhausted
        };
        // (rlist, stats, τ) frozen when the stop condition first held
        let mut stopped: Option<(Vec<Cluster>, QueryStats, f64)> = None;
        let mut post_stop_clusters = Vec::new();
        while let Some(seed) = self.next_seed() {
            if let Some(c) = self.get_cluster(seed) {
                if stopped.is_some() {
                    post_stop_clusters.push(c);
                } else {
                    self.add_candidate(c.clone());
                    let tau = self.tau;
                    self.record(|| TraceEvent::ClusterFound { cluster: c, tau });
                }
            }
            if self.pending == 0 {
                break;
            }
            if stopped.is_none() && (self.tau.is_finite() || self.trace.is_some()) {
                let (sb, tb) = self.bound_inputs();
                let bound = compute_bound(sb, tb, self.query.alpha);
                let tau = self.tau;
                self.record(|| TraceEvent::Bound { sb, tb, bound, tau });
                if bound >= tau {
                    reason = StopReason::Bound;
                    if !opts.continue_past_stop {
                        break;
                    }
                    let mut stats = self.stats;
                    stats.elapsed = start.elapsed();
                    stopped = Some((self.rlist.clone(), stats, tau));
                }
            }
        }
        self.stats.elapsed = start.elapsed();
        let (mut clusters, stats, stop_tau) = match stopped {
            Some((rlist, stats, tau)) => (rlist, stats, Some(tau)),
            None => (std::mem::take(&mut self.rlist), self.stats, None),
        };
        self.record(|| TraceEvent::Stop { reason });
        clusters.truncate(self.query.k);
        QueryOutcome {
            clusters,
            stats,
            trace: self.trace.unwrap_or_default(),
            stop_tau,
            post_stop_clusters,
        }
    }
}

/// Read-only query processor over shared indexes.
#[derive(Clone, Copy, Debug)]
pub struct QueryEngine<'a> {
    indexes: &'a Indexes,
}

impl<'a> QueryEngine<'a> {
    pub fn new(indexes: &'a Indexes) -> Self {
        Self { indexes }
    }

    pub fn indexes(&self) -> &'a Indexes {
        self.indexes
    }

    /// Top-k clusters in ascending score order plus run statistics.
    pub fn run_query(
        &self,
        query: &StcQuery,
        cfg: VariantConfig,
    ) -> Result<(Vec<Cluster>, QueryStats)> {
        let out = self.run_with(query, cfg, &RunOptions::default())?;
        Ok((out.clusters, out.stats))
    }

    pub fn run_with(
        &self,
        query: &StcQuery,
        cfg: VariantConfig,
        opts: &RunOptions,
    ) -> Result<QueryOutcome> {
        query.validate()?;
        cfg.validate()?;
        Ok(State::new(self.indexes, query, cfg, opts.trace)?.run(opts))
    }

    /// Probe the ε-neighborhood of object `p` the way `cfg.variant` would.
    pub fn probe_neighborhood(
        &self,
        p: ObjectId,
        query: &StcQuery,
        cfg: VariantConfig,
    ) -> Result<Probe> {
        query.validate()?;
        cfg.validate()?;
        let mut state = State::new(self.indexes, query, cfg, false)?;
        Ok(state.probe(p))
    }
}

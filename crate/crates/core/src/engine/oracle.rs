//! Exhaustive reference answer: every neighborhood by linear scan, every
//! cluster materialized, no early termination.

use crate::model::{
    normalized_distance, text_relevance, Cluster, GeoObject, ObjectId, ScoringConfig, StcQuery,
};

use super::SortedList;

/// Top-k clusters computed without any index, starting sorted access on the spatial list.
pub fn oracle_topk(
    query: &StcQuery,
    objects: &[GeoObject],
    scoring: ScoringConfig,
) -> Vec<Cluster> {
    oracle_topk_with(query, objects, scoring, SortedList::Spatial)
}

/// Seeds are visited in the same alternating distance / relevance order the
/// engine uses, which pins down which cluster a shared border object joins.
pub fn oracle_topk_with(
    query: &StcQuery,
    objects: &[GeoObject],
    scoring: ScoringConfig,
    first: SortedList,
) -> Vec<Cluster> {
    let relevant: Vec<usize> = objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.doc.matches_any(&query.terms))
        .map(|(i, _)| i)
        .collect();
    let n = relevant.len();
    let r = query.epsilon;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let p = objects[relevant[i]].location;
            (0..n)
                .filter(|&j| normalized_distance(p, objects[relevant[j]].location) <= r)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|v| v.len() >= query.minpts).collect();

    let dist: Vec<f64> = relevant
        .iter()
        .map(|&i| normalized_distance(query.location, objects[i].location))
        .collect();
    let conv: Vec<f64> = relevant
        .iter()
        .map(|&i| 1.0 - text_relevance(&objects[i].doc, &query.terms))
        .collect();
    let mut by_dist: Vec<usize> = (0..n).collect();
    by_dist.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let mut by_conv: Vec<usize> = (0..n).collect();
    by_conv.sort_by(|&a, &b| conv[a].total_cmp(&conv[b]).then(a.cmp(&b)));

    // 0 = unvisited, 1 = noise, 2 = in a cluster
    let mut state = vec![0u8; n];
    let (mut hd, mut ht) = (0, 0);
    let mut list = first;
    let mut clusters = Vec::new();
    loop {
        while hd < n && state[by_dist[hd]] != 0 {
            hd += 1;
        }
        while ht < n && state[by_conv[ht]] != 0 {
            ht += 1;
        }
        if hd == n {
            break;
        }
        let seed = match list {
            SortedList::Spatial => by_dist[hd],
            SortedList::Textual => by_conv[ht],
        };
        list = list.other();
        if !core[seed] {
            state[seed] = 1;
            continue;
        }
        let mut members = Vec::new();
        let mut stack = vec![seed];
        state[seed] = 2;
        members.push(seed);
        while let Some(c) = stack.pop() {
            if !core[c] {
                continue;
            }
            for &j in &neighbors[c] {
                if state[j] != 2 {
                    let was_unvisited = state[j] == 0;
                    state[j] = 2;
                    members.push(j);
                    if was_unvisited {
                        stack.push(j);
                    }
                }
            }
        }
        let ids: Vec<ObjectId> = members.iter().map(|&m| objects[relevant[m]].id).collect();
        clusters.push(Cluster::new(ids, objects, query, scoring));
    }
    clusters.sort_by(|a, b| a.rank_cmp(b));
    clusters.truncate(query.k);
    clusters
}

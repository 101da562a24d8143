//! Spatially gridded posting lists over a `2^h x 2^h` Z-order grid.
//!
//! For every term the SGPL keeps, in ascending cell-key order, the set of
//! objects containing that term in each non-empty cell. Merging the lists of
//! the query terms over the cells hit by a query square gives either per-cell
//! distinct counts (an upper bound on a circular range's result size) or the
//! per-cell object sets that [`Sgpl::fast_range`] filters exactly.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalized_distance, GeoObject, GeoPoint, ObjectId, Rect, TermId};

pub const DEFAULT_ORDER: u8 = 6;
pub const MAX_ORDER: u8 = 16;

/// Spread the low 32 bits of `v` so bit `i` lands at bit `2i`.
fn spread(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

fn compact(v: u64) -> u32 {
    let mut x = v & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x >> 4)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x >> 8)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x >> 16)) & 0x0000_0000_FFFF_FFFF;
    x as u32
}

/// Interleave cell coordinates: x bits at even positions, y bits at odd ones.
///
/// Panics if either coordinate is outside `[0, 2^order)`.
pub fn z_encode(cx: u32, cy: u32, order: u8) -> u64 {
    let side = 1u64 << order;
    assert!(
        (cx as u64) < side && (cy as u64) < side,
        "cell ({cx}, {cy}) outside a grid of order {order}"
    );
    spread(cx) | (spread(cy) << 1)
}

/// Inverse of [`z_encode`].
pub fn z_decode(key: u64, order: u8) -> (u32, u32) {
    assert!(
        key < 1u64 << (2 * order as u32),
        "key {key} outside order {order}"
    );
    (compact(key), compact(key >> 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZGrid {
    order: u8,
}

impl ZGrid {
    pub fn new(order: u8) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidConfig(format!(
                "grid order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn cells_per_side(&self) -> u32 {
        1 << self.order
    }

    fn index_of(&self, v: f64) -> u32 {
        let n = self.cells_per_side();
        ((v * n as f64).floor().max(0.0) as u32).min(n - 1)
    }

    /// Cell holding `p`: floor of the scaled coordinates, with 1.0 in the last cell.
    pub fn cell_of(&self, p: GeoPoint) -> (u32, u32) {
        (self.index_of(p.x), self.index_of(p.y))
    }

    pub fn key_of(&self, p: GeoPoint) -> u64 {
        let (cx, cy) = self.cell_of(p);
        z_encode(cx, cy, self.order)
    }

    /// Closed extent of a cell.
    pub fn cell_rect(&self, key: u64) -> Rect {
        let (cx, cy) = z_decode(key, self.order);
        let s = 1.0 / self.cells_per_side() as f64;
        Rect {
            min_x: cx as f64 * s,
            min_y: cy as f64 * s,
            max_x: (cx + 1) as f64 * s,
            max_y: (cy + 1) as f64 * s,
        }
    }

    /// Integer cell bounds (inclusive) hit by `square` after clipping to the unit square.
    fn cell_bounds(&self, square: &Rect) -> Option<([u32; 2], [u32; 2])> {
        let clipped = square.intersection(&Rect::UNIT)?;
        Some((
            [self.index_of(clipped.min_x), self.index_of(clipped.max_x)],
            [self.index_of(clipped.min_y), self.index_of(clipped.max_y)],
        ))
    }

    /// Maximal runs of consecutive keys whose cells intersect `square`, ascending.
    ///
    /// Descends the implicit quadtree of the Z-order curve, emitting whole
    /// aligned blocks as soon as they fall inside the query.
    pub fn cell_ranges(&self, square: &Rect) -> Vec<Range<u64>> {
        let mut out: Vec<Range<u64>> = Vec::new();
        if let Some((xs, ys)) = self.cell_bounds(square) {
            self.descend(0, 0, self.cells_per_side(), xs, ys, &mut out);
        }
        out
    }

    fn descend(
        &self,
        x0: u32,
        y0: u32,
        size: u32,
        xs: [u32; 2],
        ys: [u32; 2],
        out: &mut Vec<Range<u64>>,
    ) {
        let (x1, y1) = (x0 + size - 1, y0 + size - 1);
        if x1 < xs[0] || x0 > xs[1] || y1 < ys[0] || y0 > ys[1] {
            return;
        }
        if x0 >= xs[0] && x1 <= xs[1] && y0 >= ys[0] && y1 <= ys[1] {
            let start = z_encode(x0, y0, self.order);
            let end = start + size as u64 * size as u64;
            match out.last_mut() {
                Some(last) if last.end == start => last.end = end,
                _ => out.push(start..end),
            }
            return;
        }
        let half = size / 2;
        // Z order: (0,0), (1,0), (0,1), (1,1)
        self.descend(x0, y0, half, xs, ys, out);
        self.descend(x0 + half, y0, half, xs, ys, out);
        self.descend(x0, y0 + half, half, xs, ys, out);
        self.descend(x0 + half, y0 + half, half, xs, ys, out);
    }

    /// Keys of all cells intersecting `square`, ascending.
    pub fn cells_intersecting(&self, square: &Rect) -> Vec<u64> {
        self.cell_ranges(square).into_iter().flatten().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub key: u64,
    /// Ascending object ids located in the cell and containing the term.
    pub objects: Vec<ObjectId>,
    /// Locations of `objects`, position for position.
    pub points: Vec<GeoPoint>,
}

/// Distinct-object count per non-empty cell, ascending by key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MergedCounts(pub Vec<(u64, usize)>);

impl MergedCounts {
    pub fn total(&self) -> usize {
        self.0.iter().map(|&(_, c)| c).sum()
    }
}

/// Union of per-term object sets per non-empty cell, ascending by key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MergedSets(pub Vec<(u64, Vec<ObjectId>)>);

impl MergedSets {
    pub fn total(&self) -> usize {
        self.0.iter().map(|(_, s)| s.len()).sum()
    }
}

/// Union of two ascending, duplicate-free id lists.
fn merge_sorted(a: &[ObjectId], b: &[ObjectId]) -> Vec<ObjectId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Size of the union of two ascending, duplicate-free id lists.
fn union_len(a: &[ObjectId], b: &[ObjectId]) -> usize {
    let (mut i, mut j, mut shared) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    a.len() + b.len() - shared
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sgpl {
    grid: ZGrid,
    lists: Vec<Vec<CellEntry>>,
    /// Object locations indexed by id.
    locations: Vec<GeoPoint>,
}

impl Sgpl {
    /// Objects must have contiguous ids starting at 0.
    pub fn build(objects: &[GeoObject], vocabulary_len: usize, order: u8) -> Result<Self> {
        let grid = ZGrid::new(order)?;
        let mut locations = vec![GeoPoint::new(0.0, 0.0); objects.len()];
        let mut flat: Vec<(TermId, u64, ObjectId)> = Vec::new();
        for o in objects {
            let slot = locations
                .get_mut(o.id as usize)
                .ok_or(Error::NonContiguousIds {
                    position: 0,
                    id: o.id,
                })?;
            *slot = o.location;
            let key = grid.key_of(o.location);
            for t in o.doc.terms() {
                if t as usize >= vocabulary_len {
                    return Err(Error::UnknownTerm(t));
                }
                flat.push((t, key, o.id));
            }
        }
        flat.sort_unstable();
        let mut lists: Vec<Vec<CellEntry>> = vec![Vec::new(); vocabulary_len];
        for (t, key, id) in flat {
            let list = &mut lists[t as usize];
            match list.last_mut() {
                Some(e) if e.key == key => {
                    e.objects.push(id);
                    e.points.push(locations[id as usize]);
                }
                _ => list.push(CellEntry {
                    key,
                    objects: vec![id],
                    points: vec![locations[id as usize]],
                }),
            }
        }
        Ok(Self {
            grid,
            lists,
            locations,
        })
    }

    pub fn grid(&self) -> ZGrid {
        self.grid
    }

    pub fn order(&self) -> u8 {
        self.grid.order
    }

    pub fn list(&self, term: TermId) -> &[CellEntry] {
        self.lists
            .get(term as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Per-cell object lists of every query term over the cells hit by `square`,
    /// grouped by key.
    fn gather<'a>(&'a self, terms: &[TermId], square: &Rect) -> Vec<(u64, Vec<&'a [ObjectId]>)> {
        let ranges = self.grid.cell_ranges(square);
        let mut hits: Vec<(u64, &[ObjectId])> = Vec::new();
        for &t in terms {
            let list = self.list(t);
            for r in &ranges {
                let start = list.partition_point(|e| e.key < r.start);
                hits.extend(
                    list[start..]
                        .iter()
                        .take_while(|e| e.key < r.end)
                        .map(|e| (e.key, e.objects.as_slice())),
                );
            }
        }
        hits.sort_by_key(|&(k, _)| k);
        let mut grouped: Vec<(u64, Vec<&[ObjectId]>)> = Vec::new();
        for (k, s) in hits {
            match grouped.last_mut() {
                Some((gk, v)) if *gk == k => v.push(s),
                _ => grouped.push((k, vec![s])),
            }
        }
        grouped
    }

    fn union(parts: &[&[ObjectId]]) -> Vec<ObjectId> {
        let mut acc = parts.first().map(|s| s.to_vec()).unwrap_or_default();
        for p in &parts[1.min(parts.len())..] {
            acc = merge_sorted(&acc, p);
        }
        acc
    }

    /// Distinct-object counts of the query terms' lists, restricted to cells meeting `square`.
    pub fn merge_counts(&self, terms: &[TermId], square: &Rect) -> MergedCounts {
        MergedCounts(
            self.gather(terms, square)
                .into_iter()
                .map(|(k, parts)| {
                    let n = match parts[..] {
                        [a] => a.len(),
                        [a, b] => union_len(a, b),
                        _ => Self::union(&parts).len(),
                    };
                    (k, n)
                })
                .collect(),
        )
    }

    /// Per-cell object-set unions of the query terms' lists over cells meeting `square`.
    pub fn merge_sets(&self, terms: &[TermId], square: &Rect) -> MergedSets {
        MergedSets(
            self.gather(terms, square)
                .into_iter()
                .map(|(k, parts)| (k, Self::union(&parts)))
                .collect(),
        )
    }

    /// Upper bound on the relevant objects within `epsilon` of `p`: the merged
    /// count over the circle's circumscribed square.
    pub fn estimate_selectivity(&self, p: GeoPoint, epsilon: f64, terms: &[TermId]) -> usize {
        self.merge_counts(terms, &Rect::circumscribed_square(p, epsilon))
            .total()
    }

    /// Exact neighborhood from merged sets built over the circumscribed square of
    /// `(center, epsilon)`, sorted ascending.
    pub fn fast_range(&self, sets: &MergedSets, center: GeoPoint, epsilon: f64) -> Vec<ObjectId> {
        // Cells accepted wholesale must clear the radius by a relative margin so
        // that every member's own distance test would also pass.
        let inner = epsilon * (1.0 - 1e-12);
        let mut out = Vec::new();
        for (key, members) in &sets.0 {
            if self.grid.cell_rect(*key).max_distance(center) <= inner {
                out.extend_from_slice(members);
            } else {
                out.extend(members.iter().copied().filter(|&id| {
                    normalized_distance(center, self.locations[id as usize]) <= epsilon
                }));
            }
        }
        out.sort_unstable();
        out
    }

    /// Adv3 probe in one pass: the merged count over the circumscribed square of
    /// `(center, epsilon)` and, when it reaches `minpts`, the exact neighborhood
    /// that `fast_range` would return. Merged sets are never materialized.
    pub fn probe(
        &self,
        terms: &[TermId],
        center: GeoPoint,
        epsilon: f64,
        minpts: usize,
    ) -> (usize, Option<Vec<ObjectId>>) {
        let ranges = self
            .grid
            .cell_ranges(&Rect::circumscribed_square(center, epsilon));
        let mut hits: Vec<&CellEntry> = Vec::new();
        for &t in terms {
            let list = self.list(t);
            for r in &ranges {
                let start = list.partition_point(|e| e.key < r.start);
                hits.extend(list[start..].iter().take_while(|e| e.key < r.end));
            }
        }
        if terms.len() > 1 {
            hits.sort_by_key(|e| e.key);
        }
        let mut total = 0;
        let mut i = 0;
        while i < hits.len() {
            let j = i + hits[i..]
                .iter()
                .take_while(|e| e.key == hits[i].key)
                .count();
            total += match &hits[i..j] {
                [a] => a.objects.len(),
                [a, b] => union_len(&a.objects, &b.objects),
                group => {
                    let parts: Vec<&[ObjectId]> =
                        group.iter().map(|e| e.objects.as_slice()).collect();
                    Self::union(&parts).len()
                }
            };
            i = j;
        }
        if total < minpts {
            return (total, None);
        }
        let inner = epsilon * (1.0 - 1e-12);
        let mut out = Vec::new();
        for e in &hits {
            if self.grid.cell_rect(e.key).max_distance(center) <= inner {
                out.extend_from_slice(&e.objects);
            } else {
                out.extend(
                    e.objects
                        .iter()
                        .zip(&e.points)
                        .filter(|(_, &p)| normalized_distance(center, p) <= epsilon)
                        .map(|(&id, _)| id),
                );
            }
        }
        out.sort_unstable();
        if terms.len() > 1 {
            out.dedup();
        }
        (total, Some(out))
    }

    /// `fast_range` over a freshly merged circumscribed square.
    pub fn range_query(&self, center: GeoPoint, epsilon: f64, terms: &[TermId]) -> Vec<ObjectId> {
        let sets = self.merge_sets(terms, &Rect::circumscribed_square(center, epsilon));
        self.fast_range(&sets, center, epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_encode_examples() {
        assert_eq!(z_encode(0, 0, 4), 0);
        assert_eq!(z_encode(1, 1, 1), 3);
        assert_eq!(z_encode(3, 3, 2), 15);
        assert_eq!(z_encode(1, 0, 2), 1);
        assert_eq!(z_encode(0, 1, 2), 2);
        assert_eq!(z_encode(0, 3, 2), 10);
        assert_eq!(z_encode(1, 3, 2), 11);
    }

    #[test]
    #[should_panic(expected = "outside a grid")]
    fn z_encode_rejects_out_of_range() {
        z_encode(4, 0, 2);
    }

    #[test]
    fn z_roundtrip_all_cells() {
        for order in 1..=5u8 {
            let n = 1u32 << order;
            let mut keys: Vec<u64> = Vec::new();
            for cx in 0..n {
                for cy in 0..n {
                    let k = z_encode(cx, cy, order);
                    assert_eq!(z_decode(k, order), (cx, cy));
                    keys.push(k);
                }
            }
            keys.sort_unstable();
            assert_eq!(keys, (0..(n as u64 * n as u64)).collect::<Vec<_>>());
        }
    }

    #[test]
    fn grid_order_validated() {
        assert!(ZGrid::new(0).is_err());
        assert!(ZGrid::new(MAX_ORDER + 1).is_err());
        assert_eq!(ZGrid::new(3).unwrap().cells_per_side(), 8);
    }

    #[test]
    fn boundary_points_use_floor_and_last_cell() {
        let g = ZGrid::new(2).unwrap();
        assert_eq!(g.cell_of(GeoPoint::new(0.25, 0.5)), (1, 2));
        assert_eq!(g.cell_of(GeoPoint::new(1.0, 1.0)), (3, 3));
        assert_eq!(g.cell_of(GeoPoint::new(0.0, 0.999)), (0, 3));
    }

    #[test]
    fn full_square_covers_every_cell() {
        let g = ZGrid::new(2).unwrap();
        assert_eq!(
            g.cells_intersecting(&Rect::UNIT),
            (0..16).collect::<Vec<_>>()
        );
        assert_eq!(g.cell_ranges(&Rect::UNIT), vec![0..16]);
    }

    #[test]
    fn degenerate_square_hits_containing_cell() {
        let g = ZGrid::new(2).unwrap();
        let p = GeoPoint::new(0.3, 0.8);
        assert_eq!(
            g.cells_intersecting(&Rect::from_point(p)),
            vec![g.key_of(p)]
        );
        // a vertical segment on a cell boundary belongs to the cells right of it
        let seg = Rect {
            min_x: 0.5,
            min_y: 0.1,
            max_x: 0.5,
            max_y: 0.3,
        };
        assert_eq!(
            g.cells_intersecting(&seg),
            vec![z_encode(2, 0, 2), z_encode(2, 1, 2)]
        );
    }

    #[test]
    fn square_outside_space_is_empty() {
        let g = ZGrid::new(3).unwrap();
        let r = Rect {
            min_x: 1.5,
            min_y: 1.5,
            max_x: 2.0,
            max_y: 2.0,
        };
        assert!(g.cells_intersecting(&r).is_empty());
    }

    #[test]
    fn empty_dataset_has_empty_lists() {
        let s = Sgpl::build(&[], 3, 2).unwrap();
        for t in 0..3 {
            assert!(s.list(t).is_empty());
        }
        assert_eq!(
            s.merge_counts(&[0, 1], &Rect::UNIT),
            MergedCounts::default()
        );
        assert_eq!(
            s.estimate_selectivity(GeoPoint::new(0.5, 0.5), 0.1, &[0]),
            0
        );
    }
}

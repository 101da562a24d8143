//! Circle-coverage test behind the object skipping rule.

use std::collections::HashMap;

use crate::model::{coord_radius, normalized_distance, GeoPoint, Rect};

/// Subdivision depth below which an unresolved square counts as uncovered.
pub const MAX_DEPTH: u32 = 6;

/// A disc whose radius is in normalized distance units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub center: GeoPoint,
    pub radius: f64,
    /// Squared coordinate-space radius.
    r2: f64,
}

/// Squared coordinate distance from `p` to the farthest / nearest point of `sq`.
fn far2(sq: &Rect, p: GeoPoint) -> f64 {
    let dx = (p.x - sq.min_x).abs().max((sq.max_x - p.x).abs());
    let dy = (p.y - sq.min_y).abs().max((sq.max_y - p.y).abs());
    dx * dx + dy * dy
}

fn near2(sq: &Rect, p: GeoPoint) -> f64 {
    let dx = (sq.min_x - p.x).max(p.x - sq.max_x).max(0.0);
    let dy = (sq.min_y - p.y).max(p.y - sq.max_y).max(0.0);
    dx * dx + dy * dy
}

impl Circle {
    pub fn new(center: GeoPoint, radius: f64) -> Self {
        let rc = coord_radius(radius);
        Self {
            center,
            radius,
            r2: rc * rc,
        }
    }

    fn contains_point(&self, p: GeoPoint) -> bool {
        normalized_distance(self.center, p) <= self.radius
    }

    /// Square entirely inside, with a relative margin so that rounding in a
    /// later per-object distance test cannot disagree.
    fn contains_square(&self, sq: &Rect) -> bool {
        far2(sq, self.center) <= self.r2 * (1.0 - 1e-9)
    }

    /// Whole of `other` inside this circle.
    fn contains_circle(&self, other: &Circle) -> bool {
        if self.center == other.center {
            return other.radius <= self.radius;
        }
        normalized_distance(self.center, other.center) + other.radius <= self.radius * (1.0 - 1e-12)
    }

    fn meets_square(&self, sq: &Rect) -> bool {
        near2(sq, self.center) <= self.r2
    }

    /// `meets_square` erring towards true, for deciding a piece can be ignored.
    fn may_meet_square(&self, sq: &Rect) -> bool {
        near2(sq, self.center) <= self.r2 * (1.0 + 1e-9)
    }
}

fn probe_points(c: &Circle) -> [GeoPoint; 9] {
    // pulled in slightly so the points are inside the target under rounding
    let r = coord_radius(c.radius) * (1.0 - 1e-9);
    let d = r * std::f64::consts::FRAC_1_SQRT_2;
    let GeoPoint { x, y } = c.center;
    [
        c.center,
        GeoPoint::new(x + r, y),
        GeoPoint::new(x - r, y),
        GeoPoint::new(x, y + r),
        GeoPoint::new(x, y - r),
        GeoPoint::new(x + d, y + d),
        GeoPoint::new(x - d, y + d),
        GeoPoint::new(x + d, y - d),
        GeoPoint::new(x - d, y - d),
    ]
}

/// True only if `target` lies inside the union of `covers`.
///
/// The target's bounding square is split recursively; each piece must either
/// miss the target or fit inside a single cover. Pieces still unresolved at
/// [`MAX_DEPTH`] make the answer `false`, so the test is conservative.
pub fn circle_covered_by_union(target: &Circle, covers: &[Circle]) -> bool {
    if covers.is_empty() {
        return false;
    }
    if covers.iter().any(|c| c.contains_circle(target)) {
        return true;
    }
    // Cheap rejection: a sample point of the target outside every cover.
    for p in probe_points(target) {
        if !covers.iter().any(|c| c.contains_point(p)) {
            return false;
        }
    }
    let square = Rect::circumscribed_square(target.center, target.radius);
    let mut stack: Vec<&Circle> = covers.iter().filter(|c| c.meets_square(&square)).collect();
    let n = stack.len();
    covered(&square, 0, target, &mut stack, 0, n)
}

/// `stack[from..to]` holds the covers meeting `sq`; deeper levels push their
/// own filtered lists above it and truncate on return.
fn covered(
    sq: &Rect,
    depth: u32,
    target: &Circle,
    stack: &mut Vec<&Circle>,
    from: usize,
    to: usize,
) -> bool {
    if !target.may_meet_square(sq) {
        return true;
    }
    if stack[from..to].iter().any(|c| c.contains_square(sq)) {
        return true;
    }
    if depth == MAX_DEPTH {
        return false;
    }
    let mid = sq.center();
    let quads = [
        Rect {
            max_x: mid.x,
            max_y: mid.y,
            ..*sq
        },
        Rect {
            min_x: mid.x,
            max_y: mid.y,
            ..*sq
        },
        Rect {
            max_x: mid.x,
            min_y: mid.y,
            ..*sq
        },
        Rect {
            min_x: mid.x,
            min_y: mid.y,
            ..*sq
        },
    ];
    for q in &quads {
        let start = stack.len();
        for i in from..to {
            let c = stack[i];
            if c.meets_square(q) {
                stack.push(c);
            }
        }
        let end = stack.len();
        let ok = end > start && covered(q, depth + 1, target, stack, start, end)
            || !target.may_meet_square(q);
        stack.truncate(start);
        if !ok {
            return false;
        }
    }
    true
}

/// Equal-radius circles bucketed on a grid so coverage tests only look at
/// circles close enough to matter.
#[derive(Debug)]
pub(crate) struct CoverSet {
    radius: f64,
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<Circle>>,
    scratch: Vec<Circle>,
}

impl CoverSet {
    pub fn new(radius: f64) -> Self {
        Self {
            radius,
            cell: 2.0 * coord_radius(radius),
            buckets: HashMap::new(),
            scratch: Vec::new(),
        }
    }

    fn bucket(&self, p: GeoPoint) -> (i64, i64) {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
        )
    }

    pub fn insert(&mut self, center: GeoPoint) {
        let b = self.bucket(center);
        self.buckets
            .entry(b)
            .or_default()
            .push(Circle::new(center, self.radius));
    }

    pub fn covers(&mut self, center: GeoPoint) -> bool {
        let (bx, by) = self.bucket(center);
        self.scratch.clear();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(v) = self.buckets.get(&(bx + dx, by + dy)) {
                    self.scratch.extend_from_slice(v);
                }
            }
        }
        circle_covered_by_union(&Circle::new(center, self.radius), &self.scratch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_cover_and_empty() {
        let c = Circle::new(GeoPoint::new(0.5, 0.5), 0.05);
        assert!(circle_covered_by_union(&c, &[c]));
        assert!(!circle_covered_by_union(&c, &[]));
    }

    #[test]
    fn larger_circle_covers_smaller() {
        let small = Circle::new(GeoPoint::new(0.5, 0.5), 0.02);
        let big = Circle::new(GeoPoint::new(0.51, 0.5), 0.05);
        assert!(circle_covered_by_union(&small, &[big]));
        assert!(!circle_covered_by_union(&big, &[small]));
    }

    #[test]
    fn ring_of_circles_covers_center_circle() {
        let r = 0.05;
        let rc = coord_radius(r);
        let c0 = GeoPoint::new(0.5, 0.5);
        let target = Circle::new(c0, r);
        let ring: Vec<Circle> = (0..3)
            .map(|i| {
                let a = i as f64 * 2.0 * std::f64::consts::PI / 3.0;
                Circle::new(
                    GeoPoint::new(c0.x + 0.5 * rc * a.cos(), c0.y + 0.5 * rc * a.sin()),
                    r,
                )
            })
            .collect();
        assert!(circle_covered_by_union(&target, &ring));
        // dropping one circle leaves a gap on that side
        assert!(!circle_covered_by_union(&target, &ring[1..]));
    }

    #[test]
    fn cover_set_finds_nearby_circles() {
        let mut set = CoverSet::new(0.01);
        let c = GeoPoint::new(0.3, 0.3);
        assert!(!set.covers(c));
        set.insert(c);
        assert!(set.covers(c));
        assert!(!set.covers(GeoPoint::new(0.31, 0.3)));
    }
}

#![allow(dead_code)]

use std::f64::consts::SQRT_2;

use kstc::model::{normalized_distance, GeoObject, GeoPoint, ObjectId, TermId, TermVector};
use kstc::textindex::Vocabulary;
use proptest::prelude::*;

pub const COFFEE: TermId = 0;
pub const TEA: TermId = 1;
pub const PIZZA: TermId = 2;

/// p1..p7 as 0-based ids.
pub const P1: ObjectId = 0;
pub const P2: ObjectId = 1;
pub const P3: ObjectId = 2;
pub const P4: ObjectId = 3;
pub const P5: ObjectId = 4;
pub const P6: ObjectId = 5;
pub const P7: ObjectId = 6;

pub fn vocabulary() -> Vocabulary {
    ["coffee", "tea", "pizza"]
        .map(String::from)
        .into_iter()
        .collect()
}

fn docs() -> [Vec<(TermId, f64)>; 7] {
    [
        vec![(COFFEE, 0.2), (TEA, 0.2)],
        vec![(COFFEE, 0.2), (TEA, 0.2)],
        vec![(COFFEE, 0.5)],
        vec![(PIZZA, 0.5)],
        vec![(TEA, 0.5)],
        vec![(COFFEE, 0.5)],
        vec![(COFFEE, 0.5), (TEA, 0.5)],
    ]
}

fn build(locations: [GeoPoint; 7]) -> Vec<GeoObject> {
    locations
        .into_iter()
        .zip(docs())
        .enumerate()
        .map(|(i, (location, doc))| GeoObject {
            id: i as ObjectId,
            location,
            doc: TermVector::new(doc).unwrap(),
        })
        .collect()
}

pub const QUERY_A: GeoPoint = GeoPoint::new(0.5, 0.5);
pub const EPS_A: f64 = 0.05;

/// Query-distance table of the seven-object example (normalized units).
pub const DIST_A: [f64; 7] = [0.25, 0.2, 0.11, 0.18, 0.15, 0.1, 0.19];

/// Seven-object example placed to reproduce its distance table exactly:
/// each object sits at its tabulated distance from `QUERY_A`, with p3 and p5
/// on the same ray so that they are the only pair within `EPS_A`.
pub fn fixture_a() -> Vec<GeoObject> {
    let angle = [45.0f64, 225.0, 0.0, 270.0, 0.0, 90.0, 180.0];
    let locs: Vec<GeoPoint> = DIST_A
        .iter()
        .zip(angle)
        .map(|(&d, a)| {
            let r = d * SQRT_2;
            let t = a.to_radians();
            GeoPoint::new(QUERY_A.x + r * t.cos(), QUERY_A.y + r * t.sin())
        })
        .collect();
    build(locs.try_into().unwrap())
}

/// Same documents laid out on the 4x4 grid picture: p3 and p5 in cell 3,
/// p7 in 10, p6 in 11, p2 in 14, p1 in 15 and p4 in cell 5.
pub fn fixture_b() -> Vec<GeoObject> {
    build([
        GeoPoint::new(0.9, 0.9),
        GeoPoint::new(0.6, 0.85),
        GeoPoint::new(0.3, 0.3),
        GeoPoint::new(0.8, 0.2),
        GeoPoint::new(0.35, 0.4),
        GeoPoint::new(0.26, 0.76),
        GeoPoint::new(0.05, 0.9),
    ])
}

pub const EPS_B: f64 = 0.02;

/// Brute-force ε-neighborhood over relevant objects.
pub fn linear_scan(
    objects: &[GeoObject],
    center: GeoPoint,
    eps: f64,
    terms: &[TermId],
) -> Vec<ObjectId> {
    let mut v: Vec<ObjectId> = objects
        .iter()
        .filter(|o| o.doc.matches_any(terms) && normalized_distance(center, o.location) <= eps)
        .map(|o| o.id)
        .collect();
    v.sort_unstable();
    v
}

/// Random dataset with clustered and uniform points.
pub fn arb_objects(
    n: std::ops::RangeInclusive<usize>,
    vocab: u32,
) -> impl Strategy<Value = Vec<GeoObject>> {
    let blob = (0.1f64..0.9, 0.1f64..0.9, 0.005f64..0.08);
    (prop::collection::vec(blob, 1..5), n).prop_flat_map(move |(blobs, n)| {
        let point = (
            0..blobs.len() + 1,
            -1.0f64..1.0,
            -1.0f64..1.0,
            0.0f64..1.0,
            0.0f64..1.0,
        );
        let terms = prop::collection::btree_map(0..vocab, 0.05f64..=1.0, 1..4);
        let blobs = blobs.clone();
        prop::collection::vec((point, terms), n).prop_map(move |raw| {
            raw.into_iter()
                .enumerate()
                .map(|(i, ((b, dx, dy, ux, uy), terms))| {
                    let location = match blobs.get(b) {
                        Some(&(cx, cy, s)) => GeoPoint::new(cx + s * dx, cy + s * dy).clamped(),
                        None => GeoPoint::new(ux, uy),
                    };
                    GeoObject {
                        id: i as ObjectId,
                        location,
                        doc: TermVector::new(terms).unwrap(),
                    }
                })
                .collect()
        })
    })
}

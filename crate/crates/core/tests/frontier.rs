mod common;

use pareto_nas::pareto::{
    extract, hypervolume, lower_convex_hull, non_dominated, FrontierMode, ObjectivePoint, Reference,
};
use proptest::prelude::*;

fn points(max: usize) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    // A coarse grid forces ties and duplicates.
    prop::collection::vec((0u8..8, 0u8..8, 0u8..8), 0..max).prop_map(|v| {
        v.into_iter()
            .map(|(a, b, c)| (a as f64, b as f64, c as f64))
            .collect()
    })
}

fn to_obj(v: &[(f64, f64, f64)]) -> Vec<ObjectivePoint<usize>> {
    v.iter()
        .enumerate()
        .map(|(i, p)| ObjectivePoint::new(p.0, p.1, p.2, i))
        .collect()
}

fn ids(f: &pareto_nas::Frontier<usize>) -> Vec<usize> {
    let mut v: Vec<usize> = f.points.iter().map(|p| p.payload).collect();
    v.sort_unstable();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn nd_matches_quadratic_oracle(v in points(60)) {
        prop_assert_eq!(ids(&non_dominated(&to_obj(&v))), common::nd_oracle(&v));
    }

    #[test]
    fn nd_is_idempotent(v in points(60)) {
        let once = non_dominated(&to_obj(&v));
        let twice = non_dominated(&once.points);
        prop_assert_eq!(ids(&once), ids(&twice));
    }

    #[test]
    fn nd_ignores_input_order(v in points(60), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let pts = to_obj(&v);
        let mut shuffled = pts.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(ids(&non_dominated(&pts)), ids(&non_dominated(&shuffled)));
    }

    #[test]
    fn hull_within_nd(v in points(40)) {
        let pts = to_obj(&v);
        let nd = ids(&non_dominated(&pts));
        for i in ids(&lower_convex_hull(&pts)) {
            prop_assert!(nd.contains(&i));
        }
    }

    #[test]
    fn hypervolume_grows_with_points(v in points(20), extra in (0u8..8, 0u8..8, 0u8..8)) {
        let r = Reference { score: 0.0, latency_ms: 8.0, peak_memory_bytes: 8.0 };
        let mut pts = to_obj(&v);
        let before = hypervolume(&pts, &r).unwrap();
        pts.push(ObjectivePoint::new(extra.0 as f64, extra.1 as f64, extra.2 as f64, pts.len()));
        prop_assert!(hypervolume(&pts, &r).unwrap() >= before);
    }
}

#[test]
fn extreme_points_survive_hull() {
    let v = vec![
        (0.0, 0.0, 10.0),
        (0.0, 10.0, 0.0),
        (10.0, 10.0, 10.0),
        (4.0, 6.0, 6.0),
    ];
    let hull = ids(&extract(&to_obj(&v), FrontierMode::LowerConvexHull));
    for i in [0, 1, 2] {
        assert!(hull.contains(&i), "{hull:?}");
    }
}

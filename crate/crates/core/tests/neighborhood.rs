mod oracles;

use pcdet_core::neighborhood::{ball_query, multi_scale_group, NeighborError};
use pcdet_core::sampling::{Features, PointCloud};
use proptest::prelude::*;

#[test]
fn ball_query_matches_brute_force() {
    oracles::ball_query_suite(300, 11).unwrap();
}

#[test]
fn grouping_canonicalizes_relative_coordinates() {
    let mut r = oracles::rng(3);
    let pts = oracles::random_points(&mut r, 200, 3.0);
    let feats: Vec<f64> = (0..200 * 2).map(|i| i as f64).collect();
    let cloud = PointCloud::new(pts.clone())
        .unwrap()
        .with_features(Features::new(2, feats).unwrap())
        .unwrap();
    let centers = vec![pts[5], pts[17]];
    let out = multi_scale_group(&cloud, &centers, &[0.8, 1.6], &[8, 16]).unwrap();
    assert_eq!(out.len(), 2);
    for (g, block) in &out {
        assert_eq!(block.width, 5);
        for c in 0..2 {
            for (slot, &i) in g.group(c).iter().enumerate() {
                let e = block.entry(c, slot);
                let rel = pts[i] - centers[c];
                assert_eq!(&e[..3], &rel.to_array());
                assert_eq!(&e[3..], &[(2 * i) as f64, (2 * i + 1) as f64]);
            }
        }
    }
    assert!(matches!(
        multi_scale_group(&cloud, &centers, &[1.6, 0.8], &[8, 8]),
        Err(NeighborError::RadiiNotIncreasing(_))
    ));
    assert!(matches!(
        multi_scale_group(&cloud, &centers, &[0.8], &[8, 8]),
        Err(NeighborError::LengthMismatch { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn groups_are_within_radius_and_sorted(
        pts in prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), 1..200),
        radius in 0.1f64..3.0,
        nquery in 1usize..24,
    ) {
        let points: Vec<_> = pts.iter().map(|&p| p.into()).collect::<Vec<pcdet_core::geometry::Point>>();
        let cloud = PointCloud::new(points.clone()).unwrap();
        let centers = points.clone();
        let g = ball_query(&cloud, &centers, radius, nquery).unwrap();
        for (c, &center) in centers.iter().enumerate() {
            prop_assert!(g.found(c) >= 1);
            let valid = g.validity(c);
            let group = g.group(c);
            let d: Vec<f64> = group.iter().map(|&i| points[i].dist_sq(center)).collect();
            for s in 0..nquery {
                if valid[s] {
                    prop_assert!(d[s] <= radius * radius);
                    if s > 0 {
                        prop_assert!(d[s - 1] <= d[s]);
                    }
                } else {
                    prop_assert_eq!(group[s], group[0]);
                }
            }
        }
    }
}

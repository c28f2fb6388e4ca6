use std::collections::BTreeSet;

use cloi_instance::boundary::{detect_class_boundaries, BoundaryParams};
use cloi_instance::pointcloud::{parse_pts, write_pts, Prediction, PtsColumns};
use cloi_instance::segmentation::{connected_components, provisional_from_flags, segment};
use cloi_instance::{
    score, ClassLabel, InstanceLabeling, LabeledPointCloud, Point3, PointRecord, RadiusIndex, SegmentationParams,
};
use proptest::prelude::*;

fn arb_point(extent: f64) -> impl Strategy<Value = Point3> {
    (0.0..extent, 0.0..extent, 0.0..extent / 2.0).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn arb_cloud(max: usize, extent: f64) -> impl Strategy<Value = LabeledPointCloud> {
    prop::collection::vec((arb_point(extent), 0u8..3, 0u32..6), 0..max).prop_map(|rows| {
        // ground truth per (class, group) so instances stay class-pure
        let records = rows
            .into_iter()
            .map(|(p, c, g)| PointRecord::new(p, ClassLabel::ALL[c as usize + 1], Some(c as u32 * 10 + g)))
            .collect();
        LabeledPointCloud::new(records).unwrap()
    })
}

fn partition_set(l: &InstanceLabeling) -> BTreeSet<Vec<usize>> {
    l.instances().iter().cloned().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pts_round_trip(cloud in arb_cloud(200, 5.0), with_pred in any::<bool>(), with_flags in any::<bool>()) {
        let n = cloud.len();
        let pred: Vec<Option<u32>> = (0..n).map(|i| (i % 3 != 0).then_some((i % 4) as u32)).collect();
        let flags: Vec<bool> = (0..n).map(|i| i % 5 == 0).collect();
        let mut c = cloud.clone();
        if with_pred || with_flags {
            c = c.with_predictions(&pred).unwrap();
        }
        if with_flags {
            c = c.with_boundary_flags(&flags).unwrap();
        }
        let mut buf = Vec::new();
        write_pts(&c, &mut buf, PtsColumns { predictions: with_pred || with_flags, boundary: with_flags }).unwrap();
        let back = parse_pts(buf.as_slice(), "mem").unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn index_matches_brute_force(pts in prop::collection::vec(arb_point(1.0), 1..300), r in 0.01f64..0.5) {
        let idx = RadiusIndex::build(&pts).unwrap();
        for i in 0..pts.len() {
            let want: Vec<usize> = (0..pts.len())
                .filter(|&j| j != i && pts[i].distance_squared(&pts[j]) <= r * r)
                .collect();
            prop_assert_eq!(idx.radius_query(i, r).unwrap(), want);
        }
    }

    #[test]
    fn components_match_union_closure(pts in prop::collection::vec(arb_point(1.0), 1..300), eps in 0.02f64..0.2) {
        let idx = RadiusIndex::build(&pts).unwrap();
        let all: Vec<usize> = (0..pts.len()).collect();
        let edge = |i: usize, j: usize| !(i + j).is_multiple_of(3);
        let comps = connected_components(&all, &idx, eps, edge).unwrap();
        // label propagation until fixed point
        let mut label: Vec<usize> = all.clone();
        loop {
            let mut changed = false;
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if i != j && edge(i, j) && pts[i].distance_squared(&pts[j]) <= eps * eps && label[j] < label[i] {
                        label[i] = label[j];
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut want: Vec<Vec<usize>> = Vec::new();
        for root in label.iter().copied().collect::<BTreeSet<_>>() {
            want.push(all.iter().copied().filter(|&i| label[i] == root).collect());
        }
        want.sort();
        let mut got = comps.clone();
        got.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn boundary_flags_grow_with_radius(cloud in arb_cloud(300, 1.0), r1 in 0.01f64..0.2, dr in 0.0f64..0.2) {
        let idx = RadiusIndex::build(&cloud.positions()).unwrap();
        let a = detect_class_boundaries(&cloud, &idx, BoundaryParams::new(r1).unwrap());
        let b = detect_class_boundaries(&cloud, &idx, BoundaryParams::new(r1 + dr).unwrap());
        prop_assert!(a.iter().zip(&b).all(|(x, y)| !x || *y));
        // flagging is mutual: a flagged point has a flagged partner of another class
        let pts = cloud.points();
        for i in (0..pts.len()).filter(|&i| a[i]) {
            let partner = idx.radius_query(i, r1).unwrap().into_iter()
                .any(|j| a[j] && pts[j].class_label != pts[i].class_label);
            prop_assert!(partner);
        }
    }

    #[test]
    fn components_refine_as_epsilon_grows(cloud in arb_cloud(300, 1.0), e1 in 0.01f64..0.1, de in 0.0f64..0.1, rb in 0.01f64..0.08) {
        let idx = RadiusIndex::build(&cloud.positions()).unwrap();
        let flags = detect_class_boundaries(&cloud, &idx, BoundaryParams::new(rb).unwrap());
        let fine = provisional_from_flags(&cloud, &idx, flags.clone(), e1).unwrap();
        let coarse = provisional_from_flags(&cloud, &idx, flags, e1 + de).unwrap();
        let mut owner = vec![usize::MAX; cloud.len()];
        for (k, c) in coarse.interior_components().iter().enumerate() {
            for &i in c {
                owner[i] = k;
            }
        }
        for c in fine.interior_components() {
            let targets: BTreeSet<usize> = c.iter().map(|&i| owner[i]).collect();
            prop_assert_eq!(targets.len(), 1);
        }
        prop_assert!(coarse.prefilter_count() <= fine.prefilter_count());
    }

    #[test]
    fn labeling_invariants(cloud in arb_cloud(400, 1.0), eps in 0.02f64..0.1, mu in 1usize..10) {
        let params = SegmentationParams::new(eps, mu, None).unwrap();
        let l = segment(&cloud, &params);
        prop_assert_eq!(&l, &segment(&cloud, &params));
        let mut seen = vec![false; cloud.len()];
        let mut last_min = None;
        for (k, inst) in l.instances().iter().enumerate() {
            prop_assert!(inst.len() >= mu);
            prop_assert!(last_min < Some(inst[0]));
            last_min = Some(inst[0]);
            for &i in inst {
                prop_assert!(!seen[i]);
                seen[i] = true;
                prop_assert_eq!(cloud.points()[i].class_label, l.instance_classes()[k]);
                prop_assert_eq!(l.assignment()[i], Some(k as u32));
            }
        }
        for (s, a) in seen.iter().zip(l.assignment()) {
            prop_assert_eq!(*s, a.is_some());
        }
    }

    #[test]
    fn segmentation_is_permutation_equivariant(cloud in arb_cloud(300, 1.0), seed in any::<u64>(), eps in 0.02f64..0.1) {
        let n = cloud.len();
        let mut perm: Vec<usize> = (0..n).collect();
        // deterministic shuffle from the seed
        let mut s = seed | 1;
        for i in (1..n).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            perm.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let shuffled = cloud.select(&perm).unwrap();
        let params = SegmentationParams::new(eps, 3, None).unwrap();
        let a = segment(&cloud, &params);
        let b = segment(&shuffled, &params);
        let mapped: BTreeSet<Vec<usize>> = b
            .instances()
            .iter()
            .map(|inst| {
                let mut v: Vec<usize> = inst.iter().map(|&k| perm[k]).collect();
                v.sort();
                v
            })
            .collect();
        prop_assert_eq!(mapped, partition_set(&a));
    }

    #[test]
    fn true_positives_fall_with_threshold(cloud in arb_cloud(400, 1.0), eps in 0.02f64..0.15) {
        let pred = segment(&cloud, &SegmentationParams::new(eps, 1, None).unwrap());
        let gt = InstanceLabeling::ground_truth(&cloud);
        let ts = [0.1, 0.25, 0.5, 0.75, 1.0];
        let report = score(&pred, &gt, &ts).unwrap();
        for w in report.thresholds.windows(2) {
            prop_assert!(w[1].totals.tp <= w[0].totals.tp);
            for c in ClassLabel::ALL {
                prop_assert!(w[1].per_class[&c].tp <= w[0].per_class[&c].tp);
            }
        }
        // ground truth scored against itself is perfect
        let own = score(&gt, &gt, &ts).unwrap();
        for r in &own.thresholds {
            prop_assert_eq!(r.totals.fp + r.totals.fn_, 0);
        }
    }
}

#[test]
fn noise_predictions_survive_round_trip() {
    let cloud = LabeledPointCloud::new(vec![
        PointRecord::new(Point3::new(0.0, 0.0, 0.0), ClassLabel::Valve, Some(0)),
        PointRecord::new(Point3::new(1.0, 0.0, 0.0), ClassLabel::Valve, Some(0)),
    ])
    .unwrap()
    .with_predictions(&[Some(0), None])
    .unwrap();
    assert_eq!(cloud.points()[1].pred_instance, Some(Prediction::Noise));
    let mut buf = Vec::new();
    write_pts(&cloud, &mut buf, PtsColumns { predictions: true, boundary: false }).unwrap();
    assert_eq!(parse_pts(buf.as_slice(), "mem").unwrap(), cloud);
}

mod common;

use common::{dom, hv_grid, hv_inclusion_exclusion};
use proptest::prelude::*;
use qpmhi::pareto::{
    dominates, hvi, hypervolume, non_dominated_indices, read_metrics_csv, write_metrics_csv, MetricRecord,
    ObjectiveVector, ParetoFront,
};

fn ov(v: &[f64]) -> ObjectiveVector {
    ObjectiveVector::new(v.to_vec()).unwrap()
}

/// Points on a 1/8 grid in (0, 2], so every hypervolume is exactly representable.
fn grid_points(m: usize, max_len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec((1u8..=16).prop_map(|k| k as f64 / 8.0), m), 0..=max_len)
}

fn front_of(points: &[Vec<f64>], m: usize) -> ParetoFront {
    let mut f = ParetoFront::new(ov(&vec![0.0; m]));
    for p in points {
        f.insert(ov(p), None).unwrap();
    }
    f
}

#[test]
fn hypervolume_known_values() {
    assert_eq!(hypervolume(&[vec![1.0, 1.0]], &[0.0, 0.0]).unwrap(), 1.0);
    assert_eq!(hypervolume::<Vec<f64>>(&[], &[0.0, 0.0]).unwrap(), 0.0);
    assert_eq!(hypervolume(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[0.0, 0.0]).unwrap(), 3.0);
    assert_eq!(hypervolume(&[vec![1.0, 1.0, 1.0]], &[0.0, 0.0, 0.0]).unwrap(), 1.0);
    // Points on or below the reference contribute nothing.
    assert_eq!(hypervolume(&[vec![0.0, 5.0], vec![-1.0, 3.0]], &[0.0, 0.0]).unwrap(), 0.0);
}

#[test]
fn dimension_errors() {
    assert!(dominates(&[1.0, 2.0], &[1.0]).is_err());
    assert!(hypervolume(&[vec![1.0; 7]], &[0.0; 7]).is_err());
    assert!(hypervolume(&[vec![1.0, 1.0]], &[0.0, 0.0, 0.0]).is_err());
    assert!(ObjectiveVector::new(vec![f64::NAN]).is_err());
    assert!(ObjectiveVector::new(vec![]).is_err());
}

#[test]
fn six_objectives_match_inclusion_exclusion() {
    let pts = vec![
        vec![1.0, 0.5, 0.75, 1.0, 0.25, 0.5],
        vec![0.5, 1.0, 0.5, 0.25, 1.0, 0.75],
        vec![0.75, 0.75, 1.0, 0.5, 0.5, 1.0],
    ];
    let r = vec![0.0; 6];
    assert_eq!(hypervolume(&pts, &r).unwrap(), hv_inclusion_exclusion(&pts, &r));
}

#[test]
fn front_rejects_dominated_and_duplicate_points() {
    let mut f = ParetoFront::new(ov(&[0.0, 0.0]));
    assert!(f.insert(ov(&[1.0, 2.0]), Some("a".into())).unwrap());
    assert!(!f.insert(ov(&[0.5, 1.0]), Some("b".into())).unwrap());
    assert!(!f.insert(ov(&[1.0, 2.0]), Some("c".into())).unwrap());
    assert!(f.insert(ov(&[3.0, 3.0]), Some("d".into())).unwrap());
    assert_eq!(f.ids().collect::<Vec<_>>(), vec!["d"]);
    assert!(f.insert(ov(&[1.0, 2.0]), None).is_ok_and(|added| !added));
    assert!(f.insert(ov(&[1.0]), None).is_err());
}

#[test]
fn document_round_trip() {
    let f = ParetoFront::from_points(
        ov(&[-1.0, -1.0]),
        [(Some("x".to_string()), ov(&[1.0, 0.5])), (None, ov(&[0.25, 2.0]))],
    )
    .unwrap();
    let text = serde_json::to_string(&f.to_document()).unwrap();
    let back = ParetoFront::from_document(&serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back.to_document(), f.to_document());
    assert_eq!(back.hypervolume().unwrap(), f.hypervolume().unwrap());
}

#[test]
fn metrics_csv_round_trip() {
    let rows = vec![
        MetricRecord {
            iteration: 0,
            hv: 1.5,
            relative_hvi: Some(0.0),
            fraction_recovered: None,
            batch_ids: vec![],
        },
        MetricRecord {
            iteration: 1,
            hv: 2.25,
            relative_hvi: Some(0.5),
            fraction_recovered: Some(0.25),
            batch_ids: vec!["a".into(), "b,c".into()],
        },
    ];
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("iteration,hv,relative_hvi,fraction_recovered,batch_ids\n"));
    assert_eq!(read_metrics_csv(buf.as_slice()).unwrap(), rows);
}

proptest! {
    #[test]
    fn hypervolume_matches_grid_oracle(pts in grid_points(2, 10)) {
        prop_assert_eq!(hypervolume(&pts, &[0.0, 0.0]).unwrap(), hv_grid(&pts, &[0.0, 0.0]));
    }

    #[test]
    fn hypervolume_matches_grid_oracle_3d(pts in grid_points(3, 7)) {
        prop_assert_eq!(hypervolume(&pts, &[0.0; 3]).unwrap(), hv_grid(&pts, &[0.0; 3]));
    }

    #[test]
    fn hypervolume_matches_grid_oracle_4d(pts in grid_points(4, 5)) {
        prop_assert_eq!(hypervolume(&pts, &[0.0; 4]).unwrap(), hv_grid(&pts, &[0.0; 4]));
    }

    #[test]
    fn hypervolume_ignores_order(pts in grid_points(3, 8), seed in any::<u64>()) {
        let mut shuffled = pts.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(hypervolume(&pts, &[0.0; 3]).unwrap(), hypervolume(&shuffled, &[0.0; 3]).unwrap());
    }

    #[test]
    fn front_is_mutually_non_dominated_and_order_free(pts in grid_points(2, 12)) {
        let f = front_of(&pts, 2);
        let vals: Vec<Vec<f64>> = f.values().map(<[f64]>::to_vec).collect();
        for a in &vals {
            for b in &vals {
                prop_assert!(!dom(a, b));
            }
        }
        let mut reversed = pts.clone();
        reversed.reverse();
        let g = front_of(&reversed, 2);
        let mut a = vals.clone();
        let mut b: Vec<Vec<f64>> = g.values().map(<[f64]>::to_vec).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        prop_assert_eq!(a, b);
        prop_assert_eq!(f.hypervolume().unwrap(), hypervolume(&pts, &[0.0, 0.0]).unwrap());
    }

    #[test]
    fn non_dominated_indices_agree_with_front(pts in grid_points(3, 10)) {
        let idx = non_dominated_indices(&pts, true);
        let f = front_of(&pts, 3);
        prop_assert_eq!(idx.len(), f.len());
        for &i in &idx {
            prop_assert!(!pts.iter().any(|p| dom(p, &pts[i])));
        }
    }

    #[test]
    fn hvi_is_the_hypervolume_gain(pts in grid_points(2, 8), y in prop::collection::vec((0u8..=18).prop_map(|k| k as f64 / 8.0), 2)) {
        let f = front_of(&pts, 2);
        let gain = hvi(&y, &f).unwrap();
        let mut with = pts.clone();
        with.push(y.clone());
        let direct = hypervolume(&with, &[0.0, 0.0]).unwrap() - hypervolume(&pts, &[0.0, 0.0]).unwrap();
        prop_assert!((gain - direct).abs() <= 1e-12);
        prop_assert!(gain >= 0.0);
        prop_assert_eq!(gain == 0.0, f.covers(&y) || y.iter().any(|v| *v <= 0.0));
    }

    #[test]
    fn hypervolume_never_decreases_on_insert(pts in grid_points(3, 10)) {
        let mut f = ParetoFront::new(ov(&[0.0; 3]));
        let mut last = 0.0;
        for p in &pts {
            f.insert(ov(p), None).unwrap();
            let hv = f.hypervolume().unwrap();
            prop_assert!(hv >= last);
            last = hv;
        }
    }
}

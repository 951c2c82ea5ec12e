use netindep_core::linalg::DenseMatrix;
use netindep_core::metrics::{
    aggregate, consensus_error, running_average_update, transient_time, AggregateRecord,
    AggregateTrace, Record, RunTrace, TraceMeta,
};
use proptest::collection::vec;
use proptest::prelude::*;

fn block(rows: usize, cols: usize, data: &[f64]) -> DenseMatrix<f64> {
    DenseMatrix::from_vec(rows, cols, data[..rows * cols].to_vec()).unwrap()
}

fn series(u: &[f64], r: &[f64]) -> (AggregateTrace<f64>, AggregateTrace<f64>) {
    let mk = |vals: &[f64], is_u: bool| AggregateTrace {
        records: vals
            .iter()
            .enumerate()
            .map(|(k, &x)| AggregateRecord {
                k: k as u64,
                u_mean: is_u.then_some(x),
                v_mean: None,
                r_mean: (!is_u).then_some(x),
            })
            .collect(),
        reps: 1,
    };
    (mk(u, true), mk(r, false))
}

proptest! {
    #[test]
    fn consensus_error_translation_invariant(
        rows in 1usize..8,
        cols in 1usize..4,
        data in vec(-100.0f64..100.0, 32),
        shift in vec(-50.0f64..50.0, 4),
    ) {
        let z = block(rows, cols, &data);
        let moved = DenseMatrix::from_fn(rows, cols, |i, j| z[(i, j)] + shift[j]);
        let (a, b) = (consensus_error(&z), consensus_error(&moved));
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn consensus_error_zero_iff_rows_equal(rows in 1usize..8, row in vec(-10.0f64..10.0, 3)) {
        let z = DenseMatrix::from_fn(rows, 3, |_, j| row[j]);
        prop_assert!(consensus_error(&z) <= 1e-12 * (1.0 + row.iter().map(|x| x * x).sum::<f64>()));
        if rows > 1 {
            let mut bumped = z.clone();
            bumped[(0, 0)] += 1.0;
            prop_assert!(consensus_error(&bumped) > 0.1);
        }
    }

    #[test]
    fn running_average_matches_prefix_mean(values in vec(vec(-1e3f64..1e3, 2), 1..300)) {
        let mut y = values[0].clone();
        for (k, z) in values.iter().enumerate() {
            running_average_update(&mut y, z, k as u64 + 1).unwrap();
            for j in 0..2 {
                let direct = values[..=k].iter().map(|v| v[j]).sum::<f64>() / (k + 1) as f64;
                let scale = values[..=k].iter().map(|v| v[j].abs()).fold(1.0, f64::max);
                prop_assert!((y[j] - direct).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn transient_monotone_in_factor(
        u in vec(0.0f64..10.0, 1..60),
        r in vec(0.1f64..10.0, 60),
        lo in 1.0f64..5.0,
        extra in 0.0f64..5.0,
        window in 1usize..12,
    ) {
        let (du, dr) = series(&u, &r[..u.len()]);
        let small = transient_time(&du, &dr, lo, window).unwrap();
        let large = transient_time(&du, &dr, lo + extra, window).unwrap();
        match (small, large) {
            (Some(a), Some(b)) => prop_assert!(b <= a),
            (Some(_), None) => prop_assert!(false, "larger factor lost the transient"),
            _ => {}
        }
    }

    #[test]
    fn aggregate_invariant_to_order(vals in vec(vec(0.0f64..5.0, 4), 1..6), rot in 0usize..6) {
        let traces: Vec<RunTrace<f64>> = vals
            .iter()
            .enumerate()
            .map(|(s, v)| RunTrace {
                records: v
                    .iter()
                    .enumerate()
                    .map(|(k, &x)| Record { k: k as u64, u: Some(x), v: Some(2.0 * x), r: None, node_err_max: None })
                    .collect(),
                meta: TraceMeta { seed: s as u64, lambda: 0.5, label: String::new() },
            })
            .collect();
        let mut rotated = traces.clone();
        rotated.rotate_left(rot % traces.len());
        rotated.reverse();
        prop_assert_eq!(aggregate(&traces).unwrap(), aggregate(&rotated).unwrap());
    }
}

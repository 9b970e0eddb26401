use std::collections::VecDeque;

use gridsync_core::topology::{build_incidence, random_connected_graph, Interconnection, Network};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Row-reduction rank, independent of the library's SVD.
fn gauss_rank(rows: usize, cols: usize, entries: impl Fn(usize, usize) -> f64) -> usize {
    let mut a: Vec<Vec<f64>> = (0..rows).map(|i| (0..cols).map(|j| entries(i, j)).collect()).collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())) else {
            break;
        };
        if a[p][col].abs() < 1e-9 {
            continue;
        }
        a.swap(rank, p);
        for r in 0..rows {
            if r != rank {
                let f = a[r][col] / a[rank][col];
                for c in col..cols {
                    a[r][c] -= f * a[rank][c];
                }
            }
        }
        rank += 1;
    }
    rank
}

fn reachable_from_first(net: &Network) -> usize {
    let mut seen = vec![false; net.node_count()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for e in net.edges() {
            let other = if e.from == v { e.to } else if e.to == v { e.from } else { continue };
            if !seen[other] {
                seen[other] = true;
                count += 1;
                queue.push_back(other);
            }
        }
    }
    count
}

fn graph() -> impl Strategy<Value = Network> {
    (2usize..=8, any::<u64>()).prop_map(|(n, seed)| random_connected_graph(n, seed).unwrap())
}

#[test]
fn ring_incidence_rows() {
    let net = Network::new(4, &[(1, 2), (2, 3), (3, 4), (4, 1)]).unwrap();
    let q = build_incidence(&net);
    assert_eq!(q.row(0), &[1, 0, 0, -1]);
    assert_eq!(q.row(3), &[0, 0, -1, 1]);
}

#[test]
fn node_input_sign_examples() {
    let net = Network::new(2, &[(1, 2)]).unwrap();
    let q = build_incidence(&net);
    let mut out = [0.0; 2];
    q.aggregate(&[0.5], Interconnection::Positive, &mut out);
    assert_eq!(out, [0.5, -0.5]);
    q.aggregate(&[0.5], Interconnection::Negative, &mut out);
    assert_eq!(out, [-0.5, 0.5]);
    let zero = q.node_inputs(&DMatrix::zeros(1, 3), Interconnection::Positive).unwrap();
    assert!(zero.iter().all(|v| *v == 0.0));
    assert!(q.node_inputs(&DMatrix::zeros(2, 1), Interconnection::Positive).is_err());
}

#[test]
fn rejects_bad_networks() {
    assert!(Network::new(3, &[(1, 2)]).is_err());
    assert!(Network::new(2, &[(1, 1)]).is_err());
    assert!(Network::new(2, &[(1, 3)]).is_err());
    assert!(Network::new(2, &[(1, 2), (2, 1)]).is_err());
    assert!(random_connected_graph(1, 0).is_err());
}

#[test]
fn random_graph_examples() {
    for seed in 0..10 {
        assert_eq!(random_connected_graph(2, seed).unwrap().edges_one_based(), vec![(1, 2)]);
    }
    assert_eq!(random_connected_graph(5, 7).unwrap(), random_connected_graph(5, 7).unwrap());
    for seed in 0..100 {
        let net = random_connected_graph(8, seed).unwrap();
        assert_eq!(reachable_from_first(&net), 8, "seed {seed}");
        assert!(net.edge_count() >= 7);
    }
}

proptest! {
    #[test]
    fn adjointness(net in graph(), seed in any::<u64>(), m in 1usize..=3) {
        let q = build_incidence(&net);
        let n = net.node_count();
        let l = net.edge_count();
        let val = |k: usize| ((seed.wrapping_mul(k as u64 + 1) % 1000) as f64) / 250.0 - 2.0;
        let y = DMatrix::from_fn(n, m, |i, j| val(3 * i + j));
        let uhat = DMatrix::from_fn(l, m, |i, j| val(1000 + 7 * i + j));
        let u = q.node_inputs(&uhat, Interconnection::Positive).unwrap();
        let yhat = q.edge_inputs(&y).unwrap();
        let lhs = u.dot(&y);
        let rhs = uhat.dot(&yhat);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn consensus_direction_in_kernel(net in graph(), c in -5.0f64..5.0) {
        let q = build_incidence(&net);
        let y = DMatrix::from_element(net.node_count(), 2, c);
        let edge = q.edge_inputs(&y).unwrap();
        prop_assert!(edge.iter().all(|v| *v == 0.0));
        let back = q.node_inputs(&edge, Interconnection::Negative).unwrap();
        prop_assert!(back.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn columns_sum_to_zero_and_rank(net in graph()) {
        let q = build_incidence(&net);
        let n = net.node_count();
        for l in 0..net.edge_count() {
            let s: i32 = (0..n).map(|i| i32::from(q.get(i, l))).sum();
            prop_assert_eq!(s, 0);
        }
        let oracle = gauss_rank(n, net.edge_count(), |i, l| f64::from(q.get(i, l)));
        prop_assert_eq!(oracle, n - 1);
        prop_assert_eq!(q.rank(), n - 1);
    }

    #[test]
    fn scalar_paths_match_matrix_paths(net in graph(), vals in prop::collection::vec(-3.0f64..3.0, 8)) {
        let q = build_incidence(&net);
        let n = net.node_count();
        let l = net.edge_count();
        let y: Vec<f64> = vals[..n].to_vec();
        let mut diffs = vec![0.0; l];
        q.edge_differences(&y, &mut diffs);
        let dm = q.edge_inputs(&DMatrix::from_column_slice(n, 1, &y)).unwrap();
        prop_assert_eq!(dm.as_slice(), &diffs[..]);
        let mut agg = vec![0.0; n];
        q.aggregate(&diffs, Interconnection::Negative, &mut agg);
        let am = q.node_inputs(&dm, Interconnection::Negative).unwrap();
        prop_assert_eq!(am.as_slice(), &agg[..]);
    }
}

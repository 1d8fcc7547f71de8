//! Property tests for the graph metrics.

use baybn::eval::hamming_distance;
use baybn::model::{is_valid_ordering, topological_orderings, Dag, Ordering};
use proptest::prelude::*;

/// Random DAG on `p` nodes: each forward pair (j < k) carries an edge bit.
fn arb_dag(p: usize) -> impl Strategy<Value = Dag> {
    let m = p * (p - 1) / 2;
    prop::collection::vec(any::<bool>(), m).prop_map(move |bits| {
        let mut edges = Vec::new();
        let mut idx = 0;
        for j in 0..p {
            for k in (j + 1)..p {
                if bits[idx] {
                    edges.push((j, k));
                }
                idx += 1;
            }
        }
        Dag::new(p, edges).expect("forward-oriented graphs are acyclic")
    })
}

proptest! {
    #[test]
    fn hamming_is_a_metric(a in arb_dag(6), b in arb_dag(6), c in arb_dag(6)) {
        let ab = hamming_distance(&a, &b).unwrap();
        let ba = hamming_distance(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(hamming_distance(&a, &a).unwrap(), 0);
        if ab == 0 {
            prop_assert_eq!(a.edges(), b.edges());
        }
        let ac = hamming_distance(&a, &c).unwrap();
        let bc = hamming_distance(&b, &c).unwrap();
        prop_assert!(ac <= ab + bc);
    }

    #[test]
    fn enumerated_orderings_are_exactly_the_valid_ones(dag in arb_dag(5)) {
        let enumerated = topological_orderings(&dag).unwrap();
        for pi in &enumerated {
            prop_assert!(is_valid_ordering(&dag, pi));
        }
        // Brute force over all 120 permutations.
        let mut count = 0usize;
        let mut perm = [0usize, 1, 2, 3, 4];
        permute(&mut perm, 0, &mut |p| {
            if is_valid_ordering(&dag, &Ordering(p.to_vec())) {
                count += 1;
            }
        });
        prop_assert_eq!(enumerated.len(), count);
    }
}

fn permute(arr: &mut [usize; 5], k: usize, f: &mut impl FnMut(&[usize; 5])) {
    if k == arr.len() {
        f(arr);
        return;
    }
    for i in k..arr.len() {
        arr.swap(k, i);
        permute(arr, k + 1, f);
        arr.swap(k, i);
    }
}

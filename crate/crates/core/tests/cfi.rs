use std::collections::BTreeSet;

use proptest::prelude::*;
use walkref_core::cfi::{
    build_cfi, build_cfi_edge, grid_base, grid_vertex, move_twist_automorphism, twist_moving_map,
    verify_twist_location, CfiGraph,
};
use walkref_core::refine::iterations_to_distinguish;
use walkref_core::{RefinementKind, StepOptions};

#[test]
fn grid_sizes() {
    let b = grid_base(4).unwrap();
    assert_eq!((b.n(), b.num_edges()), (9, 11));
    let mut degrees: Vec<usize> = (0..b.n()).map(|v| b.degree(v)).collect();
    degrees.sort_unstable();
    assert_eq!(degrees, [1, 2, 2, 2, 3, 3, 3, 3, 3]);
    // pendant at the top right corner
    assert_eq!(b.degree(8), 1);
    assert!(b.graph().is_adjacent(8, grid_vertex(4, 0, 3)));

    let b3 = grid_base(3).unwrap();
    assert_eq!((b3.n(), b3.num_edges()), (7, 8));
}

#[test]
fn gadget_sizes() {
    let b = grid_base(4).unwrap();
    let x = build_cfi(&b, None).unwrap();
    assert_eq!(x.n(), 27);
    for v in 0..b.n() {
        assert_eq!(x.gadget(v).len(), 1 << (b.degree(v) - 1));
    }
    assert_eq!(x.gadget(8).len(), 1);
}

#[test]
fn wl_distinguishes_the_pair() {
    for n in 3..=5 {
        let b = grid_base(n).unwrap();
        let x = build_cfi_edge(&b, None).unwrap();
        let y = build_cfi_edge(&b, Some(0)).unwrap();
        let it = iterations_to_distinguish(
            x.graph(),
            y.graph(),
            RefinementKind::Wl,
            &StepOptions::default(),
        )
        .unwrap();
        assert!(it.is_some(), "n = {n}");
    }
}

#[test]
fn moving_nowhere_is_the_identity() {
    let b = grid_base(4).unwrap();
    let x = build_cfi_edge(&b, None).unwrap();
    for e in 0..b.num_edges() {
        let phi = twist_moving_map(&x, e, e, &[]).unwrap();
        assert!(phi.iter().enumerate().all(|(i, &y)| i == y));
    }
}

#[test]
fn adjacent_edges_touch_one_gadget() {
    let b = grid_base(4).unwrap();
    let x = build_cfi_edge(&b, None).unwrap();
    for v in 0..b.n() {
        let inc = b.incident(v);
        for &e1 in inc {
            for &e2 in inc.iter().filter(|&&e| e != e1) {
                let phi = twist_moving_map(&x, e1, e2, &[]).unwrap();
                let gadget = x.gadget(v);
                for (i, &y) in phi.iter().enumerate() {
                    if !gadget.contains(&i) {
                        assert_eq!(i, y);
                    }
                }
            }
        }
    }
}

#[test]
fn composed_moves_locate_the_target() {
    let b = grid_base(4).unwrap();
    let plain = build_cfi_edge(&b, None).unwrap();
    let (a, m, t) = (0, 5, b.num_edges() - 1);
    let first = twist_moving_map(&plain, a, m, &[]).unwrap();
    let second = twist_moving_map(&plain, m, t, &[]).unwrap();
    let composed: Vec<usize> = first.iter().map(|&y| second[y]).collect();
    let from = build_cfi_edge(&b, Some(a)).unwrap();
    let to = build_cfi_edge(&b, Some(t)).unwrap();
    assert!(verify_twist_location(&composed, &from, &to)
        .unwrap()
        .is_empty());
    let got = verify_twist_location(&composed, &plain, &from).unwrap();
    assert_eq!(got, BTreeSet::from([b.edge(t)]));
}

#[test]
fn automorphism_by_vertex_pairs() {
    let b = grid_base(4).unwrap();
    let (from, to) = (b.edge(0), b.edge(7));
    let phi = move_twist_automorphism(&b, from, to).unwrap();
    let plain = build_cfi(&b, None).unwrap();
    let twisted = build_cfi(&b, Some(from)).unwrap();
    assert_eq!(
        verify_twist_location(&phi, &plain, &twisted).unwrap(),
        BTreeSet::from([to])
    );
    assert!(move_twist_automorphism(&b, (0, 8), to).is_err());
}

/// Gadget-respecting map flipping an even set of incident-edge bits at every
/// base vertex.
fn flip_map(x: &CfiGraph, flips: &[u32]) -> Vec<usize> {
    (0..x.n())
        .map(|y| {
            let (v, m) = x.origin(y);
            x.vertex(v, m ^ flips[v])
        })
        .collect()
}

proptest! {
    #[test]
    fn plain_to_twisted_maps_invert_an_odd_set(n in 3usize..6, raw in prop::collection::vec(any::<u32>(), 16), t in any::<prop::sample::Index>()) {
        let b = grid_base(n).unwrap();
        let flips: Vec<u32> = (0..b.n())
            .map(|v| {
                let d = b.degree(v);
                let f = raw[v] & ((1 << d) - 1);
                if f.count_ones() % 2 == 1 { f ^ 1 } else { f }
            })
            .collect();
        let plain = build_cfi_edge(&b, None).unwrap();
        let twisted = build_cfi_edge(&b, Some(t.index(b.num_edges()))).unwrap();
        let phi = flip_map(&plain, &flips);
        let inverted = verify_twist_location(&phi, &plain, &twisted).unwrap();
        prop_assert_eq!(inverted.len() % 2, 1);
        // the same map between the plain graph and itself inverts an even set
        prop_assert_eq!(verify_twist_location(&phi, &plain, &plain).unwrap().len() % 2, 0);
    }
}

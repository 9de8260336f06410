//! Shared inputs for the benchmarks.

use walkref_core::cfi::{build_cfi_edge, grid_base, CfiGraph};

/// Plain and twisted CFI graphs over the grid of width `n`.
pub fn grid_pair(n: usize) -> (CfiGraph, CfiGraph) {
    let base = grid_base(n).expect("n >= 3");
    (
        build_cfi_edge(&base, None).unwrap(),
        build_cfi_edge(&base, Some(0)).unwrap(),
    )
}

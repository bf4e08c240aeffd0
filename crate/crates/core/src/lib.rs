//! Joint power allocation and user grouping for downlink cell-free massive
//! MIMO, solved by generalized Benders decomposition.
//!
//! The outer loop ([`gbd::gpga`]) alternates a convex power-control problem
//! for a fixed grouping ([`primal`]) with a combinatorial master problem over
//! groupings ([`master`]) that searches for negative differ-group loops in a
//! user graph.

// `!(a < b)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod beamform;
pub mod channel;
pub mod conic;
pub mod error;
pub mod gbd;
pub mod grouping;
pub mod harness;
pub mod master;
pub mod primal;
pub mod scenario;

pub use error::{Error, Result};
pub use grouping::Grouping;

use nalgebra::DMatrix;

/// SplitMix64 step over `a ^ b`, used to derive independent seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x6a09_e667_f3bc_c909);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sum matrices with a fixed pairwise tree so the result does not depend on
/// how the inputs were produced.
pub(crate) fn tree_sum(mut items: Vec<DMatrix<f64>>) -> DMatrix<f64> {
    assert!(!items.is_empty());
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_sum_matches_sequential_for_integers() {
        let items: Vec<_> = (0..7).map(|k| DMatrix::from_element(2, 2, k as f64)).collect();
        assert_eq!(tree_sum(items)[(1, 1)], 21.0);
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(mix_seed(1, 2), mix_seed(2, 1));
        assert_ne!(mix_seed(0, 0), mix_seed(0, 1));
    }
}

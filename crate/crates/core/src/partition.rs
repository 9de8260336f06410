//! Partitions of vertex pairs, possibly spanning several graphs.
//!
//! The universe is the disjoint union of `V_t x V_t` over the blocks `t`,
//! enumerated block by block and row-major inside a block. Class labels are
//! canonical: classes are numbered in order of first occurrence, so two
//! partitions are equal exactly when their label vectors are.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::coloring::ColoredCompleteGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPartition {
    blocks: Vec<usize>,
    class_of: Vec<u32>,
    num_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionOrder {
    Equal,
    /// The first partition strictly refines the second.
    Finer,
    Coarser,
    Incomparable,
}

impl PairPartition {
    /// Groups pairs by arbitrary hashable keys.
    pub fn from_keys<K: Hash + Eq>(blocks: Vec<usize>, keys: impl IntoIterator<Item = K>) -> Self {
        let mut seen: HashMap<K, u32> = HashMap::new();
        let class_of: Vec<u32> = keys
            .into_iter()
            .map(|k| {
                let next = seen.len() as u32;
                *seen.entry(k).or_insert(next)
            })
            .collect();
        assert_eq!(
            class_of.len(),
            blocks.iter().map(|n| n * n).sum::<usize>(),
            "key count does not match the pair universe"
        );
        PairPartition {
            blocks,
            num_classes: seen.len(),
            class_of,
        }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn class_of(&self) -> &[u32] {
        &self.class_of
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.class_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_of.is_empty()
    }

    pub fn block_offset(&self, block: usize) -> usize {
        self.blocks[..block].iter().map(|n| n * n).sum()
    }

    pub fn class_of_pair(&self, block: usize, u: usize, v: usize) -> u32 {
        let n = self.blocks[block];
        self.class_of[self.block_offset(block) + u * n + v]
    }

    /// Number of pairs of each class inside one block.
    pub fn class_counts(&self, block: usize) -> Vec<usize> {
        let off = self.block_offset(block);
        let n = self.blocks[block];
        let mut counts = vec![0; self.num_classes];
        for &c in &self.class_of[off..off + n * n] {
            counts[c as usize] += 1;
        }
        counts
    }

    /// True when the pair-color multisets of two blocks differ.
    pub fn blocks_differ(&self, a: usize, b: usize) -> bool {
        self.blocks[a] != self.blocks[b] || self.class_counts(a) != self.class_counts(b)
    }

    /// Members of every class, as flat pair indices.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (i, &c) in self.class_of.iter().enumerate() {
            out[c as usize].push(i);
        }
        out
    }

    /// Restriction to a single block, relabelled canonically.
    pub fn restrict(&self, block: usize) -> PairPartition {
        let off = self.block_offset(block);
        let n = self.blocks[block];
        PairPartition::from_keys(vec![n], self.class_of[off..off + n * n].iter().copied())
    }

    /// `self` is finer than or equal to `other`.
    pub fn refines(&self, other: &PairPartition) -> Result<bool> {
        Ok(matches!(
            compare_partitions(self, other)?,
            PartitionOrder::Equal | PartitionOrder::Finer
        ))
    }
}

pub fn partition_of(c: &ColoredCompleteGraph) -> PairPartition {
    PairPartition::from_keys(vec![c.n()], c.colors().iter().copied())
}

/// Partition of the joint universe of several colorings sharing an interner.
pub fn joint_partition_of(cs: &[ColoredCompleteGraph]) -> PairPartition {
    PairPartition::from_keys(
        cs.iter().map(|c| c.n()).collect(),
        cs.iter().flat_map(|c| c.colors().iter().copied()),
    )
}

pub fn compare_partitions(p: &PairPartition, q: &PairPartition) -> Result<PartitionOrder> {
    if p.blocks != q.blocks {
        return Err(Error::UniverseMismatch);
    }
    // p refines q iff each p-class maps into a single q-class.
    let maps_into = |a: &PairPartition, b: &PairPartition| {
        let mut image = vec![u32::MAX; a.num_classes];
        a.class_of.iter().zip(&b.class_of).all(|(&x, &y)| {
            let slot = &mut image[x as usize];
            if *slot == u32::MAX {
                *slot = y;
            }
            *slot == y
        })
    };
    let fine = maps_into(p, q);
    let coarse = maps_into(q, p);
    Ok(match (fine, coarse) {
        (true, true) => PartitionOrder::Equal,
        (true, false) => PartitionOrder::Finer,
        (false, true) => PartitionOrder::Coarser,
        (false, false) => PartitionOrder::Incomparable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn part(keys: &[u8]) -> PairPartition {
        PairPartition::from_keys(vec![2], keys.iter().copied())
    }

    #[test]
    fn canonical_labels() {
        let p = part(&[7, 3, 3, 7]);
        assert_eq!(p.class_of(), &[0, 1, 1, 0]);
        assert_eq!(p, part(&[1, 9, 9, 1]));
    }

    #[test]
    fn order_cases() {
        let a = part(&[0, 1, 2, 3]);
        let b = part(&[0, 1, 1, 0]);
        let c = part(&[0, 0, 1, 1]);
        assert_eq!(compare_partitions(&a, &b).unwrap(), PartitionOrder::Finer);
        assert_eq!(compare_partitions(&b, &a).unwrap(), PartitionOrder::Coarser);
        assert_eq!(compare_partitions(&b, &b).unwrap(), PartitionOrder::Equal);
        assert_eq!(
            compare_partitions(&b, &c).unwrap(),
            PartitionOrder::Incomparable
        );
        let d = PairPartition::from_keys(vec![1], [0]);
        assert!(matches!(
            compare_partitions(&a, &d),
            Err(Error::UniverseMismatch)
        ));
    }

    #[test]
    fn block_counts() {
        let p = PairPartition::from_keys(vec![1, 2], [0, 0, 1, 1, 0]);
        assert_eq!(p.class_counts(0), vec![1, 0]);
        assert_eq!(p.class_counts(1), vec![2, 2]);
        assert!(p.blocks_differ(0, 1));
        assert_eq!(p.class_of_pair(1, 1, 0), 1);
    }

    proptest! {
        #[test]
        fn comparison_is_antisymmetric(a in prop::collection::vec(0u8..3, 9),
                                       b in prop::collection::vec(0u8..3, 9)) {
            let p = PairPartition::from_keys(vec![3], a.iter().copied());
            let q = PairPartition::from_keys(vec![3], b.iter().copied());
            let pq = compare_partitions(&p, &q).unwrap();
            let qp = compare_partitions(&q, &p).unwrap();
            let flipped = match pq {
                PartitionOrder::Finer => PartitionOrder::Coarser,
                PartitionOrder::Coarser => PartitionOrder::Finer,
                o => o,
            };
            prop_assert_eq!(flipped, qp);
            // the common refinement refines both
            let meet = PairPartition::from_keys(vec![3], a.iter().zip(&b));
            prop_assert!(meet.refines(&p).unwrap() && meet.refines(&q).unwrap());
        }
    }
}

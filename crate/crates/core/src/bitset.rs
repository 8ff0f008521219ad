//! Compact growable bitset used for nonterminal sets, terminal domains and
//! automaton state sets.

use std::fmt;

/// Set of small unsigned integers backed by 64-bit blocks.
///
/// Trailing all-zero blocks are trimmed after every mutation so that
/// equality and hashing are structural.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitSet {
    blocks: Vec<u64>,
}

impl BitSet {
    pub fn new() -> Self {
        BitSet { blocks: Vec::new() }
    }

    /// Set containing `0..n`.
    pub fn all(n: usize) -> Self {
        let mut s = BitSet::new();
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, idx: usize) -> bool {
        let (b, bit) = (idx / 64, idx % 64);
        if b >= self.blocks.len() {
            self.blocks.resize(b + 1, 0);
        }
        let had = self.blocks[b] & (1 << bit) != 0;
        self.blocks[b] |= 1 << bit;
        !had
    }

    pub fn remove(&mut self, idx: usize) -> bool {
        let (b, bit) = (idx / 64, idx % 64);
        if b >= self.blocks.len() {
            return false;
        }
        let had = self.blocks[b] & (1 << bit) != 0;
        self.blocks[b] &= !(1 << bit);
        self.trim();
        had
    }

    pub fn contains(&self, idx: usize) -> bool {
        let (b, bit) = (idx / 64, idx % 64);
        b < self.blocks.len() && self.blocks[b] & (1 << bit) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.iter().all(|&b| b == 0)
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn clear(&mut self) {
        self.blocks.clear();
    }

    pub fn union_with(&mut self, other: &BitSet) {
        if other.blocks.len() > self.blocks.len() {
            self.blocks.resize(other.blocks.len(), 0);
        }
        for (i, &b) in other.blocks.iter().enumerate() {
            self.blocks[i] |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &BitSet) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            *b &= other.blocks.get(i).copied().unwrap_or(0);
        }
        self.trim();
    }

    /// True when `self` is a subset of `other`.
    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.blocks
            .iter()
            .enumerate()
            .all(|(i, &b)| b & !other.blocks.get(i).copied().unwrap_or(0) == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().enumerate().flat_map(|(i, &block)| {
            (0..64).filter_map(move |bit| {
                if block & (1u64 << bit) != 0 {
                    Some(i * 64 + bit)
                } else {
                    None
                }
            })
        })
    }

    fn trim(&mut self) {
        while self.blocks.last() == Some(&0) {
            self.blocks.pop();
        }
    }
}

impl FromIterator<usize> for BitSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut s = BitSet::new();
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl fmt::Debug for BitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

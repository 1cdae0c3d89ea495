//! Permutations of replica indices.

use std::fmt;

use crate::error::{Error, Result};

/// A permutation of `{0, …, k−1}` stored as its image list: `σ(i) = images[i]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let k = images.len();
        let mut seen = vec![false; k];
        for &i in &images {
            if i >= k || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidInput(format!("{images:?} is not a permutation")));
            }
        }
        Ok(Self { images })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            images: (0..k).collect(),
        }
    }

    /// The cycle `i ↦ i + 1 mod k`.
    pub fn cyclic(k: usize) -> Self {
        Self {
            images: (0..k).map(|i| (i + 1) % k).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "composing permutations of different size");
        Self {
            images: other.images.iter().map(|&i| self.images[i]).collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        let mut images = vec![0; self.len()];
        for (i, &j) in self.images.iter().enumerate() {
            images[j] = i;
        }
        Self { images }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Cycle lengths, sorted in decreasing order.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut lens = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.images[i];
                len += 1;
            }
            lens.push(len);
        }
        lens.sort_unstable_by(|a, b| b.cmp(a));
        lens
    }

    pub fn num_cycles(&self) -> usize {
        self.cycle_type().len()
    }

    /// All `k!` permutations in lexicographic order of their image lists;
    /// the identity comes first.
    pub fn all(k: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        let mut used = vec![false; k];
        fn rec(k: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
            if cur.len() == k {
                out.push(Permutation { images: cur.clone() });
                return;
            }
            for i in 0..k {
                if !used[i] {
                    used[i] = true;
                    cur.push(i);
                    rec(k, cur, used, out);
                    cur.pop();
                    used[i] = false;
                }
            }
        }
        rec(k, &mut cur, &mut used, &mut out);
        out
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{:?}", self.images)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_and_order() {
        assert_eq!(Permutation::all(3).len(), 6);
        assert_eq!(Permutation::all(4).len(), 24);
        assert!(Permutation::all(4)[0].is_identity());
    }

    #[test]
    fn cycle_types() {
        assert_eq!(Permutation::cyclic(4).cycle_type(), vec![4]);
        assert_eq!(Permutation::identity(3).num_cycles(), 3);
        assert_eq!(Permutation::new(vec![1, 0, 2]).unwrap().cycle_type(), vec![2, 1]);
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![2, 0]).is_err());
    }

    fn arb_perm(k: usize) -> impl Strategy<Value = Permutation> {
        Just((0..k).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn group_laws(a in arb_perm(5), b in arb_perm(5), c in arb_perm(5)) {
            prop_assert_eq!(a.compose(&b).compose(&c), a.compose(&b.compose(&c)));
            prop_assert!(a.compose(&a.inverse()).is_identity());
            // Conjugation preserves cycle type.
            prop_assert_eq!(b.compose(&a).compose(&b.inverse()).cycle_type(), a.cycle_type());
        }
    }
}

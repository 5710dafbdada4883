use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlimError};

/// A variable ordering. `order[a]` is the original index placed at position `a`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let d = order.len();
        let mut seen = vec![false; d];
        for &o in &order {
            if o >= d || seen[o] {
                return Err(SlimError::InvalidArgument(format!(
                    "{order:?} is not a permutation of 0..{d}"
                )));
            }
            seen[o] = true;
        }
        Ok(Self { order })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            order: (0..d).collect(),
        }
    }

    /// Uniformly random permutation.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(rng);
        Self { order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    /// `pos[i]` is the position of original index `i`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (a, &o) in self.order.iter().enumerate() {
            pos[o] = a;
        }
        pos
    }

    pub fn inverse(&self) -> Self {
        Self {
            order: self.positions(),
        }
    }

    /// `(self ∘ other)[a] = self[other[a]]`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return Err(SlimError::Dimension(format!(
                "cannot compose permutations of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(Self {
            order: other.order.iter().map(|&a| self.order[a]).collect(),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(a, &o)| a == o)
    }

    pub fn swapped(&self, a: usize, b: usize) -> Self {
        let mut order = self.order.clone();
        order.swap(a, b);
        Self { order }
    }

    /// Reorder `items` so that position `a` holds `items[order[a]]`.
    pub fn apply<T: Clone>(&self, items: &[T]) -> Vec<T> {
        self.order.iter().map(|&o| items[o].clone()).collect()
    }

    /// All `d!` permutations in lexicographic order.
    pub fn all(d: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..d).collect();
        loop {
            out.push(Permutation { order: cur.clone() });
            // next lexicographic permutation
            let Some(i) = (0..d.saturating_sub(1))
                .rev()
                .find(|&i| cur[i] < cur[i + 1])
            else {
                break;
            };
            let j = (i + 1..d).rev().find(|&j| cur[j] > cur[i]).unwrap();
            cur.swap(i, j);
            cur[i + 1..].reverse();
        }
        out
    }
}

/// Pick a uniformly random unordered pair of distinct positions in `0..d`.
pub fn random_pair<R: Rng + ?Sized>(d: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.random_range(0..d);
    let mut b = rng.random_range(0..d - 1);
    if b >= a {
        b += 1;
    }
    (a.min(b), a.max(b))
}

/// Swap two uniformly chosen positions of `p`.
pub fn propose_transposition<R: Rng + ?Sized>(p: &Permutation, rng: &mut R) -> Result<Permutation> {
    if p.len() < 2 {
        return Err(SlimError::InvalidArgument(
            "transposition needs at least two elements".into(),
        ));
    }
    let (a, b) = random_pair(p.len(), rng);
    Ok(p.swapped(a, b))
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = SlimError;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.order
    }
}

/// One-based, comma separated: `(1,3,2,4)`.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (a, o) in self.order.iter().enumerate() {
            if a > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", o + 1)?;
        }
        write!(f, ")")
    }
}

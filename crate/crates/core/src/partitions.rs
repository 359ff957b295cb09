//! Integer partitions.
//!
//! A [`Partition`] indexes an isomorphism class of finite abelian p-groups:
//! the parts `(l_1, ..., l_k)` stand for `Z/p^l_1 + ... + Z/p^l_k`. The empty
//! partition is the trivial group.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Weakly decreasing tuple of positive integers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    /// Validates that `parts` is weakly decreasing and positive.
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        if parts.contains(&0) {
            return Err(Error::InvalidPartition(format!(
                "{parts:?} has a zero part"
            )));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPartition(format!(
                "{parts:?} is not weakly decreasing"
            )));
        }
        Ok(Partition { parts })
    }

    /// Sorts the parts into canonical order. Zero parts are dropped.
    pub fn from_unsorted(mut parts: Vec<u32>) -> Self {
        parts.retain(|&x| x > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Partition { parts }
    }

    /// The zero partition `()`.
    pub fn empty() -> Self {
        Partition { parts: Vec::new() }
    }

    /// The one-row partition `(n)`, or `()` for `n = 0`.
    pub fn single(n: u32) -> Self {
        Partition::from_unsorted(vec![n])
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn size(&self) -> u32 {
        self.parts.iter().sum()
    }

    pub fn num_parts(&self) -> u32 {
        self.parts.len() as u32
    }

    pub fn largest_part(&self) -> u32 {
        self.parts.first().copied().unwrap_or(0)
    }

    /// Transpose of the Young diagram.
    pub fn conjugate(&self) -> Partition {
        let cols = self.largest_part();
        let parts = (1..=cols)
            .map(|c| self.parts.iter().take_while(|&&x| x >= c).count() as u32)
            .collect();
        Partition { parts }
    }

    pub fn shape_stats(&self) -> ShapeStats {
        ShapeStats {
            size: self.size(),
            num_parts: self.num_parts(),
            largest_part: self.largest_part(),
            conjugate: self.conjugate(),
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return f.write_str("()");
        }
        for (i, x) in self.parts.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

/// Parses `2,1,1`, `(2,1,1)` or `()`. Parts must already be in canonical order.
impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let t = t
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .unwrap_or(t)
            .trim();
        if t.is_empty() {
            return Ok(Partition::empty());
        }
        let parts = t
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::parse(s, format!("bad part `{}`: {e}", x.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::new(parts).map_err(|e| Error::parse(s, e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeStats {
    pub size: u32,
    pub num_parts: u32,
    pub largest_part: u32,
    pub conjugate: Partition,
}

/// Every partition of `n`, in descending lexicographic order.
pub fn enumerate_partitions(n: u32) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    descend(n, n, &mut current, &mut out);
    out
}

fn descend(rest: u32, max_part: u32, current: &mut Vec<u32>, out: &mut Vec<Partition>) {
    if rest == 0 {
        out.push(Partition {
            parts: current.clone(),
        });
        return;
    }
    for first in (1..=rest.min(max_part)).rev() {
        current.push(first);
        descend(rest - first, first, current, out);
        current.pop();
    }
}

/// [`enumerate_partitions`] guarded by an explicit size budget.
pub fn enumerate_partitions_within(n: u32, cap: u32) -> Result<Vec<Partition>> {
    if n > cap {
        return Err(Error::PartitionBudget { requested: n, cap });
    }
    Ok(enumerate_partitions(n))
}

/// All partitions of size `0..=n`, grouped by size, each group in
/// descending lexicographic order.
pub fn partitions_up_to(n: u32) -> Vec<Partition> {
    (0..=n).flat_map(enumerate_partitions).collect()
}

/// The partition number `a(n)`, by the parts-bounded DP table.
pub fn count_partitions(n: u32) -> BigUint {
    let n = n as usize;
    let mut ways = vec![BigUint::zero(); n + 1];
    ways[0] = BigUint::one();
    for part in 1..=n {
        for total in part..=n {
            let add = ways[total - part].clone();
            ways[total] += add;
        }
    }
    ways.swap_remove(n)
}

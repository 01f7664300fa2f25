//! Generalized partitions (multisets of nonzero integers) and the integer
//! partition and composition enumerators used elsewhere.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::One;

use crate::rational::factorial;

/// A finite multiset of nonzero integers, stored as part -> multiplicity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GenPartition {
    mult: BTreeMap<i64, u32>,
}

impl GenPartition {
    pub fn empty() -> Self {
        Self::default()
    }

    /// # Panics
    /// If any part is zero.
    pub fn from_parts(parts: &[i64]) -> Self {
        let mut mult = BTreeMap::new();
        for &p in parts {
            assert!(p != 0, "generalized partitions have nonzero parts");
            *mult.entry(p).or_insert(0) += 1;
        }
        GenPartition { mult }
    }

    /// Parts in ascending order, negative parts first.
    pub fn parts(&self) -> Vec<i64> {
        self.mult.iter().flat_map(|(p, m)| std::iter::repeat_n(*p, *m as usize)).collect()
    }

    pub fn multiplicities(&self) -> &BTreeMap<i64, u32> {
        &self.mult
    }

    pub fn mult(&self, part: i64) -> u32 {
        self.mult.get(&part).copied().unwrap_or(0)
    }

    /// Number of parts.
    pub fn length(&self) -> usize {
        self.mult.values().map(|m| *m as usize).sum()
    }

    /// Signed sum of the parts.
    pub fn size(&self) -> i64 {
        self.mult.iter().map(|(p, m)| p * *m as i64).sum()
    }

    pub fn norm2(&self) -> i64 {
        self.mult.iter().map(|(p, m)| p * p * *m as i64).sum()
    }

    /// Sum of the positive parts.
    pub fn pos_weight(&self) -> u64 {
        self.mult.iter().filter(|(p, _)| **p > 0).map(|(p, m)| (*p * *m as i64) as u64).sum()
    }

    /// Sum of the absolute values of the negative parts.
    pub fn neg_weight(&self) -> u64 {
        self.mult.iter().filter(|(p, _)| **p < 0).map(|(p, m)| (-*p * *m as i64) as u64).sum()
    }

    /// Product of the factorials of the multiplicities.
    pub fn factorial(&self) -> BigInt {
        self.mult.values().fold(BigInt::one(), |acc, m| acc * factorial(*m as u64))
    }

    pub fn is_empty(&self) -> bool {
        self.mult.is_empty()
    }

    /// Multiplicity-wise difference, `None` if some multiplicity would go
    /// negative.
    pub fn subtract(&self, other: &Self) -> Option<Self> {
        let mut mult = self.mult.clone();
        for (p, m) in &other.mult {
            let cur = mult.get_mut(p)?;
            if *cur < *m {
                return None;
            }
            *cur -= m;
            if *cur == 0 {
                mult.remove(p);
            }
        }
        Some(GenPartition { mult })
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut mult = self.mult.clone();
        for (p, m) in &other.mult {
            *mult.entry(*p).or_insert(0) += m;
        }
        GenPartition { mult }
    }
}

impl fmt::Display for GenPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for p in self.parts() {
            write!(f, "({p})")?;
        }
        write!(f, ")")
    }
}

/// All balanced generalized partitions of the given length whose positive
/// parts sum to at most `max_pos_weight`, ordered by positive weight and then
/// by parts.
pub fn enum_balanced(length: usize, max_pos_weight: u64) -> Vec<GenPartition> {
    let mut out = Vec::new();
    if length == 0 {
        out.push(GenPartition::empty());
        return out;
    }
    for w in 1..=max_pos_weight {
        for a in 1..length {
            let negs = partitions_exact(w, a);
            let poss = partitions_exact(w, length - a);
            for n in &negs {
                for p in &poss {
                    let mut parts: Vec<i64> = n.iter().map(|x| -(*x as i64)).collect();
                    parts.extend(p.iter().map(|x| *x as i64));
                    out.push(GenPartition::from_parts(&parts));
                }
            }
        }
    }
    out.sort_by_key(|l| (l.pos_weight(), l.parts()));
    out
}

/// Partitions of `n` into exactly `k` positive parts, each non-increasing.
pub fn partitions_exact(n: u64, k: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: u64, k: usize, max: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if k == 0 {
            if n == 0 {
                out.push(cur.clone());
            }
            return;
        }
        if n < k as u64 {
            return;
        }
        let hi = max.min(n - (k as u64 - 1));
        for p in (1..=hi).rev() {
            cur.push(p);
            rec(n - p, k - 1, p, cur, out);
            cur.pop();
        }
    }
    rec(n, k, n, &mut cur, &mut out);
    out
}

/// All partitions of `n`, each non-increasing.
pub fn partitions(n: u64) -> Vec<Vec<u64>> {
    if n == 0 {
        return vec![vec![]];
    }
    (1..=n as usize).flat_map(|k| partitions_exact(n, k)).collect()
}

/// Ordered compositions of `n` into exactly `k` positive parts.
pub fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: u64, k: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if k == 0 {
            if n == 0 {
                out.push(cur.clone());
            }
            return;
        }
        if n < k as u64 {
            return;
        }
        for p in 1..=n - (k as u64 - 1) {
            cur.push(p);
            rec(n - p, k - 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, &mut cur, &mut out);
    out
}

/// Strictly decreasing sequences `n_1 > .. > n_k >= 1` with
/// `sum n_i w_i = total`.
pub fn decreasing_with_weights(weights: &[u64], total: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(weights.len());
    fn rec(ws: &[u64], rest: u64, upper: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if ws.is_empty() {
            if rest == 0 {
                out.push(cur.clone());
            }
            return;
        }
        // the remaining slots need at least sum_{j} (len - j) w_j
        let min_tail: u64 = ws[1..].iter().enumerate().map(|(j, w)| (ws.len() - 1 - j) as u64 * w).sum();
        let need_below = ws.len() as u64 - 1;
        let mut n = need_below + 1;
        while n < upper && n * ws[0] + min_tail <= rest {
            cur.push(n);
            rec(&ws[1..], rest - n * ws[0], n, cur, out);
            cur.pop();
            n += 1;
        }
    }
    rec(weights, total, u64::MAX, &mut cur, &mut out);
    out
}

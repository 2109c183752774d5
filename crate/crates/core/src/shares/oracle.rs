//! Exact maximin share by exhaustive search.
//!
//! The MMS value is always the value of some bundle, so we binary search the
//! sorted set of distinct bundle sums not exceeding `total / n`. Feasibility
//! of a target `tau` ("can the items be split into `n` bundles each worth at
//! least `tau`") is a bin-covering question answered by a DP over item
//! subsets: each subset keeps the lexicographically best
//! `(closed bundles, value of the open bundle)` reachable by adding its items
//! one at a time. More closed bundles always dominates, and for equal counts a
//! larger open bundle dominates, so the best state per subset is exact.
//!
//! Items with equal value are interchangeable, so subsets are encoded as
//! multisets of value classes (a mixed-radix counter). With all values
//! distinct this is the plain `2^m` subset lattice; instances with many
//! repeated values (water items) shrink dramatically. Values are scaled to
//! integers first and the search runs on `i128` when the totals fit.

use std::ops::Add;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::number::Rational;

/// Size limits for the exact oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleLimits {
    /// The multiset state space may hold at most `2^max_items` states.
    /// For instances without repeated values this is exactly `m <= max_items`.
    pub max_items: u32,
    pub max_agents: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_items: 16,
            max_agents: 5,
        }
    }
}

/// An exact MMS value together with an `n`-partition attaining it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MmsWitness {
    pub value: Rational,
    /// `n` bundles of indices into the input value slice; together they
    /// cover every index exactly once.
    pub partition: Vec<Vec<usize>>,
}

/// Exact MMS of an agent with `values` among `n` agents.
pub fn mms_exact(values: &[Rational], n: usize, limits: &OracleLimits) -> Result<MmsWitness> {
    if n == 0 {
        return Err(Error::Domain("agent count must be at least 1".into()));
    }
    if n > limits.max_agents {
        return Err(Error::Capacity(format!(
            "{n} agents exceed the oracle limit of {}",
            limits.max_agents
        )));
    }

    // Distinct positive values, largest first, each with the items carrying it.
    let mut classes: Vec<(Rational, Vec<usize>)> = Vec::new();
    let mut zeros = Vec::new();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].cmp(&values[a]).then(a.cmp(&b)));
    for item in order {
        let v = &values[item];
        if v.is_zero() {
            zeros.push(item);
        } else if classes.last().is_some_and(|(last, _)| last == v) {
            classes.last_mut().unwrap().1.push(item);
        } else {
            classes.push((v.clone(), vec![item]));
        }
    }

    let budget = 1u128.checked_shl(limits.max_items).unwrap_or(u128::MAX);
    let mut states: u128 = 1;
    for (_, items) in &classes {
        states = states.saturating_mul(items.len() as u128 + 1);
        if states > budget {
            return Err(Error::Capacity(format!(
                "{} items span more than 2^{} bundle states",
                values.len(),
                limits.max_items
            )));
        }
    }

    let scale = classes
        .iter()
        .fold(BigInt::one(), |acc, (v, _)| acc.lcm(v.denom()));
    let scaled: Vec<BigInt> = classes
        .iter()
        .map(|(v, _)| v.numer() * (&scale / v.denom()))
        .collect();
    let counts: Vec<usize> = classes.iter().map(|(_, items)| items.len()).collect();

    let total: BigInt = scaled
        .iter()
        .zip(&counts)
        .map(|(v, &c)| v * BigInt::from(c))
        .sum();
    // Keep headroom so `n * sum` never overflows.
    let fits = total.bits() < 120;
    let (value, sequence) = if fits {
        let small: Vec<i128> = scaled.iter().map(|v| v.to_i128().unwrap()).collect();
        let (value, sequence) = Lattice::new(&small, &counts).solve(n);
        (BigInt::from(value), sequence)
    } else {
        Lattice::new(&scaled, &counts).solve(n)
    };

    let partition = build_partition(&classes, &zeros, &sequence, n);
    Ok(MmsWitness {
        value: Rational::new(value, scale),
        partition,
    })
}

/// Turns the DP's item order (value classes, split into closed groups) into
/// concrete item indices. Extra closed groups and the open remainder are
/// merged into the last bundle; zero-valued items join it as well.
fn build_partition(
    classes: &[(Rational, Vec<usize>)],
    zeros: &[usize],
    sequence: &Sequence,
    n: usize,
) -> Vec<Vec<usize>> {
    let mut next: Vec<usize> = vec![0; classes.len()];
    let mut take = |class: usize| {
        let item = classes[class].1[next[class]];
        next[class] += 1;
        item
    };
    let mut partition: Vec<Vec<usize>> = vec![Vec::new(); n];
    match sequence {
        Sequence::Groups(groups) => {
            for (g, group) in groups.iter().enumerate() {
                let slot = g.min(n - 1);
                partition[slot].extend(group.iter().map(|&c| take(c)));
            }
        }
        Sequence::Trivial => {
            // Target zero: spread items one per bundle, overflow into the last.
            let mut slot = 0;
            for class in 0..classes.len() {
                for _ in 0..classes[class].1.len() {
                    partition[slot].push(take(class));
                    slot = (slot + 1).min(n - 1);
                }
            }
        }
    }
    partition[n - 1].extend_from_slice(zeros);
    for bundle in &mut partition {
        bundle.sort_unstable();
    }
    partition
}

enum Sequence {
    /// Class ids grouped into bundles; only the last group may be open.
    Groups(Vec<Vec<usize>>),
    Trivial,
}

trait Amount: Clone + Ord + Zero + for<'a> Add<&'a Self, Output = Self> {
    fn times(&self, k: usize) -> Self;
}

impl Amount for i128 {
    fn times(&self, k: usize) -> Self {
        self * k as i128
    }
}

impl Amount for BigInt {
    fn times(&self, k: usize) -> Self {
        self * BigInt::from(k)
    }
}

/// Mixed-radix lattice of sub-multisets of the value classes.
struct Lattice<'a, T> {
    values: &'a [T],
    counts: &'a [usize],
    strides: Vec<usize>,
    size: usize,
}

impl<'a, T: Amount> Lattice<'a, T> {
    fn new(values: &'a [T], counts: &'a [usize]) -> Self {
        let mut strides = Vec::with_capacity(counts.len());
        let mut size = 1;
        for &c in counts {
            strides.push(size);
            size *= c + 1;
        }
        Self {
            values,
            counts,
            strides,
            size,
        }
    }

    fn digit(&self, state: usize, class: usize) -> usize {
        (state / self.strides[class]) % (self.counts[class] + 1)
    }

    fn sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.size];
        for state in 1..self.size {
            let class = (0..self.values.len())
                .find(|&c| self.digit(state, c) > 0)
                .expect("nonzero state has a nonzero digit");
            sums[state] = sums[state - self.strides[class]].clone() + &self.values[class];
        }
        sums
    }

    fn solve(&self, n: usize) -> (T, Sequence) {
        let sums = self.sums();
        let total = sums[self.size - 1].clone();
        let mut candidates: Vec<T> = sums.into_iter().filter(|s| s.times(n) <= total).collect();
        candidates.sort_unstable();
        candidates.dedup();

        // candidates[0] is zero, which is always feasible.
        let (mut lo, mut hi) = (0, candidates.len() - 1);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.cover(&candidates[mid], n).is_some() {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let best = candidates[lo].clone();
        let sequence = if best.is_zero() {
            Sequence::Trivial
        } else {
            self.cover(&best, n).expect("binary search keeps a feasible target")
        };
        (best, sequence)
    }

    /// Bin-covering DP; returns the grouped item order when at least `n`
    /// bundles worth `>= target` can be formed.
    fn cover(&self, target: &T, n: usize) -> Option<Sequence> {
        let mut closed: Vec<u32> = vec![0; self.size];
        let mut open: Vec<T> = vec![T::zero(); self.size];
        let mut parent: Vec<u16> = vec![u16::MAX; self.size];
        let mut reached = vec![false; self.size];
        reached[0] = true;
        for state in 0..self.size {
            debug_assert!(reached[state]);
            for class in 0..self.values.len() {
                if self.digit(state, class) == self.counts[class] {
                    continue;
                }
                let next = state + self.strides[class];
                let filled = open[state].clone() + &self.values[class];
                let (c, o) = if filled >= *target {
                    (closed[state] + 1, T::zero())
                } else {
                    (closed[state], filled)
                };
                if !reached[next] || (c, &o) > (closed[next], &open[next]) {
                    reached[next] = true;
                    closed[next] = c;
                    open[next] = o;
                    parent[next] = class as u16;
                }
            }
        }
        let full = self.size - 1;
        if (closed[full] as usize) < n {
            return None;
        }

        let mut order = Vec::new();
        let mut state = full;
        while state != 0 {
            let class = parent[state] as usize;
            order.push(class);
            state -= self.strides[class];
        }
        order.reverse();

        let mut groups = vec![Vec::new()];
        let mut acc = T::zero();
        for class in order {
            acc = acc + &self.values[class];
            groups.last_mut().unwrap().push(class);
            if acc >= *target {
                acc = T::zero();
                groups.push(Vec::new());
            }
        }
        if groups.last().is_some_and(Vec::is_empty) {
            groups.pop();
        }
        Some(Sequence::Groups(groups))
    }
}

//! Independent reference computations shared by the integration suites.
//! Nothing here calls into the solver paths it is used to check.

#![allow(dead_code)]

use mms_core::number::{rat, Rational};
use mms_core::Instance;
use num_traits::Zero;
use proptest::prelude::*;

/// MMS by enumerating all `n^m` assignments of items to bundles.
pub fn brute_mms(values: &[Rational], n: usize) -> Rational {
    let m = values.len();
    let mut assignment = vec![0usize; m];
    let mut best = Rational::zero();
    loop {
        let mut sums = vec![Rational::zero(); n];
        for (item, &b) in assignment.iter().enumerate() {
            sums[b] += &values[item];
        }
        let worst = sums.into_iter().min().unwrap();
        if worst > best {
            best = worst;
        }
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == m {
                return best;
            }
            assignment[i] += 1;
            if assignment[i] < n {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

/// Largest root of `g(b) = sum(min(v, b)) - n b`, found segment by segment
/// between consecutive breakpoints, scanning from the top.
pub fn brute_tps(values: &[Rational], n: usize) -> Rational {
    let nn = Rational::from_integer(n.into());
    let mut points: Vec<Rational> = values.to_vec();
    points.push(Rational::zero());
    points.sort();
    points.dedup();
    let total: Rational = values.iter().sum();
    // Segment above the largest value: g = total - n b.
    let top = points.last().unwrap().clone();
    let root = &total / &nn;
    if root >= top {
        return root;
    }
    for w in points.windows(2).rev() {
        let (lo, hi) = (&w[0], &w[1]);
        // On [lo, hi]: values <= lo contribute themselves, values >= hi contribute b.
        let fixed: Rational = values.iter().filter(|v| *v <= lo).sum();
        let count = values.iter().filter(|v| *v >= hi).count();
        let slope = Rational::from_integer(count.into()) - &nn;
        if slope.is_zero() {
            if fixed.is_zero() {
                return hi.clone();
            }
            continue;
        }
        let b = -&fixed / &slope;
        if &b >= lo && &b <= hi {
            return b;
        }
    }
    Rational::zero()
}

/// `n * beta == sum(min(v, beta))`.
pub fn is_tps_fixed_point(values: &[Rational], n: usize, beta: &Rational) -> bool {
    let truncated: Rational = values.iter().map(|v| v.min(beta).clone()).sum();
    Rational::from_integer(n.into()) * beta == truncated
}

pub fn value_strategy() -> impl Strategy<Value = Rational> {
    (0i64..=24, 1i64..=4).prop_map(|(p, q)| rat(p, q))
}

pub fn instance_strategy(max_n: usize, max_m: usize) -> impl Strategy<Value = Instance> {
    (1..=max_n, 0..=max_m).prop_flat_map(|(n, m)| {
        proptest::collection::vec(proptest::collection::vec(value_strategy(), m), n)
            .prop_map(|rows| Instance::new(rows).unwrap())
    })
}

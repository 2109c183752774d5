//! Per-agent share values: truncated proportional share, the exact MMS
//! oracle, and the small predicates used to inspect allocations.

mod oracle;

use num_traits::{Signed, Zero};
use serde::Serialize;

pub use oracle::{mms_exact, MmsWitness, OracleLimits};

use crate::error::{Error, Result};
use crate::number::{rat, serde_rational, serde_rational_opt, Rational};

/// Truncated proportional share: the largest `beta` with
/// `n * beta = sum(min(v, beta))`.
///
/// If exactly `t` values are truncated (the `t` largest), the fixed point is
/// `(total - top_t) / (n - t)`; it is consistent when the `t`-th largest value
/// is at least that and the `(t+1)`-th is at most that. Only `t < n` can be
/// consistent, so the candidates are enumerated directly.
pub fn tps(values: &[Rational], n: usize) -> Result<Rational> {
    if n == 0 {
        return Err(Error::Domain("agent count must be at least 1".into()));
    }
    let mut sorted: Vec<&Rational> = values.iter().collect();
    sorted.sort_by(|a, b| b.cmp(a));
    let total: Rational = values.iter().sum();

    let mut best: Option<Rational> = None;
    let mut top = Rational::zero();
    for t in 0..=values.len().min(n - 1) {
        if t > 0 {
            top += sorted[t - 1];
        }
        let beta = (&total - &top) / Rational::from_integer((n - t).into());
        let above = t == 0 || *sorted[t - 1] >= beta;
        let below = sorted.get(t).is_none_or(|v| **v <= beta);
        if above && below {
            // Ties can make several truncation counts consistent; they must agree.
            if let Some(prev) = &best {
                if *prev != beta {
                    return Err(Error::Inconsistency(format!(
                        "truncation counts disagree on the fixed point: {prev} vs {beta}"
                    )));
                }
            }
            best = Some(beta);
        }
    }
    best.ok_or_else(|| Error::Inconsistency("no consistent truncation count".into()))
}

/// Checks `TPS >= MMS >= n/(2n-1) * TPS` exactly.
pub fn sandwich_check(values: &[Rational], n: usize, limits: &OracleLimits) -> Result<bool> {
    let tps = tps(values, n)?;
    let mms = mms_exact(values, n, limits)?.value;
    let lower = &tps * rat(n as i64, 2 * n as i64 - 1);
    Ok(tps >= mms && mms >= lower)
}

/// Share values for one agent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShareResult {
    pub agent: usize,
    #[serde(with = "serde_rational")]
    pub tps: Rational,
    #[serde(with = "serde_rational_opt")]
    pub mms: Option<Rational>,
    pub feasible_partition: Option<Vec<Vec<usize>>>,
}

/// TPS of `agent`, and its exact MMS when `oracle` limits are given.
pub fn share_result(
    values: &[Rational],
    n: usize,
    agent: usize,
    oracle: Option<&OracleLimits>,
) -> Result<ShareResult> {
    let tps = tps(values, n)?;
    let witness = oracle.map(|limits| mms_exact(values, n, limits)).transpose()?;
    Ok(ShareResult {
        agent,
        tps,
        mms: witness.as_ref().map(|w| w.value.clone()),
        feasible_partition: witness.map(|w| w.partition),
    })
}

fn check_increasing(name: &str, ranks: &[usize]) -> Result<()> {
    if ranks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(format!("{name} ranks must be strictly increasing")));
    }
    Ok(())
}

/// Whether some injective `f: T -> X` maps every rank to a rank no larger.
///
/// Each constraint "`f(u) <= u`" is a downward-closed set, so matching the
/// `i`-th smallest of `T` with the `i`-th smallest of `X` is optimal.
pub fn is_dominance_bundle(t_ranks: &[usize], x_ranks: &[usize]) -> Result<bool> {
    check_increasing("T", t_ranks)?;
    check_increasing("X", x_ranks)?;
    Ok(x_ranks.len() >= t_ranks.len() && t_ranks.iter().zip(x_ranks).all(|(t, x)| x <= t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemClass {
    Pebble,
    Ice,
    Water,
}

/// Pebble at `>= 2/9 alpha`, ice in `[4/27 alpha, 2/9 alpha)`, water below.
pub fn classify_item(value: &Rational, alpha: &Rational) -> Result<ItemClass> {
    if !alpha.is_positive() {
        return Err(Error::Domain(format!("alpha {alpha} must be positive")));
    }
    Ok(if *value >= alpha * rat(2, 9) {
        ItemClass::Pebble
    } else if *value >= alpha * rat(4, 27) {
        ItemClass::Ice
    } else {
        ItemClass::Water
    })
}

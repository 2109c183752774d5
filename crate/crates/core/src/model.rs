//! Instances, allocations and the ordered-instance transform.
//!
//! Agents and items are 0-based indices. An [`OrderedInstance`] stores, for
//! every agent, its values sorted descending; item `r` of the ordered
//! instance is "the `r`-th most valuable item", whichever original item that
//! is for each agent. Allocations computed on ordered instances are mapped
//! back to original items with [`lift_allocation`].

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::number::{serde_rational_matrix, serde_rational_vec, Rational};

/// `n` agents with additive, non-negative valuations over `m` goods.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    valuations: Vec<Vec<Rational>>,
    items: usize,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    m: usize,
    #[serde(with = "serde_rational_matrix")]
    valuations: Vec<Vec<Rational>>,
}

impl Instance {
    pub fn new(valuations: Vec<Vec<Rational>>) -> Result<Self> {
        let items = valuations.first().map_or(0, Vec::len);
        Self::with_items(items, valuations)
    }

    fn with_items(items: usize, valuations: Vec<Vec<Rational>>) -> Result<Self> {
        if valuations.is_empty() {
            return Err(Error::Domain("an instance needs at least one agent".into()));
        }
        for (agent, row) in valuations.iter().enumerate() {
            if row.len() != items {
                return Err(Error::Structural(format!(
                    "agent {agent} has {} values, expected {items}",
                    row.len()
                )));
            }
            if let Some(item) = row.iter().position(Signed::is_negative) {
                return Err(Error::Domain(format!(
                    "agent {agent} has a negative value for item {item}"
                )));
            }
        }
        Ok(Self { valuations, items })
    }

    pub fn n(&self) -> usize {
        self.valuations.len()
    }

    pub fn m(&self) -> usize {
        self.items
    }

    pub fn value(&self, agent: usize, item: usize) -> &Rational {
        &self.valuations[agent][item]
    }

    pub fn row(&self, agent: usize) -> &[Rational] {
        &self.valuations[agent]
    }

    pub fn valuations(&self) -> &[Vec<Rational>] {
        &self.valuations
    }

    pub fn bundle_value<'a>(&self, agent: usize, items: impl IntoIterator<Item = &'a usize>) -> Rational {
        items
            .into_iter()
            .fold(Rational::zero(), |acc, &item| acc + &self.valuations[agent][item])
    }

    pub fn total_value(&self, agent: usize) -> Rational {
        self.valuations[agent].iter().fold(Rational::zero(), |a, v| a + v)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.valuations.len() != file.n {
            return Err(Error::Structural(format!(
                "n = {} but {} valuation rows given",
                file.n,
                file.valuations.len()
            )));
        }
        Self::with_items(file.m, file.valuations)
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            n: self.n(),
            m: self.m(),
            valuations: self.valuations.clone(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }
}

/// Instance whose items are in a common descending order for every agent,
/// plus the per-agent rank maps needed to translate back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderedInstance {
    base: Instance,
    /// `rank_maps[i][j]` is the ordered rank of original item `j` for agent `i`.
    rank_maps: Vec<Vec<usize>>,
}

impl OrderedInstance {
    pub fn base(&self) -> &Instance {
        &self.base
    }

    pub fn rank_maps(&self) -> &[Vec<usize>] {
        &self.rank_maps
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn m(&self) -> usize {
        self.base.m()
    }

    /// Value agent `agent` assigns to the item at ordered rank `rank`.
    pub fn value(&self, agent: usize, rank: usize) -> &Rational {
        self.base.value(agent, rank)
    }
}

/// Sorts every agent's row descending, ties broken by lower original index.
pub fn order_instance(inst: &Instance) -> OrderedInstance {
    let mut rows = Vec::with_capacity(inst.n());
    let mut rank_maps = Vec::with_capacity(inst.n());
    for agent in 0..inst.n() {
        let row = inst.row(agent);
        let mut order: Vec<usize> = (0..inst.m()).collect();
        order.sort_by(|&a, &b| row[b].cmp(&row[a]).then(a.cmp(&b)));
        let mut rank_of = vec![0; inst.m()];
        for (rank, &item) in order.iter().enumerate() {
            rank_of[item] = rank;
        }
        rows.push(order.iter().map(|&item| row[item].clone()).collect());
        rank_maps.push(rank_of);
    }
    OrderedInstance {
        base: Instance {
            valuations: rows,
            items: inst.m(),
        },
        rank_maps,
    }
}

/// A (possibly partial) assignment of items to agents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub bundles: BTreeMap<usize, BTreeSet<usize>>,
    pub satisfied: BTreeSet<usize>,
    pub unallocated: BTreeSet<usize>,
}

impl Allocation {
    /// Nothing assigned; all `m` items unallocated.
    pub fn empty(m: usize) -> Self {
        Self {
            unallocated: (0..m).collect(),
            ..Self::default()
        }
    }

    pub fn bundle(&self, agent: usize) -> Option<&BTreeSet<usize>> {
        self.bundles.get(&agent)
    }

    /// Moves `items` from the unallocated pool into `agent`'s bundle.
    pub fn assign(&mut self, agent: usize, items: impl IntoIterator<Item = usize>) -> Result<()> {
        let items: Vec<usize> = items.into_iter().collect();
        if let Some(item) = items.iter().find(|i| !self.unallocated.contains(i)) {
            return Err(Error::Structural(format!(
                "item {item} is not available for agent {agent}"
            )));
        }
        let bundle = self.bundles.entry(agent).or_default();
        for item in items {
            self.unallocated.remove(&item);
            bundle.insert(item);
        }
        Ok(())
    }

    /// Checks disjointness, coverage of `[m]`, and index ranges.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        let mut seen = vec![false; m];
        let mut mark = |item: usize, owner: &str| -> Result<()> {
            match seen.get_mut(item) {
                None => Err(Error::Structural(format!("{owner} holds unknown item {item}"))),
                Some(true) => Err(Error::Structural(format!("item {item} appears twice"))),
                Some(slot) => {
                    *slot = true;
                    Ok(())
                }
            }
        };
        for (&agent, bundle) in &self.bundles {
            if agent >= n {
                return Err(Error::Structural(format!("unknown agent {agent}")));
            }
            for &item in bundle {
                mark(item, &format!("agent {agent}"))?;
            }
        }
        for &item in &self.unallocated {
            mark(item, "the unallocated pool")?;
        }
        if let Some(item) = seen.iter().position(|s| !s) {
            return Err(Error::Structural(format!("item {item} is unaccounted for")));
        }
        if let Some(agent) = self.satisfied.iter().find(|a| !self.bundles.contains_key(a)) {
            return Err(Error::Structural(format!(
                "agent {agent} is marked satisfied without a bundle"
            )));
        }
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.unallocated.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("allocation serializes")
    }
}

/// Per-agent targets `alpha_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdVector(#[serde(with = "serde_rational_vec")] Vec<Rational>);

impl ThresholdVector {
    pub fn new(alpha: Vec<Rational>) -> Result<Self> {
        if let Some(agent) = alpha.iter().position(Signed::is_negative) {
            return Err(Error::Domain(format!("threshold of agent {agent} is negative")));
        }
        Ok(Self(alpha))
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::Domain(format!(
                "threshold vector has {} entries for {n} agents",
                self.0.len()
            )));
        }
        Ok(())
    }

    pub fn get(&self, agent: usize) -> &Rational {
        &self.0[agent]
    }

    pub fn set(&mut self, agent: usize, value: Rational) {
        self.0[agent] = value;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Rational] {
        &self.0
    }

    /// Accepts either a bare array or `{"alpha": [...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum File {
            Bare(ThresholdVector),
            Wrapped { alpha: ThresholdVector },
        }
        let parsed: File = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let (File::Bare(v) | File::Wrapped { alpha: v }) = parsed;
        Self::new(v.0)
    }
}

/// Maps an allocation of ordered ranks back to original items.
///
/// Ranks are swept in increasing order; the owner of rank `r` takes its
/// most valuable remaining original item (lowest index on ties). Unowned
/// ranks are skipped and whatever is left after the sweep is unallocated.
/// Each owner therefore gets, at its `r`-th pick, an item worth at least its
/// `r`-th largest value.
pub fn lift_allocation(ordered_alloc: &Allocation, ordered: &OrderedInstance) -> Result<Allocation> {
    let m = ordered.m();
    let mut owner: Vec<Option<usize>> = vec![None; m];
    for (&agent, bundle) in &ordered_alloc.bundles {
        if agent >= ordered.n() {
            return Err(Error::Structural(format!("rank owned by unknown agent {agent}")));
        }
        for &rank in bundle {
            match owner.get_mut(rank) {
                None => return Err(Error::Structural(format!("rank {rank} out of range"))),
                Some(Some(other)) => {
                    return Err(Error::Structural(format!(
                        "rank {rank} owned by agents {other} and {agent}"
                    )))
                }
                Some(slot) => *slot = Some(agent),
            }
        }
    }

    let original = original_rows(ordered);
    let mut remaining: BTreeSet<usize> = (0..m).collect();
    let mut lifted = Allocation {
        bundles: ordered_alloc.bundles.keys().map(|&a| (a, BTreeSet::new())).collect(),
        satisfied: ordered_alloc.satisfied.clone(),
        unallocated: BTreeSet::new(),
    };
    for agent in owner.into_iter().flatten() {
        let row = &original[agent];
        let mut best: Option<usize> = None;
        for &item in &remaining {
            if best.is_none_or(|b| row[item] > row[b]) {
                best = Some(item);
            }
        }
        let item = best.expect("one remaining item per owned rank");
        remaining.remove(&item);
        lifted.bundles.get_mut(&agent).expect("owner has a bundle").insert(item);
    }
    lifted.unallocated = remaining;
    Ok(lifted)
}

/// Reconstructs the original (unsorted) value rows from the rank maps.
fn original_rows(ordered: &OrderedInstance) -> Vec<Vec<Rational>> {
    (0..ordered.n())
        .map(|agent| {
            ordered.rank_maps[agent]
                .iter()
                .map(|&rank| ordered.value(agent, rank).clone())
                .collect()
        })
        .collect()
}

/// Multiplies agent `agent`'s row by `factor > 0`.
pub fn scale_agent(inst: &Instance, agent: usize, factor: &Rational) -> Result<Instance> {
    if !factor.is_positive() {
        return Err(Error::Domain(format!("scale factor {factor} must be positive")));
    }
    if agent >= inst.n() {
        return Err(Error::Domain(format!("unknown agent {agent}")));
    }
    let mut valuations = inst.valuations.clone();
    for v in &mut valuations[agent] {
        *v *= factor;
    }
    Ok(Instance {
        valuations,
        items: inst.items,
    })
}

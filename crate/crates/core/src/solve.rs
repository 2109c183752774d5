//! End-to-end solve: order the instance, run the allocator, lift the result
//! back to original items and report exact ratios.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::allocator::{run_alg_with, AllocOptions, EventKind, Rule, TraceEvent};
use crate::error::Result;
use crate::fptas::FptasOutcome;
use crate::harness::{verify_allocation, AgentReport};
use crate::model::{lift_allocation, order_instance, Allocation, Instance, ThresholdVector};
use crate::number::{serde_rational_opt, serde_rational_vec, Rational};
use crate::shares::{mms_exact, tps, OracleLimits};

/// Where the per-agent thresholds come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlphaMode {
    Explicit(ThresholdVector),
    /// Truncated proportional shares.
    Tps,
    /// Exact maximin shares.
    Oracle(OracleLimits),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolveReport {
    /// Allocation over original items.
    pub allocation: Allocation,
    pub satisfied: BTreeSet<usize>,
    pub failed_agents: BTreeSet<usize>,
    #[serde(with = "serde_rational_vec")]
    pub alpha: Vec<Rational>,
    pub agents: Vec<AgentReport>,
    #[serde(with = "serde_rational_opt")]
    pub min_ratio: Option<Rational>,
    pub reductions: BTreeMap<Rule, usize>,
    pub trace: Vec<TraceEvent>,
}

impl SolveReport {
    pub fn succeeded(&self) -> bool {
        self.failed_agents.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn thresholds(inst: &Instance, mode: &AlphaMode) -> Result<(ThresholdVector, Option<OracleLimits>)> {
    let n = inst.n();
    match mode {
        AlphaMode::Explicit(alpha) => {
            alpha.check_len(n)?;
            Ok((alpha.clone(), None))
        }
        AlphaMode::Tps => {
            let alpha = (0..n).map(|a| tps(inst.row(a), n)).collect::<Result<_>>()?;
            Ok((ThresholdVector::new(alpha)?, None))
        }
        AlphaMode::Oracle(limits) => {
            let alpha = (0..n)
                .map(|a| mms_exact(inst.row(a), n, limits).map(|w| w.value))
                .collect::<Result<_>>()?;
            Ok((ThresholdVector::new(alpha)?, Some(*limits)))
        }
    }
}

pub fn solve(inst: &Instance, mode: &AlphaMode) -> Result<SolveReport> {
    solve_with(inst, mode, AllocOptions::default())
}

pub fn solve_with(inst: &Instance, mode: &AlphaMode, options: AllocOptions) -> Result<SolveReport> {
    let (alpha, oracle) = thresholds(inst, mode)?;
    let ordered = order_instance(inst);
    let outcome = run_alg_with(&ordered, &alpha, options)?;
    let allocation = lift_allocation(&outcome.allocation, &ordered)?;
    let verify = verify_allocation(inst, &allocation, Some(&alpha), oracle.as_ref())?;
    Ok(SolveReport {
        satisfied: outcome.satisfied,
        failed_agents: outcome.failed_agents,
        alpha: alpha.as_slice().to_vec(),
        agents: verify.agents,
        min_ratio: verify.min_ratio,
        reductions: count_reductions(&outcome.trace),
        trace: outcome.trace,
        allocation,
    })
}

pub fn count_reductions(trace: &[TraceEvent]) -> BTreeMap<Rule, usize> {
    let mut counts = BTreeMap::new();
    for rule in trace
        .iter()
        .filter(|e| e.event == EventKind::Reduction)
        .filter_map(|e| e.rule)
    {
        *counts.entry(rule).or_insert(0) += 1;
    }
    counts
}

/// JSON shape of a threshold-descent result.
#[derive(Clone, Debug, Serialize)]
pub struct FptasReport {
    pub allocation: Allocation,
    #[serde(with = "serde_rational_vec")]
    pub final_alpha: Vec<Rational>,
    pub iterations: usize,
    pub iteration_bound: usize,
    pub per_iteration_failures: Vec<BTreeSet<usize>>,
    pub agents: Vec<AgentReport>,
    #[serde(with = "serde_rational_opt")]
    pub min_ratio: Option<Rational>,
}

impl FptasReport {
    pub fn new(inst: &Instance, outcome: FptasOutcome, bound: usize, oracle: Option<&OracleLimits>) -> Result<Self> {
        let verify = verify_allocation(inst, &outcome.allocation, Some(&outcome.final_alpha), oracle)?;
        Ok(Self {
            allocation: outcome.allocation,
            final_alpha: outcome.final_alpha.as_slice().to_vec(),
            iterations: outcome.iterations,
            iteration_bound: bound,
            per_iteration_failures: outcome.per_iteration_failures,
            agents: verify.agents,
            min_ratio: verify.min_ratio,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

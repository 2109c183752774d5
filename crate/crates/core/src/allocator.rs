//! Round-based (7/9)-threshold allocator for ordered instances.
//!
//! Each round starts with `k` active agents and the unallocated items
//! `u_1 >= u_2 >= ...` (positions are 1-based, and positions past the end
//! are zero-valued phantoms that are never handed out). A round grants one
//! bundle to one agent whose value for it is at least `7/9 * alpha_i`:
//!
//! * stage 1, when `u_1 + u_{k+1}` is enough for someone: reductions R0..R3,
//!   else the pair `{u_1, u_h}` with the largest workable `h`;
//! * stage 2, when `u_1 + u_{k+1} + u_{2k+1}` is enough: reduction R2, else
//!   the triple `{u_1, u_h, u_t}` with `t = max(h + 1, 2k + 1)` and the
//!   largest workable `h`;
//! * stage 3: reduction R3, else bag-filling from `{u_1, u_{k+1}, u_{2k+1}}`
//!   with `u_{3k+1}, u_{3k+2}, ...` until some agent is satisfied.
//!
//! Reduction windows use the current `k`. A reduction that fires ends the
//! round. Agent ties go to the lowest index.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, OrderedInstance, ThresholdVector};
use crate::number::{rat, Rational};

/// The approximation factor every granted bundle must reach.
pub fn approximation_factor() -> Rational {
    rat(7, 9)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    R0,
    R1,
    R2,
    R3,
}

impl Rule {
    pub const ALL: [Rule; 4] = [Rule::R0, Rule::R1, Rule::R2, Rule::R3];

    pub fn index(self) -> usize {
        self as usize
    }

    /// 1-based positions of the rule's window for `k` active agents.
    pub fn window(self, k: usize) -> Vec<usize> {
        match self {
            Rule::R0 => vec![1],
            Rule::R1 => vec![k, k + 1],
            Rule::R2 => vec![2 * k - 1, 2 * k, 2 * k + 1],
            Rule::R3 => vec![3 * k - 2, 3 * k - 1, 3 * k, 3 * k + 1],
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.index())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Reduction,
    Stage1,
    Stage2,
    Stage3,
    Fail,
}

/// One line of the allocator trace. `items` are ordered-instance ranks
/// (0-based); `h` and `t` are the 1-based positions chosen in stages 1 and 2.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Number of active agents when the round started.
    pub round: usize,
    pub event: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<Rule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<usize>,
    #[serde(default)]
    pub items: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
}

/// Serializes a trace as JSON lines.
pub fn trace_to_json_lines(trace: &[TraceEvent]) -> String {
    trace
        .iter()
        .map(|e| serde_json::to_string(e).expect("trace event serializes") + "\n")
        .collect()
}

/// Value of the item at 1-based position `j` of `values`, zero past the end.
pub fn phantom_item(values: &[Rational], j: usize) -> Rational {
    assert!(j >= 1, "positions are 1-based");
    values.get(j - 1).cloned().unwrap_or_else(Rational::zero)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AllocOptions {
    /// Verify the value bounds implied by every inapplicable reduction.
    pub check_bounds: bool,
}

impl Default for AllocOptions {
    fn default() -> Self {
        Self {
            check_bounds: cfg!(debug_assertions),
        }
    }
}

/// Result of one allocator run on an ordered instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveOutcome {
    /// Bundles over ordered ranks.
    pub allocation: Allocation,
    pub satisfied: BTreeSet<usize>,
    pub failed_agents: BTreeSet<usize>,
    pub trace: Vec<TraceEvent>,
    /// How many reduction-bound checks ran (and passed).
    pub bound_checks: usize,
}

impl SolveOutcome {
    pub fn succeeded(&self) -> bool {
        self.failed_agents.is_empty()
    }

    pub fn reductions_fired(&self) -> usize {
        self.trace
            .iter()
            .filter(|e| e.event == EventKind::Reduction)
            .count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundResult {
    Allocated { agent: usize },
    Failed,
}

/// Mutable state of a run: remaining items and agents, granted bundles.
#[derive(Clone, Debug)]
pub struct AllocatorState<'a> {
    inst: &'a OrderedInstance,
    /// Unallocated ranks, ascending (so values are descending for everyone).
    unallocated: Vec<usize>,
    /// Active agents, ascending.
    active: Vec<usize>,
    /// `7/9 * alpha_i` per agent.
    targets: Vec<Rational>,
    allocation: Allocation,
    trace: Vec<TraceEvent>,
    options: AllocOptions,
    bound_checks: usize,
}

impl<'a> AllocatorState<'a> {
    pub fn new(inst: &'a OrderedInstance, alpha: &ThresholdVector, options: AllocOptions) -> Result<Self> {
        alpha.check_len(inst.n())?;
        let factor = approximation_factor();
        Ok(Self {
            inst,
            unallocated: (0..inst.m()).collect(),
            active: (0..inst.n()).collect(),
            targets: alpha.as_slice().iter().map(|a| a * &factor).collect(),
            allocation: Allocation::empty(inst.m()),
            trace: Vec::new(),
            options,
            bound_checks: 0,
        })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn unallocated(&self) -> &[usize] {
        &self.unallocated
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Rank at 1-based position `j`, `None` for phantoms.
    fn rank_at(&self, j: usize) -> Option<usize> {
        self.unallocated.get(j - 1).copied()
    }

    fn value(&self, agent: usize, positions: &[usize]) -> Rational {
        positions
            .iter()
            .filter_map(|&j| self.rank_at(j))
            .fold(Rational::zero(), |acc, r| acc + self.inst.value(agent, r))
    }

    fn meets(&self, agent: usize, positions: &[usize]) -> bool {
        self.value(agent, positions) >= self.targets[agent]
    }

    fn first_satisfied(&self, positions: &[usize]) -> Option<usize> {
        self.active.iter().copied().find(|&a| self.meets(a, positions))
    }

    fn anyone_meets(&self, positions: &[usize]) -> bool {
        self.first_satisfied(positions).is_some()
    }

    /// Unallocated values of `agent` in position order (phantoms excluded).
    pub fn remaining_values(&self, agent: usize) -> Vec<Rational> {
        self.unallocated
            .iter()
            .map(|&r| self.inst.value(agent, r).clone())
            .collect()
    }

    fn grant(&mut self, agent: usize, positions: &[usize], mut event: TraceEvent) -> Result<()> {
        let ranks: Vec<usize> = positions.iter().filter_map(|&j| self.rank_at(j)).collect();
        self.allocation.assign(agent, ranks.iter().copied())?;
        self.allocation.satisfied.insert(agent);
        self.unallocated.retain(|r| !ranks.contains(r));
        self.active.retain(|&a| a != agent);
        event.agent = Some(agent);
        event.items = ranks;
        self.trace.push(event);
        Ok(())
    }

    /// Applies `rule` if some active agent values its window enough.
    pub fn try_reduction(&mut self, rule: Rule) -> Result<Option<(usize, Vec<usize>)>> {
        let k = self.active.len();
        if k == 0 {
            return Ok(None);
        }
        let window = rule.window(k);
        match self.first_satisfied(&window) {
            Some(agent) => {
                let event = TraceEvent {
                    round: k,
                    event: EventKind::Reduction,
                    rule: Some(rule),
                    agent: None,
                    items: Vec::new(),
                    h: None,
                    t: None,
                };
                self.grant(agent, &window, event)?;
                let items = self.trace.last().unwrap().items.clone();
                Ok(Some((agent, items)))
            }
            None => {
                if self.options.check_bounds {
                    self.check_reduction_bound(rule)?;
                }
                Ok(None)
            }
        }
    }

    /// When `R_r` does not apply, every item at position `>= r*k + 1` is
    /// worth less than `target / (r + 1)` to every active agent.
    fn check_reduction_bound(&mut self, rule: Rule) -> Result<()> {
        let k = self.active.len();
        let r = rule.index();
        let parts = Rational::from_integer((r + 1).into());
        for &agent in &self.active {
            let limit = &self.targets[agent] / &parts;
            for j in (r * k + 1).max(1)..=self.unallocated.len() {
                let v = self.inst.value(agent, self.unallocated[j - 1]);
                if *v >= limit {
                    return Err(Error::Inconsistency(format!(
                        "{rule} inapplicable but agent {agent} values position {j} at {v} >= {limit}"
                    )));
                }
            }
        }
        self.bound_checks += 1;
        Ok(())
    }

    /// Runs one round; see the module docs for the stage logic.
    pub fn run_round(&mut self) -> Result<RoundResult> {
        let k = self.active.len();
        if k == 0 {
            return Err(Error::Domain("no active agents left".into()));
        }
        let size = self.unallocated.len();
        let event = |kind, h, t| TraceEvent {
            round: k,
            event: kind,
            rule: None,
            agent: None,
            items: Vec::new(),
            h,
            t,
        };

        let (positions, trace_event) = if self.anyone_meets(&[1, k + 1]) {
            for rule in Rule::ALL {
                if let Some((agent, _)) = self.try_reduction(rule)? {
                    return Ok(RoundResult::Allocated { agent });
                }
            }
            let h = (2..=size)
                .rev()
                .find(|&h| self.anyone_meets(&[1, h]))
                .ok_or_else(|| Error::Inconsistency("stage 1 gate held but no pair works".into()))?;
            (vec![1, h], event(EventKind::Stage1, Some(h), None))
        } else if self.anyone_meets(&[1, k + 1, 2 * k + 1]) {
            if let Some((agent, _)) = self.try_reduction(Rule::R2)? {
                return Ok(RoundResult::Allocated { agent });
            }
            let (h, t) = (2..=size)
                .rev()
                .map(|h| (h, (h + 1).max(2 * k + 1)))
                .find(|&(h, t)| self.anyone_meets(&[1, h, t]))
                .ok_or_else(|| {
                    Error::Inconsistency("stage 2 gate held but no triple works".into())
                })?;
            (vec![1, h, t], event(EventKind::Stage2, Some(h), Some(t)))
        } else {
            if let Some((agent, _)) = self.try_reduction(Rule::R3)? {
                return Ok(RoundResult::Allocated { agent });
            }
            let mut bag: Vec<usize> = [1, k + 1, 2 * k + 1]
                .into_iter()
                .filter(|&j| j <= size)
                .collect();
            for j in 3 * k + 1..=size {
                if self.anyone_meets(&bag) {
                    break;
                }
                bag.push(j);
            }
            (bag, event(EventKind::Stage3, None, None))
        };

        match self.first_satisfied(&positions) {
            Some(agent) => {
                self.grant(agent, &positions, trace_event)?;
                Ok(RoundResult::Allocated { agent })
            }
            None => {
                let mut fail = event(EventKind::Fail, trace_event.h, trace_event.t);
                fail.items = positions.iter().filter_map(|&j| self.rank_at(j)).collect();
                self.trace.push(fail);
                Ok(RoundResult::Failed)
            }
        }
    }

    fn finish(self) -> SolveOutcome {
        let failed_agents: BTreeSet<usize> = self.active.iter().copied().collect();
        SolveOutcome {
            satisfied: self.allocation.satisfied.clone(),
            allocation: self.allocation,
            failed_agents,
            trace: self.trace,
            bound_checks: self.bound_checks,
        }
    }
}

/// Runs the allocator with default options.
pub fn run_alg(ordered: &OrderedInstance, alpha: &ThresholdVector) -> Result<SolveOutcome> {
    run_alg_with(ordered, alpha, AllocOptions::default())
}

/// Runs rounds until every agent holds a bundle or a round fails. Positions
/// past the last item behave as zero-valued items, so instances with
/// `m < 2n` need no explicit padding.
pub fn run_alg_with(
    ordered: &OrderedInstance,
    alpha: &ThresholdVector,
    options: AllocOptions,
) -> Result<SolveOutcome> {
    let mut state = AllocatorState::new(ordered, alpha, options)?;
    while !state.active.is_empty() {
        if state.run_round()? == RoundResult::Failed {
            break;
        }
    }
    Ok(state.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{order_instance, Instance};
    use crate::number::int;

    fn identical(n: usize, row: &[Rational]) -> OrderedInstance {
        order_instance(&Instance::new(vec![row.to_vec(); n]).unwrap())
    }

    fn alpha(values: &[Rational]) -> ThresholdVector {
        ThresholdVector::new(values.to_vec()).unwrap()
    }

    fn tightness_row() -> Vec<Rational> {
        let mut row = vec![rat(7, 9), rat(7, 9), rat(1, 3), rat(1, 3), rat(1, 3)];
        row.extend(std::iter::repeat_n(rat(1, 9), 4));
        row
    }

    #[test]
    fn phantom_positions() {
        let u = vec![int(3), int(2), int(1)];
        assert_eq!(phantom_item(&u, 2), int(2));
        assert_eq!(phantom_item(&u, 5), int(0));
        assert_eq!(phantom_item(&[], 1), int(0));
    }

    #[test]
    fn windows_use_current_k() {
        assert_eq!(Rule::R1.window(2), vec![2, 3]);
        assert_eq!(Rule::R2.window(2), vec![3, 4, 5]);
        assert_eq!(Rule::R3.window(1), vec![1, 2, 3, 4]);
    }

    #[test]
    fn r0_fires_on_large_item() {
        let inst = identical(2, &[rat(4, 5), rat(1, 10), rat(1, 10)]);
        let a = alpha(&[int(1), int(1)]);
        let mut state = AllocatorState::new(&inst, &a, AllocOptions { check_bounds: true }).unwrap();
        assert_eq!(state.try_reduction(Rule::R0).unwrap(), Some((0, vec![0])));
    }

    #[test]
    fn r1_fires_on_pair() {
        let inst = identical(2, &[rat(1, 2), rat(2, 5), rat(2, 5), rat(1, 10)]);
        let a = alpha(&[int(1), int(1)]);
        let mut state = AllocatorState::new(&inst, &a, AllocOptions { check_bounds: true }).unwrap();
        assert_eq!(state.try_reduction(Rule::R0).unwrap(), None);
        assert_eq!(state.try_reduction(Rule::R1).unwrap(), Some((0, vec![1, 2])));
    }

    #[test]
    fn small_items_block_every_rule() {
        let inst = identical(2, &vec![rat(7, 40); 8]);
        let a = alpha(&[int(1), int(1)]);
        let mut state = AllocatorState::new(&inst, &a, AllocOptions { check_bounds: true }).unwrap();
        for rule in Rule::ALL {
            assert_eq!(state.try_reduction(rule).unwrap(), None);
        }
        assert_eq!(state.bound_checks, 4);
        assert!(state.remaining_values(0).iter().all(|v| *v < rat(7, 36)));
    }

    #[test]
    fn two_unit_items() {
        let inst = identical(2, &[int(1), int(1)]);
        let out = run_alg(&inst, &alpha(&[int(1), int(1)])).unwrap();
        assert!(out.succeeded());
        assert_eq!(out.allocation.bundle(0).unwrap(), &BTreeSet::from([0]));
        assert_eq!(out.allocation.bundle(1).unwrap(), &BTreeSet::from([1]));
        assert!(out.trace.iter().all(|e| e.rule == Some(Rule::R0)));
    }

    #[test]
    fn tightness_trace() {
        let inst = identical(3, &tightness_row());
        let out = run_alg(&inst, &alpha(&[int(1), int(1), int(1)])).unwrap();
        assert!(out.succeeded());
        let rules: Vec<_> = out.trace.iter().map(|e| (e.round, e.event, e.rule)).collect();
        assert_eq!(
            rules,
            vec![
                (3, EventKind::Reduction, Some(Rule::R0)),
                (2, EventKind::Reduction, Some(Rule::R0)),
                (1, EventKind::Reduction, Some(Rule::R2)),
            ]
        );
        assert_eq!(out.allocation.bundle(2).unwrap(), &BTreeSet::from([2, 3, 4]));
        let values: Vec<Rational> = (0..3)
            .map(|a| inst.base().bundle_value(a, out.allocation.bundle(a).unwrap()))
            .collect();
        assert_eq!(values.iter().min().unwrap(), &rat(7, 9));
    }

    #[test]
    fn insufficient_total_fails_in_bag_filling() {
        let inst = identical(2, &vec![rat(7, 40); 4]);
        let out = run_alg(&inst, &alpha(&[int(1), int(1)])).unwrap();
        assert!(!out.succeeded());
        assert_eq!(out.failed_agents.len(), 2);
        let last = out.trace.last().unwrap();
        assert_eq!(last.event, EventKind::Fail);
        assert_eq!(out.allocation.unallocated.len(), 4);
    }

    #[test]
    fn single_agent_takes_everything() {
        let row = vec![int(2), int(1), int(1)];
        let inst = identical(1, &row);
        let out = run_alg(&inst, &alpha(&[int(4)])).unwrap();
        assert!(out.succeeded());
        assert_eq!(out.allocation.bundle(0).unwrap().len(), 3);
        let out = run_alg(&inst, &alpha(&[int(6)])).unwrap();
        assert!(!out.succeeded());
    }

    #[test]
    fn tps_thresholds_on_433() {
        let inst = identical(2, &[int(4), int(3), int(3)]);
        let out = run_alg(&inst, &alpha(&[int(5), int(5)])).unwrap();
        assert!(out.succeeded());
        assert_eq!(out.trace[0].rule, Some(Rule::R0));
        assert_eq!(out.trace[1].rule, Some(Rule::R1));
        assert_eq!(out.allocation.bundle(1).unwrap(), &BTreeSet::from([1, 2]));
    }

    #[test]
    fn stage_one_picks_largest_h() {
        // No reduction applies (u1 < 7/9, u2+u3 < 7/9, ...), but u1 + u_h works.
        let row = vec![rat(1, 2), rat(1, 3), rat(1, 3), rat(29, 100), rat(1, 10), rat(1, 20)];
        let inst = identical(2, &row);
        let a = alpha(&[int(1), int(1)]);
        let mut state = AllocatorState::new(&inst, &a, AllocOptions { check_bounds: true }).unwrap();
        state.run_round().unwrap();
        let ev = &state.trace()[0];
        assert_eq!(ev.event, EventKind::Stage1);
        assert_eq!(ev.h, Some(4));
        assert_eq!(ev.items, vec![0, 3]);
    }

    #[test]
    fn stage_two_triple() {
        let row = vec![rat(1, 3), rat(1, 4), rat(1, 4), rat(1, 5), rat(1, 5), rat(1, 5), rat(1, 5)];
        let inst = identical(2, &row);
        let a = alpha(&[int(1), int(1)]);
        let mut state = AllocatorState::new(&inst, &a, AllocOptions { check_bounds: true }).unwrap();
        state.run_round().unwrap();
        let ev = &state.trace()[0];
        assert_eq!(ev.event, EventKind::Stage2);
        assert_eq!((ev.h, ev.t), (Some(3), Some(5)));
        assert_eq!(ev.items, vec![0, 2, 4]);
    }

    #[test]
    fn rejects_wrong_threshold_length() {
        let inst = identical(2, &[int(1)]);
        assert!(matches!(run_alg(&inst, &alpha(&[int(1)])), Err(Error::Domain(_))));
    }

    #[test]
    fn trace_json_lines() {
        let inst = identical(2, &[int(1), int(1)]);
        let out = run_alg(&inst, &alpha(&[int(1), int(1)])).unwrap();
        let text = trace_to_json_lines(&out.trace);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["round"], 2);
        assert_eq!(first["event"], "reduction");
        assert_eq!(first["rule"], "R0");
        assert_eq!(first["agent"], 0);
        assert_eq!(first["items"], serde_json::json!([0]));
    }
}

//! Threshold descent towards a `(7/9 - eps)`-MMS allocation.
//!
//! Targets start at each agent's truncated proportional share, an upper
//! bound on its MMS. Whenever the allocator fails, the agents left without a
//! bundle had targets above their MMS, so exactly those targets shrink by a
//! factor `1 - eps`. The loop stops at the first complete run.

use std::collections::BTreeSet;

use num_traits::{One, Signed};
use serde::Serialize;

use crate::allocator::{run_alg_with, AllocOptions, TraceEvent};
use crate::error::{Error, Result};
use crate::model::{lift_allocation, order_instance, Allocation, Instance, ThresholdVector};
use crate::number::{rat, serde_rational, Rational};
use crate::shares::tps;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FptasConfig {
    #[serde(with = "serde_rational")]
    pub epsilon: Rational,
    /// Defaults to [`iteration_bound`] when `None`.
    pub max_iterations: Option<usize>,
    #[serde(skip)]
    pub alloc: AllocOptions,
}

impl FptasConfig {
    pub fn new(epsilon: Rational) -> Result<Self> {
        let cfg = Self {
            epsilon,
            max_iterations: None,
            alloc: AllocOptions::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_positive() || self.epsilon > rat(1, 2) {
            return Err(Error::Domain(format!(
                "epsilon {} must lie in (0, 1/2]",
                self.epsilon
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::Domain("iteration cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FptasOutcome {
    /// Final allocation over original items.
    pub allocation: Allocation,
    pub final_alpha: ThresholdVector,
    pub iterations: usize,
    /// Agents left without a bundle in each failed iteration.
    pub per_iteration_failures: Vec<BTreeSet<usize>>,
    /// Trace of the final, successful allocator run.
    pub trace: Vec<TraceEvent>,
}

/// `n * (ceil(ln 2 / eps) + 1)`.
///
/// Targets start below `2 * MMS_i`, so `ceil(ln 2 / eps)` cuts by `1 - eps`
/// bring any target to at most `MMS_i`, after which that agent never fails
/// again; every failed iteration cuts at least one agent.
pub fn iteration_bound(n: usize, epsilon: &Rational) -> usize {
    let eps = crate::number::to_f64(epsilon);
    let per_agent = (std::f64::consts::LN_2 / eps).ceil() as usize + 1;
    n * per_agent
}

pub fn run_fptas(inst: &Instance, cfg: &FptasConfig) -> Result<FptasOutcome> {
    cfg.validate()?;
    let n = inst.n();
    let cap = cfg
        .max_iterations
        .unwrap_or_else(|| iteration_bound(n, &cfg.epsilon));
    let ordered = order_instance(inst);
    let shrink = Rational::one() - &cfg.epsilon;

    let mut alpha = ThresholdVector::new(
        (0..n)
            .map(|agent| tps(inst.row(agent), n))
            .collect::<Result<_>>()?,
    )?;
    let mut failures = Vec::new();
    for iteration in 1..=cap {
        let outcome = run_alg_with(&ordered, &alpha, cfg.alloc)?;
        if outcome.succeeded() {
            return Ok(FptasOutcome {
                allocation: lift_allocation(&outcome.allocation, &ordered)?,
                final_alpha: alpha,
                iterations: iteration,
                per_iteration_failures: failures,
                trace: outcome.trace,
            });
        }
        for &agent in &outcome.failed_agents {
            let lowered = alpha.get(agent) * &shrink;
            alpha.set(agent, lowered);
        }
        failures.push(outcome.failed_agents);
    }
    Err(Error::Inconsistency(format!(
        "threshold descent did not finish within {cap} iterations"
    )))
}

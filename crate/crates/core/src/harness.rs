//! Instance generators, allocation verification and oracle-driven campaigns.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{run_alg_with, AllocOptions, EventKind, Rule};
use crate::error::{Error, Result};
use crate::fptas::{run_fptas, FptasConfig};
use crate::model::{lift_allocation, order_instance, Allocation, Instance, ThresholdVector};
use crate::number::{
    int, parse_rational, rat, ratio, serde_rational, serde_rational_opt, Rational,
};
use crate::shares::{classify_item, mms_exact, ItemClass, OracleLimits};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Independent values `p/q`, `p` uniform in `[0, max_numerator]`,
    /// `q` uniform in `[1, max_denominator]`.
    Uniform,
    /// Like uniform, but each value is "large" (upper third of the numerator
    /// range) with probability 1/4 and "small" (lower sixth) otherwise.
    Bimodal,
    /// Three identical agents: `7/9, 7/9, 1/3, 1/3, 1/3` plus water items
    /// summing to `4/9`. Every agent's MMS is exactly one.
    Tightness,
    /// One row shared by every agent: the constant `value` when given,
    /// otherwise a uniform random row.
    Identical,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Family::Uniform),
            "bimodal" => Ok(Family::Bimodal),
            "tightness" => Ok(Family::Tightness),
            "identical" => Ok(Family::Identical),
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_numerator")]
    pub max_numerator: u32,
    #[serde(default = "default_denominator")]
    pub max_denominator: u32,
    /// Tightness family only: number of water items (even, at least 4).
    #[serde(default = "default_water")]
    pub water_count: usize,
    /// Identical family only: constant item value.
    #[serde(default, with = "serde_rational_opt")]
    pub value: Option<Rational>,
}

fn default_numerator() -> u32 {
    30
}

fn default_denominator() -> u32 {
    6
}

fn default_water() -> usize {
    4
}

impl GeneratorSpec {
    pub fn new(family: Family, n: usize, m: usize, seed: u64) -> Self {
        Self {
            family,
            n,
            m,
            seed,
            max_numerator: default_numerator(),
            max_denominator: default_denominator(),
            water_count: default_water(),
            value: None,
        }
    }

    pub fn tightness(water_count: usize) -> Self {
        Self {
            water_count,
            ..Self::new(Family::Tightness, 3, 5 + water_count, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("n must be positive".into()));
        }
        match self.family {
            Family::Tightness => {
                if self.n != 3 {
                    return Err(Error::Domain("the tightness family has exactly 3 agents".into()));
                }
                // Two bundles need exactly 2/9 of water each.
                if self.water_count < 4 || !self.water_count.is_multiple_of(2) {
                    return Err(Error::Domain(format!(
                        "water_count must be even and at least 4, got {}",
                        self.water_count
                    )));
                }
            }
            _ => {
                if self.m == 0 {
                    return Err(Error::Domain("m must be positive".into()));
                }
                if self.max_denominator == 0 {
                    return Err(Error::Domain("max_denominator must be positive".into()));
                }
                if self.family == Family::Bimodal && self.max_numerator < 6 {
                    return Err(Error::Domain("bimodal needs max_numerator >= 6".into()));
                }
            }
        }
        if let Some(v) = &self.value {
            if v.is_negative() {
                return Err(Error::Domain("value must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// Deterministic in `spec` (including the seed).
pub fn gen_instance(spec: &GeneratorSpec) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let draw = |lo: u32, hi: u32, rng: &mut ChaCha8Rng| {
        let p = rng.random_range(lo..=hi);
        let q = rng.random_range(1..=spec.max_denominator);
        rat(p as i64, q as i64)
    };
    let rows = match spec.family {
        Family::Uniform => (0..spec.n)
            .map(|_| (0..spec.m).map(|_| draw(0, spec.max_numerator, &mut rng)).collect())
            .collect(),
        Family::Bimodal => {
            let top = spec.max_numerator;
            (0..spec.n)
                .map(|_| {
                    (0..spec.m)
                        .map(|_| {
                            if rng.random_bool(0.25) {
                                draw(top - top / 3, top, &mut rng)
                            } else {
                                draw(0, top / 6, &mut rng)
                            }
                        })
                        .collect()
                })
                .collect()
        }
        Family::Identical => {
            let row: Vec<Rational> = match &spec.value {
                Some(v) => vec![v.clone(); spec.m],
                None => (0..spec.m).map(|_| draw(0, spec.max_numerator, &mut rng)).collect(),
            };
            vec![row; spec.n]
        }
        Family::Tightness => {
            let mut row = vec![rat(7, 9), rat(7, 9), rat(1, 3), rat(1, 3), rat(1, 3)];
            row.extend(std::iter::repeat_n(
                rat(4, 9 * spec.water_count as i64),
                spec.water_count,
            ));
            vec![row; 3]
        }
    };
    Instance::new(rows)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Census {
    pub pebble: usize,
    pub ice: usize,
    pub water: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgentReport {
    pub agent: usize,
    #[serde(with = "serde_rational")]
    pub value: Rational,
    #[serde(with = "serde_rational_opt")]
    pub threshold: Option<Rational>,
    #[serde(with = "serde_rational_opt")]
    pub ratio_vs_threshold: Option<Rational>,
    #[serde(with = "serde_rational_opt")]
    pub mms: Option<Rational>,
    #[serde(with = "serde_rational_opt")]
    pub ratio_vs_mms: Option<Rational>,
    /// Item classes relative to the threshold (or MMS when no threshold).
    pub census: Option<Census>,
}

impl AgentReport {
    /// MMS-relative ratio when known, else threshold-relative.
    pub fn ratio(&self) -> Option<&Rational> {
        self.ratio_vs_mms.as_ref().or(self.ratio_vs_threshold.as_ref())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub agents: Vec<AgentReport>,
    /// Minimum of the per-agent ratios; `None` when no ratio is defined.
    #[serde(with = "serde_rational_opt")]
    pub min_ratio: Option<Rational>,
}

/// Exact per-agent values and ratios of `alloc`. A ratio against a zero
/// reference counts as one.
pub fn verify_allocation(
    inst: &Instance,
    alloc: &Allocation,
    alpha: Option<&ThresholdVector>,
    oracle: Option<&OracleLimits>,
) -> Result<VerifyReport> {
    alloc.validate(inst.n(), inst.m())?;
    if let Some(a) = alpha {
        a.check_len(inst.n())?;
    }
    let mut agents = Vec::with_capacity(inst.n());
    for agent in 0..inst.n() {
        let value = alloc
            .bundle(agent)
            .map_or_else(Rational::zero, |b| inst.bundle_value(agent, b));
        let threshold = alpha.map(|a| a.get(agent).clone());
        let mms = oracle
            .map(|limits| mms_exact(inst.row(agent), inst.n(), limits).map(|w| w.value))
            .transpose()?;
        let reference = threshold
            .as_ref()
            .filter(|t| t.is_positive())
            .or(mms.as_ref().filter(|m| m.is_positive()));
        let census = reference.map(|r| {
            let mut c = Census::default();
            for &item in alloc.bundle(agent).into_iter().flatten() {
                match classify_item(inst.value(agent, item), r).expect("positive reference") {
                    ItemClass::Pebble => c.pebble += 1,
                    ItemClass::Ice => c.ice += 1,
                    ItemClass::Water => c.water += 1,
                }
            }
            c
        });
        agents.push(AgentReport {
            agent,
            ratio_vs_threshold: threshold.as_ref().map(|t| ratio(&value, t)),
            ratio_vs_mms: mms.as_ref().map(|m| ratio(&value, m)),
            value,
            threshold,
            mms,
            census,
        });
    }
    let min_ratio = agents.iter().filter_map(AgentReport::ratio).min().cloned();
    Ok(VerifyReport { agents, min_ratio })
}

/// Campaign configuration (the `campaign --config` file).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub families: Vec<Family>,
    /// `[n, m]` pairs; ignored by the tightness family.
    #[serde(default)]
    pub sizes: Vec<[usize; 2]>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// One threshold-descent row per epsilon, in addition to the run at the
    /// exact MMS thresholds.
    #[serde(default)]
    pub epsilon_grid: Vec<String>,
    #[serde(default = "default_water_counts")]
    pub water_counts: Vec<usize>,
    #[serde(default = "default_numerator")]
    pub max_numerator: u32,
    #[serde(default = "default_denominator")]
    pub max_denominator: u32,
    #[serde(default)]
    pub check_bounds: bool,
}

fn default_water_counts() -> Vec<usize> {
    vec![4]
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    fn specs(&self) -> Vec<GeneratorSpec> {
        let mut specs = Vec::new();
        for &family in &self.families {
            for &seed in &self.seeds {
                if family == Family::Tightness {
                    specs.extend(self.water_counts.iter().map(|&w| GeneratorSpec {
                        seed,
                        ..GeneratorSpec::tightness(w)
                    }));
                    continue;
                }
                for &[n, m] in &self.sizes {
                    specs.push(GeneratorSpec {
                        max_numerator: self.max_numerator,
                        max_denominator: self.max_denominator,
                        ..GeneratorSpec::new(family, n, m, seed)
                    });
                }
            }
        }
        specs
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CampaignRow {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// `None` for the run at the exact MMS thresholds.
    #[serde(with = "serde_rational_opt")]
    pub epsilon: Option<Rational>,
    /// Minimum over agents of value / MMS.
    #[serde(with = "serde_rational")]
    pub min_ratio: Rational,
    pub iterations: usize,
    pub failures: usize,
    pub reductions_fired: usize,
    #[serde(skip)]
    pub rule_counts: BTreeMap<Rule, usize>,
    #[serde(skip)]
    pub instance: Instance,
    #[serde(skip)]
    pub allocation: Allocation,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CampaignSummary {
    pub rows: Vec<CampaignRow>,
    /// Agents left unsatisfied at exact MMS thresholds; must be zero.
    pub total_failures: usize,
    pub min_ratio: Option<Rational>,
    pub rule_counts: BTreeMap<Rule, usize>,
    /// Threshold-descent iteration counts.
    pub iteration_histogram: BTreeMap<usize, usize>,
    pub bound_checks: usize,
}

pub const CSV_HEADER: &str = "family,n,m,seed,epsilon,min_ratio_num,min_ratio_den,iterations,failures,reductions_fired";

impl CampaignSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let family = serde_json::to_value(row.family).unwrap();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                family.as_str().unwrap(),
                row.n,
                row.m,
                row.seed,
                row.epsilon.as_ref().map(|e| e.to_string()).unwrap_or_default(),
                row.min_ratio.numer(),
                row.min_ratio.denom(),
                row.iterations,
                row.failures,
                row.reductions_fired
            ));
        }
        out
    }
}

struct Evaluated {
    rows: Vec<CampaignRow>,
    bound_checks: usize,
}

fn evaluate(spec: &GeneratorSpec, epsilons: &[Rational], check_bounds: bool, limits: &OracleLimits) -> Result<Evaluated> {
    let inst = gen_instance(spec)?;
    let mms: Vec<Rational> = (0..inst.n())
        .map(|a| mms_exact(inst.row(a), inst.n(), limits).map(|w| w.value))
        .collect::<Result<_>>()?;
    let min_ratio = |alloc: &Allocation| -> Rational {
        (0..inst.n())
            .map(|a| {
                let v = alloc.bundle(a).map_or_else(Rational::zero, |b| inst.bundle_value(a, b));
                ratio(&v, &mms[a])
            })
            .min()
            .unwrap_or_else(|| int(1))
    };
    let options = AllocOptions { check_bounds };

    let ordered = order_instance(&inst);
    let alpha = ThresholdVector::new(mms.clone())?;
    let outcome = run_alg_with(&ordered, &alpha, options)?;
    let allocation = lift_allocation(&outcome.allocation, &ordered)?;
    let mut rule_counts = BTreeMap::new();
    for e in outcome.trace.iter().filter(|e| e.event == EventKind::Reduction) {
        *rule_counts.entry(e.rule.unwrap()).or_insert(0) += 1;
    }
    let mut rows = vec![CampaignRow {
        family: spec.family,
        n: inst.n(),
        m: inst.m(),
        seed: spec.seed,
        epsilon: None,
        min_ratio: min_ratio(&allocation),
        iterations: 1,
        failures: outcome.failed_agents.len(),
        reductions_fired: outcome.reductions_fired(),
        rule_counts,
        instance: inst.clone(),
        allocation,
    }];

    for eps in epsilons {
        let mut cfg = FptasConfig::new(eps.clone())?;
        cfg.alloc = options;
        let out = run_fptas(&inst, &cfg)?;
        let mut rule_counts = BTreeMap::new();
        for e in out.trace.iter().filter(|e| e.event == EventKind::Reduction) {
            *rule_counts.entry(e.rule.unwrap()).or_insert(0) += 1;
        }
        rows.push(CampaignRow {
            family: spec.family,
            n: inst.n(),
            m: inst.m(),
            seed: spec.seed,
            epsilon: Some(eps.clone()),
            min_ratio: min_ratio(&out.allocation),
            iterations: out.iterations,
            failures: 0,
            reductions_fired: rule_counts.values().sum(),
            rule_counts,
            instance: inst.clone(),
            allocation: out.allocation,
        });
    }
    Ok(Evaluated {
        rows,
        bound_checks: outcome.bound_checks,
    })
}

/// Runs every generated instance (in parallel) against the exact oracle.
pub fn campaign(config: &CampaignConfig, limits: &OracleLimits) -> Result<CampaignSummary> {
    let epsilons: Vec<Rational> = config
        .epsilon_grid
        .iter()
        .map(|e| parse_rational(e))
        .collect::<Result<_>>()?;
    let evaluated: Vec<Evaluated> = config
        .specs()
        .par_iter()
        .map(|spec| evaluate(spec, &epsilons, config.check_bounds, limits))
        .collect::<Result<_>>()?;

    let mut summary = CampaignSummary::default();
    for ev in evaluated {
        summary.bound_checks += ev.bound_checks;
        for row in ev.rows {
            if row.epsilon.is_none() {
                summary.total_failures += row.failures;
            } else {
                *summary.iteration_histogram.entry(row.iterations).or_insert(0) += 1;
            }
            for (&rule, &c) in &row.rule_counts {
                *summary.rule_counts.entry(rule).or_insert(0) += c;
            }
            if summary.min_ratio.as_ref().is_none_or(|m| row.min_ratio < *m) {
                summary.min_ratio = Some(row.min_ratio.clone());
            }
            summary.rows.push(row);
        }
    }
    Ok(summary)
}

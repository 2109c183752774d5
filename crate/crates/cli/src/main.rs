//! `mms`: solve, inspect and benchmark maximin-share allocations.
//!
//! Exit status is 0 on success, 2 when the allocator leaves agents without a
//! bundle and 1 on any error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mms_core::harness::{campaign, gen_instance, verify_allocation, AgentReport, CampaignConfig, Family, GeneratorSpec};
use mms_core::number::{format_rational, parse_rational, to_f64, Rational};
use mms_core::shares::share_result;
use mms_core::solve::{solve, AlphaMode, FptasReport};
use mms_core::{iteration_bound, run_fptas, Allocation, FptasConfig, Instance, OracleLimits, ThresholdVector};

#[derive(Parser)]
#[command(name = "mms", version, about = "Approximate maximin-share allocation of indivisible goods")]
struct Cli {
    /// Append decimal approximations to rationals in human-readable output.
    #[arg(long, global = true)]
    float: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the allocator once against fixed thresholds.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Threshold file: a JSON array or {"alpha": [...]}.
        #[arg(long, conflicts_with = "alpha_mode")]
        alpha: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Tps)]
        alpha_mode: Mode,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Lower thresholds from the truncated shares until every agent is served.
    Fptas {
        #[arg(long)]
        instance: PathBuf,
        /// Step size in (0, 1/2], e.g. 1/10.
        #[arg(long)]
        epsilon: String,
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Also report ratios against the exact maximin shares.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Exact maximin share of one agent, with an optimal partition.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        agent: usize,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Truncated proportional share of one agent.
    Tps {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        agent: usize,
    },
    /// Generate a random or structured instance.
    Gen {
        #[arg(long)]
        family: Family,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        water_count: usize,
        /// Constant item value for the identical family.
        #[arg(long)]
        value: Option<String>,
        #[arg(long, default_value_t = 30)]
        max_numerator: u32,
        #[arg(long, default_value_t = 6)]
        max_denominator: u32,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact values and ratios of an existing allocation.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        allocation: PathBuf,
        #[arg(long)]
        alpha: Option<PathBuf>,
        /// Compare against the exact maximin shares.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Run a seeded benchmark campaign and emit a CSV table.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        limits: LimitArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Tps,
    Oracle,
}

#[derive(Args)]
struct LimitArgs {
    /// Oracle search space cap, as a power of two.
    #[arg(long, default_value_t = 16)]
    max_items: u32,
    #[arg(long, default_value_t = 5)]
    max_agents: usize,
}

impl LimitArgs {
    fn limits(&self) -> OracleLimits {
        OracleLimits {
            max_items: self.max_items,
            max_agents: self.max_agents,
        }
    }
}

struct Printer {
    float: bool,
}

impl Printer {
    fn num(&self, value: &Rational) -> String {
        if self.float && !value.is_integer() {
            format!("{} (~{:.6})", format_rational(value), to_f64(value))
        } else {
            format_rational(value)
        }
    }

    fn opt(&self, value: Option<&Rational>) -> String {
        value.map_or_else(|| "-".into(), |v| self.num(v))
    }

    fn agents(&self, agents: &[AgentReport], alloc: &Allocation) {
        for a in agents {
            let items: Vec<usize> = alloc.bundle(a.agent).into_iter().flatten().copied().collect();
            let mut line = format!("agent {}: value {} items {:?}", a.agent, self.num(&a.value), items);
            if let Some(t) = &a.threshold {
                line += &format!(" threshold {} ratio {}", self.num(t), self.opt(a.ratio_vs_threshold.as_ref()));
            }
            if let Some(m) = &a.mms {
                line += &format!(" mms {} ratio {}", self.num(m), self.opt(a.ratio_vs_mms.as_ref()));
            }
            println!("{line}");
        }
        if !alloc.unallocated.is_empty() {
            println!("unallocated: {:?}", alloc.unallocated);
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    Instance::from_json(&read(path)?).with_context(|| format!("invalid instance {}", path.display()))
}

fn load_alpha(path: &Path) -> Result<ThresholdVector> {
    ThresholdVector::from_json(&read(path)?).with_context(|| format!("invalid thresholds {}", path.display()))
}

fn check_agent(inst: &Instance, agent: usize) -> Result<()> {
    if agent >= inst.n() {
        bail!("agent {agent} out of range for {} agents", inst.n());
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let p = Printer { float: cli.float };
    match cli.command {
        Command::Solve {
            instance,
            alpha,
            alpha_mode,
            json,
            limits,
        } => {
            let inst = load_instance(&instance)?;
            let mode = match (alpha, alpha_mode) {
                (Some(path), _) => AlphaMode::Explicit(load_alpha(&path)?),
                (None, Mode::Tps) => AlphaMode::Tps,
                (None, Mode::Oracle) => AlphaMode::Oracle(limits.limits()),
            };
            let report = solve(&inst, &mode)?;
            if json {
                println!("{}", report.to_json());
            } else {
                p.agents(&report.agents, &report.allocation);
                println!("min ratio: {}", p.opt(report.min_ratio.as_ref()));
                let fired: Vec<String> = report.reductions.iter().map(|(r, c)| format!("{r} x{c}")).collect();
                println!("reductions: {}", if fired.is_empty() { "none".into() } else { fired.join(", ") });
                println!("failed agents: {:?}", report.failed_agents);
            }
            Ok(if report.succeeded() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Fptas {
            instance,
            epsilon,
            max_iterations,
            oracle,
            json,
            limits,
        } => {
            let inst = load_instance(&instance)?;
            let mut cfg = FptasConfig::new(parse_rational(&epsilon)?)?;
            cfg.max_iterations = max_iterations;
            let bound = iteration_bound(inst.n(), &cfg.epsilon);
            let outcome = run_fptas(&inst, &cfg)?;
            let limits = limits.limits();
            let report = FptasReport::new(&inst, outcome, bound, oracle.then_some(&limits))?;
            if json {
                println!("{}", report.to_json());
            } else {
                p.agents(&report.agents, &report.allocation);
                println!("iterations: {} (bound {})", report.iterations, report.iteration_bound);
                let alpha: Vec<String> = report.final_alpha.iter().map(|a| p.num(a)).collect();
                println!("final thresholds: [{}]", alpha.join(", "));
                println!("min ratio: {}", p.opt(report.min_ratio.as_ref()));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            instance,
            agent,
            json,
            limits,
        } => {
            let inst = load_instance(&instance)?;
            check_agent(&inst, agent)?;
            let share = share_result(inst.row(agent), inst.n(), agent, Some(&limits.limits()))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&share)?);
            } else {
                println!("mms: {}", p.opt(share.mms.as_ref()));
                for (i, bundle) in share.feasible_partition.iter().flatten().enumerate() {
                    let value = inst.bundle_value(agent, bundle);
                    println!("bundle {i}: {bundle:?} value {}", p.num(&value));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Tps { instance, agent } => {
            let inst = load_instance(&instance)?;
            check_agent(&inst, agent)?;
            let share = share_result(inst.row(agent), inst.n(), agent, None)?;
            println!("{}", p.num(&share.tps));
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen {
            family,
            n,
            m,
            seed,
            water_count,
            value,
            max_numerator,
            max_denominator,
            out,
        } => {
            let spec = GeneratorSpec {
                family,
                n,
                m: if family == Family::Tightness { 5 + water_count } else { m },
                seed,
                max_numerator,
                max_denominator,
                water_count,
                value: value.as_deref().map(parse_rational).transpose()?,
            };
            let inst = gen_instance(&spec)?;
            emit(out.as_deref(), &format!("{}\n", inst.to_json()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            instance,
            allocation,
            alpha,
            oracle,
            json,
            limits,
        } => {
            let inst = load_instance(&instance)?;
            let alloc = Allocation::from_json(&read(&allocation)?)
                .with_context(|| format!("invalid allocation {}", allocation.display()))?;
            let alpha = alpha.as_deref().map(load_alpha).transpose()?;
            let limits = limits.limits();
            let report = verify_allocation(&inst, &alloc, alpha.as_ref(), oracle.then_some(&limits))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                p.agents(&report.agents, &alloc);
                println!("min ratio: {}", p.opt(report.min_ratio.as_ref()));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Campaign { config, out, limits } => {
            let cfg = CampaignConfig::from_json(&read(&config)?)
                .with_context(|| format!("invalid campaign config {}", config.display()))?;
            let summary = campaign(&cfg, &limits.limits())?;
            emit(out.as_deref(), &summary.to_csv())?;
            eprintln!(
                "{} rows, {} failed agents, min ratio {}, {} bound checks",
                summary.rows.len(),
                summary.total_failures,
                p.opt(summary.min_ratio.as_ref()),
                summary.bound_checks
            );
            let rules: Vec<String> = summary.rule_counts.iter().map(|(r, c)| format!("{r}={c}")).collect();
            eprintln!("rule firings: {}", rules.join(" "));
            let hist: Vec<String> = summary.iteration_histogram.iter().map(|(i, c)| format!("{i}:{c}")).collect();
            eprintln!("iteration histogram: {}", hist.join(" "));
            Ok(if summary.total_failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the generic error status; 2 is reserved for failed agents.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

//! Seeded experiment runs: for each seed, k-means++ and Lloyd produce a
//! reference solution, every requested strategy builds a tree from it, and
//! the trees are scored against the reference.
//!
//! Tree building consumes no randomness; the seed only drives the reference
//! solution, so all strategies see the same centers for a given seed.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::builder::{Strategy, TreeBuilder};
use crate::error::{invalid, Result};
use crate::io::fmt_f64;
use crate::kmeans::{fit, LloydConfig};
use crate::metrics::{MetricsReport, Reference};
use crate::tree::{CenterSet, Dataset, ThresholdTree};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    /// Iteration limits for Lloyd; its `seed` field is replaced per run.
    pub lloyd: LloydConfig,
}

impl RunConfig {
    pub fn new(k: usize, strategies: Vec<Strategy>, seeds: Vec<u64>) -> Self {
        Self {
            k,
            strategies,
            seeds,
            lloyd: LloydConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return invalid("k must be >= 1");
        }
        if self.seeds.is_empty() {
            return invalid("at least one seed is required");
        }
        if self.strategies.is_empty() {
            return invalid("at least one strategy is required");
        }
        Ok(())
    }
}

/// Reference solution for one seed.
#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub seed: u64,
    pub centers: CenterSet,
    pub reference: Reference,
    pub lloyd_iterations: usize,
    pub elapsed: Duration,
}

/// One tree built for one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub strategy: Strategy,
    pub seed: u64,
    pub report: MetricsReport,
    pub reference_cost: f64,
    pub tree: ThresholdTree,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub normalized_cost: f64,
    pub waes: f64,
    pub wad: f64,
    pub nmi: f64,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub references: Vec<ReferenceRun>,
    /// Ordered by strategy (as configured), then seed (as configured).
    pub runs: Vec<SeedRun>,
}

/// Fits the reference solution for one seed.
pub fn reference_run(data: &Dataset, k: usize, seed: u64, lloyd: &LloydConfig) -> Result<ReferenceRun> {
    let start = Instant::now();
    let cfg = LloydConfig { seed, ..*lloyd };
    let fitted = fit(data, k, &cfg)?;
    let reference = Reference::from_centers(data, &fitted.centers);
    Ok(ReferenceRun {
        seed,
        centers: fitted.centers,
        reference,
        lloyd_iterations: fitted.iterations,
        elapsed: start.elapsed(),
    })
}

pub fn run_experiment(data: &Dataset, cfg: &RunConfig) -> Result<Experiment> {
    cfg.validate()?;
    let per_seed: Vec<Result<(ReferenceRun, Vec<SeedRun>)>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let reference = reference_run(data, cfg.k, seed, &cfg.lloyd)?;
            let mut builder = TreeBuilder::new(data, &reference.centers)?;
            let runs = cfg
                .strategies
                .iter()
                .map(|&strategy| {
                    let start = Instant::now();
                    let tree = builder.build(strategy)?;
                    let elapsed = start.elapsed();
                    let report = MetricsReport::evaluate(&tree, data, &reference.reference)?;
                    Ok(SeedRun {
                        strategy,
                        seed,
                        report,
                        reference_cost: reference.reference.cost,
                        tree,
                        elapsed,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((reference, runs))
        })
        .collect();

    let mut references = Vec::with_capacity(cfg.seeds.len());
    let mut by_seed = Vec::with_capacity(cfg.seeds.len());
    for item in per_seed {
        let (r, runs) = item?;
        references.push(r);
        by_seed.push(runs);
    }
    let mut runs = Vec::with_capacity(cfg.seeds.len() * cfg.strategies.len());
    for s in 0..cfg.strategies.len() {
        for seed_runs in &by_seed {
            runs.push(seed_runs[s].clone());
        }
    }
    Ok(Experiment { references, runs })
}

impl Experiment {
    pub fn runs_for(&self, strategy: Strategy) -> impl Iterator<Item = &SeedRun> {
        self.runs.iter().filter(move |r| r.strategy == strategy)
    }

    /// Arithmetic means over seeds for one strategy.
    pub fn summary(&self, strategy: Strategy) -> Option<Summary> {
        let rows: Vec<&SeedRun> = self.runs_for(strategy).collect();
        if rows.is_empty() {
            return None;
        }
        let mean = |f: &dyn Fn(&SeedRun) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
        Some(Summary {
            normalized_cost: mean(&|r| r.report.normalized_cost),
            waes: mean(&|r| r.report.waes),
            wad: mean(&|r| r.report.wad),
            nmi: mean(&|r| r.report.nmi_vs_reference),
        })
    }

    fn strategies(&self) -> Vec<Strategy> {
        let mut out: Vec<Strategy> = Vec::new();
        for r in &self.runs {
            if !out.contains(&r.strategy) {
                out.push(r.strategy);
            }
        }
        out
    }

    /// Result table: one row per (strategy, seed) followed by one `mean` row
    /// per strategy. Contains no timings, so equal inputs give equal bytes.
    pub fn results_csv(&self) -> String {
        let mut out = String::from("strategy,lambda,seed,normalized_cost,waes,wad,nmi,cost,reference_cost,max_depth\n");
        let lambda = |s: Strategy| match s {
            Strategy::ExShallow { lambda } => fmt_f64(lambda),
            _ => String::new(),
        };
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.strategy,
                lambda(r.strategy),
                r.seed,
                fmt_f64(r.report.normalized_cost),
                fmt_f64(r.report.waes),
                fmt_f64(r.report.wad),
                fmt_f64(r.report.nmi_vs_reference),
                fmt_f64(r.report.cost),
                fmt_f64(r.reference_cost),
                r.report.max_depth
            );
        }
        for s in self.strategies() {
            let m = self.summary(s).expect("strategy has runs");
            let _ = writeln!(
                out,
                "{},{},mean,{},{},{},{},,,",
                s,
                lambda(s),
                fmt_f64(m.normalized_cost),
                fmt_f64(m.waes),
                fmt_f64(m.wad),
                fmt_f64(m.nmi)
            );
        }
        out
    }

    /// Wall-clock seconds per run; the tree time includes the reference fit,
    /// as is customary when comparing explainable clusterings.
    pub fn timings_csv(&self) -> String {
        let mut out = String::from("strategy,seed,kmeans_seconds,total_seconds\n");
        for r in &self.runs {
            let km = self
                .references
                .iter()
                .find(|x| x.seed == r.seed)
                .map_or(Duration::ZERO, |x| x.elapsed);
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6}",
                r.strategy,
                r.seed,
                km.as_secs_f64(),
                (km + r.elapsed).as_secs_f64()
            );
        }
        out
    }
}

//! Search over `lambda` for a tree that meets a cost goal and an
//! explanation-size goal.
//!
//! The search starts at `lambda_init`. A tree that is too costly moves the
//! upper end of the bracket down; a tree within budget but with too large a
//! WAES moves the lower end up. Midpoints are geometric, since WAES reacts
//! most strongly to small `lambda`; a bracket whose lower end is 0 probes
//! `lambda = 0` once and otherwise uses `hi * MIN_RELATIVE_LAMBDA` as the
//! geometric floor.

use crate::builder::{Strategy, TreeBuilder, DEFAULT_LAMBDA};
use crate::error::{invalid, Result};
use crate::metrics::{MetricsReport, Reference};
use crate::tree::{CenterSet, Dataset, ThresholdTree};

const MIN_RELATIVE_LAMBDA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationGoal {
    /// Largest acceptable normalized cost.
    pub c_star: f64,
    /// Target WAES.
    pub w_star: f64,
    pub lambda_init: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Builds allowed after the initial one.
    pub max_rounds: usize,
}

impl CalibrationGoal {
    pub fn new(c_star: f64, w_star: f64) -> Self {
        Self {
            c_star,
            w_star,
            lambda_init: DEFAULT_LAMBDA,
            lambda_lo: 0.0,
            lambda_hi: 1.0,
            max_rounds: 12,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.c_star.is_nan() || self.w_star.is_nan() {
            return invalid("calibration goals must not be NaN");
        }
        if !(0.0 <= self.lambda_lo && self.lambda_lo <= self.lambda_init && self.lambda_init <= self.lambda_hi)
            || !self.lambda_hi.is_finite()
        {
            return invalid(format!(
                "need 0 <= lambda_lo <= lambda_init <= lambda_hi < inf, got {} / {} / {}",
                self.lambda_lo, self.lambda_init, self.lambda_hi
            ));
        }
        if self.max_rounds == 0 {
            return invalid("max_rounds must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationStatus {
    /// Cost and WAES goals both met.
    GoalsMet,
    /// Cost goal met, WAES goal not; the lowest-WAES tree within budget is returned.
    CostOnly,
    /// No visited tree met the cost goal; the cheapest tree is returned.
    Failed,
}

/// One build performed during the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub lambda: f64,
    pub normalized_cost: f64,
    pub waes: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub lambda: f64,
    pub tree: ThresholdTree,
    pub report: MetricsReport,
    pub status: CalibrationStatus,
    /// Every build in search order.
    pub probes: Vec<Probe>,
}

impl CalibrationOutcome {
    pub fn failed(&self) -> bool {
        self.status == CalibrationStatus::Failed
    }
}

/// Runs the `lambda` search for ExShallow over fixed reference centers.
pub fn calibrate_lambda(data: &Dataset, centers: &CenterSet, goal: &CalibrationGoal) -> Result<CalibrationOutcome> {
    goal.validate()?;
    let reference = Reference::from_centers(data, centers);
    let mut builder = TreeBuilder::new(data, centers)?;
    let mut visited: Vec<(f64, ThresholdTree, MetricsReport)> = Vec::new();
    let mut build = |lambda: f64, visited: &mut Vec<_>| -> Result<(bool, bool)> {
        let tree = builder.build(Strategy::exshallow(lambda)?)?;
        let report = MetricsReport::evaluate(&tree, data, &reference)?;
        let verdict = (report.normalized_cost <= goal.c_star, report.waes <= goal.w_star);
        visited.push((lambda, tree, report));
        Ok(verdict)
    };

    let (mut lo, mut hi) = (goal.lambda_lo, goal.lambda_hi);
    let mut lambda = goal.lambda_init;
    let mut zero_probed = false;
    let mut verdict = build(lambda, &mut visited)?;
    zero_probed |= lambda == 0.0;

    for _ in 0..goal.max_rounds {
        let next = match verdict {
            (true, true) => break,
            (false, _) => {
                // too costly: lower lambda
                hi = lambda;
                if lo == 0.0 && !zero_probed {
                    zero_probed = true;
                    0.0
                } else if lo == 0.0 && lambda == 0.0 {
                    // nothing cheaper to try
                    break;
                } else {
                    geometric_mid(lo, hi)
                }
            }
            (true, false) => {
                lo = lambda;
                geometric_mid(lo, hi)
            }
        };
        if next == lambda || !(lo..=hi).contains(&next) {
            break;
        }
        lambda = next;
        verdict = build(lambda, &mut visited)?;
    }

    let probes = visited
        .iter()
        .map(|(lambda, _, r)| Probe {
            lambda: *lambda,
            normalized_cost: r.normalized_cost,
            waes: r.waes,
        })
        .collect();

    // first visited wins ties so the result does not depend on float noise
    let within_budget = visited
        .iter()
        .enumerate()
        .filter(|(_, v)| v.2.normalized_cost <= goal.c_star)
        .min_by(|(i, a), (j, b)| a.2.waes.total_cmp(&b.2.waes).then(i.cmp(j)))
        .map(|(i, _)| i);
    let (index, status) = match within_budget {
        Some(i) if visited[i].2.waes <= goal.w_star => (i, CalibrationStatus::GoalsMet),
        Some(i) => (i, CalibrationStatus::CostOnly),
        None => {
            let i = visited
                .iter()
                .enumerate()
                .min_by(|(i, a), (j, b)| a.2.normalized_cost.total_cmp(&b.2.normalized_cost).then(i.cmp(j)))
                .map(|(i, _)| i)
                .expect("at least one build");
            (i, CalibrationStatus::Failed)
        }
    };
    let (lambda, tree, report) = visited.swap_remove(index);
    Ok(CalibrationOutcome {
        lambda,
        tree,
        report,
        status,
        probes,
    })
}

fn geometric_mid(lo: f64, hi: f64) -> f64 {
    let floor = (hi * MIN_RELATIVE_LAMBDA).max(f64::MIN_POSITIVE);
    (lo.max(floor) * hi).sqrt()
}

//! Many seeded growth runs, deduplicated, scored and summarized.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::metrics::{evaluate, PlanMetrics, METRIC_NAMES};
use crate::model::{CountyId, Plan};
use crate::rps::{audit_trace, run_once_with, GrowthConfig, GrowthStatus};

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub runs: u64,
    pub master_seed: u64,
    /// Plans with `pop_stddev_pp` at or below this are good.
    pub good_threshold_pp: f64,
    pub growth: GrowthConfig,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
    /// Histogram bins in the summary.
    pub bins: usize,
}

impl EnsembleConfig {
    pub fn new(runs: u64, master_seed: u64) -> Self {
        EnsembleConfig {
            runs,
            master_seed,
            good_threshold_pp: 1.0,
            growth: GrowthConfig::default(),
            workers: 0,
            bins: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub run_index: u64,
    pub plan: Plan,
    pub metrics: PlanMetrics,
    pub good: bool,
}

/// A completed run whose plan had already been produced by an earlier run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Duplicate {
    pub run_index: u64,
    pub duplicate_of: u64,
}

/// Equal-width counts over `[edges[0], edges[bins]]`; each bin is
/// left-closed and right-open except the last, which is closed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub runs: u64,
    pub completed: u64,
    pub exhausted: u64,
    pub duplicates_removed: u64,
    pub good: u64,
    /// Runs whose trace broke a growth rule; their plans are not retained.
    pub audit_failures: Vec<(u64, String)>,
    pub records: Vec<PlanRecord>,
    pub duplicates: Vec<Duplicate>,
    pub summary: Vec<MetricSummary>,
}

impl EnsembleResult {
    pub fn duplicate_fraction(&self) -> f64 {
        self.duplicates_removed as f64 / self.runs as f64
    }

    pub fn good_fraction(&self) -> f64 {
        self.good as f64 / self.records.len().max(1) as f64
    }
}

/// Members of each district, ascending, districts in label order:
/// `1,4,9|2,3|...`.
pub fn canonical_key(plan: &Plan) -> String {
    plan.members()
        .iter()
        .map(|m| m.iter().map(|c| c.0.to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("|")
}

/// Inverse of [`canonical_key`]: the label of each county, indexed by id.
pub fn parse_key(key: &str) -> Result<Vec<u8>> {
    let mut pairs = Vec::new();
    for (k, part) in key.split('|').enumerate() {
        let label = u8::try_from(k + 1).map_err(|_| Error::domain("too many districts in key"))?;
        if part.is_empty() {
            return Err(Error::domain(format!("district {label} is empty in key")));
        }
        for tok in part.split(',') {
            let id: u32 = tok
                .parse()
                .map_err(|_| Error::domain(format!("bad county id {tok:?} in key")))?;
            if id == 0 {
                return Err(Error::domain("county id 0 in key"));
            }
            pairs.push((CountyId(id), label));
        }
    }
    let mut assignment = vec![0u8; pairs.len()];
    for (id, label) in pairs {
        match assignment.get_mut(id.index()) {
            Some(slot @ 0) => *slot = label,
            _ => return Err(Error::domain(format!("county {id} repeated or out of range in key"))),
        }
    }
    Ok(assignment)
}

enum RunResult {
    Exhausted,
    Completed(Plan, Vec<String>),
}

fn one_run(dataset: &Dataset, config: &EnsembleConfig, run_index: u64) -> Result<RunResult> {
    let out = run_once_with(dataset, &config.growth, config.master_seed, run_index)?;
    Ok(match out.status {
        GrowthStatus::Exhausted => RunResult::Exhausted,
        GrowthStatus::Completed => {
            let problems = audit_trace(dataset, &out, &config.growth);
            RunResult::Completed(out.plan.expect("completed run carries a plan"), problems)
        }
    })
}

const CHUNK: u64 = 1 << 15;

/// Runs `config.runs` growth simulations and collects their plans. The
/// result depends only on the dataset and config, not on thread count.
pub fn run_ensemble(dataset: &Dataset, config: &EnsembleConfig) -> Result<EnsembleResult> {
    if config.runs == 0 {
        return Err(Error::domain("an ensemble needs at least one run"));
    }
    if !(config.good_threshold_pp > 0.0) {
        return Err(Error::domain("good threshold must be positive"));
    }
    let body = || run_sequential_merge(dataset, config);
    if config.workers == 0 {
        body()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?
            .install(body)
    }
}

fn run_sequential_merge(dataset: &Dataset, config: &EnsembleConfig) -> Result<EnsembleResult> {
    let mut res = EnsembleResult {
        runs: config.runs,
        completed: 0,
        exhausted: 0,
        duplicates_removed: 0,
        good: 0,
        audit_failures: Vec::new(),
        records: Vec::new(),
        duplicates: Vec::new(),
        summary: Vec::new(),
    };
    let mut seen: HashMap<Vec<u8>, u64> = HashMap::new();

    let mut start = 0;
    while start < config.runs {
        let end = (start + CHUNK).min(config.runs);
        let batch: Vec<Result<(u64, RunResult, Option<PlanMetrics>)>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let r = one_run(dataset, config, i)?;
                let m = match &r {
                    RunResult::Completed(plan, problems) if problems.is_empty() => Some(evaluate(plan, dataset)?),
                    _ => None,
                };
                Ok((i, r, m))
            })
            .collect();

        for item in batch {
            let (run_index, r, metrics) = item?;
            let (plan, problems) = match r {
                RunResult::Exhausted => {
                    res.exhausted += 1;
                    continue;
                }
                RunResult::Completed(p, problems) => (p, problems),
            };
            res.completed += 1;
            if !problems.is_empty() {
                res.audit_failures.push((run_index, problems.join("; ")));
                continue;
            }
            if let Some(&first) = seen.get(plan.assignment()) {
                res.duplicates_removed += 1;
                res.duplicates.push(Duplicate {
                    run_index,
                    duplicate_of: first,
                });
                continue;
            }
            seen.insert(plan.assignment().to_vec(), run_index);
            let metrics = metrics.expect("audited plan was scored");
            let good = metrics.pop_stddev_pp <= config.good_threshold_pp;
            res.good += u64::from(good);
            res.records.push(PlanRecord {
                run_index,
                plan,
                metrics,
                good,
            });
        }
        start = end;
    }

    res.summary = summarize_records(&res.records, config.bins)?;
    Ok(res)
}

/// Summary of every named metric over the records, skipping undefined values.
pub fn summarize_records(records: &[PlanRecord], bins: usize) -> Result<Vec<MetricSummary>> {
    let mut out = Vec::new();
    for &name in METRIC_NAMES {
        let mut values = Vec::with_capacity(records.len());
        for r in records {
            if let Some(v) = r.metrics.get(name)? {
                values.push(v);
            }
        }
        if !values.is_empty() {
            out.push(MetricSummary {
                metric: name.to_string(),
                summary: summarize(&values, bins)?,
            });
        }
    }
    Ok(out)
}

/// Retained plans at or below `threshold_pp`.
pub fn filter_good(result: &EnsembleResult, threshold_pp: f64) -> Vec<&PlanRecord> {
    result
        .records
        .iter()
        .filter(|r| r.metrics.pop_stddev_pp <= threshold_pp)
        .collect()
}

/// Moments and an equal-width histogram of `values`.
pub fn summarize(values: &[f64], bins: usize) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::domain("cannot summarize an empty list"));
    }
    if bins == 0 {
        return Err(Error::domain("histogram needs at least one bin"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("cannot summarize non-finite values"));
    }
    let n = values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(Summary {
        count: values.len(),
        min,
        max,
        mean,
        stddev: var.sqrt(),
        histogram: histogram(values, min, max, bins),
    })
}

/// Bins `values` over `[lo, hi]`. Edges are `lo + i * (hi - lo) / bins` with
/// the last edge pinned to `hi`; the index estimate is corrected against the
/// edges so that every value lands in the bin whose edges enclose it.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
    let (lo, hi) = if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let step = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|i| i as f64 * step + lo).collect();
    edges[bins] = hi;
    let norm = bins as f64 / (hi - lo);
    let mut counts = vec![0u64; bins];
    for &x in values {
        if x < lo || x > hi {
            continue;
        }
        let mut i = (((x - lo) * norm) as usize).min(bins - 1);
        if x < edges[i] {
            i -= 1;
        } else if i != bins - 1 && x >= edges[i + 1] {
            i += 1;
        }
        counts[i] += 1;
    }
    Histogram { edges, counts }
}

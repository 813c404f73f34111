use std::io::Write;

use rps_core::ensemble::{summarize, EnsembleConfig};
use rps_core::ingest::{DataPaths, DISTRICTS};
use rps_core::metrics::{evaluate as score, PlanMetrics, METRIC_NAMES};
use rps_core::model::PlanViolation;
use rps_core::{load_dataset, run_ensemble};
use serde::{Deserialize, Serialize};

use crate::formats::{self, EnsembleLine, PlanFile};
use crate::{CliError, CompareArgs, EvaluateArgs, GenerateArgs};

pub fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    let dataset = load_dataset(&DataPaths::in_dir(&a.data))?;
    let workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let mut config = EnsembleConfig::new(a.runs, a.seed);
    config.good_threshold_pp = a.good_threshold;
    config.workers = workers.max(1);
    let result = run_ensemble(&dataset, &config)?;

    let mut lines: Vec<EnsembleLine> = result.records.iter().map(EnsembleLine::from_record).collect();
    if a.keep_all {
        for d in &result.duplicates {
            let original = result
                .records
                .iter()
                .find(|r| r.run_index == d.duplicate_of)
                .expect("duplicate points at a retained record");
            lines.push(EnsembleLine::from_duplicate(d, original));
        }
        lines.sort_by_key(|l| l.run_index);
    }
    formats::write_lines(&a.out, &lines)?;

    let deduped = result.records.len();
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "runs                {}", result.runs);
    let _ = writeln!(out, "completed           {}", result.completed);
    let _ = writeln!(out, "exhausted           {}", result.exhausted);
    let _ = writeln!(
        out,
        "duplicates removed  {} ({:.4}%)",
        result.duplicates_removed,
        100.0 * result.duplicate_fraction()
    );
    let _ = writeln!(
        out,
        "good                {} of {deduped} ({:.2}%)",
        result.good,
        100.0 * result.good_fraction()
    );
    for m in &result.summary {
        let s = &m.summary;
        let _ = writeln!(
            out,
            "{:<20} min {:>9.4}  mean {:>9.4}  max {:>9.4}  sd {:>8.4}",
            m.metric, s.min, s.mean, s.max, s.stddev
        );
    }
    if !result.audit_failures.is_empty() {
        for (run, msg) in result.audit_failures.iter().take(10) {
            eprintln!("run {run}: {msg}");
        }
        return Err(CliError::invalid(format!(
            "{} runs broke a growth rule",
            result.audit_failures.len()
        )));
    }
    Ok(())
}

/// What `evaluate` writes: all scores plus each district's population share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    #[serde(flatten)]
    pub metrics: PlanMetrics,
    pub district_share_pct: Vec<f64>,
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let dataset = load_dataset(&DataPaths::in_dir(&a.data))?;
    let plan = PlanFile::read(&a.plan)?
        .to_plan(&dataset, DISTRICTS)
        .map_err(|p| CliError::invalid(format!("plan is not a valid assignment:\n  {}", p.join("\n  "))))?;
    let problems: Vec<String> = plan
        .violations(&dataset.graph)
        .iter()
        .filter(|v| !matches!(v, PlanViolation::SeedMissing { .. }))
        .map(ToString::to_string)
        .collect();
    if !problems.is_empty() {
        return Err(CliError::invalid(format!(
            "plan is not valid:\n  {}",
            problems.join("\n  ")
        )));
    }

    let total = dataset.total_population() as f64;
    let record = Evaluation {
        metrics: score(&plan, &dataset)?,
        district_share_pct: plan
            .districts(&dataset.counties)
            .iter()
            .map(|d| 100.0 * d.population as f64 / total)
            .collect(),
    };
    let mut w = formats::create(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &record)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", a.out.display())))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(e.to_string()))?;
    println!("pop_stddev_pp {:.4}", record.metrics.pop_stddev_pp);
    Ok(())
}

pub fn compare(a: &CompareArgs) -> Result<(), CliError> {
    if !METRIC_NAMES.contains(&a.metric.as_str()) {
        return Err(CliError::invalid(format!(
            "unknown metric {:?}; valid names: {}",
            a.metric,
            METRIC_NAMES.join(", ")
        )));
    }
    let refs = formats::read_refs(&a.reference)?;
    let mut values = Vec::new();
    for line in formats::read_lines(&a.ensemble)? {
        if line.duplicate_of.is_some() || (a.good_only && line.good != Some(true)) {
            continue;
        }
        let Some(m) = &line.metrics else { continue };
        if let Some(v) = m.get(&a.metric)? {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(CliError::invalid(format!("no ensemble values for {}", a.metric)));
    }
    let summary = summarize(&values, a.bins)?;
    let overlays: Vec<(String, f64)> = refs
        .iter()
        .filter_map(|r| r.values.get(&a.metric).map(|&v| (r.name.clone(), v)))
        .collect();
    formats::write_histogram(&a.out, &summary.histogram, &overlays)?;

    println!(
        "{}: {} plans, min {:.4}, mean {:.4}, max {:.4}",
        a.metric,
        values.len(),
        summary.min,
        summary.mean,
        summary.max
    );
    for (name, v) in &overlays {
        let below = values.iter().filter(|&&x| x < *v).count();
        println!(
            "  {name}: {v} (percentile {:.2})",
            100.0 * below as f64 / values.len() as f64
        );
    }
    Ok(())
}

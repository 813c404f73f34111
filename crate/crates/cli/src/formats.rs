//! On-disk formats: plan CSV, ensemble JSON lines, reference constants and
//! histogram CSV.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rps_core::ensemble::{Duplicate, Histogram, PlanRecord};
use rps_core::metrics::{PlanMetrics, METRIC_NAMES};
use rps_core::{CountyId, Dataset, Plan};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    if !path.exists() {
        return Err(CliError::invalid(format!("missing input file {}", path.display())));
    }
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(format!("cannot write {}: {e}", path.display()))
}

/// `county_name,district_label` rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanFile {
    pub rows: Vec<(String, u8)>,
}

#[derive(Deserialize)]
struct PlanRow {
    county_name: String,
    district_label: u8,
}

impl PlanFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize::<PlanRow>().enumerate() {
            let row = rec.map_err(|e| CliError::invalid(format!("{}:{}: {e}", path.display(), i + 2)))?;
            rows.push((row.county_name, row.district_label));
        }
        Ok(PlanFile { rows })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(create(path)?);
        let err = |e: csv::Error| CliError::io(format!("cannot write {}: {e}", path.display()));
        w.write_record(["county_name", "district_label"]).map_err(err)?;
        for (name, label) in &self.rows {
            w.write_record([name.as_str(), &label.to_string()]).map_err(err)?;
        }
        w.flush().map_err(write_err(path))
    }

    pub fn from_plan(plan: &Plan, dataset: &Dataset) -> Self {
        PlanFile {
            rows: dataset
                .counties
                .iter()
                .map(|c| (c.name.clone(), plan.label_of(c.id)))
                .collect(),
        }
    }

    /// Resolves names to a plan over `dataset`. Each district's seed is the
    /// dataset seed it contains, or its lowest id when it holds none.
    pub fn to_plan(&self, dataset: &Dataset, districts: usize) -> Result<Plan, Vec<String>> {
        let mut problems = Vec::new();
        let mut assignment = vec![0u8; dataset.len()];
        let mut seen = HashSet::new();
        for (name, label) in &self.rows {
            if !seen.insert(name.as_str()) {
                problems.push(format!("county {name:?} listed twice"));
                continue;
            }
            match dataset.id_of(name) {
                Some(id) if (1..=districts).contains(&(*label as usize)) => assignment[id.index()] = *label,
                Some(_) => problems.push(format!("county {name:?} has label {label} outside 1..={districts}")),
                None => problems.push(format!("unknown county {name:?}")),
            }
        }
        for c in dataset.counties.iter().filter(|c| !seen.contains(c.name.as_str())) {
            problems.push(format!("county {:?} is not assigned", c.name));
        }
        if !problems.is_empty() {
            return Err(problems);
        }
        let members = Plan::new(assignment.clone(), vec![CountyId(1); districts]).members();
        let seeds = members
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let label = k as u8 + 1;
                dataset
                    .seeds
                    .iter()
                    .copied()
                    .find(|s| assignment[s.index()] == label)
                    .or_else(|| m.first().copied())
                    .unwrap_or(CountyId(1))
            })
            .collect();
        Ok(Plan::new(assignment, seeds))
    }
}

/// One line of the ensemble output. Duplicates only appear with `--keep-all`
/// and carry `duplicate_of` without metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleLine {
    pub run_index: u64,
    /// District label of each county, ordered by county id.
    pub assignment: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplicate_of: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub good: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<PlanMetrics>,
}

impl EnsembleLine {
    pub fn from_record(r: &PlanRecord) -> Self {
        EnsembleLine {
            run_index: r.run_index,
            assignment: r.plan.assignment().to_vec(),
            duplicate_of: None,
            good: Some(r.good),
            metrics: Some(r.metrics.clone()),
        }
    }

    pub fn from_duplicate(d: &Duplicate, original: &PlanRecord) -> Self {
        EnsembleLine {
            run_index: d.run_index,
            assignment: original.plan.assignment().to_vec(),
            duplicate_of: Some(d.duplicate_of),
            good: None,
            metrics: None,
        }
    }
}

pub fn write_lines(path: &Path, lines: &[EnsembleLine]) -> Result<(), CliError> {
    let mut w = create(path)?;
    for line in lines {
        serde_json::to_writer(&mut w, line)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        w.write_all(b"\n").map_err(write_err(path))?;
    }
    w.flush().map_err(write_err(path))
}

pub fn read_lines(path: &Path) -> Result<Vec<EnsembleLine>, CliError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec =
            serde_json::from_str(&line).map_err(|e| CliError::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Metric constants for a plan that cannot be drawn on the county graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePlanRecord {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
}

pub fn read_refs(path: &Path) -> Result<Vec<ReferencePlanRecord>, CliError> {
    let refs: Vec<ReferencePlanRecord> =
        serde_json::from_reader(open(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    let mut names = HashSet::new();
    for r in &refs {
        if !names.insert(r.name.as_str()) {
            return Err(CliError::invalid(format!(
                "{}: reference {:?} appears twice",
                path.display(),
                r.name
            )));
        }
        if let Some(k) = r.values.keys().find(|k| !METRIC_NAMES.contains(&k.as_str())) {
            return Err(CliError::invalid(format!(
                "{}: reference {:?} has unknown metric {k:?}",
                path.display(),
                r.name
            )));
        }
    }
    Ok(refs)
}

/// `bin_low,bin_high,count` rows followed by `ref,<name>,<value>` overlays.
pub fn write_histogram(path: &Path, h: &Histogram, overlays: &[(String, f64)]) -> Result<(), CliError> {
    let mut w = create(path)?;
    let err = write_err(path);
    writeln!(w, "bin_low,bin_high,count").map_err(&err)?;
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{},{}", h.edges[i], h.edges[i + 1], c).map_err(&err)?;
    }
    for (name, v) in overlays {
        writeln!(w, "ref,{name},{v}").map_err(&err)?;
    }
    w.flush().map_err(err)
}

#[derive(Clone, Debug, PartialEq)]
pub enum HistogramRow {
    Bin { low: f64, high: f64, count: u64 },
    Overlay { name: String, value: f64 },
}

/// Parses a file written by [`write_histogram`].
pub fn read_histogram(path: &Path) -> Result<Vec<HistogramRow>, CliError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate().skip(1) {
        let line = line.map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        let bad = || CliError::invalid(format!("{}:{}: malformed row", path.display(), i + 1));
        let f: Vec<&str> = line.split(',').collect();
        let row = match f.as_slice() {
            ["ref", name, v] => HistogramRow::Overlay {
                name: name.to_string(),
                value: v.parse().map_err(|_| bad())?,
            },
            [lo, hi, c] => HistogramRow::Bin {
                low: lo.parse().map_err(|_| bad())?,
                high: hi.parse().map_err(|_| bad())?,
                count: c.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        out.push(row);
    }
    Ok(out)
}

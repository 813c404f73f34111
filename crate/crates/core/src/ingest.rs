//! Loading and validating the generalized-county dataset.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{AdjacencyGraph, CountyId, GeneralizedCounty};

/// Number of congressional districts in the North Carolina setting.
pub const DISTRICTS: usize = 13;

/// One piece of a split county.
#[derive(Clone, Debug, PartialEq)]
pub struct SubCounty {
    pub name: String,
    pub dem_votes: u64,
    pub rep_votes: u64,
    pub area_km2: f64,
    pub perimeter_km: f64,
}

/// How a parent county is divided into equal-population pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub parent: String,
    pub subs: Vec<SubCounty>,
}

impl SplitSpec {
    pub fn k(&self) -> usize {
        self.subs.len()
    }
}

/// Maps unit names, and names of split parents, to county ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NameIndex {
    map: HashMap<String, Vec<CountyId>>,
}

impl NameIndex {
    pub fn new(counties: &[GeneralizedCounty]) -> Self {
        let map = counties.iter().map(|c| (c.name.clone(), vec![c.id])).collect();
        NameIndex { map }
    }

    /// Lets a split parent's name stand for all of its pieces.
    pub fn add_alias(&mut self, name: &str, ids: Vec<CountyId>) {
        self.map.entry(name.to_string()).or_insert(ids);
    }

    pub fn resolve(&self, name: &str) -> Option<&[CountyId]> {
        self.map.get(name).map(Vec::as_slice)
    }

    /// Resolves a name that must denote exactly one unit.
    pub fn unit(&self, name: &str) -> Option<CountyId> {
        match self.resolve(name) {
            Some([id]) => Some(*id),
            _ => None,
        }
    }
}

/// The validated 107-unit model plus seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub counties: Vec<GeneralizedCounty>,
    pub graph: AdjacencyGraph,
    /// Seed of district `l` at index `l - 1`.
    pub seeds: Vec<CountyId>,
    pub state_population: u64,
    pub names: NameIndex,
}

impl Dataset {
    /// Assembles a dataset from in-memory parts, renumbering ids by position
    /// and recomputing population shares. Does not validate.
    pub fn new(mut counties: Vec<GeneralizedCounty>, graph: AdjacencyGraph, seeds: Vec<CountyId>) -> Self {
        let total: u64 = counties.iter().map(|c| c.population).sum();
        for (i, c) in counties.iter_mut().enumerate() {
            c.id = CountyId::from_index(i);
            c.pop_share = if total > 0 {
                c.population as f64 / total as f64
            } else {
                0.0
            };
        }
        let names = NameIndex::new(&counties);
        Dataset {
            counties,
            graph,
            seeds,
            state_population: total,
            names,
        }
    }

    pub fn len(&self) -> usize {
        self.counties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counties.is_empty()
    }

    pub fn county(&self, id: CountyId) -> &GeneralizedCounty {
        &self.counties[id.index()]
    }

    pub fn id_of(&self, name: &str) -> Option<CountyId> {
        self.names.unit(name)
    }

    /// Sum of unit populations; the denominator of every share.
    pub fn total_population(&self) -> u64 {
        self.counties.iter().map(|c| c.population).sum()
    }
}

/// Divides `parent` into `spec.k()` pieces of equal population, handing the
/// remainder to the first pieces. Ids are inherited from the parent.
pub fn apply_split(parent: &GeneralizedCounty, spec: &SplitSpec) -> Result<Vec<GeneralizedCounty>> {
    let k = spec.k();
    if k < 2 {
        return Err(Error::domain(format!(
            "split of {} needs at least 2 pieces, got {k}",
            parent.name
        )));
    }
    let dem: u64 = spec.subs.iter().map(|s| s.dem_votes).sum();
    let rep: u64 = spec.subs.iter().map(|s| s.rep_votes).sum();
    for (what, sub, whole) in [
        ("democratic", dem, parent.dem_votes),
        ("republican", rep, parent.rep_votes),
    ] {
        if (sub as f64 - whole as f64).abs() > 0.005 * whole as f64 {
            return Err(Error::validation(format!(
                "{}: sub-county {what} votes sum to {sub}, parent has {whole}",
                parent.name
            )));
        }
    }
    let area: f64 = spec.subs.iter().map(|s| s.area_km2).sum();
    if (area - parent.area_km2).abs() > 0.02 * parent.area_km2 {
        return Err(Error::validation(format!(
            "{}: sub-county areas sum to {area:.3} km2, parent has {:.3} km2",
            parent.name, parent.area_km2
        )));
    }

    let base = parent.population / k as u64;
    let extra = (parent.population % k as u64) as usize;
    Ok(spec
        .subs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let population = base + u64::from(i < extra);
            GeneralizedCounty {
                id: parent.id,
                name: s.name.clone(),
                population,
                pop_share: if parent.population > 0 {
                    parent.pop_share * population as f64 / parent.population as f64
                } else {
                    0.0
                },
                dem_votes: s.dem_votes,
                rep_votes: s.rep_votes,
                area_km2: s.area_km2,
                perimeter_km: s.perimeter_km,
            }
        })
        .collect())
}

/// Removes the listed pairs from the algorithmic relation. A name that
/// denotes a split parent covers every piece. Border lengths are kept.
pub fn apply_adjacency_overrides(
    graph: &AdjacencyGraph,
    names: &NameIndex,
    pairs: &[(String, String)],
) -> Result<AdjacencyGraph> {
    let mut out = graph.clone();
    for (a, b) in pairs {
        let ra = names
            .resolve(a)
            .ok_or_else(|| Error::domain(format!("override names unknown county {a:?}")))?;
        let rb = names
            .resolve(b)
            .ok_or_else(|| Error::domain(format!("override names unknown county {b:?}")))?;
        for &x in ra {
            for &y in rb {
                if x != y && out.is_adjacent(x, y)? {
                    out.set_algo(x, y, false);
                }
            }
        }
    }
    if !out.is_connected() {
        return Err(Error::validation("adjacency overrides disconnect the county graph"));
    }
    Ok(out)
}

/// Integer counts proportional to `shares` summing exactly to `total`
/// (largest-remainder rounding, ties to the lower index).
pub fn reconstruct_populations(shares: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = shares.iter().sum();
    let quotas: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let short = total.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&i, &j| {
        let (fi, fj) = (quotas[i] - quotas[i].floor(), quotas[j] - quotas[j].floor());
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    for &i in order.iter().take(short as usize) {
        counts[i] += 1;
    }
    counts
}

/// A single problem found by [`validate_dataset`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ShareSum(f64),
    PopulationTotal { expected: u64, found: u64 },
    Disconnected,
    AsymmetricAdjacency(CountyId, CountyId),
    SelfAdjacency(CountyId),
    NonpositiveGeometry { county: String, field: &'static str },
    NonpositivePopulation(String),
    SeedCount { expected: usize, found: usize },
    SeedNotFound(CountyId),
    SeedDuplicate(CountyId),
    SeedIsolated(CountyId),
    CountyCount { expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ShareSum(s) => write!(f, "population shares sum to {s}, not 1"),
            Violation::PopulationTotal { expected, found } => {
                write!(f, "county populations sum to {found}, state total is {expected}")
            }
            Violation::Disconnected => write!(f, "adjacency graph is disconnected"),
            Violation::AsymmetricAdjacency(a, b) => write!(f, "asymmetric adjacency between {a} and {b}"),
            Violation::SelfAdjacency(a) => write!(f, "county {a} is adjacent to itself"),
            Violation::NonpositiveGeometry { county, field } => write!(f, "{county}: {field} must be positive"),
            Violation::NonpositivePopulation(c) => write!(f, "{c}: population must be positive"),
            Violation::SeedCount { expected, found } => write!(f, "seed count {found} ≠ {expected}"),
            Violation::SeedNotFound(id) => write!(f, "seed {id} not found"),
            Violation::SeedDuplicate(id) => write!(f, "seed {id} listed more than once"),
            Violation::SeedIsolated(id) => write!(f, "seed {id} has no neighbors"),
            Violation::CountyCount { expected, found } => write!(f, "{found} counties, expected {expected}"),
        }
    }
}

/// Outcome of [`validate_dataset`]. `notes` are informational only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Checks a dataset against the expected number of districts.
pub fn validate_dataset_for(d: &Dataset, districts: usize) -> ValidationReport {
    let mut r = ValidationReport::default();
    let n = d.counties.len();
    if d.graph.len() != n {
        r.violations.push(Violation::CountyCount {
            expected: d.graph.len(),
            found: n,
        });
        return r;
    }

    let total = d.total_population();
    if total != d.state_population {
        r.violations.push(Violation::PopulationTotal {
            expected: d.state_population,
            found: total,
        });
    }
    let share_sum: f64 = d.counties.iter().map(|c| c.pop_share).sum();
    if (share_sum - 1.0).abs() > 1e-6 {
        r.violations.push(Violation::ShareSum(share_sum));
    }
    for c in &d.counties {
        if c.population == 0 {
            r.violations.push(Violation::NonpositivePopulation(c.name.clone()));
        }
        for (field, v) in [("area", c.area_km2), ("perimeter", c.perimeter_km)] {
            if !(v > 0.0) {
                r.violations.push(Violation::NonpositiveGeometry {
                    county: c.name.clone(),
                    field,
                });
            }
        }
    }

    for id in d.graph.self_loops() {
        r.violations.push(Violation::SelfAdjacency(id));
    }
    for (a, b) in d.graph.asymmetric_pairs() {
        r.violations.push(Violation::AsymmetricAdjacency(a, b));
    }
    if !d.graph.is_connected() {
        r.violations.push(Violation::Disconnected);
    }
    for (a, b, km) in d.graph.algo_edges() {
        if km <= 0.0 {
            r.notes.push(format!(
                "{} and {} are adjacent without a recorded land border",
                d.counties[a.index()].name,
                d.counties[b.index()].name
            ));
        }
    }

    if d.seeds.len() != districts {
        r.violations.push(Violation::SeedCount {
            expected: districts,
            found: d.seeds.len(),
        });
    }
    let mut seen = HashSet::new();
    for &s in &d.seeds {
        if s.0 == 0 || s.index() >= n {
            r.violations.push(Violation::SeedNotFound(s));
            continue;
        }
        if !seen.insert(s) {
            r.violations.push(Violation::SeedDuplicate(s));
        }
        if d.graph.adj(s).is_empty() {
            r.violations.push(Violation::SeedIsolated(s));
        }
    }
    r
}

/// Checks a dataset meant for a 13-district plan.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    validate_dataset_for(d, DISTRICTS)
}

/// Locations of the input files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataPaths {
    pub counties: PathBuf,
    pub adjacency: PathBuf,
    pub splits: PathBuf,
    pub seeds: PathBuf,
    /// Pairs removed from the algorithmic relation; absent means none.
    pub overrides: Option<PathBuf>,
    /// `name,population` of the state; needed when county populations are blank.
    pub state: Option<PathBuf>,
}

impl DataPaths {
    /// The conventional file names inside `dir`. Optional files are only
    /// referenced when present.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let optional = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        DataPaths {
            counties: dir.join("counties.csv"),
            adjacency: dir.join("adjacency.csv"),
            splits: dir.join("splits.csv"),
            seeds: dir.join("seeds.csv"),
            overrides: optional("overrides.csv"),
            state: optional("state.csv"),
        }
    }
}

#[derive(Deserialize)]
struct CountyRow {
    id: u32,
    name: String,
    pop_share: f64,
    population: Option<u64>,
    dem_votes: u64,
    rep_votes: u64,
    area_km2: f64,
    perimeter_km: f64,
}

#[derive(Deserialize)]
struct SplitRow {
    parent: String,
    sub_name: String,
    dem_votes: u64,
    rep_votes: u64,
    area_km2: f64,
    perimeter_km: f64,
}

#[derive(Deserialize)]
struct AdjacencyRow {
    name_a: String,
    name_b: String,
    border_km: f64,
    algo_adjacent: u8,
}

#[derive(Deserialize)]
struct OverrideRow {
    name_a: String,
    name_b: String,
}

#[derive(Deserialize)]
struct StateRow {
    #[allow(dead_code)]
    name: String,
    population: u64,
}

fn open(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        file: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads every record of a headed CSV file together with its line number.
fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<(u64, T)>> {
    let mut rdr = open(path, true)?;
    let headers = rdr.headers().map_err(|e| parse_error(path, 1, e.to_string()))?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .deserialize(Some(&headers))
            .map_err(|e| parse_error(path, line, e.to_string()))?;
        out.push((line, row));
    }
    Ok(out)
}

fn read_splits(path: &Path) -> Result<Vec<SplitSpec>> {
    let mut specs: Vec<SplitSpec> = Vec::new();
    for (_, row) in read_rows::<SplitRow>(path)? {
        let sub = SubCounty {
            name: row.sub_name,
            dem_votes: row.dem_votes,
            rep_votes: row.rep_votes,
            area_km2: row.area_km2,
            perimeter_km: row.perimeter_km,
        };
        match specs.iter_mut().find(|s| s.parent == row.parent) {
            Some(s) => s.subs.push(sub),
            None => specs.push(SplitSpec {
                parent: row.parent,
                subs: vec![sub],
            }),
        }
    }
    Ok(specs)
}

fn read_seeds(path: &Path) -> Result<Vec<(u64, String)>> {
    let mut rdr = open(path, false)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_error(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        match rec.get(0) {
            Some(name) if !name.is_empty() => out.push((line, name.to_string())),
            _ => return Err(parse_error(path, line, "empty seed name")),
        }
    }
    Ok(out)
}

/// Reads the override pair list.
pub fn read_overrides(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(read_rows::<OverrideRow>(path)?
        .into_iter()
        .map(|(_, r)| (r.name_a, r.name_b))
        .collect())
}

/// Loads, splits, wires and validates a dataset. Splits are applied before
/// adjacency overrides; unit ids follow the county file order with each
/// split parent replaced in place by its pieces.
pub fn load_dataset(paths: &DataPaths) -> Result<Dataset> {
    let county_path = paths.counties.as_path();
    let mut rows = read_rows::<CountyRow>(county_path)?;
    rows.sort_by_key(|(_, r)| r.id);
    let mut names = HashSet::new();
    for (line, r) in &rows {
        if !names.insert(r.name.clone()) {
            return Err(parse_error(
                county_path,
                *line,
                format!("duplicate county name {:?}", r.name),
            ));
        }
    }

    let state_total = match &paths.state {
        Some(p) => {
            let rows = read_rows::<StateRow>(p)?;
            match rows.as_slice() {
                [(_, s)] => Some(s.population),
                _ => return Err(parse_error(p, 2, "expected exactly one state row")),
            }
        }
        None => None,
    };
    let populations: Vec<u64> = if rows.iter().all(|(_, r)| r.population.is_some()) {
        rows.iter().map(|(_, r)| r.population.unwrap_or_default()).collect()
    } else {
        let total = state_total
            .ok_or_else(|| Error::validation("county populations are blank and no state total was provided"))?;
        let shares: Vec<f64> = rows.iter().map(|(_, r)| r.pop_share).collect();
        let share_sum: f64 = shares.iter().sum();
        if (share_sum - 1.0).abs() > 0.005 {
            return Err(Error::validation(format!(
                "county shares sum to {share_sum}, not about 1"
            )));
        }
        let reconstructed = reconstruct_populations(&shares, total);
        rows.iter()
            .zip(reconstructed)
            .map(|((_, r), p)| r.population.unwrap_or(p))
            .collect()
    };

    let mut parents: Vec<GeneralizedCounty> = rows
        .iter()
        .zip(&populations)
        .map(|((_, r), &population)| GeneralizedCounty {
            id: CountyId(r.id),
            name: r.name.clone(),
            population,
            pop_share: r.pop_share,
            dem_votes: r.dem_votes,
            rep_votes: r.rep_votes,
            area_km2: r.area_km2,
            perimeter_km: r.perimeter_km,
        })
        .collect();

    let mut aliases: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for spec in read_splits(&paths.splits)? {
        let pos = parents
            .iter()
            .position(|c| c.name == spec.parent)
            .ok_or_else(|| Error::domain(format!("split parent {:?} is not in the county file", spec.parent)))?;
        let pieces = apply_split(&parents[pos], &spec)?;
        aliases.insert(spec.parent.clone(), pieces.iter().map(|p| p.name.clone()).collect());
        parents.splice(pos..=pos, pieces);
    }
    let counties = parents;

    let mut index = NameIndex::new(&renumbered(&counties));
    if index.map.len() != counties.len() {
        return Err(Error::validation("split pieces reuse an existing county name"));
    }
    for (parent, subs) in &aliases {
        let ids = subs.iter().filter_map(|s| index.unit(s)).collect();
        index.add_alias(parent, ids);
    }

    let adj_path = paths.adjacency.as_path();
    let mut edges = Vec::new();
    let mut pairs = HashSet::new();
    for (line, r) in read_rows::<AdjacencyRow>(adj_path)? {
        let lookup = |name: &str| {
            index
                .unit(name)
                .ok_or_else(|| parse_error(adj_path, line, format!("unknown county {name:?}")))
        };
        let (a, b) = (lookup(&r.name_a)?, lookup(&r.name_b)?);
        if a == b {
            return Err(parse_error(
                adj_path,
                line,
                format!("{} listed as its own neighbor", r.name_a),
            ));
        }
        if !pairs.insert((a.min(b), a.max(b))) {
            return Err(parse_error(
                adj_path,
                line,
                format!("duplicate pair {} / {}", r.name_a, r.name_b),
            ));
        }
        if r.algo_adjacent > 1 {
            return Err(parse_error(adj_path, line, "algo_adjacent must be 0 or 1"));
        }
        if !(r.border_km >= 0.0) {
            return Err(parse_error(adj_path, line, "border_km must be non-negative"));
        }
        edges.push((a, b, r.border_km, r.algo_adjacent == 1));
    }
    let mut graph = AdjacencyGraph::from_edges(counties.len(), &edges)?;
    if !graph.is_connected() {
        return Err(Error::validation("adjacency graph is disconnected before overrides"));
    }
    if let Some(p) = &paths.overrides {
        graph = apply_adjacency_overrides(&graph, &index, &read_overrides(p)?)?;
    }

    let mut seeds = Vec::new();
    for (line, name) in read_seeds(&paths.seeds)? {
        let id = index
            .unit(&name)
            .ok_or_else(|| parse_error(&paths.seeds, line, format!("unknown seed county {name:?}")))?;
        seeds.push(id);
    }

    let mut d = Dataset::new(counties, graph, seeds);
    d.names = index;
    if let Some(total) = state_total {
        d.state_population = total;
    }
    let report = validate_dataset(&d);
    if !report.is_ok() {
        return Err(Error::Dataset(report));
    }
    Ok(d)
}

fn renumbered(counties: &[GeneralizedCounty]) -> Vec<GeneralizedCounty> {
    counties
        .iter()
        .enumerate()
        .map(|(i, c)| GeneralizedCounty {
            id: CountyId::from_index(i),
            ..c.clone()
        })
        .collect()
}

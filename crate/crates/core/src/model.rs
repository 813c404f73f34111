//! Generalized counties, the two adjacency relations, and district plans.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based identifier of a generalized county.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CountyId(pub u32);

impl CountyId {
    /// Builds an id from a 0-based index.
    #[inline]
    pub fn from_index(i: usize) -> Self {
        CountyId(i as u32 + 1)
    }

    /// 0-based index into per-county arrays.
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for CountyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An unsplit county or one piece of a split county.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedCounty {
    pub id: CountyId,
    pub name: String,
    pub population: u64,
    /// `population` over the dataset total.
    pub pop_share: f64,
    pub dem_votes: u64,
    pub rep_votes: u64,
    pub area_km2: f64,
    pub perimeter_km: f64,
}

/// Algorithmic adjacency (drives growth) next to geometric border lengths
/// (drives perimeter arithmetic). The two are deliberately independent.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyGraph {
    n: usize,
    algo: Vec<bool>,
    border: Vec<f64>,
    adj: Vec<Vec<CountyId>>,
    contacts: Vec<Vec<(CountyId, f64)>>,
}

impl AdjacencyGraph {
    /// Builds a symmetric graph from undirected `(a, b, border_km, algo_adjacent)` rows.
    pub fn from_edges(n: usize, edges: &[(CountyId, CountyId, f64, bool)]) -> Result<Self> {
        let mut algo = vec![false; n * n];
        let mut border = vec![0.0; n * n];
        for &(a, b, km, is_algo) in edges {
            for id in [a, b] {
                if id.0 == 0 || id.index() >= n {
                    return Err(Error::domain(format!("county id {id} outside 1..={n}")));
                }
            }
            if a == b {
                return Err(Error::validation(format!("self-adjacency on county {a}")));
            }
            let (i, j) = (a.index(), b.index());
            algo[i * n + j] = is_algo;
            algo[j * n + i] = is_algo;
            border[i * n + j] = km;
            border[j * n + i] = km;
        }
        Ok(Self::from_raw(n, algo, border))
    }

    /// Builds a graph from dense row-major matrices without symmetrizing them,
    /// so that malformed inputs can reach validation.
    pub fn from_matrix(algo: Vec<Vec<bool>>, border: Vec<Vec<f64>>) -> Result<Self> {
        let n = algo.len();
        if border.len() != n || algo.iter().any(|r| r.len() != n) || border.iter().any(|r| r.len() != n) {
            return Err(Error::domain("adjacency matrices must be square and equally sized"));
        }
        Ok(Self::from_raw(
            n,
            algo.into_iter().flatten().collect(),
            border.into_iter().flatten().collect(),
        ))
    }

    fn from_raw(n: usize, algo: Vec<bool>, border: Vec<f64>) -> Self {
        let mut g = AdjacencyGraph {
            n,
            algo,
            border,
            adj: Vec::new(),
            contacts: Vec::new(),
        };
        g.rebuild_lists();
        g
    }

    fn rebuild_lists(&mut self) {
        let n = self.n;
        self.adj = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| self.algo[i * n + j])
                    .map(CountyId::from_index)
                    .collect()
            })
            .collect();
        self.contacts = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && (self.border[i * n + j] > 0.0 || self.algo[i * n + j]))
                    .map(|j| (CountyId::from_index(j), self.border[i * n + j]))
                    .collect()
            })
            .collect();
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn check(&self, id: CountyId) -> Result<usize> {
        if id.0 == 0 || id.index() >= self.n {
            Err(Error::domain(format!(
                "unknown county id {id} (graph has {} nodes)",
                self.n
            )))
        } else {
            Ok(id.index())
        }
    }

    /// Algorithmic neighbors of `id`, ascending.
    pub fn neighbors(&self, id: CountyId) -> Result<&[CountyId]> {
        Ok(&self.adj[self.check(id)?])
    }

    /// Unchecked variant for hot loops over known-valid ids.
    #[inline]
    pub(crate) fn adj(&self, id: CountyId) -> &[CountyId] {
        &self.adj[id.index()]
    }

    pub fn is_adjacent(&self, a: CountyId, b: CountyId) -> Result<bool> {
        let (i, j) = (self.check(a)?, self.check(b)?);
        Ok(self.algo[i * self.n + j])
    }

    /// Shared border length in km; 0 when the pair has no recorded contact.
    pub fn border_km(&self, a: CountyId, b: CountyId) -> Result<f64> {
        let (i, j) = (self.check(a)?, self.check(b)?);
        Ok(self.border[i * self.n + j])
    }

    /// Geometric contacts of `id` with their border lengths, including pairs
    /// removed from the algorithmic relation.
    pub fn contacts(&self, id: CountyId) -> Result<&[(CountyId, f64)]> {
        Ok(&self.contacts[self.check(id)?])
    }

    pub(crate) fn set_algo(&mut self, a: CountyId, b: CountyId, value: bool) {
        let (i, j) = (a.index(), b.index());
        self.algo[i * self.n + j] = value;
        self.algo[j * self.n + i] = value;
        self.rebuild_lists();
    }

    /// Unordered pairs `(a, b)` with `a < b` and `algo(a, b) != algo(b, a)`.
    pub fn asymmetric_pairs(&self) -> Vec<(CountyId, CountyId)> {
        let n = self.n;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.algo[i * n + j] != self.algo[j * n + i] || self.border[i * n + j] != self.border[j * n + i] {
                    out.push((CountyId::from_index(i), CountyId::from_index(j)));
                }
            }
        }
        out
    }

    pub fn self_loops(&self) -> Vec<CountyId> {
        (0..self.n)
            .filter(|&i| self.algo[i * self.n + i])
            .map(CountyId::from_index)
            .collect()
    }

    /// Algorithmic edges `(a, b, border_km)` with `a < b`.
    pub fn algo_edges(&self) -> Vec<(CountyId, CountyId, f64)> {
        let n = self.n;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.algo[i * n + j] {
                    out.push((CountyId::from_index(i), CountyId::from_index(j), self.border[i * n + j]));
                }
            }
        }
        out
    }

    /// Whether the whole node set is connected under the algorithmic relation.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let all: Vec<CountyId> = (0..self.n).map(CountyId::from_index).collect();
        reachable_within(self, &all) == self.n
    }
}

/// Number of members reachable from the first one without leaving `members`.
fn reachable_within(graph: &AdjacencyGraph, members: &[CountyId]) -> usize {
    let mut inside = vec![false; graph.n];
    for m in members {
        inside[m.index()] = true;
    }
    let mut seen = vec![false; graph.n];
    let mut queue = VecDeque::from([members[0]]);
    seen[members[0].index()] = true;
    let mut count = 1;
    while let Some(c) = queue.pop_front() {
        for &nb in graph.adj(c) {
            let k = nb.index();
            if inside[k] && !seen[k] {
                seen[k] = true;
                count += 1;
                queue.push_back(nb);
            }
        }
    }
    count
}

/// Free-function form of [`AdjacencyGraph::neighbors`].
pub fn neighbors(graph: &AdjacencyGraph, id: CountyId) -> Result<&[CountyId]> {
    graph.neighbors(id)
}

/// True iff `members` induce a connected subgraph under algorithmic adjacency.
pub fn is_contiguous(members: &[CountyId], graph: &AdjacencyGraph) -> Result<bool> {
    if members.is_empty() {
        return Err(Error::domain("contiguity of an empty county set"));
    }
    let mut uniq = members.to_vec();
    for &m in &uniq {
        graph.check(m)?;
    }
    uniq.sort_unstable();
    uniq.dedup();
    Ok(reachable_within(graph, &uniq) == uniq.len())
}

/// One district of a plan with its integer totals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct District {
    pub label: u8,
    pub members: Vec<CountyId>,
    pub population: u64,
    pub dem_votes: u64,
    pub rep_votes: u64,
}

/// Something wrong with a plan relative to a graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanViolation {
    WrongLength { expected: usize, found: usize },
    LabelOutOfRange { county: CountyId, label: u8 },
    EmptyDistrict(u8),
    SeedMissing { label: u8, seed: CountyId },
    NotContiguous { label: u8, components: usize },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::WrongLength { expected, found } => {
                write!(f, "plan covers {found} counties, expected {expected}")
            }
            PlanViolation::LabelOutOfRange { county, label } => {
                write!(f, "county {county} has out-of-range district label {label}")
            }
            PlanViolation::EmptyDistrict(l) => write!(f, "district {l} is empty"),
            PlanViolation::SeedMissing { label, seed } => {
                write!(f, "district {label} does not contain its seed county {seed}")
            }
            PlanViolation::NotContiguous { label, components } => {
                write!(f, "district {label} is split into {components} pieces")
            }
        }
    }
}

/// A full assignment of counties to districts labelled `1..=k`.
///
/// `assignment[c]` is the label of the county with index `c`; `seeds[l - 1]`
/// is the seed county of district `l`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plan {
    assignment: Vec<u8>,
    seeds: Vec<CountyId>,
}

impl Plan {
    /// Wraps raw parts; call [`Plan::violations`] to check them.
    pub fn new(assignment: Vec<u8>, seeds: Vec<CountyId>) -> Self {
        Plan { assignment, seeds }
    }

    /// Wraps raw parts and rejects anything that is not a valid plan on `graph`.
    pub fn validated(assignment: Vec<u8>, seeds: Vec<CountyId>, graph: &AdjacencyGraph) -> Result<Self> {
        let plan = Plan::new(assignment, seeds);
        let v = plan.violations(graph);
        if v.is_empty() {
            Ok(plan)
        } else {
            let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
            Err(Error::validation(msg.join("; ")))
        }
    }

    pub fn assignment(&self) -> &[u8] {
        &self.assignment
    }

    pub fn seeds(&self) -> &[CountyId] {
        &self.seeds
    }

    pub fn num_districts(&self) -> usize {
        self.seeds.len()
    }

    pub fn label_of(&self, id: CountyId) -> u8 {
        self.assignment[id.index()]
    }

    /// Seed county of district `label`.
    pub fn seed_of(&self, label: u8) -> Option<CountyId> {
        self.seeds.get((label as usize).checked_sub(1)?).copied()
    }

    /// Member ids per district, index `l - 1` for label `l`, each ascending.
    pub fn members(&self) -> Vec<Vec<CountyId>> {
        let mut out = vec![Vec::new(); self.seeds.len()];
        for (i, &l) in self.assignment.iter().enumerate() {
            if let Some(col) = (l as usize).checked_sub(1).and_then(|k| out.get_mut(k)) {
                col.push(CountyId::from_index(i));
            }
        }
        out
    }

    /// District views with summed population and votes.
    pub fn districts(&self, counties: &[GeneralizedCounty]) -> Vec<District> {
        self.members()
            .into_iter()
            .enumerate()
            .map(|(k, members)| {
                let mut d = District {
                    label: k as u8 + 1,
                    members,
                    population: 0,
                    dem_votes: 0,
                    rep_votes: 0,
                };
                for m in &d.members {
                    let c = &counties[m.index()];
                    d.population += c.population;
                    d.dem_votes += c.dem_votes;
                    d.rep_votes += c.rep_votes;
                }
                d
            })
            .collect()
    }

    /// Every broken plan invariant: coverage, non-empty districts, seed
    /// containment and contiguity.
    pub fn violations(&self, graph: &AdjacencyGraph) -> Vec<PlanViolation> {
        let k = self.seeds.len();
        let mut out = Vec::new();
        if self.assignment.len() != graph.len() {
            out.push(PlanViolation::WrongLength {
                expected: graph.len(),
                found: self.assignment.len(),
            });
            return out;
        }
        for (i, &l) in self.assignment.iter().enumerate() {
            if l == 0 || l as usize > k {
                out.push(PlanViolation::LabelOutOfRange {
                    county: CountyId::from_index(i),
                    label: l,
                });
            }
        }
        for (idx, members) in self.members().iter().enumerate() {
            let label = idx as u8 + 1;
            if members.is_empty() {
                out.push(PlanViolation::EmptyDistrict(label));
                continue;
            }
            let seed = self.seeds[idx];
            if seed.0 == 0 || seed.index() >= graph.len() || self.assignment[seed.index()] != label {
                out.push(PlanViolation::SeedMissing { label, seed });
            }
            let components = count_components(graph, members);
            if components > 1 {
                out.push(PlanViolation::NotContiguous { label, components });
            }
        }
        out
    }
}

fn count_components(graph: &AdjacencyGraph, members: &[CountyId]) -> usize {
    let mut rest: Vec<CountyId> = members.to_vec();
    let mut components = 0;
    while !rest.is_empty() {
        let mut inside = vec![false; graph.len()];
        for m in &rest {
            inside[m.index()] = true;
        }
        let mut seen = vec![false; graph.len()];
        let mut queue = VecDeque::from([rest[0]]);
        seen[rest[0].index()] = true;
        while let Some(c) = queue.pop_front() {
            for &nb in graph.adj(c) {
                if inside[nb.index()] && !seen[nb.index()] {
                    seen[nb.index()] = true;
                    queue.push_back(nb);
                }
            }
        }
        rest.retain(|m| !seen[m.index()]);
        components += 1;
    }
    components
}

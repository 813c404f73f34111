//! Rocks-pebbles-sand growth: seeded districts absorb neighbors row by row
//! under a population cap that loosens as rows advance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::model::{AdjacencyGraph, CountyId, Plan};

/// Row-indexed population cap, in percent of the state:
/// `base + floor((i - 3) / 3) * step` for rows `i >= 4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapSchedule {
    pub base_pct: f64,
    pub step_pct: f64,
}

impl CapSchedule {
    pub const NC: CapSchedule = CapSchedule {
        base_pct: 6.0,
        step_pct: 0.45,
    };

    /// Cap for row `i` as a fraction of the state population.
    pub fn at(&self, i: usize) -> Result<f64> {
        if i < 4 {
            return Err(Error::domain(format!("cap is defined from row 4, asked for row {i}")));
        }
        Ok((self.base_pct + ((i - 3) / 3) as f64 * self.step_pct) / 100.0)
    }
}

/// The 6%-plus-0.45%-every-three-rows schedule.
pub fn cap(i: usize) -> Result<f64> {
    CapSchedule::NC.at(i)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthConfig {
    pub caps: CapSchedule,
    pub max_rows: usize,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            caps: CapSchedule::NC,
            max_rows: 60,
        }
    }
}

/// Source of uniform choices: `pick(n)` returns a value in `0..n`.
pub trait Chooser {
    fn pick(&mut self, n: usize) -> usize;
}

impl<C: Chooser + ?Sized> Chooser for &mut C {
    fn pick(&mut self, n: usize) -> usize {
        (**self).pick(n)
    }
}

/// Adapts any [`Rng`] to [`Chooser`].
#[derive(Clone, Debug)]
pub struct RngChooser<R>(pub R);

impl<R: Rng> Chooser for RngChooser<R> {
    fn pick(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

/// Generator for run `run_index` under `master_seed`: the seed becomes the
/// key and the run index the stream, so distinct pairs never share a stream.
pub fn stream_rng(master_seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(run_index);
    rng
}

/// A candidate with the largest population; exact ties are broken by `chooser`
/// over the tied ids in the order given.
pub fn pick_largest_population<C: Chooser>(
    candidates: &[CountyId],
    dataset: &Dataset,
    chooser: &mut C,
) -> Result<CountyId> {
    let best = candidates
        .iter()
        .map(|&c| dataset.county(c).population)
        .max()
        .ok_or_else(|| Error::domain("no candidates to pick from"))?;
    let tied: Vec<CountyId> = candidates
        .iter()
        .copied()
        .filter(|&c| dataset.county(c).population == best)
        .collect();
    Ok(if tied.len() == 1 {
        tied[0]
    } else {
        tied[chooser.pick(tied.len())]
    })
}

/// Unassigned neighbors of `members`, each repeated once per adjacent member.
pub fn candidate_multiset(members: &[CountyId], graph: &AdjacencyGraph, assigned: &[bool]) -> Vec<CountyId> {
    let mut out = Vec::new();
    fill_multiset(members, graph, assigned, &mut out);
    out
}

fn fill_multiset(members: &[CountyId], graph: &AdjacencyGraph, assigned: &[bool], out: &mut Vec<CountyId>) {
    out.clear();
    for &m in members {
        out.extend(graph.adj(m).iter().filter(|u| !assigned[u.index()]));
    }
}

/// The `rows x k` pick matrix; `None` marks a skipped cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolMatrix {
    cols: usize,
    cells: Vec<u32>,
}

impl SolMatrix {
    fn new(cols: usize) -> Self {
        SolMatrix {
            cols,
            cells: Vec::new(),
        }
    }

    fn push_row(&mut self) {
        self.cells.extend(std::iter::repeat_n(0, self.cols));
    }

    fn set(&mut self, row: usize, col: usize, id: CountyId) {
        self.cells[(row - 1) * self.cols + col] = id.0;
    }

    pub fn rows(&self) -> usize {
        self.cells.len() / self.cols.max(1)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Cell at 1-based `row` and 0-based column.
    pub fn get(&self, row: usize, col: usize) -> Option<CountyId> {
        match self.cells[(row - 1) * self.cols + col] {
            0 => None,
            v => Some(CountyId(v)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthStatus {
    Completed,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthOutcome {
    pub status: GrowthStatus,
    /// Present exactly when `status` is `Completed`.
    pub plan: Option<Plan>,
    pub rows_used: usize,
    pub sol: SolMatrix,
}

struct GrowthState<'a> {
    dataset: &'a Dataset,
    total: f64,
    sol: SolMatrix,
    assigned: Vec<bool>,
    n_assigned: usize,
    labels: Vec<u8>,
    members: Vec<Vec<CountyId>>,
    col_pop: Vec<u64>,
}

impl<'a> GrowthState<'a> {
    fn new(dataset: &'a Dataset) -> Self {
        let k = dataset.seeds.len();
        GrowthState {
            dataset,
            total: dataset.total_population() as f64,
            sol: SolMatrix::new(k),
            assigned: vec![false; dataset.len()],
            n_assigned: 0,
            labels: vec![0; dataset.len()],
            members: vec![Vec::new(); k],
            col_pop: vec![0; k],
        }
    }

    fn take(&mut self, row: usize, col: usize, id: CountyId) {
        self.sol.set(row, col, id);
        self.assigned[id.index()] = true;
        self.n_assigned += 1;
        self.labels[id.index()] = col as u8 + 1;
        self.members[col].push(id);
        self.col_pop[col] += self.dataset.county(id).population;
    }

    fn done(&self) -> bool {
        self.n_assigned == self.assigned.len()
    }

    fn finish(self, status: GrowthStatus) -> GrowthOutcome {
        let rows_used = self.sol.rows();
        let plan = (status == GrowthStatus::Completed).then(|| Plan::new(self.labels, self.dataset.seeds.clone()));
        GrowthOutcome {
            status,
            plan,
            rows_used,
            sol: self.sol,
        }
    }
}

/// Grows one plan with an explicit schedule and choice source.
///
/// Rows 2 and 3 take the most populous unassigned neighbor of the district
/// (ties by `chooser`). From row 4 a district whose share exceeds the row's
/// cap sits out; otherwise it draws uniformly from its candidate multiset.
/// Columns go in label order and each pick is visible to the next column.
pub fn grow_with<C: Chooser>(dataset: &Dataset, config: &GrowthConfig, chooser: &mut C) -> Result<GrowthOutcome> {
    let k = dataset.seeds.len();
    if k == 0 || k > u8::MAX as usize {
        return Err(Error::domain(format!("cannot grow {k} districts")));
    }
    let mut st = GrowthState::new(dataset);

    st.sol.push_row();
    for (col, &seed) in dataset.seeds.iter().enumerate() {
        if seed.0 == 0 || seed.index() >= dataset.len() || st.assigned[seed.index()] {
            return Err(Error::domain(format!("seed {seed} is invalid or repeated")));
        }
        st.take(1, col, seed);
    }

    let mut cands = Vec::new();
    for row in 2..=config.max_rows {
        if st.done() {
            return Ok(st.finish(GrowthStatus::Completed));
        }
        st.sol.push_row();
        for col in 0..k {
            if row <= 3 {
                cands.clear();
                for &m in &st.members[col] {
                    cands.extend(dataset.graph.adj(m).iter().filter(|u| !st.assigned[u.index()]));
                }
                cands.sort_unstable();
                cands.dedup();
                if cands.is_empty() {
                    return Err(Error::validation(format!(
                        "district {} (seed {}) has no unassigned neighbor at row {row}",
                        col + 1,
                        dataset.county(dataset.seeds[col]).name
                    )));
                }
                let pick = pick_largest_population(&cands, dataset, chooser)?;
                st.take(row, col, pick);
            } else {
                if st.col_pop[col] as f64 / st.total > config.caps.at(row)? {
                    continue;
                }
                fill_multiset(&st.members[col], &dataset.graph, &st.assigned, &mut cands);
                if cands.is_empty() {
                    continue;
                }
                let pick = cands[chooser.pick(cands.len())];
                st.take(row, col, pick);
            }
            if st.done() {
                return Ok(st.finish(GrowthStatus::Completed));
            }
        }
    }
    let status = if st.done() {
        GrowthStatus::Completed
    } else {
        GrowthStatus::Exhausted
    };
    Ok(st.finish(status))
}

/// Grows one plan with the standard schedule and 60 rows.
pub fn grow_plan<R: Rng>(dataset: &Dataset, rng: &mut R) -> Result<GrowthOutcome> {
    grow_with(dataset, &GrowthConfig::default(), &mut RngChooser(rng))
}

/// Run `run_index` of the ensemble seeded by `master_seed`.
pub fn run_once(dataset: &Dataset, master_seed: u64, run_index: u64) -> Result<GrowthOutcome> {
    run_once_with(dataset, &GrowthConfig::default(), master_seed, run_index)
}

pub fn run_once_with(
    dataset: &Dataset,
    config: &GrowthConfig,
    master_seed: u64,
    run_index: u64,
) -> Result<GrowthOutcome> {
    grow_with(dataset, config, &mut RngChooser(stream_rng(master_seed, run_index)))
}

/// Replays a pick matrix and reports every broken growth rule: repeated
/// counties, gaps in rows 1-3, picks that were not adjacent to the district,
/// picks made above the cap, and plan/status mismatches.
pub fn audit_trace(dataset: &Dataset, outcome: &GrowthOutcome, config: &GrowthConfig) -> Vec<String> {
    let mut problems = Vec::new();
    let sol = &outcome.sol;
    let k = sol.cols();
    let total = dataset.total_population() as f64;
    let mut owner: Vec<Option<usize>> = vec![None; dataset.len()];
    let mut col_pop = vec![0u64; k];
    let mut count = 0;

    for row in 1..=sol.rows() {
        for col in 0..k {
            let Some(id) = sol.get(row, col) else {
                if row <= 3 {
                    problems.push(format!("row {row} column {} is empty", col + 1));
                }
                continue;
            };
            if id.0 == 0 || id.index() >= dataset.len() {
                problems.push(format!("row {row} column {} holds unknown id {id}", col + 1));
                continue;
            }
            if row == 1 && dataset.seeds.get(col) != Some(&id) {
                problems.push(format!("row 1 column {} is not the seed", col + 1));
            }
            if let Some(prev) = owner[id.index()] {
                problems.push(format!(
                    "county {id} picked twice (columns {} and {})",
                    prev + 1,
                    col + 1
                ));
                continue;
            }
            if row > 1 && !dataset.graph.adj(id).iter().any(|nb| owner[nb.index()] == Some(col)) {
                problems.push(format!(
                    "county {id} at row {row} is not adjacent to district {}",
                    col + 1
                ));
            }
            if row >= 4 {
                let share = col_pop[col] as f64 / total;
                match config.caps.at(row) {
                    Ok(c) if share > c => problems.push(format!(
                        "district {} picked at row {row} with share {share:.5} above cap {c:.5}",
                        col + 1
                    )),
                    _ => {}
                }
            }
            owner[id.index()] = Some(col);
            col_pop[col] += dataset.county(id).population;
            count += 1;
        }
    }

    let complete = count == dataset.len();
    match (&outcome.status, &outcome.plan) {
        (GrowthStatus::Completed, Some(plan)) => {
            if !complete {
                problems.push(format!("completed with only {count} of {} counties", dataset.len()));
            }
            for (i, o) in owner.iter().enumerate() {
                if let Some(col) = o {
                    if plan.assignment()[i] as usize != col + 1 {
                        problems.push(format!("plan label of county {} disagrees with the pick matrix", i + 1));
                    }
                }
            }
            problems.extend(plan.violations(&dataset.graph).iter().map(ToString::to_string));
        }
        (GrowthStatus::Exhausted, None) if !complete => {}
        _ => problems.push("status does not match coverage".to_string()),
    }
    problems
}

//! Plan scores: population equity, Polsby-Popper compactness and partisan
//! measures on two-party vote shares.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::model::{CountyId, District, Plan};

/// Summed area and perimeter of a set of units. Shared borders between
/// members are removed from the perimeter using geometric border lengths.
pub fn district_geometry(members: &[CountyId], dataset: &Dataset) -> (f64, f64) {
    let mut inside = vec![false; dataset.len()];
    for m in members {
        inside[m.index()] = true;
    }
    let mut area = 0.0;
    let mut perimeter = 0.0;
    let mut shared = 0.0;
    for &m in members {
        let c = dataset.county(m);
        area += c.area_km2;
        perimeter += c.perimeter_km;
        for &(other, km) in dataset.graph.contacts(m).unwrap_or(&[]) {
            if other > m && inside[other.index()] {
                shared += km;
            }
        }
    }
    (area, perimeter - 2.0 * shared)
}

/// `4 pi A / P^2`.
pub fn polsby_popper(area: f64, perimeter: f64) -> Result<f64> {
    if !(perimeter > 0.0) {
        return Err(Error::domain(format!("perimeter must be positive, got {perimeter}")));
    }
    let pp = 4.0 * PI * area / (perimeter * perimeter);
    if pp > 1.0 + 1e-9 {
        return Err(Error::validation(format!(
            "Polsby-Popper score {pp} exceeds 1 (area {area}, perimeter {perimeter})"
        )));
    }
    Ok(pp)
}

/// Polsby-Popper score of each district, in label order.
pub fn pp_per_district(plan: &Plan, dataset: &Dataset) -> Result<Vec<f64>> {
    plan.members()
        .iter()
        .map(|m| {
            let (a, p) = district_geometry(m, dataset);
            polsby_popper(a, p)
        })
        .collect()
}

/// Mean and minimum of per-district scores.
pub fn pp_mean_min(scores: &[f64]) -> (f64, f64) {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let excess = scores.iter().map(|s| s - min).sum::<f64>() / scores.len() as f64;
    (min + excess, min)
}

/// `(pp_avg, pp_min)` over the plan's districts.
pub fn pp_summary(plan: &Plan, dataset: &Dataset) -> Result<(f64, f64)> {
    Ok(pp_mean_min(&pp_per_district(plan, dataset)?))
}

/// Integer deviations `k * pop_i - total`, exact for any realistic size.
fn scaled_deviations(districts: &[District], total: u64) -> Vec<i128> {
    let k = districts.len() as i128;
    districts
        .iter()
        .map(|d| k * d.population as i128 - total as i128)
        .collect()
}

fn total_population(districts: &[District]) -> u64 {
    districts.iter().map(|d| d.population).sum()
}

/// Population standard deviation of district shares around `100 / k`, in
/// percentage points.
pub fn pop_stddev_of(districts: &[District]) -> f64 {
    let total = total_population(districts);
    let k = districts.len() as f64;
    let dev = scaled_deviations(districts, total);
    let ms = dev.iter().map(|&d| (d as f64) * (d as f64)).sum::<f64>() / k;
    100.0 * ms.sqrt() / (k * total as f64)
}

pub fn pop_stddev(plan: &Plan, dataset: &Dataset) -> f64 {
    pop_stddev_of(&plan.districts(&dataset.counties))
}

/// Relative deviation from the ideal population, per district.
pub fn population_errors(districts: &[District]) -> Vec<f64> {
    let total = total_population(districts);
    scaled_deviations(districts, total)
        .iter()
        .map(|&d| d.unsigned_abs() as f64 / total as f64)
        .collect()
}

/// Root mean square and maximum of the population errors, plus whether the
/// maximum is strictly under 0.1%.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationDeviation {
    pub rmspd: f64,
    pub max_pe: f64,
    pub hb92_pass: bool,
}

pub fn population_deviation_of(districts: &[District]) -> PopulationDeviation {
    let pe = population_errors(districts);
    let max_pe = pe.iter().copied().fold(0.0, f64::max);
    let rmspd = if max_pe == 0.0 {
        0.0
    } else {
        let ms = pe.iter().map(|e| (e / max_pe) * (e / max_pe)).sum::<f64>() / pe.len() as f64;
        max_pe * ms.sqrt()
    };
    PopulationDeviation {
        rmspd,
        max_pe,
        hb92_pass: max_pe < 0.001,
    }
}

pub fn population_deviation(plan: &Plan, dataset: &Dataset) -> PopulationDeviation {
    population_deviation_of(&plan.districts(&dataset.counties))
}

fn check_votes(districts: &[District]) -> Result<()> {
    match districts.iter().find(|d| d.dem_votes + d.rep_votes == 0) {
        Some(d) => Err(Error::domain(format!("district {} has no two-party votes", d.label))),
        None => Ok(()),
    }
}

/// Democratic two-party share per district.
pub fn dem_shares(districts: &[District]) -> Result<Vec<f64>> {
    check_votes(districts)?;
    Ok(districts
        .iter()
        .map(|d| d.dem_votes as f64 / (d.dem_votes + d.rep_votes) as f64)
        .collect())
}

/// Statewide (democratic wasted - republican wasted) / two-party votes. The
/// winner wastes its votes beyond half the district total; the loser wastes
/// all of its votes. In a tie both parties waste `votes - half`, i.e. nothing.
pub fn efficiency_gap_of(districts: &[District]) -> Result<f64> {
    check_votes(districts)?;
    let (mut wd2, mut wr2, mut total2) = (0i128, 0i128, 0i128);
    for d in districts {
        let (dv, rv) = (d.dem_votes as i128, d.rep_votes as i128);
        let t = dv + rv;
        // Doubled to keep the half-total threshold in integers.
        match dv.cmp(&rv) {
            std::cmp::Ordering::Greater => {
                wd2 += 2 * dv - t;
                wr2 += 2 * rv;
            }
            std::cmp::Ordering::Less => {
                wd2 += 2 * dv;
                wr2 += 2 * rv - t;
            }
            std::cmp::Ordering::Equal => {}
        }
        total2 += 2 * t;
    }
    Ok((wd2 - wr2) as f64 / total2 as f64)
}

pub fn efficiency_gap(plan: &Plan, dataset: &Dataset) -> Result<f64> {
    efficiency_gap_of(&plan.districts(&dataset.counties))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Mean minus median of a list of fractions, in percentage points.
pub fn mean_median_of_shares(shares: &[f64]) -> f64 {
    let med = median(shares);
    shares.iter().map(|s| s - med).sum::<f64>() / shares.len() as f64 * 100.0
}

pub fn mean_median(plan: &Plan, dataset: &Dataset) -> Result<f64> {
    Ok(mean_median_of_shares(&dem_shares(&plan.districts(&dataset.counties))?))
}

/// Mean winning share of Democratic-won districts minus mean winning share
/// of Republican-won districts, in percentage points. `None` when either
/// party wins nothing. Exact ties count as Republican wins.
pub fn lopsided_margin_of(districts: &[District]) -> Result<Option<f64>> {
    check_votes(districts)?;
    let (mut dem, mut rep) = (Vec::new(), Vec::new());
    for d in districts {
        let t = (d.dem_votes + d.rep_votes) as f64;
        if d.dem_votes > d.rep_votes {
            dem.push(d.dem_votes as f64 / t);
        } else {
            rep.push(d.rep_votes as f64 / t);
        }
    }
    if dem.is_empty() || rep.is_empty() {
        return Ok(None);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(Some((mean(&dem) - mean(&rep)) * 100.0))
}

pub fn lopsided_margin(plan: &Plan, dataset: &Dataset) -> Result<Option<f64>> {
    lopsided_margin_of(&plan.districts(&dataset.counties))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seats {
    pub dem: u32,
    pub rep: u32,
    /// Districts with exactly equal votes, already counted as Republican.
    pub ties: u32,
}

pub fn seats_won_of(districts: &[District]) -> Seats {
    let mut s = Seats {
        dem: 0,
        rep: 0,
        ties: 0,
    };
    for d in districts {
        if d.dem_votes > d.rep_votes {
            s.dem += 1;
        } else {
            s.rep += 1;
            if d.dem_votes == d.rep_votes {
                s.ties += 1;
            }
        }
    }
    s
}

pub fn seats_won(plan: &Plan, dataset: &Dataset) -> Seats {
    seats_won_of(&plan.districts(&dataset.counties))
}

/// Every score for one plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    pub pop_stddev_pp: f64,
    pub pp_per_district: Vec<f64>,
    pub pp_avg: f64,
    pub pp_min: f64,
    pub efficiency_gap: f64,
    pub mean_median_pp: f64,
    /// `None` serializes as `null`: one party won no district.
    pub lopsided_margin_pp: Option<f64>,
    pub seats_dem: u32,
    pub seats_rep: u32,
    pub seat_ties: u32,
    pub rmspd: f64,
    pub max_pe: f64,
    pub hb92_pass: bool,
}

/// Scalar metrics addressable by name.
pub const METRIC_NAMES: &[&str] = &[
    "pop_stddev_pp",
    "pp_avg",
    "pp_min",
    "efficiency_gap",
    "mean_median_pp",
    "lopsided_margin_pp",
    "seats_dem",
    "seats_rep",
    "rmspd",
    "max_pe",
];

impl PlanMetrics {
    /// Value of a scalar metric; `Ok(None)` for an undefined lopsided margin.
    pub fn get(&self, name: &str) -> Result<Option<f64>> {
        Ok(Some(match name {
            "pop_stddev_pp" => self.pop_stddev_pp,
            "pp_avg" => self.pp_avg,
            "pp_min" => self.pp_min,
            "efficiency_gap" => self.efficiency_gap,
            "mean_median_pp" => self.mean_median_pp,
            "lopsided_margin_pp" => return Ok(self.lopsided_margin_pp),
            "seats_dem" => self.seats_dem as f64,
            "seats_rep" => self.seats_rep as f64,
            "rmspd" => self.rmspd,
            "max_pe" => self.max_pe,
            _ => {
                return Err(Error::domain(format!(
                    "unknown metric {name:?}; valid names: {}",
                    METRIC_NAMES.join(", ")
                )))
            }
        }))
    }
}

/// Scores a plan. The plan is assumed valid; see [`Plan::violations`].
pub fn evaluate(plan: &Plan, dataset: &Dataset) -> Result<PlanMetrics> {
    let districts = plan.districts(&dataset.counties);
    let pp = pp_per_district(plan, dataset)?;
    let (pp_avg, pp_min) = pp_mean_min(&pp);
    let seats = seats_won_of(&districts);
    let dev = population_deviation_of(&districts);
    Ok(PlanMetrics {
        pop_stddev_pp: pop_stddev_of(&districts),
        pp_per_district: pp,
        pp_avg,
        pp_min,
        efficiency_gap: efficiency_gap_of(&districts)?,
        mean_median_pp: mean_median_of_shares(&dem_shares(&districts)?),
        lopsided_margin_pp: lopsided_margin_of(&districts)?,
        seats_dem: seats.dem,
        seats_rep: seats.rep,
        seat_ties: seats.ties,
        rmspd: dev.rmspd,
        max_pe: dev.max_pe,
        hb92_pass: dev.hb92_pass,
    })
}

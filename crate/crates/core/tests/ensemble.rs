use std::collections::HashSet;
use std::fs;

use rps_core::ensemble::{filter_good, histogram, summarize, EnsembleConfig};
use rps_core::ingest::{DataPaths, Dataset};
use rps_core::metrics::{evaluate, pop_stddev_of};
use rps_core::{canonical_key, load_dataset, run_ensemble, run_once, CountyId, District, Plan};

const NC: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/nc");

fn nc() -> Dataset {
    load_dataset(&DataPaths::in_dir(NC)).unwrap()
}

fn golden_ratio_values() -> Vec<f64> {
    (0..1000)
        .map(|i| (i as f64 * 0.618033988749895).fract() * 10.0)
        .collect()
}

#[test]
fn histogram_matches_numpy() {
    let v = golden_ratio_values();
    let s = summarize(&v, 7).unwrap();
    assert_eq!(s.histogram.counts, vec![143, 143, 143, 143, 143, 143, 142]);
    let s = summarize(&v, 10).unwrap();
    assert_eq!(s.histogram.counts, vec![100, 100, 100, 99, 101, 100, 99, 101, 100, 100]);
    let s = summarize(&v, 13).unwrap();
    assert_eq!(
        s.histogram.counts,
        vec![77, 77, 77, 76, 77, 77, 77, 77, 77, 76, 77, 77, 78]
    );

    let ints: Vec<f64> = (0..=10).map(f64::from).collect();
    assert_eq!(summarize(&ints, 5).unwrap().histogram.counts, vec![2, 2, 2, 2, 3]);

    let tenths: Vec<f64> = (0..=30).map(|i| 0.1 * i as f64).collect();
    assert_eq!(
        summarize(&tenths, 7).unwrap().histogram.counts,
        vec![5, 4, 4, 5, 4, 4, 5]
    );
}

#[test]
fn histogram_edge_cases() {
    let h = histogram(&[2.0, 2.0], 2.0, 2.0, 4);
    assert_eq!(h.edges.first(), Some(&1.5));
    assert_eq!(h.edges.last(), Some(&2.5));
    assert_eq!(h.counts.iter().sum::<u64>(), 2);
    let h = histogram(&[0.0, 1.0, 5.0, -1.0], 0.0, 1.0, 2);
    assert_eq!(h.counts, vec![1, 1]);
    assert!(summarize(&[], 3).is_err());
    assert!(summarize(&[1.0], 0).is_err());
    assert!(summarize(&[f64::NAN], 3).is_err());
}

fn district(label: u8, population: u64) -> District {
    District {
        label,
        members: vec![CountyId(label as u32)],
        population,
        dem_votes: 1,
        rep_votes: 1,
    }
}

#[test]
fn stddev_of_a_rebalanced_plan() {
    // One district 1.3 points above the ideal share, the other twelve
    // sharing the shortfall equally.
    let total = 15_600_000u64;
    let ideal = total / 13;
    let high = 202_800;
    let mut ds = vec![district(1, ideal + high)];
    ds.extend((2..=13).map(|l| district(l, ideal - high / 12)));
    assert_eq!(ds.iter().map(|d| d.population).sum::<u64>(), total);
    assert!((pop_stddev_of(&ds) - 0.375_277_674_973_256_76).abs() < 1e-12);
}

#[test]
fn best_plan_spread_is_near_0_32() {
    let d = nc();
    let text = fs::read_to_string(format!("{NC}/best_plan.csv")).unwrap();
    let mut assignment = vec![0u8; d.len()];
    for line in text.lines().skip(1) {
        let (name, label) = line.rsplit_once(',').unwrap();
        assignment[d.id_of(name).unwrap().index()] = label.parse().unwrap();
    }
    let plan = Plan::new(assignment.clone(), d.seeds.clone());
    assert!(plan.violations(&d.graph).is_empty());

    let mut pops = [0f64; 13];
    for c in &d.counties {
        pops[assignment[c.id.index()] as usize - 1] += c.population as f64;
    }
    let total: f64 = pops.iter().sum();
    let var = pops
        .iter()
        .map(|p| (100.0 * p / total - 100.0 / 13.0).powi(2))
        .sum::<f64>()
        / 13.0;
    let sd = evaluate(&plan, &d).unwrap().pop_stddev_pp;
    assert!((sd - var.sqrt()).abs() < 1e-9);
    assert!((sd - 0.32).abs() <= 0.05, "{sd}");
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let d = nc();
    let run = |workers| {
        let mut cfg = EnsembleConfig::new(1500, 31);
        cfg.workers = workers;
        run_ensemble(&d, &cfg).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(8));
    assert_eq!(one, run(0));
}

#[test]
fn dedup_keeps_first_occurrence_only() {
    let d = nc();
    let res = run_ensemble(&d, &EnsembleConfig::new(3000, 3)).unwrap();
    assert_eq!(res.runs, res.completed + res.exhausted);
    assert_eq!(
        res.completed,
        res.records.len() as u64 + res.duplicates_removed + res.audit_failures.len() as u64
    );
    assert!(res.audit_failures.is_empty());

    let keys: HashSet<String> = res.records.iter().map(|r| canonical_key(&r.plan)).collect();
    assert_eq!(keys.len(), res.records.len());
    assert!(res.records.windows(2).all(|w| w[0].run_index < w[1].run_index));

    for dup in &res.duplicates {
        assert!(dup.duplicate_of < dup.run_index);
        let again = run_once(&d, 3, dup.run_index).unwrap().plan.unwrap();
        let first = res.records.iter().find(|r| r.run_index == dup.duplicate_of).unwrap();
        assert_eq!(again.assignment(), first.plan.assignment());
    }
}

#[test]
fn good_filter_extremes() {
    let d = nc();
    let res = run_ensemble(&d, &EnsembleConfig::new(500, 8)).unwrap();
    assert!(filter_good(&res, 0.0).is_empty());
    assert_eq!(filter_good(&res, f64::INFINITY).len(), res.records.len());
    assert_eq!(filter_good(&res, 1.0).len() as u64, res.good);
    assert!(res.records.iter().all(|r| r.good == (r.metrics.pop_stddev_pp <= 1.0)));
}

#[test]
fn bad_configs_are_rejected() {
    let d = nc();
    assert!(run_ensemble(&d, &EnsembleConfig::new(0, 1)).is_err());
    let mut cfg = EnsembleConfig::new(10, 1);
    cfg.good_threshold_pp = 0.0;
    assert!(run_ensemble(&d, &cfg).is_err());
}

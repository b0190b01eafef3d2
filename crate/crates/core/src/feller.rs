//! Coupled-distance experiments: runs from nearby initial vectors on one
//! clock field, and the truncation sweep toward a reference vector.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::{derive_seed, ClockField, EventClockView};
use crate::error::{Error, Result};
use crate::graphical::{state_at, GraphRealization, McldRealization};
use crate::mass::{dist, OrderedMassVector};
use crate::stats::quantile;

/// `d(m_t^a, m_t^b)` with both runs on the clock field `seed`.
pub fn coupled_distance(
    a: &OrderedMassVector,
    b: &OrderedMassVector,
    lambda: f64,
    t: f64,
    seed: u64,
) -> f64 {
    let clocks = ClockField::new(seed);
    dist(&state_at(a, &clocks, lambda, t), &state_at(b, &clocks, lambda, t))
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS test needs two nonempty samples"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Reference vector and truncation ladder of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub reference: OrderedMassVector,
    pub n_list: Vec<usize>,
    pub lambda: f64,
    pub t: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Threshold for the exceedance probability `P(d > threshold)`.
    pub threshold: f64,
}

impl SweepConfig {
    /// `i^{-0.6}` for `i ≤ 4096`, truncations at 256, 1024 and 2048.
    pub fn default_ladder(lambda: f64, replicas: usize, seed: u64) -> Self {
        Self {
            reference: OrderedMassVector::power_law(0.6, 4096),
            n_list: vec![256, 1024, 2048],
            lambda,
            t: 1.0,
            replicas,
            seed,
            threshold: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub p50: f64,
    pub p90: f64,
    pub exceed: f64,
}

/// Distance quantiles per truncation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub n_list: Vec<usize>,
    pub quantiles: BTreeMap<usize, DistanceSummary>,
    pub replicas: usize,
    pub threshold: f64,
    pub seeds: Vec<u64>,
    /// `distances[k][r]` is replica `r` at `n_list[k]`.
    pub distances: Vec<Vec<f64>>,
}

impl CouplingReport {
    /// CSV `n,replica,seed,distance`.
    pub fn distances_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("n,replica,seed,distance\n");
        for (n, row) in self.n_list.iter().zip(&self.distances) {
            for (r, d) in row.iter().enumerate() {
                let _ = writeln!(out, "{n},{r},{},{}", self.seeds[r], crate::json::fmt_f64(*d));
            }
        }
        out
    }
}

const FELLER_TAG: u64 = 0x6665_6c6c_6572_5f64;

/// Clock seed of replica `r` in a sweep with base seed `base`.
pub fn sweep_seed(base: u64, r: u64) -> u64 {
    derive_seed(base, FELLER_TAG, r)
}

/// Distances `d(m_t^{(n)}, m_t^{ref})` for every level of one replica.
///
/// The reference clock graph is built once; each truncation reuses its
/// restriction to `0..n`.
pub fn sweep_replica(cfg: &SweepConfig, seed: u64) -> Vec<f64> {
    let clocks = ClockField::new(seed);
    let w = cfg.reference.as_slice();
    let view = EventClockView::new(w, cfg.lambda, &clocks);
    let g = GraphRealization::build(&view, cfg.t);
    let levels: Vec<GraphRealization> = cfg.n_list.iter().map(|&n| g.restrict_prefix(n)).collect();
    let full = McldRealization::from_graph(g, &view).state(w);
    cfg.n_list
        .iter()
        .zip(levels)
        .map(|(&n, gn)| {
            let tview = EventClockView::new(&w[..n], cfg.lambda, &clocks);
            dist(&full, &McldRealization::from_graph(gn, &tview).state(&w[..n]))
        })
        .collect()
}

pub fn feller_sweep(cfg: &SweepConfig) -> Result<CouplingReport> {
    let n_ref = cfg.reference.len();
    if let Some(&n) = cfg.n_list.iter().find(|&&n| n > n_ref) {
        return Err(Error::invalid(format!("level {n} exceeds the reference support {n_ref}")));
    }
    if cfg.replicas == 0 || cfg.n_list.is_empty() {
        return Err(Error::invalid("sweep needs at least one level and one replica"));
    }
    let seeds: Vec<u64> = (0..cfg.replicas as u64).map(|r| sweep_seed(cfg.seed, r)).collect();
    let per_replica: Vec<Vec<f64>> = seeds.par_iter().map(|&s| sweep_replica(cfg, s)).collect();
    let distances: Vec<Vec<f64>> = (0..cfg.n_list.len())
        .map(|k| per_replica.iter().map(|row| row[k]).collect())
        .collect();
    let quantiles = cfg
        .n_list
        .iter()
        .zip(&distances)
        .map(|(&n, d)| {
            let exceed = d.iter().filter(|&&x| x > cfg.threshold).count() as f64 / d.len() as f64;
            (
                n,
                DistanceSummary {
                    p50: quantile(d, 0.5),
                    p90: quantile(d, 0.9),
                    exceed,
                },
            )
        })
        .collect();
    Ok(CouplingReport {
        n_list: cfg.n_list.clone(),
        quantiles,
        replicas: cfg.replicas,
        threshold: cfg.threshold,
        seeds,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truncation::analyze;

    #[test]
    fn ks_examples() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        let d = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn identical_starts_have_zero_distance() {
        let m = OrderedMassVector::power_law(0.6, 100);
        for seed in 0..20 {
            assert_eq!(coupled_distance(&m, &m, 1.0, 1.0, seed), 0.0);
        }
    }

    #[test]
    fn distance_is_deterministic() {
        let a = OrderedMassVector::power_law(0.6, 100);
        let b = a.truncate(30);
        assert_eq!(coupled_distance(&a, &b, 1.0, 1.0, 5), coupled_distance(&a, &b, 1.0, 1.0, 5));
    }

    #[test]
    fn truncation_distance_respects_sandwich() {
        let a = OrderedMassVector::power_law(0.6, 120);
        for seed in 0..60 {
            for m in [10, 40] {
                let d = coupled_distance(&a, &a.truncate(m), 1.0, 1.0, seed);
                let an = analyze(&a, &ClockField::new(seed), 1.0, 1.0, m).unwrap();
                assert!((d - an.distance).abs() < 1e-12);
                assert!(d <= 3.0 * an.gap().sqrt() + 1e-9);
            }
        }
    }

    #[test]
    fn deletion_free_truncation_respects_comparison_bound() {
        let a = OrderedMassVector::power_law(0.6, 120);
        for seed in 0..60 {
            let clocks = ClockField::new(seed);
            let g = crate::graphical::build_graph(&a, &clocks, 1.0);
            let m = 25;
            let small = g.restrict_prefix(m).s2(&a.as_slice()[..m]);
            let d = coupled_distance(&a, &a.truncate(m), 0.0, 1.0, seed);
            assert!(d <= (g.s2(a.as_slice()) - small).sqrt() + 1e-9);
        }
    }

    #[test]
    fn sweep_edge_cases() {
        let mut cfg = SweepConfig::default_ladder(1.0, 8, 1);
        cfg.reference = OrderedMassVector::power_law(0.6, 300);
        cfg.n_list = vec![50, 300];
        let rep = feller_sweep(&cfg).unwrap();
        assert!(rep.distances[1].iter().all(|&d| d == 0.0));
        assert!(rep.quantiles[&50].p50 <= rep.quantiles[&50].p90);
        cfg.n_list = vec![301];
        assert!(feller_sweep(&cfg).is_err());
    }

    #[test]
    fn sweep_matches_direct_distance() {
        let mut cfg = SweepConfig::default_ladder(1.0, 3, 2);
        cfg.reference = OrderedMassVector::power_law(0.6, 200);
        cfg.n_list = vec![20, 100];
        let rep = feller_sweep(&cfg).unwrap();
        for (r, &seed) in rep.seeds.iter().enumerate() {
            for (k, &n) in cfg.n_list.iter().enumerate() {
                let d = coupled_distance(&cfg.reference, &cfg.reference.truncate(n), 1.0, 1.0, seed);
                assert!((rep.distances[k][r] - d).abs() < 1e-12);
            }
        }
    }
}

//! Mean-field frozen percolation FP(n, λ(n)) from a critical Erdős–Rényi
//! start, and the rescaling that turns it into MCLD.
//!
//! Raw time `s` and rescaled time `t` are related by `s = n^{-1/3} t`; raw
//! sizes `k` scale to masses `n^{-2/3} k`. With `λ(n) = λ n^{-1/3}`, the
//! rescaled component process merges `x, y` at rate `x·y` and deletes `x` at
//! rate `λ·x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::derive_seed;
use crate::error::{Error, Result};
use crate::feller::ks_two_sample;
use crate::mass::{ord_unchecked, OrderedMassVector};

/// Union-find with a circular member list per component.
#[derive(Debug, Clone)]
pub struct ComponentForest {
    parent: Vec<u32>,
    size: Vec<u32>,
    next: Vec<u32>,
}

impl ComponentForest {
    pub fn new(n: usize) -> Self {
        assert!(n < u32::MAX as usize, "vertex count exceeds u32");
        let ids: Vec<u32> = (0..n as u32).collect();
        Self {
            parent: ids.clone(),
            size: vec![1; n],
            next: ids,
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, v: usize) -> usize {
        let mut root = v as u32;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = v as u32;
        while self.parent[cur as usize] != root {
            let up = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = up;
        }
        root as usize
    }

    /// Merges the components of `a` and `b`; false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        self.next.swap(ra, rb);
        true
    }

    /// Size of the component of root `r`.
    pub fn root_size(&self, r: usize) -> usize {
        self.size[r] as usize
    }

    /// Members of the component containing `v`, in list order.
    pub fn members(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut cur = self.next[v] as usize;
        while cur != v {
            out.push(cur);
            cur = self.next[cur] as usize;
        }
        out
    }

    /// Component sizes over the vertices flagged alive, non-increasing.
    fn sizes(&self, alive: impl Iterator<Item = usize>) -> Vec<u64> {
        let mut s: Vec<u64> = alive
            .filter(|&v| self.parent[v] as usize == v)
            .map(|v| self.size[v] as u64)
            .collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Components as vertex lists ordered by least member.
    pub fn components(&mut self) -> Vec<Vec<usize>> {
        let mut roots_seen = vec![usize::MAX; self.len()];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for v in 0..self.len() {
            let r = self.find(v);
            if roots_seen[r] == usize::MAX {
                roots_seen[r] = out.len();
                out.push(Vec::new());
            }
            out[roots_seen[r]].push(v);
        }
        out
    }
}

/// Critical-window edge probability `(1 + u n^{-1/3}) / n`.
pub fn critical_p(n: usize, u: f64) -> f64 {
    let nf = n as f64;
    (1.0 + u * nf.powf(-1.0 / 3.0)) / nf
}

/// An Erdős–Rényi sample reduced to its components.
#[derive(Debug, Clone)]
pub struct ErSample {
    pub n: usize,
    pub p: f64,
    pub edges: usize,
    pub forest: ComponentForest,
}

impl ErSample {
    pub fn sizes(&self) -> Vec<u64> {
        self.forest.sizes(0..self.n)
    }
}

/// `G(n, p)` by geometric skipping over the pairs `w < v`; expected cost
/// `O(n + n²p)`.
pub fn sample_er<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<ErSample> {
    if !(p <= 1.0) {
        return Err(Error::invalid(format!("edge probability {p} exceeds 1")));
    }
    if p < -1e-12 {
        return Err(Error::invalid(format!("edge probability {p} is negative")));
    }
    let p = p.max(0.0);
    let mut forest = ComponentForest::new(n);
    let mut edges = 0;
    if p == 1.0 {
        for v in 1..n {
            for w in 0..v {
                forest.union(v, w);
                edges += 1;
            }
        }
    } else if p > 0.0 && n > 1 {
        let log_q = (-p).ln_1p();
        let mut v: usize = 1;
        let mut w: i64 = -1;
        while v < n {
            let r: f64 = rng.random();
            w += 1 + ((-r).ln_1p() / log_q).floor() as i64;
            while w >= v as i64 && v < n {
                w -= v as i64;
                v += 1;
            }
            if v < n {
                forest.union(v, w as usize);
                edges += 1;
            }
        }
    }
    Ok(ErSample { n, p, edges, forest })
}

/// Critical ER start with `p = (1 + u n^{-1/3}) / n`, seeded.
pub fn sample_critical_er(n: usize, u: f64, seed: u64) -> Result<ErSample> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_er(n, critical_p(n, u), &mut rng)
}

/// Parameters of one FP(n, λ n^{-1/3}) experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpConfig {
    pub n: usize,
    pub lambda_rescaled: f64,
    pub u: f64,
    /// Rescaled observation times, strictly increasing.
    pub t_list: Vec<f64>,
    #[serde(default = "default_top_r")]
    pub top_r: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_top_r() -> usize {
    5
}

fn default_replicas() -> usize {
    1
}

impl FpConfig {
    /// Per-vertex lightning rate `λ(n) = λ n^{-1/3}`.
    pub fn lightning_rate(&self) -> f64 {
        self.lambda_rescaled * (self.n as f64).powf(-1.0 / 3.0)
    }

    /// Raw times `n^{-1/3} t` for the rescaled observation times.
    pub fn raw_times(&self) -> Vec<f64> {
        let c = (self.n as f64).powf(-1.0 / 3.0);
        self.t_list.iter().map(|t| c * t).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(self.lambda_rescaled >= 0.0 && self.lambda_rescaled.is_finite()) {
            return Err(Error::invalid("lambda must be finite and nonnegative"));
        }
        if self.replicas == 0 {
            return Err(Error::invalid("replicas must be at least 1"));
        }
        crate::trajectory::validate_grid(&self.t_list)
    }
}

/// Component sizes observed at one raw time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpSnapshot {
    pub raw_time: f64,
    /// Largest sizes, non-increasing, at most `top_r` of them.
    pub top: Vec<u64>,
    /// `Σ size²` over all alive components.
    pub size_sq_sum: f64,
    pub alive: usize,
    pub removed: usize,
    pub components: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FpEventKind {
    Merge,
    Delete,
}

/// Effective event of the component process; `sizes` lists the merging
/// sizes or the deleted size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpEvent {
    pub raw_time: f64,
    pub kind: FpEventKind,
    pub sizes: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpRawTrajectory {
    pub n: usize,
    pub horizon: f64,
    pub snapshots: Vec<FpSnapshot>,
    pub events: Vec<FpEvent>,
}

/// Optional edge bookkeeping: when present, the run also keeps the edge set
/// and reports it through `on_edge`; the component process is unchanged.
pub(crate) trait EdgeTracker {
    fn add(&mut self, a: usize, b: usize);
    fn remove_vertex(&mut self, v: usize);
}

struct NoTracking;

impl EdgeTracker for NoTracking {
    fn add(&mut self, _: usize, _: usize) {}
    fn remove_vertex(&mut self, _: usize) {}
}

struct Fp {
    forest: ComponentForest,
    alive: Vec<u32>,
    position: Vec<u32>,
}

impl Fp {
    fn new(forest: ComponentForest) -> Self {
        let n = forest.len();
        Self {
            forest,
            alive: (0..n as u32).collect(),
            position: (0..n as u32).collect(),
        }
    }

    fn remove(&mut self, v: usize) {
        let pos = self.position[v] as usize;
        let last = *self.alive.last().expect("removing from a nonempty set");
        self.alive[pos] = last;
        self.position[last as usize] = pos as u32;
        self.alive.pop();
        self.position[v] = u32::MAX;
    }

    fn snapshot(&self, raw_time: f64, top_r: usize) -> FpSnapshot {
        let sizes = self.forest.sizes(self.alive.iter().map(|&v| v as usize));
        let n = self.forest.len();
        FpSnapshot {
            raw_time,
            top: sizes.iter().take(top_r).copied().collect(),
            size_sq_sum: sizes.iter().fold(0.0, |acc, &s| acc + (s * s) as f64),
            alive: self.alive.len(),
            removed: n - self.alive.len(),
            components: sizes.len(),
        }
    }
}

pub(crate) fn run_fp_tracked<R: Rng + ?Sized, T: EdgeTracker>(
    forest: ComponentForest,
    lightning_rate: f64,
    raw_times: &[f64],
    top_r: usize,
    rng: &mut R,
    tracker: &mut T,
) -> FpRawTrajectory {
    let n = forest.len();
    let nf = n as f64;
    let horizon = raw_times.last().copied().unwrap_or(0.0);
    let mut fp = Fp::new(forest);
    let mut snapshots = Vec::with_capacity(raw_times.len());
    let mut events = Vec::new();
    let mut now = 0.0;
    loop {
        let a = fp.alive.len() as f64;
        let pair_rate = a * (a - 1.0) / (2.0 * nf);
        let strike_rate = lightning_rate * a;
        let total = pair_rate + strike_rate;
        let next = if total > 0.0 {
            let u: f64 = rng.random();
            now - (-u).ln_1p() / total
        } else {
            f64::INFINITY
        };
        while snapshots.len() < raw_times.len() && raw_times[snapshots.len()] < next {
            snapshots.push(fp.snapshot(raw_times[snapshots.len()], top_r));
        }
        if next > horizon {
            break;
        }
        now = next;
        let k = fp.alive.len();
        if rng.random::<f64>() * total < pair_rate {
            let i = rng.random_range(0..k);
            let mut j = rng.random_range(0..k - 1);
            if j >= i {
                j += 1;
            }
            let (a, b) = (fp.alive[i] as usize, fp.alive[j] as usize);
            tracker.add(a, b);
            let (ra, rb) = (fp.forest.find(a), fp.forest.find(b));
            if ra != rb {
                let sizes = vec![fp.forest.root_size(ra) as u64, fp.forest.root_size(rb) as u64];
                fp.forest.union(a, b);
                events.push(FpEvent { raw_time: now, kind: FpEventKind::Merge, sizes });
            }
        } else {
            let v = fp.alive[rng.random_range(0..k)] as usize;
            let mut members = fp.forest.members(v);
            members.sort_unstable();
            for &w in &members {
                fp.remove(w);
                tracker.remove_vertex(w);
            }
            events.push(FpEvent {
                raw_time: now,
                kind: FpEventKind::Delete,
                sizes: vec![members.len() as u64],
            });
        }
    }
    FpRawTrajectory {
        n,
        horizon,
        snapshots,
        events,
    }
}

/// Runs FP from `initial`, recording snapshots at the raw times of `config`.
pub fn run_fp<R: Rng + ?Sized>(config: &FpConfig, initial: &ErSample, rng: &mut R) -> Result<FpRawTrajectory> {
    config.validate()?;
    if initial.n != config.n {
        return Err(Error::invalid(format!(
            "initial graph has {} vertices, config expects {}",
            initial.n, config.n
        )));
    }
    Ok(run_fp_tracked(
        initial.forest.clone(),
        config.lightning_rate(),
        &config.raw_times(),
        config.top_r,
        rng,
        &mut NoTracking,
    ))
}

/// Scaled top masses `n^{-2/3} M_k(n^{-1/3} t)` at one rescaled time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledSample {
    pub t: f64,
    pub masses: OrderedMassVector,
    /// `n^{-4/3} Σ size²`: the full scaled S₂, beyond the top ranks.
    pub s2: f64,
}

/// Maps the raw snapshots at `n^{-1/3} t` to rescaled samples.
pub fn scale_trajectory(raw: &FpRawTrajectory, rescaled_times: &[f64]) -> Result<Vec<ScaledSample>> {
    let nf = raw.n as f64;
    let time_factor = nf.powf(-1.0 / 3.0);
    let mass_factor = nf.powf(-2.0 / 3.0);
    rescaled_times
        .iter()
        .map(|&t| {
            let tau = time_factor * t;
            if tau > raw.horizon * (1.0 + 1e-12) {
                return Err(Error::invalid(format!(
                    "rescaled time {t} lies beyond the simulated horizon"
                )));
            }
            let snap = raw
                .snapshots
                .iter()
                .find(|s| (s.raw_time - tau).abs() <= 1e-12 * tau.max(1e-300))
                .ok_or_else(|| Error::invalid(format!("no snapshot recorded at rescaled time {t}")))?;
            Ok(ScaledSample {
                t,
                masses: ord_unchecked(snap.top.iter().map(|&k| k as f64 * mass_factor).collect()),
                s2: snap.size_sq_sum * mass_factor * mass_factor,
            })
        })
        .collect()
}

const FP_TAG: u64 = 0x6670_5f72_6570_6c69;

/// Seed of replica `r` of the experiment at size `n`.
pub fn replica_seed(base: u64, n: usize, r: u64) -> u64 {
    derive_seed(base, FP_TAG ^ n as u64, r)
}

/// One full replica: critical ER start then FP dynamics, both driven by one
/// ChaCha8 stream.
pub fn fp_replica(config: &FpConfig, replica: u64) -> Result<Vec<ScaledSample>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(replica_seed(config.seed, config.n, replica));
    let initial = sample_er(config.n, critical_p(config.n, config.u), &mut rng)?;
    let raw = run_fp(config, &initial, &mut rng)?;
    scale_trajectory(&raw, &config.t_list)
}

/// All replicas of `config`, in replica order.
pub fn fp_samples(config: &FpConfig) -> Result<Vec<Vec<ScaledSample>>> {
    config.validate()?;
    (0..config.replicas as u64)
        .into_par_iter()
        .map(|r| fp_replica(config, r))
        .collect()
}

/// Parameters of the rescaled comparison across system sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub n_list: Vec<usize>,
    pub lambda_rescaled: f64,
    pub u: f64,
    pub t: f64,
    pub replicas: usize,
    pub top_r: usize,
    /// Size of the reference system.
    pub n_ref: usize,
    pub ref_replicas: usize,
    pub seed: u64,
}

impl CompareConfig {
    pub fn acceptance() -> Self {
        Self {
            n_list: vec![20_000, 80_000],
            lambda_rescaled: 1.0,
            u: 0.0,
            t: 1.0,
            replicas: 500,
            top_r: 3,
            n_ref: 2_000_000,
            ref_replicas: 2000,
            seed: 0x0f70_2024,
        }
    }
}

/// KS statistics per rank for one system size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeComparison {
    pub n: usize,
    /// KS against the reference law, rank 1 first.
    pub ks_vs_reference: Vec<f64>,
    /// KS against the previous size in the list (empty for the first).
    pub ks_vs_previous: Vec<f64>,
    pub mean_s2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpComparison {
    pub config: CompareConfig,
    pub sizes: Vec<SizeComparison>,
}

fn rank_columns(samples: &[Vec<ScaledSample>], top_r: usize) -> Vec<Vec<f64>> {
    (0..top_r)
        .map(|k| samples.iter().map(|s| s[0].masses.get(k)).collect())
        .collect()
}

/// Rescaled FP at each `n` against a reference sample of the MCLD(λ) law
/// started from scaled critical ER masses.
///
/// The reference system is FP itself at `n_ref`: after rescaling it is an
/// exact MCLD(λ) realization from its own scaled ER start, so the only
/// approximation left is `𝓜(u)` by finite-`n_ref` ER masses.
pub fn fp_mcld_compare(cfg: &CompareConfig) -> Result<FpComparison> {
    if cfg.n_list.is_empty() || cfg.top_r == 0 || cfg.replicas == 0 || cfg.ref_replicas == 0 {
        return Err(Error::invalid("comparison needs sizes, ranks and replicas"));
    }
    let at = |n: usize, replicas: usize| FpConfig {
        n,
        lambda_rescaled: cfg.lambda_rescaled,
        u: cfg.u,
        t_list: vec![cfg.t],
        top_r: cfg.top_r,
        replicas,
        seed: cfg.seed,
    };
    let reference = rank_columns(&fp_samples(&at(cfg.n_ref, cfg.ref_replicas))?, cfg.top_r);
    let mut sizes = Vec::new();
    let mut previous: Option<Vec<Vec<f64>>> = None;
    for &n in &cfg.n_list {
        let samples = fp_samples(&at(n, cfg.replicas))?;
        let cols = rank_columns(&samples, cfg.top_r);
        let s2: Vec<f64> = samples.iter().map(|s| s[0].s2).collect();
        let ks_vs_reference = cols
            .iter()
            .zip(&reference)
            .map(|(a, b)| ks_two_sample(a, b))
            .collect::<Result<Vec<_>>>()?;
        let ks_vs_previous = match &previous {
            Some(prev) => cols
                .iter()
                .zip(prev)
                .map(|(a, b)| ks_two_sample(a, b))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        sizes.push(SizeComparison {
            n,
            ks_vs_reference,
            ks_vs_previous,
            mean_s2: crate::stats::mean_sem(&s2).0,
        });
        previous = Some(cols);
    }
    Ok(FpComparison {
        config: cfg.clone(),
        sizes,
    })
}

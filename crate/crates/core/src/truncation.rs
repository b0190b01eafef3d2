//! Truncation split, the bad set K*, the sandwich graphs and the analytic
//! bounds that control the truncation error.
//!
//! Vertex indices are 0-based: the lower block is `0..m`, the upper block `m..n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::{derive_seed, ClockField, ClockSource, EventClockView, ResampledCross};
use crate::dsu::DisjointSet;
use crate::error::{Error, Result};
use crate::graphical::{GraphRealization, McldRealization};
use crate::mass::{block_weights, dist, sum_squares, OrderedMassVector, S2_TOLERANCE};
use crate::stats::mean_sem;

/// `G^{m↓}` and `G^{m↑}` with their components and the cross edges of `G`.
#[derive(Debug, Clone)]
pub struct SplitRealization {
    pub m: usize,
    pub n: usize,
    /// Components `K` of the lower graph, ordered by least vertex.
    pub lower: Vec<Vec<usize>>,
    /// Components `L` of the upper graph, ordered by least vertex.
    pub upper: Vec<Vec<usize>>,
    pub alpha: f64,
    pub beta: f64,
    /// Cross edges of `G` as `(k, l)` component pairs, one entry per edge.
    pub cross: Vec<(usize, usize)>,
}

impl SplitRealization {
    /// Splits an already built clock graph at level `m`.
    pub fn from_graph(g: &GraphRealization, masses: &[f64], m: usize) -> Result<Self> {
        let n = g.vertex_count();
        if m > n {
            return Err(Error::invalid(format!("truncation level {m} exceeds support size {n}")));
        }
        let mut down = DisjointSet::new(m);
        let mut up = DisjointSet::new(n - m);
        let mut crossing = Vec::new();
        for e in g.edges() {
            match (e.a < m, e.b < m) {
                (true, true) => {
                    down.union(e.a, e.b);
                }
                (false, false) => {
                    up.union(e.a - m, e.b - m);
                }
                _ => crossing.push((e.a.min(e.b), e.a.max(e.b))),
            }
        }
        let lower = down.blocks();
        let upper: Vec<Vec<usize>> = up
            .blocks()
            .into_iter()
            .map(|b| b.into_iter().map(|v| v + m).collect())
            .collect();
        let mut owner = vec![0usize; n];
        for (k, c) in lower.iter().enumerate() {
            for &v in c {
                owner[v] = k;
            }
        }
        for (l, c) in upper.iter().enumerate() {
            for &v in c {
                owner[v] = l;
            }
        }
        let cross = crossing.iter().map(|&(a, b)| (owner[a], owner[b])).collect();
        let s2 = |blocks: &[Vec<usize>]| sum_squares(&block_weights(masses, blocks));
        Ok(Self {
            m,
            n,
            alpha: s2(&lower),
            beta: s2(&upper),
            lower,
            upper,
            cross,
        })
    }
}

/// `split` at horizon `t`: builds `G_t` on the support and splits it at `m`.
pub fn split<C: ClockSource + ?Sized>(
    masses: &OrderedMassVector,
    clocks: &C,
    t: f64,
    m: usize,
) -> Result<SplitRealization> {
    let view = EventClockView::new(masses.as_slice(), 0.0, clocks);
    SplitRealization::from_graph(&GraphRealization::build(&view, t), masses.as_slice(), m)
}

/// The bipartite multigraph `𝓑` on `K ∪ L` with damage flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentMultigraph {
    pub damaged_lower: Vec<bool>,
    pub damaged_upper: Vec<bool>,
    /// `(k, l)` per parallel edge.
    pub edges: Vec<(usize, usize)>,
}

impl ComponentMultigraph {
    pub fn new(damaged_lower: Vec<bool>, damaged_upper: Vec<bool>, edges: Vec<(usize, usize)>) -> Result<Self> {
        if edges
            .iter()
            .any(|&(k, l)| k >= damaged_lower.len() || l >= damaged_upper.len())
        {
            return Err(Error::invalid("multigraph edge refers to a missing component"));
        }
        Ok(Self {
            damaged_lower,
            damaged_upper,
            edges,
        })
    }

    /// A component is damaged when one of its vertices is struck by time `t`.
    pub fn from_split<C: ClockSource + ?Sized>(
        sr: &SplitRealization,
        view: &EventClockView<'_, C>,
        t: f64,
    ) -> Self {
        let damaged = |blocks: &[Vec<usize>]| -> Vec<bool> {
            blocks
                .iter()
                .map(|c| c.iter().any(|&v| view.strike_time(v) <= t))
                .collect()
        };
        Self {
            damaged_lower: damaged(&sr.lower),
            damaged_upper: damaged(&sr.upper),
            edges: sr.cross.clone(),
        }
    }

    fn k_count(&self) -> usize {
        self.damaged_lower.len()
    }

    fn vertex_count(&self) -> usize {
        self.damaged_lower.len() + self.damaged_upper.len()
    }

    fn damaged(&self, v: usize) -> bool {
        let k = self.k_count();
        if v < k {
            self.damaged_lower[v]
        } else {
            self.damaged_upper[v - k]
        }
    }

    /// Edges with both endpoints in the combined `0..|K|+|L|` numbering.
    fn flat_edges(&self) -> Vec<(usize, usize)> {
        let k = self.k_count();
        self.edges.iter().map(|&(a, l)| (a, k + l)).collect()
    }
}

/// Marks every edge that is a bridge. Parallel edges are never bridges.
fn bridges(n: usize, edges: &[(usize, usize)]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (id, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, id));
        adj[b].push((a, id));
    }
    let mut is_bridge = vec![false; edges.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;
    // frames: (vertex, edge used to enter, next adjacency position)
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        stack.push((root, usize::MAX, 0));
        while let Some(frame) = stack.last_mut() {
            let (v, via, pos) = *frame;
            if pos < adj[v].len() {
                frame.2 += 1;
                let (w, id) = adj[v][pos];
                if id == via {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, id, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        is_bridge[via] = true;
                    }
                }
            }
        }
    }
    is_bridge
}

/// `K*` as a flag per lower component.
///
/// `k` is bad when another damaged vertex shares its component of `𝓑`, or
/// when `k` is damaged and lies on a circuit (an incident non-bridge edge).
pub fn classify_bad(cm: &ComponentMultigraph) -> Vec<bool> {
    let n = cm.vertex_count();
    let edges = cm.flat_edges();
    let mut dsu = DisjointSet::new(n);
    for &(a, b) in &edges {
        dsu.union(a, b);
    }
    let mut damaged_in = vec![0usize; n];
    for v in 0..n {
        if cm.damaged(v) {
            let r = dsu.find(v);
            damaged_in[r] += 1;
        }
    }
    let is_bridge = bridges(n, &edges);
    let mut on_circuit = vec![false; n];
    for (id, &(a, b)) in edges.iter().enumerate() {
        if !is_bridge[id] {
            on_circuit[a] = true;
            on_circuit[b] = true;
        }
    }
    (0..cm.k_count())
        .map(|k| {
            let own = usize::from(cm.damaged(k));
            let others = damaged_in[dsu.find(k)] - own;
            others > 0 || (own == 1 && on_circuit[k])
        })
        .collect()
}

/// Vertex sets and S₂ values of the sandwich graphs `Ĝ ⊆ Ǧ`.
#[derive(Debug, Clone)]
pub struct Sandwich {
    pub hat: Vec<bool>,
    pub check: Vec<bool>,
    pub s2_hat: f64,
    pub s2_check: f64,
}

fn subset(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| !x || y)
}

/// S₂ of the subgraph of `g` spanned by the flagged vertices.
pub fn spanned_s2(g: &GraphRealization, masses: &[f64], keep: &[bool]) -> f64 {
    sum_squares(&block_weights(masses, &g.spanned_components(keep)))
}

/// Builds `Ĝ` and `Ǧ` and checks the inclusion chain
/// `V(Ĝ) ⊆ 𝓥^(m), 𝓥 ⊆ V(Ǧ)`.
///
/// `intact` covers `0..n`; `intact_trunc` covers `0..m`.
pub fn sandwich_graphs(
    g: &GraphRealization,
    masses: &[f64],
    sr: &SplitRealization,
    bad: &[bool],
    intact: &[bool],
    intact_trunc: &[bool],
) -> Result<Sandwich> {
    let n = sr.n;
    let mut hat = vec![false; n];
    let mut check = vec![false; n];
    for (k, c) in sr.lower.iter().enumerate() {
        for &v in c {
            if bad[k] {
                check[v] = true;
            } else if intact_trunc[v] {
                check[v] = true;
                hat[v] = true;
            }
        }
    }
    for flag in check.iter_mut().skip(sr.m) {
        *flag = true;
    }
    let mut trunc_full = intact_trunc.to_vec();
    trunc_full.resize(n, false);
    let chain = [
        ("V(Ĝ) ⊆ 𝓥^(m)", subset(&hat, &trunc_full)),
        ("𝓥^(m) ⊆ V(Ǧ)", subset(&trunc_full, &check)),
        ("V(Ĝ) ⊆ 𝓥", subset(&hat, intact)),
        ("𝓥 ⊆ V(Ǧ)", subset(intact, &check)),
    ];
    if let Some((name, _)) = chain.iter().find(|c| !c.1) {
        return Err(Error::Invariant(format!("sandwich inclusion {name} fails at m = {}", sr.m)));
    }
    Ok(Sandwich {
        s2_hat: spanned_s2(g, masses, &hat),
        s2_check: spanned_s2(g, masses, &check),
        hat,
        check,
    })
}

/// Good components `k` for which `𝓒_k ∩ 𝓥^(m) ≠ 𝓒_k ∩ 𝓥`.
pub fn good_component_check(
    sr: &SplitRealization,
    bad: &[bool],
    intact: &[bool],
    intact_trunc: &[bool],
) -> Vec<usize> {
    sr.lower
        .iter()
        .enumerate()
        .filter(|&(k, c)| !bad[k] && c.iter().any(|&v| intact[v] != intact_trunc[v]))
        .map(|(k, _)| k)
        .collect()
}

fn check_half(name: &str, t: f64, a: f64, b: f64) -> Result<()> {
    if 2.0 * t * t * a * b > 1.0 + S2_TOLERANCE {
        return Err(Error::HypothesisViolated(format!(
            "{name}: t²·{a}·{b} = {} exceeds 1/2",
            t * t * a * b
        )));
    }
    Ok(())
}

/// `2b(1 + ta)²`, bounding `E[S₂^{B_t}] − a` when `t²ab ≤ 1/2`.
pub fn bipartite_bound(a: f64, b: f64, t: f64) -> Result<f64> {
    check_half("bipartite bound", t, a, b)?;
    Ok(2.0 * b * (1.0 + t * a).powi(2))
}

/// The two terms `2β(1+tα)²` and `2t²λβ(1+tα)α^{3/2}` whose sum bounds the
/// conditional mean sandwich gap when `t²αβ ≤ 1/2`.
pub fn truncation_bound(alpha: f64, beta: f64, t: f64, lambda: f64) -> Result<[f64; 2]> {
    check_half("truncation bound", t, alpha, beta)?;
    let g = 1.0 + t * alpha;
    Ok([
        2.0 * beta * g * g,
        2.0 * t * t * lambda * beta * g * alpha.powf(1.5),
    ])
}

/// Single constant dominating both bound terms: `C = 2·max(1, λt²)`.
pub fn budget_constant(t: f64, lambda: f64) -> f64 {
    2.0 * (lambda * t * t).max(1.0)
}

/// Largest δ with `t²Mδ ≤ 1/2` and `9Cδ((1+tM)² + (1+tM)M^{3/2}) ≤ ε³`.
pub fn feller_budget(eps: f64, big_m: f64, t: f64, lambda: f64) -> Result<f64> {
    if !(eps > 0.0 && big_m > 0.0 && t > 0.0 && lambda >= 0.0) {
        return Err(Error::invalid("feller budget needs ε, M, t > 0 and λ ≥ 0"));
    }
    let c = budget_constant(t, lambda);
    let g = 1.0 + t * big_m;
    let first = 0.5 / (t * t * big_m);
    let second = eps.powi(3) / (9.0 * c * (g * g + g * big_m.powf(1.5)));
    Ok(first.min(second))
}

/// One realization of the bipartite graph with left weights `x` and right
/// weights `y`: `i` and `j` are joined iff `ξ_{i, |x|+j} ≤ t x_i y_j`.
/// Returns `S₂`.
pub fn bipartite_s2_sample<C: ClockSource + ?Sized>(x: &[f64], y: &[f64], t: f64, clocks: &C) -> f64 {
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let view = EventClockView::new(&all, 0.0, clocks);
    let left = x.len();
    let mut dsu = DisjointSet::new(all.len());
    for i in 0..left {
        for j in left..all.len() {
            if view.edge_within(i, j, t) {
                dsu.union(i, j);
            }
        }
    }
    sum_squares(&block_weights(&all, &dsu.blocks()))
}

/// Everything computed for one realization at one truncation level.
#[derive(Debug, Clone)]
pub struct TruncationAnalysis {
    pub split: SplitRealization,
    pub bad: Vec<bool>,
    pub sandwich: Sandwich,
    pub s2_h: f64,
    pub s2_h_m: f64,
    pub distance: f64,
    pub good_violations: Vec<usize>,
}

impl TruncationAnalysis {
    pub fn gap(&self) -> f64 {
        self.sandwich.s2_check - self.sandwich.s2_hat
    }

    /// `d(m_t, m_t^(m)) ≤ 3√gap`, allowing `1e-9` for rounding.
    pub fn sandwich_holds(&self) -> bool {
        self.distance <= 3.0 * self.gap().max(0.0).sqrt() + S2_TOLERANCE
    }
}

/// Runs the full and the truncated MCLD on shared clocks and derives the
/// split, `K*`, the sandwich graphs and the good-component identity check.
pub fn analyze<C: ClockSource + ?Sized>(
    masses: &OrderedMassVector,
    clocks: &C,
    lambda: f64,
    t: f64,
    m: usize,
) -> Result<TruncationAnalysis> {
    let view = EventClockView::new(masses.as_slice(), lambda, clocks);
    let g = GraphRealization::build(&view, t);
    analyze_graph(masses, &view, g, t, m)
}

/// As [`analyze`], reusing a clock graph built from `view` at horizon `t`.
pub fn analyze_graph<C: ClockSource + ?Sized>(
    masses: &OrderedMassVector,
    view: &EventClockView<'_, C>,
    g: GraphRealization,
    t: f64,
    m: usize,
) -> Result<TruncationAnalysis> {
    let w = masses.as_slice();
    let sr = SplitRealization::from_graph(&g, w, m)?;
    let cm = ComponentMultigraph::from_split(&sr, view, t);
    let bad = classify_bad(&cm);
    let trunc_masses = &w[..sr.m];
    let trunc_view = EventClockView::new(trunc_masses, view.lambda(), view.clocks());
    let trunc = McldRealization::from_graph(g.restrict_prefix(sr.m), &trunc_view);
    let full = McldRealization::from_graph(g, view);
    let sandwich = sandwich_graphs(&full.graph, w, &sr, &bad, &full.intact, &trunc.intact)?;
    let state = full.state(w);
    let state_m = trunc.state(trunc_masses);
    Ok(TruncationAnalysis {
        good_violations: good_component_check(&sr, &bad, &full.intact, &trunc.intact),
        s2_h: state.norm_sq(),
        s2_h_m: state_m.norm_sq(),
        distance: dist(&state, &state_m),
        split: sr,
        bad,
        sandwich,
    })
}

/// Serializable summary of one truncation analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub m: usize,
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
    pub s2_hat: f64,
    pub s2_check: f64,
    pub s2_h: f64,
    pub s2_h_m: f64,
    pub gap: f64,
    pub distance: f64,
    /// `None` when `t²αβ > 1/2`, where the bound does not apply.
    pub bound_terms: Option<[f64; 2]>,
    pub bad_components: usize,
    pub good_violations: usize,
    pub holds: bool,
}

impl TruncationReport {
    pub fn new(a: &TruncationAnalysis, seed: u64, t: f64, lambda: f64) -> Self {
        let sr = &a.split;
        Self {
            m: sr.m,
            seed,
            alpha: sr.alpha,
            beta: sr.beta,
            s2_hat: a.sandwich.s2_hat,
            s2_check: a.sandwich.s2_check,
            s2_h: a.s2_h,
            s2_h_m: a.s2_h_m,
            gap: a.gap(),
            distance: a.distance,
            bound_terms: truncation_bound(sr.alpha, sr.beta, t, lambda).ok(),
            bad_components: a.bad.iter().filter(|&&b| b).count(),
            good_violations: a.good_violations.len(),
            holds: a.sandwich_holds() && a.good_violations.is_empty(),
        }
    }
}

/// Report for clock field `seed` at level `m`.
pub fn truncation_report(
    masses: &OrderedMassVector,
    seed: u64,
    lambda: f64,
    t: f64,
    m: usize,
) -> Result<TruncationReport> {
    let clocks = ClockField::new(seed);
    Ok(TruncationReport::new(&analyze(masses, &clocks, lambda, t, m)?, seed, t, lambda))
}

const BIPARTITE_TAG: u64 = 0x6269_7061_7274_6974;
const GAP_TAG: u64 = 0x6761_705f_7265_7361;

/// Monte Carlo mean and SEM of `S₂^{B_t} − a` with the bound `2b(1+ta)²`.
pub fn bipartite_excess_estimate(
    x: &[f64],
    y: &[f64],
    t: f64,
    replicas: usize,
    base_seed: u64,
) -> Result<(f64, f64, f64)> {
    let a = sum_squares(x);
    let b = sum_squares(y);
    let bound = bipartite_bound(a, b, t)?;
    if replicas == 0 {
        return Err(Error::invalid("replicas must be at least 1"));
    }
    let samples: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let clocks = ClockField::new(derive_seed(base_seed, BIPARTITE_TAG, r));
            bipartite_s2_sample(x, y, t, &clocks) - a
        })
        .collect();
    let (mean, sem) = mean_sem(&samples);
    Ok((mean, sem, bound))
}

/// Conditional gap statistics with the split graphs frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub mean: f64,
    pub sem: f64,
    pub bound: f64,
}

/// Holds `G^{m↓}` and `G^{m↑}` of `frozen_seed` fixed and resamples the cross
/// edges and all lightning clocks `replicas` times.
pub fn conditional_gap_estimate(
    masses: &OrderedMassVector,
    m: usize,
    frozen_seed: u64,
    lambda: f64,
    t: f64,
    replicas: usize,
    base_seed: u64,
) -> Result<GapEstimate> {
    if replicas == 0 {
        return Err(Error::invalid("replicas must be at least 1"));
    }
    let frozen = ClockField::new(frozen_seed);
    let sr = split(masses, &frozen, t, m)?;
    let bound: f64 = truncation_bound(sr.alpha, sr.beta, t, lambda)?.iter().sum();
    let gaps: Vec<Result<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let clocks = ResampledCross {
                frozen,
                fresh: ClockField::new(derive_seed(base_seed, GAP_TAG, r)),
                split: m,
            };
            analyze(masses, &clocks, lambda, t, m).map(|a| a.gap())
        })
        .collect();
    let gaps = gaps.into_iter().collect::<Result<Vec<f64>>>()?;
    let (mean, sem) = mean_sem(&gaps);
    Ok(GapEstimate {
        alpha: sr.alpha,
        beta: sr.beta,
        mean,
        sem,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn omv(v: &[f64]) -> OrderedMassVector {
        OrderedMassVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn extreme_levels() {
        let m = OrderedMassVector::power_law(0.6, 30);
        let clocks = ClockField::new(4);
        let top = split(&m, &clocks, 1.0, 30).unwrap();
        assert_eq!(top.beta, 0.0);
        assert!(top.upper.is_empty() && top.cross.is_empty());
        let bottom = split(&m, &clocks, 1.0, 0).unwrap();
        assert_eq!(bottom.alpha, 0.0);
        assert!(split(&m, &clocks, 1.0, 31).is_err());
    }

    #[test]
    fn split_s2_below_full() {
        for seed in 0..100 {
            let m = OrderedMassVector::power_law(0.6, 60);
            let clocks = ClockField::new(seed);
            let g = crate::graphical::build_graph(&m, &clocks, 1.0);
            let sr = SplitRealization::from_graph(&g, m.as_slice(), 20).unwrap();
            assert!(sr.alpha + sr.beta <= g.s2(m.as_slice()) + 1e-12);
        }
    }

    fn cm(dl: &[bool], du: &[bool], edges: &[(usize, usize)]) -> ComponentMultigraph {
        ComponentMultigraph::new(dl.to_vec(), du.to_vec(), edges.to_vec()).unwrap()
    }

    #[test]
    fn no_damage_means_no_bad() {
        let g = cm(&[false, false], &[false], &[(0, 0), (1, 0), (1, 0)]);
        assert_eq!(classify_bad(&g), vec![false, false]);
    }

    #[test]
    fn damaged_leaf_is_good() {
        let g = cm(&[true, false], &[false], &[(0, 0), (1, 0)]);
        assert_eq!(classify_bad(&g)[0], false);
    }

    #[test]
    fn intact_next_to_damage_is_bad() {
        let g = cm(&[false], &[true], &[(0, 0)]);
        assert_eq!(classify_bad(&g), vec![true]);
    }

    #[test]
    fn parallel_edges_make_damaged_vertex_bad() {
        let g = cm(&[true], &[false], &[(0, 0), (0, 0)]);
        assert_eq!(classify_bad(&g), vec![true]);
        let single = cm(&[true], &[false], &[(0, 0)]);
        assert_eq!(classify_bad(&single), vec![false]);
    }

    #[test]
    fn isolated_damage_is_good() {
        let g = cm(&[true, false], &[], &[]);
        assert_eq!(classify_bad(&g), vec![false, false]);
    }

    #[test]
    fn bound_formulas() {
        assert_eq!(bipartite_bound(1.0, 0.0, 1.0).unwrap(), 0.0);
        assert!((bipartite_bound(1.0, 0.1, 1.0).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(bipartite_bound(1.0, 1.0, 1.0), Err(Error::HypothesisViolated(_))));
        let [b1, b2] = truncation_bound(1.0, 0.1, 1.0, 1.0).unwrap();
        assert!((b1 - 0.8).abs() < 1e-15 && (b2 - 0.4).abs() < 1e-15);
        assert_eq!(truncation_bound(1.0, 0.0, 1.0, 1.0).unwrap(), [0.0, 0.0]);
        assert!(truncation_bound(2.0, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn budget_values() {
        let d = feller_budget(0.1, 2.0, 1.0, 1.0).unwrap();
        let expected = 0.001 / (18.0 * (9.0 + 3.0 * 2f64.powf(1.5)));
        assert!((d - expected).abs() < 1e-18);
        assert!(expected < 0.25);
        assert!(2.0 * d <= 0.5);
        let mut last = f64::INFINITY;
        for mm in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let d = feller_budget(0.1, mm, 1.0, 1.0).unwrap();
            assert!(d <= last && mm * d <= 0.5);
            last = d;
        }
        assert!(feller_budget(0.05, 2.0, 1.0, 1.0).unwrap() <= d);
        assert!(feller_budget(0.0, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn no_strikes_full_level_has_zero_gap() {
        let m = OrderedMassVector::power_law(0.6, 40);
        let a = analyze(&m, &ClockField::new(3), 0.0, 1.0, 40).unwrap();
        assert_eq!(a.gap(), 0.0);
        assert_eq!(a.distance, 0.0);
        assert!(a.sandwich.hat.iter().all(|&x| x));
    }

    #[test]
    fn collapsed_sandwich_without_upper_or_bad() {
        let m = OrderedMassVector::power_law(0.6, 25);
        for seed in 0..40 {
            let a = analyze(&m, &ClockField::new(seed), 1.0, 1.0, 25).unwrap();
            assert!(a.bad.iter().all(|&b| !b));
            assert_eq!(a.sandwich.hat, a.sandwich.check);
            assert!(a.good_violations.is_empty());
        }
    }

    #[test]
    fn sandwich_holds_on_random_seeds() {
        let m = OrderedMassVector::power_law(0.6, 80);
        for seed in 0..300 {
            for level in [5, 20, 40] {
                let a = analyze(&m, &ClockField::new(seed), 1.0, 1.0, level).unwrap();
                assert!(a.gap() >= -1e-12);
                assert!(a.sandwich_holds(), "seed {seed} m {level}");
                assert!(a.good_violations.is_empty(), "seed {seed} m {level}");
                let (sh, sc) = (a.sandwich.s2_hat, a.sandwich.s2_check);
                assert!(sh <= a.s2_h + 1e-12 && a.s2_h <= sc + 1e-12);
                assert!(sh <= a.s2_h_m + 1e-12 && a.s2_h_m <= sc + 1e-12);
            }
        }
    }

    #[test]
    fn damaged_leaf_component_keeps_identity() {
        // lower {0}, upper {1}; one cross edge, lightning only on 0
        use crate::graphical::tests::TableClocks;
        let clocks = TableClocks { pairs: vec![((0, 1), 0.2)], vertices: vec![(0, 0.5)] };
        let m = omv(&[1.0, 1.0]);
        let a = analyze(&m, &clocks, 1.0, 1.0, 1).unwrap();
        assert_eq!(a.bad, vec![false]);
        assert!(a.good_violations.is_empty());
        assert_eq!(a.s2_h, 0.0);
    }

    #[test]
    fn report_serializes() {
        let m = OrderedMassVector::power_law(0.6, 50);
        let r = truncation_report(&m, 8, 1.0, 1.0, 10).unwrap();
        let text = crate::json::to_json_string(&r);
        let back: TruncationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert!(text.contains("\"bound_terms\""));
    }
}

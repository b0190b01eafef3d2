//! Graphical construction of MCLD(λ) at a fixed horizon.
//!
//! The clock graph `G_t` joins `i` and `j` once their edge clock has rung.
//! Inside every component of `G_t` the lightning strikes are replayed in time
//! order; each strike at an intact vertex removes that vertex's component of
//! `G_{t_l}` restricted to the still-intact vertices. The state is the ordered
//! list of component weights of the survivor graph `H_t`.

use rayon::prelude::*;

use crate::clock::{derive_seed, ClockField, ClockSource, EventClockView, MIN_EDGE_SCALE};
use crate::dsu::{components, components_within, DisjointSet};
use crate::error::{Error, Result};
use crate::mass::{block_weights, ord_unchecked, sum_squares, OrderedMassVector, S2_TOLERANCE};
use crate::stats::mean_sem;
use crate::trajectory::{validate_grid, Trajectory};

/// An edge of the clock graph, `a < b`, present from `time` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub time: f64,
}

/// The clock graph `G_t` on vertices `0..n` with its components.
#[derive(Debug, Clone)]
pub struct GraphRealization {
    horizon: f64,
    n: usize,
    edges: Vec<Edge>,
    components: Vec<Vec<usize>>,
}

impl GraphRealization {
    /// Scans all pairs of `0..n` against the horizon `t`.
    ///
    /// `masses` must be non-increasing so that a row can stop at the first
    /// pair whose scale `t m_i m_j` is too small for any clock value.
    pub fn build<C: ClockSource + ?Sized>(view: &EventClockView<'_, C>, t: f64) -> Self {
        let masses = view.masses();
        let n = masses.len();
        let mut edges = Vec::new();
        for i in 0..n {
            let ti = t * masses[i];
            for j in (i + 1)..n {
                if ti * masses[j] < MIN_EDGE_SCALE {
                    break;
                }
                if view.edge_within(i, j, t) {
                    edges.push(Edge {
                        a: i,
                        b: j,
                        time: view.edge_time_unchecked(i, j),
                    });
                }
            }
        }
        Self::from_edges(n, t, edges)
    }

    fn from_edges(n: usize, horizon: f64, edges: Vec<Edge>) -> Self {
        let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.a, e.b)).collect();
        let components = components(n, &pairs);
        Self {
            horizon,
            n,
            edges,
            components,
        }
    }

    /// The clock graph of the truncated vector: vertices `0..m` only.
    pub fn restrict_prefix(&self, m: usize) -> Self {
        let m = m.min(self.n);
        let edges = self
            .edges
            .iter()
            .filter(|e| e.b < m)
            .copied()
            .collect();
        Self::from_edges(m, self.horizon, edges)
    }

    /// The same clocks observed at an earlier horizon `s <= t`.
    pub fn at_horizon(&self, s: f64) -> Self {
        debug_assert!(s <= self.horizon);
        let edges = self.edges.iter().filter(|e| e.time <= s).copied().collect();
        Self::from_edges(self.n, s, edges)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.a, e.b)).collect()
    }

    /// Components ordered by least vertex index.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// Sum of squared component weights.
    pub fn s2(&self, masses: &[f64]) -> f64 {
        sum_squares(&block_weights(masses, &self.components))
    }

    /// Components of the subgraph spanned by the flagged vertices.
    pub fn spanned_components(&self, keep: &[bool]) -> Vec<Vec<usize>> {
        components_within(self.n, &self.edge_pairs(), keep)
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.a].push((e.b, e.time));
            adj[e.b].push((e.a, e.time));
        }
        adj
    }
}

/// Partition of `0..n` into the components of `G_t`.
pub fn build_graph<C: ClockSource + ?Sized>(
    masses: &OrderedMassVector,
    clocks: &C,
    t: f64,
) -> GraphRealization {
    let view = EventClockView::new(masses.as_slice(), 0.0, clocks);
    GraphRealization::build(&view, t)
}

/// A lightning strike that found its vertex intact.
#[derive(Debug, Clone, PartialEq)]
pub struct Burn {
    pub time: f64,
    pub vertex: usize,
    /// Vertices removed by this strike, ascending.
    pub removed: Vec<usize>,
}

/// Strikes in `vertices` up to the horizon, ordered by `(time, vertex)`.
fn strikes_in<C: ClockSource + ?Sized>(
    view: &EventClockView<'_, C>,
    vertices: impl Iterator<Item = usize>,
    t: f64,
) -> Vec<(f64, usize)> {
    let mut strikes: Vec<(f64, usize)> = vertices
        .filter_map(|i| {
            let s = view.strike_time(i);
            (s <= t).then_some((s, i))
        })
        .collect();
    strikes.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    strikes
}

/// Replays `strikes` against the adjacency, clearing burnt vertices in `intact`.
///
/// An edge arriving at the strike time itself counts as present.
fn burn(
    adj: &[Vec<(usize, f64)>],
    strikes: &[(f64, usize)],
    intact: &mut [bool],
    mut log: Option<&mut Vec<Burn>>,
) {
    let mut stack = Vec::new();
    for &(time, vertex) in strikes {
        if !intact[vertex] {
            continue;
        }
        let mut removed = vec![vertex];
        intact[vertex] = false;
        stack.push(vertex);
        while let Some(v) = stack.pop() {
            for &(w, arrival) in &adj[v] {
                if arrival <= time && intact[w] {
                    intact[w] = false;
                    removed.push(w);
                    stack.push(w);
                }
            }
        }
        if let Some(log) = log.as_deref_mut() {
            removed.sort_unstable();
            log.push(Burn {
                time,
                vertex,
                removed,
            });
        }
    }
}

/// Intact subset of one component of `G_t` after its lightning recursion.
pub fn lightning_recursion<C: ClockSource + ?Sized>(
    g: &GraphRealization,
    component: &[usize],
    view: &EventClockView<'_, C>,
) -> Result<Vec<usize>> {
    let n = g.vertex_count();
    if component.is_empty() {
        return Ok(Vec::new());
    }
    if component.iter().any(|&v| v >= n) {
        return Err(Error::invalid("component mentions a vertex outside the graph"));
    }
    let mut inside = vec![false; n];
    for &v in component {
        inside[v] = true;
    }
    let pieces = g.spanned_components(&inside);
    if pieces.len() != 1 {
        return Err(Error::invalid(format!(
            "vertex set is not connected in G_t ({} pieces)",
            pieces.len()
        )));
    }
    let adj = g.adjacency();
    let strikes = strikes_in(view, component.iter().copied(), g.horizon());
    burn(&adj, &strikes, &mut inside, None);
    let mut out: Vec<usize> = component.iter().copied().filter(|&v| inside[v]).collect();
    out.sort_unstable();
    Ok(out)
}

/// One graphical MCLD realization at a fixed horizon: `G_t`, the intact set
/// `𝓥_t` and the strike record.
#[derive(Debug, Clone)]
pub struct McldRealization {
    pub graph: GraphRealization,
    pub intact: Vec<bool>,
    pub burns: Vec<Burn>,
}

impl McldRealization {
    pub fn new<C: ClockSource + ?Sized>(
        masses: &OrderedMassVector,
        clocks: &C,
        lambda: f64,
        t: f64,
    ) -> Self {
        let view = EventClockView::new(masses.as_slice(), lambda, clocks);
        let graph = GraphRealization::build(&view, t);
        Self::from_graph(graph, &view)
    }

    /// Runs the lightning recursion on an already built clock graph.
    ///
    /// Strikes in different components of `G_t` never interact, so one pass
    /// over all strikes in time order equals the per-component recursion.
    pub fn from_graph<C: ClockSource + ?Sized>(
        graph: GraphRealization,
        view: &EventClockView<'_, C>,
    ) -> Self {
        let n = graph.vertex_count();
        let mut intact = vec![true; n];
        let mut burns = Vec::new();
        let strikes = strikes_in(view, 0..n, graph.horizon());
        if !strikes.is_empty() {
            burn(&graph.adjacency(), &strikes, &mut intact, Some(&mut burns));
        }
        Self {
            graph,
            intact,
            burns,
        }
    }

    /// Components of the survivor graph `H_t`.
    pub fn survivor_components(&self) -> Vec<Vec<usize>> {
        self.graph.spanned_components(&self.intact)
    }

    /// `ord(m, H_t)`.
    pub fn state(&self, masses: &[f64]) -> OrderedMassVector {
        ord_unchecked(block_weights(masses, &self.survivor_components()))
    }

    pub fn intact_vertices(&self) -> Vec<usize> {
        (0..self.intact.len()).filter(|&v| self.intact[v]).collect()
    }
}

/// `m_t = ord(m, H_t)`.
pub fn state_at<C: ClockSource + ?Sized>(
    masses: &OrderedMassVector,
    clocks: &C,
    lambda: f64,
    t: f64,
) -> OrderedMassVector {
    McldRealization::new(masses, clocks, lambda, t).state(masses.as_slice())
}

/// Grid states from the fixed-horizon construction; the event log from the
/// forward engine on the same clocks.
pub fn trajectory<C: ClockSource + ?Sized>(
    masses: &OrderedMassVector,
    clocks: &C,
    lambda: f64,
    grid: &[f64],
) -> Result<Trajectory> {
    validate_grid(grid)?;
    let mut traj = crate::event::run_clocked(masses, clocks, lambda, grid, None)?;
    traj.states = grid
        .iter()
        .map(|&t| state_at(masses, clocks, lambda, t))
        .collect();
    Ok(traj)
}

const GROWTH_TAG: u64 = 0x6732_5f67_726f_7774;
const CONNECT_TAG: u64 = 0x636f_6e6e_6563_7421;

/// Checks `S₂(m) <= 1/(2t)` up to the shared tolerance.
fn check_growth_hypothesis(masses: &OrderedMassVector, t: f64) -> Result<f64> {
    let s2 = masses.norm_sq();
    if t > 0.0 && 2.0 * t * s2 > 1.0 + S2_TOLERANCE {
        return Err(Error::HypothesisViolated(format!(
            "S₂ = {s2} exceeds 1/(2t) = {}",
            0.5 / t
        )));
    }
    Ok(s2)
}

/// Monte Carlo mean and standard error of `S₂^{G_t}` over independent clock
/// fields seeded from `base_seed`.
pub fn s2_growth_estimate(
    masses: &OrderedMassVector,
    t: f64,
    replicas: usize,
    base_seed: u64,
) -> Result<(f64, f64)> {
    check_growth_hypothesis(masses, t)?;
    if replicas == 0 {
        return Err(Error::invalid("replicas must be at least 1"));
    }
    let samples: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let clocks = ClockField::new(derive_seed(base_seed, GROWTH_TAG, r));
            build_graph(masses, &clocks, t).s2(masses.as_slice())
        })
        .collect();
    Ok(mean_sem(&samples))
}

/// Empirical `P(i ↔ j in G_t)` with its binomial standard error.
pub fn connectivity_estimate(
    masses: &OrderedMassVector,
    t: f64,
    (i, j): (usize, usize),
    replicas: usize,
    base_seed: u64,
) -> Result<(f64, f64)> {
    if i == j || i >= masses.len() || j >= masses.len() {
        return Err(Error::invalid("connectivity needs two distinct vertices in the support"));
    }
    if replicas == 0 {
        return Err(Error::invalid("replicas must be at least 1"));
    }
    let hits: u64 = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let clocks = ClockField::new(derive_seed(base_seed, CONNECT_TAG, r));
            let g = build_graph(masses, &clocks, t);
            let mut dsu = DisjointSet::new(masses.len());
            for e in g.edges() {
                dsu.union(e.a, e.b);
            }
            u64::from(dsu.find(i) == dsu.find(j))
        })
        .sum();
    let p = hits as f64 / replicas as f64;
    Ok((p, (p * (1.0 - p) / replicas as f64).sqrt()))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Clocks with prescribed values; anything unspecified never rings.
    pub(crate) struct TableClocks {
        pub pairs: Vec<((usize, usize), f64)>,
        pub vertices: Vec<(usize, f64)>,
    }

    fn uniform_for(x: f64) -> f64 {
        -(-x).exp_m1()
    }

    impl ClockSource for TableClocks {
        fn pair_uniform(&self, i: usize, j: usize) -> f64 {
            let key = (i.min(j), i.max(j));
            self.pairs
                .iter()
                .find(|(p, _)| *p == key)
                .map_or(1.0 - 1e-16, |&(_, x)| uniform_for(x))
        }
        fn vertex_uniform(&self, i: usize) -> f64 {
            self.vertices
                .iter()
                .find(|(v, _)| *v == i)
                .map_or(1.0 - 1e-16, |&(_, x)| uniform_for(x))
        }
        fn pair_exp(&self, i: usize, j: usize) -> f64 {
            let key = (i.min(j), i.max(j));
            self.pairs.iter().find(|(p, _)| *p == key).map_or(1e300, |&(_, x)| x)
        }
        fn vertex_exp(&self, i: usize) -> f64 {
            self.vertices.iter().find(|(v, _)| *v == i).map_or(1e300, |&(_, x)| x)
        }
    }

    fn omv(v: &[f64]) -> OrderedMassVector {
        OrderedMassVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn no_edges_at_time_zero() {
        let m = omv(&[1.0, 0.5, 0.5, 0.2]);
        let g = build_graph(&m, &ClockField::new(3), 0.0);
        assert_eq!(g.components().len(), 4);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn threshold_crossing() {
        let clocks = TableClocks { pairs: vec![((0, 1), 0.5)], vertices: vec![] };
        let m = omv(&[1.0, 1.0]);
        assert_eq!(build_graph(&m, &clocks, 0.4).components(), &[vec![0], vec![1]]);
        assert_eq!(build_graph(&m, &clocks, 0.6).components(), &[vec![0, 1]]);
    }

    #[test]
    fn connectivity_is_transitive() {
        let clocks = TableClocks {
            pairs: vec![((0, 1), 0.1), ((1, 2), 0.2)],
            vertices: vec![],
        };
        let g = build_graph(&omv(&[1.0, 1.0, 1.0]), &clocks, 1.0);
        assert_eq!(g.components(), &[vec![0, 1, 2]]);
    }

    #[test]
    fn lightning_before_edge_spares_partner() {
        let clocks = TableClocks { pairs: vec![((0, 1), 0.5)], vertices: vec![(1, 0.3)] };
        let m = omv(&[1.0, 1.0]);
        let view = EventClockView::new(m.as_slice(), 1.0, &clocks);
        let g = GraphRealization::build(&view, 0.6);
        assert_eq!(lightning_recursion(&g, &[0, 1], &view).unwrap(), vec![0]);
        assert_eq!(state_at(&m, &clocks, 1.0, 0.6), omv(&[1.0]));
    }

    #[test]
    fn lightning_after_edge_burns_pair() {
        let clocks = TableClocks { pairs: vec![((0, 1), 0.5)], vertices: vec![(1, 0.55)] };
        let m = omv(&[1.0, 1.0]);
        let view = EventClockView::new(m.as_slice(), 1.0, &clocks);
        let g = GraphRealization::build(&view, 0.6);
        assert!(lightning_recursion(&g, &[0, 1], &view).unwrap().is_empty());
        assert_eq!(state_at(&m, &clocks, 1.0, 0.6), OrderedMassVector::empty());
    }

    #[test]
    fn no_strikes_keeps_component() {
        let clocks = TableClocks { pairs: vec![((0, 1), 0.5)], vertices: vec![] };
        let m = omv(&[1.0, 1.0]);
        let view = EventClockView::new(m.as_slice(), 1.0, &clocks);
        let g = GraphRealization::build(&view, 0.6);
        assert_eq!(lightning_recursion(&g, &[0, 1], &view).unwrap(), vec![0, 1]);
    }

    #[test]
    fn recursion_rejects_disconnected_sets() {
        let clocks = TableClocks { pairs: vec![], vertices: vec![] };
        let m = omv(&[1.0, 1.0]);
        let view = EventClockView::new(m.as_slice(), 1.0, &clocks);
        let g = GraphRealization::build(&view, 1.0);
        assert!(matches!(lightning_recursion(&g, &[0, 1], &view), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn simultaneous_edge_and_strike_orders_edge_first() {
        let clocks = TableClocks { pairs: vec![((0, 1), 0.5)], vertices: vec![(0, 0.5)] };
        let m = omv(&[1.0, 1.0]);
        assert_eq!(state_at(&m, &clocks, 1.0, 1.0), OrderedMassVector::empty());
    }

    #[test]
    fn time_zero_returns_initial_state() {
        let m = omv(&[0.9, 0.5, 0.5, 0.1]);
        assert_eq!(state_at(&m, &ClockField::new(1), 3.0, 0.0), m);
    }

    #[test]
    fn zero_lambda_is_pure_coalescent() {
        let m = OrderedMassVector::power_law(0.6, 40);
        let clocks = ClockField::new(17);
        let g = build_graph(&m, &clocks, 1.0);
        let pure = ord_unchecked(block_weights(m.as_slice(), g.components()));
        assert_eq!(state_at(&m, &clocks, 0.0, 1.0), pure);
    }

    #[test]
    fn growth_estimate_edge_cases() {
        let m = omv(&[0.1; 50]);
        let (mean, sem) = s2_growth_estimate(&m, 0.0, 10, 1).unwrap();
        assert!((mean - m.norm_sq()).abs() < 1e-15 && sem == 0.0);
        let single = omv(&[1.0]);
        assert_eq!(s2_growth_estimate(&single, 0.5, 10, 1).unwrap().0, 1.0);
        assert!(matches!(
            s2_growth_estimate(&omv(&[1.0, 1.0]), 1.0, 10, 1),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn deletions_remove_whole_survivor_components() {
        for seed in 0..50 {
            let m = OrderedMassVector::power_law(0.6, 60);
            let clocks = ClockField::new(seed);
            let r = McldRealization::new(&m, &clocks, 1.5, 1.0);
            let mut intact = vec![true; m.len()];
            for b in &r.burns {
                let g = r.graph.at_horizon(b.time);
                let comps = g.spanned_components(&intact);
                assert!(comps.contains(&b.removed), "seed {seed}: partial deletion");
                for &v in &b.removed {
                    intact[v] = false;
                }
            }
            assert_eq!(intact, r.intact);
        }
    }

    fn random_masses() -> impl Strategy<Value = OrderedMassVector> {
        prop::collection::vec(0.01f64..1.0, 1..40).prop_map(|v| crate::mass::ord(&v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn horizon_monotonicity(m in random_masses(), seed in any::<u64>(), s in 0.0f64..2.0, dt in 0.0f64..2.0) {
            let clocks = ClockField::new(seed);
            let t = s + dt;
            let early = McldRealization::new(&m, &clocks, 1.0, s);
            let late = McldRealization::new(&m, &clocks, 1.0, t);
            for e in early.graph.edges() {
                prop_assert!(late.graph.edges().contains(e));
            }
            for v in 0..m.len() {
                prop_assert!(!late.intact[v] || early.intact[v]);
            }
        }

        #[test]
        fn survivor_s2_below_graph_s2(m in random_masses(), seed in any::<u64>(), lambda in 0.0f64..3.0) {
            let r = McldRealization::new(&m, &ClockField::new(seed), lambda, 1.0);
            prop_assert!(r.state(m.as_slice()).norm_sq() <= r.graph.s2(m.as_slice()) + 1e-12);
        }
    }
}

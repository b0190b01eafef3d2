//! Forward event-driven MCLD: clocked and aggregated-rate (Gillespie) engines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clock::{ClockSource, EventClockView, MIN_EDGE_SCALE};
use crate::error::Result;
use crate::mass::{ord_unchecked, sum_squares, OrderedMassVector};
use crate::trajectory::{validate_grid, EventKind, McldEvent, Observer, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Edge = 0,
    Strike = 1,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    kind: Kind,
    a: usize,
    b: usize,
}

/// Union-find over vertices; deletion marks the root burnt.
struct ComponentForest {
    parent: Vec<usize>,
    weight: Vec<f64>,
    label: Vec<usize>,
    burnt: Vec<bool>,
}

impl ComponentForest {
    fn new(masses: &[f64]) -> Self {
        let n = masses.len();
        Self {
            parent: (0..n).collect(),
            weight: masses.to_vec(),
            label: (0..n).collect(),
            burnt: vec![false; n],
        }
    }

    fn find(&mut self, v: usize) -> usize {
        let mut root = v;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = v;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn state(&self) -> OrderedMassVector {
        ord_unchecked(
            (0..self.parent.len())
                .filter(|&v| self.parent[v] == v && !self.burnt[v])
                .map(|v| self.weight[v])
                .collect(),
        )
    }

    fn apply(&mut self, ev: &Pending) -> Option<McldEvent> {
        match ev.kind {
            Kind::Edge => {
                let (ra, rb) = (self.find(ev.a), self.find(ev.b));
                if ra == rb || self.burnt[ra] || self.burnt[rb] {
                    return None;
                }
                let (big, small) = if self.weight[ra] >= self.weight[rb] { (ra, rb) } else { (rb, ra) };
                let mut ids = [self.label[ra], self.label[rb]];
                ids.sort_unstable();
                self.parent[small] = big;
                self.weight[big] += self.weight[small];
                self.label[big] = ids[0];
                Some(McldEvent {
                    time: ev.time,
                    kind: EventKind::Merge,
                    components: ids.to_vec(),
                    weight: self.weight[big],
                })
            }
            Kind::Strike => {
                let r = self.find(ev.a);
                if self.burnt[r] {
                    return None;
                }
                self.burnt[r] = true;
                Some(McldEvent {
                    time: ev.time,
                    kind: EventKind::Delete,
                    components: vec![self.label[r]],
                    weight: self.weight[r],
                })
            }
        }
    }
}

/// Every edge and strike of `0..n` up to `t_end`, in the shared total order
/// `(time, edge before strike, indices)`.
fn schedule<C: ClockSource + ?Sized>(view: &EventClockView<'_, C>, t_end: f64) -> Vec<Pending> {
    let masses = view.masses();
    let n = masses.len();
    let mut events = Vec::new();
    for i in 0..n {
        let s = view.strike_time(i);
        if s <= t_end {
            events.push(Pending { time: s, kind: Kind::Strike, a: i, b: i });
        }
        let ti = t_end * masses[i];
        for j in (i + 1)..n {
            if ti * masses[j] < MIN_EDGE_SCALE {
                break;
            }
            if view.edge_within(i, j, t_end) {
                events.push(Pending {
                    time: view.edge_time_unchecked(i, j),
                    kind: Kind::Edge,
                    a: i,
                    b: j,
                });
            }
        }
    }
    events.sort_by(|x, y| {
        x.time
            .total_cmp(&y.time)
            .then(x.kind.cmp(&y.kind))
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    events
}

/// Runs MCLD(λ) forward on the clock field up to the last grid time.
///
/// The state recorded at a grid time includes every event at that time.
pub fn run_clocked<C: ClockSource + ?Sized>(
    masses: &OrderedMassVector,
    clocks: &C,
    lambda: f64,
    grid: &[f64],
    mut observer: Option<&mut dyn Observer>,
) -> Result<Trajectory> {
    validate_grid(grid)?;
    let horizon = *grid.last().expect("grid validated nonempty");
    let view = EventClockView::new(masses.as_slice(), lambda, clocks);
    let pending = schedule(&view, horizon);
    let mut forest = ComponentForest::new(masses.as_slice());
    let mut states = Vec::with_capacity(grid.len());
    let mut events = Vec::new();
    for ev in &pending {
        while states.len() < grid.len() && grid[states.len()] < ev.time {
            states.push(forest.state());
        }
        if let Some(out) = forest.apply(ev) {
            if let Some(obs) = observer.as_deref_mut() {
                obs.on_event(&out);
            }
            events.push(out);
        }
    }
    while states.len() < grid.len() {
        states.push(forest.state());
    }
    Ok(Trajectory {
        initial: masses.clone(),
        grid: grid.to_vec(),
        states,
        events,
        horizon,
    })
}

/// State at `t` from the forward engine.
pub fn clocked_state_at<C: ClockSource + ?Sized>(
    masses: &OrderedMassVector,
    clocks: &C,
    lambda: f64,
    t: f64,
) -> Result<OrderedMassVector> {
    let mut traj = run_clocked(masses, clocks, lambda, &[t], None)?;
    Ok(traj.states.pop().expect("one grid point"))
}

/// Total merge rate `Σ_{i<j} w_i w_j` and total deletion rate `λ Σ w_i`.
pub fn event_rates(weights: &[f64], lambda: f64) -> (f64, f64) {
    let l1 = weights.iter().fold(0.0, |acc, w| acc + w);
    let l2 = sum_squares(weights);
    (0.5 * (l1 * l1 - l2).max(0.0), lambda * l1)
}

/// Aggregated-rate simulation driven by a ChaCha8 stream seeded with `seed`.
///
/// Components keep the least initial index as id and are stored in id order.
pub fn run_gillespie(
    masses: &OrderedMassVector,
    seed: u64,
    lambda: f64,
    grid: &[f64],
) -> Result<Trajectory> {
    validate_grid(grid)?;
    let horizon = *grid.last().expect("grid validated nonempty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comps: Vec<(usize, f64)> = masses.as_slice().iter().copied().enumerate().collect();
    let snapshot = |c: &[(usize, f64)]| ord_unchecked(c.iter().map(|x| x.1).collect());
    let mut states = Vec::with_capacity(grid.len());
    let mut events = Vec::new();
    let mut now = 0.0;
    loop {
        let weights: Vec<f64> = comps.iter().map(|c| c.1).collect();
        let (merge, delete) = event_rates(&weights, lambda);
        let total = merge + delete;
        let next = if total > 0.0 {
            let u: f64 = rng.random();
            now - (1.0 - u).ln() / total
        } else {
            f64::INFINITY
        };
        while states.len() < grid.len() && grid[states.len()] < next {
            states.push(snapshot(&comps));
        }
        if next > horizon {
            break;
        }
        now = next;
        let mut target = rng.random::<f64>() * total;
        let mut chosen = None;
        'outer: for a in 0..comps.len() {
            for b in (a + 1)..comps.len() {
                target -= comps[a].1 * comps[b].1;
                if target < 0.0 {
                    chosen = Some((a, Some(b)));
                    break 'outer;
                }
            }
        }
        if chosen.is_none() {
            for a in 0..comps.len() {
                target -= lambda * comps[a].1;
                if target < 0.0 {
                    chosen = Some((a, None));
                    break;
                }
            }
        }
        // rounding can leave a sliver of the total unassigned
        let (a, b) = chosen.unwrap_or((comps.len() - 1, None));
        match b {
            Some(b) => {
                let w = comps[a].1 + comps[b].1;
                events.push(McldEvent {
                    time: now,
                    kind: EventKind::Merge,
                    components: vec![comps[a].0, comps[b].0],
                    weight: w,
                });
                comps[a].1 = w;
                comps.remove(b);
            }
            None => {
                events.push(McldEvent {
                    time: now,
                    kind: EventKind::Delete,
                    components: vec![comps[a].0],
                    weight: comps[a].1,
                });
                comps.remove(a);
            }
        }
    }
    Ok(Trajectory {
        initial: masses.clone(),
        grid: grid.to_vec(),
        states,
        events,
        horizon,
    })
}

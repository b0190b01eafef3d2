//! Brute-force reference for the bad set `K*`, kept small on purpose.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::truncation::ComponentMultigraph;

fn trail_hits_damage(
    v: usize,
    adj: &[Vec<(usize, usize)>],
    used: &mut [bool],
    damaged: &[bool],
) -> bool {
    for &(w, id) in &adj[v] {
        if used[id] {
            continue;
        }
        used[id] = true;
        let hit = damaged[w] || trail_hits_damage(w, adj, used, damaged);
        used[id] = false;
        if hit {
            return true;
        }
    }
    false
}

/// `k ∈ K*` iff some trail of at least one edge leads from `k` to a damaged
/// vertex, found by enumerating every edge-simple walk.
pub fn brute_force_bad(cm: &ComponentMultigraph) -> Vec<bool> {
    let k_count = cm.damaged_lower.len();
    let n = k_count + cm.damaged_upper.len();
    let damaged: Vec<bool> = cm
        .damaged_lower
        .iter()
        .chain(&cm.damaged_upper)
        .copied()
        .collect();
    let mut adj = vec![Vec::new(); n];
    for (id, &(k, l)) in cm.edges.iter().enumerate() {
        adj[k].push((k_count + l, id));
        adj[k_count + l].push((k, id));
    }
    let mut used = vec![false; cm.edges.len()];
    (0..k_count)
        .map(|k| trail_hits_damage(k, &adj, &mut used, &damaged))
        .collect()
}

/// Random bipartite multigraph with at most `max_vertices` vertices and
/// `max_edges` edges; each vertex is damaged with probability `p_damage`.
pub fn random_multigraph(seed: u64, max_vertices: usize, max_edges: usize, p_damage: f64) -> ComponentMultigraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = rng.random_range(1..=max_vertices.max(1));
    let k_count = rng.random_range(1..=total);
    let l_count = total - k_count;
    let edge_count = if l_count == 0 { 0 } else { rng.random_range(0..=max_edges) };
    let edges = (0..edge_count)
        .map(|_| (rng.random_range(0..k_count), rng.random_range(0..l_count)))
        .collect();
    let damaged_lower = (0..k_count).map(|_| rng.random_bool(p_damage)).collect();
    let damaged_upper = (0..l_count).map(|_| rng.random_bool(p_damage)).collect();
    ComponentMultigraph::new(damaged_lower, damaged_upper, edges).expect("edges drawn in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truncation::classify_bad;

    #[test]
    fn figure_cases() {
        let leaf = ComponentMultigraph::new(vec![true, false], vec![false], vec![(0, 0), (1, 0)]).unwrap();
        assert_eq!(brute_force_bad(&leaf), vec![false, true]);
        let near = ComponentMultigraph::new(vec![false], vec![true], vec![(0, 0)]).unwrap();
        assert_eq!(brute_force_bad(&near), vec![true]);
        let cycle = ComponentMultigraph::new(vec![true, false], vec![false, false], vec![(0, 0), (1, 0), (1, 1), (0, 1)]).unwrap();
        assert_eq!(brute_force_bad(&cycle), vec![true, true]);
        let lone = ComponentMultigraph::new(vec![true], vec![false, false], vec![(0, 0), (0, 1)]).unwrap();
        assert_eq!(brute_force_bad(&lone), vec![false]);
    }

    #[test]
    fn agrees_with_bridge_characterization() {
        for seed in 0..2000 {
            let cm = random_multigraph(seed, 8, 10, 0.3);
            assert_eq!(classify_bad(&cm), brute_force_bad(&cm), "seed {seed}: {cm:?}");
        }
    }
}

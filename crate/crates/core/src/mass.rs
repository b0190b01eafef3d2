//! The state space: finite-support non-increasing mass vectors, the
//! ℓ² distance between them, and the S₂ functional of a weighted partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when comparing accumulated sums of squares.
pub const S2_TOLERANCE: f64 = 1e-9;

/// A finite-support element of ℓ₂↓.
///
/// Entries are non-increasing and strictly positive; the infinite tail of
/// zeros is implicit, so two vectors are equal exactly when their stored
/// entries are.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OrderedMassVector(Vec<f64>);

impl OrderedMassVector {
    /// Validates an already ordered vector, trimming trailing zeros.
    pub fn new(mut masses: Vec<f64>) -> Result<Self> {
        for (k, &x) in masses.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::invalid(format!(
                    "masses must be nonnegative non-increasing (entry {k} is {x})"
                )));
            }
            if k > 0 && x > masses[k - 1] {
                return Err(Error::invalid(format!(
                    "masses must be nonnegative non-increasing (entry {k} = {x} exceeds entry {} = {})",
                    k - 1,
                    masses[k - 1]
                )));
            }
        }
        while masses.last() == Some(&0.0) {
            masses.pop();
        }
        Ok(Self(masses))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Builds `m_i = i^{-exponent}` for `i = 1..=len`.
    pub fn power_law(exponent: f64, len: usize) -> Self {
        Self((1..=len).map(|i| (i as f64).powf(-exponent)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entry `k` (0-based) of the infinite sequence.
    pub fn get(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    pub fn norm_sq(&self) -> f64 {
        sum_squares(&self.0)
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, x| acc + x)
    }

    /// Keeps the first `m` entries.
    pub fn truncate(&self, m: usize) -> Self {
        Self(self.0[..m.min(self.0.len())].to_vec())
    }

    /// Keeps the first `r` entries; alias used when reporting top ranks.
    pub fn top(&self, r: usize) -> Self {
        self.truncate(r)
    }

    /// Multiplies every mass by a positive factor.
    pub fn scaled(&self, factor: f64) -> Self {
        debug_assert!(factor > 0.0);
        Self(self.0.iter().map(|x| x * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for OrderedMassVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<OrderedMassVector> for Vec<f64> {
    fn from(v: OrderedMassVector) -> Self {
        v.0
    }
}

/// Decreasing rearrangement of a nonnegative sequence.
///
/// Stable: equal entries keep their original relative order.
pub fn ord(values: &[f64]) -> Result<OrderedMassVector> {
    if let Some((k, &x)) = values
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_finite() || **x < 0.0)
    {
        return Err(Error::invalid(format!(
            "ord expects nonnegative finite entries (entry {k} is {x})"
        )));
    }
    Ok(ord_unchecked(values.to_vec()))
}

pub(crate) fn ord_unchecked(mut values: Vec<f64>) -> OrderedMassVector {
    values.sort_by(|a, b| b.total_cmp(a));
    while values.last() == Some(&0.0) {
        values.pop();
    }
    OrderedMassVector(values)
}

/// ℓ² distance, padding the shorter vector with zeros.
pub fn dist(a: &OrderedMassVector, b: &OrderedMassVector) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| {
            let d = a.get(k) - b.get(k);
            d * d
        })
        .fold(0.0, |acc, x| acc + x)
        .sqrt()
}

/// Disjoint blocks of vertex labels carrying the masses of their members.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPartition {
    blocks: Vec<Vec<usize>>,
    vertex_masses: Vec<f64>,
}

impl WeightedPartition {
    /// `vertex_masses[v]` is the mass of label `v`; blocks need not cover all labels.
    pub fn new(blocks: Vec<Vec<usize>>, vertex_masses: Vec<f64>) -> Result<Self> {
        let mut seen = vec![false; vertex_masses.len()];
        for block in &blocks {
            for &v in block {
                if v >= vertex_masses.len() {
                    return Err(Error::invalid(format!("label {v} has no mass")));
                }
                if std::mem::replace(&mut seen[v], true) {
                    return Err(Error::invalid(format!("label {v} appears in two blocks")));
                }
            }
        }
        if let Some(x) = vertex_masses.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::invalid(format!("vertex mass {x} is not nonnegative")));
        }
        Ok(Self {
            blocks,
            vertex_masses,
        })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Block weights `w(C) = Σ_{i∈C} m_i` in block order.
    pub fn weights(&self) -> Vec<f64> {
        block_weights(&self.vertex_masses, &self.blocks)
    }

    /// Σ over blocks of the squared block weight.
    pub fn s2(&self) -> f64 {
        sum_squares(&self.weights())
    }

    pub fn ord(&self) -> OrderedMassVector {
        ord_unchecked(self.weights())
    }
}

/// `Σ x²`, starting from `+0.0`.
pub fn sum_squares(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |acc, x| acc + x * x)
}

/// Largest entrywise difference, padding the shorter vector with zeros.
pub fn max_entry_diff(a: &OrderedMassVector, b: &OrderedMassVector) -> f64 {
    (0..a.len().max(b.len()))
        .map(|k| (a.get(k) - b.get(k)).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn block_weights(masses: &[f64], blocks: &[Vec<usize>]) -> Vec<f64> {
    blocks
        .iter()
        .map(|b| b.iter().fold(0.0, |acc, &v| acc + masses[v]))
        .collect()
}

/// Distance bound `√(S₂' − S₂)` for nested graphs `G ⊆ G'`.
pub fn compare_via_s2(small_s2: f64, big_s2: f64) -> Result<f64> {
    if small_s2 < 0.0 || !small_s2.is_finite() || !big_s2.is_finite() {
        return Err(Error::invalid("S₂ values must be finite and nonnegative"));
    }
    let diff = big_s2 - small_s2;
    if diff < -S2_TOLERANCE {
        return Err(Error::invalid(format!(
            "S₂ of the larger graph ({big_s2}) is below that of the smaller ({small_s2}); inclusion violated"
        )));
    }
    Ok(diff.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsu::components;
    use proptest::prelude::*;

    fn omv(v: &[f64]) -> OrderedMassVector {
        OrderedMassVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ord_examples() {
        assert_eq!(ord(&[1.0, 3.0, 2.0]).unwrap(), omv(&[3.0, 2.0, 1.0]));
        assert_eq!(ord(&[]).unwrap(), OrderedMassVector::empty());
        assert_eq!(ord(&[2.0, 2.0, 0.0, 5.0]).unwrap(), omv(&[5.0, 2.0, 2.0]));
        assert!(matches!(ord(&[1.0, -0.5]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn new_rejects_increasing_and_negative() {
        assert!(OrderedMassVector::new(vec![1.0, 2.0]).is_err());
        assert!(OrderedMassVector::new(vec![3.0, 1.0, -2.0]).is_err());
        assert_eq!(omv(&[2.0, 0.0, 0.0]).as_slice(), &[2.0]);
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist(&omv(&[1.0]), &OrderedMassVector::empty()), 1.0);
        assert!((dist(&omv(&[3.0, 1.0]), &omv(&[2.0, 2.0])) - 2f64.sqrt()).abs() < 1e-12);
        let a = omv(&[5.0, 4.0, 1.0]);
        assert_eq!(dist(&a, &a), 0.0);
    }

    #[test]
    fn s2_examples() {
        let p = WeightedPartition::new(vec![vec![0, 1], vec![2]], vec![2.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.s2(), 10.0);
        let q = WeightedPartition::new(vec![vec![0], vec![1], vec![2]], vec![0.5, 0.25, 0.125])
            .unwrap();
        assert!((q.s2() - (0.25 + 0.0625 + 0.015625)).abs() < 1e-15);
        let r = WeightedPartition::new(vec![vec![0, 1, 2, 3]], vec![1.0; 4]).unwrap();
        assert_eq!(r.s2(), 16.0);
        assert!(WeightedPartition::new(vec![vec![0], vec![0]], vec![1.0]).is_err());
    }

    #[test]
    fn truncate_examples() {
        let v = omv(&[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(v.truncate(2), omv(&[4.0, 3.0]));
        assert_eq!(omv(&[4.0, 3.0]).truncate(10), omv(&[4.0, 3.0]));
        assert_eq!(omv(&[4.0, 3.0, 2.0]).truncate(0), OrderedMassVector::empty());
    }

    #[test]
    fn compare_examples() {
        assert_eq!(compare_via_s2(10.0, 10.0).unwrap(), 0.0);
        assert_eq!(compare_via_s2(10.0, 14.0).unwrap(), 2.0);
        assert!(compare_via_s2(14.0, 10.0).is_err());
        // masses (2,1,1): no edges vs edge {1,2}
        let m = [2.0, 1.0, 1.0];
        let g = WeightedPartition::new(vec![vec![0], vec![1], vec![2]], m.to_vec()).unwrap();
        let big = WeightedPartition::new(vec![vec![0, 1], vec![2]], m.to_vec()).unwrap();
        let bound = compare_via_s2(g.s2(), big.s2()).unwrap();
        assert_eq!(bound, 2.0);
        let d = dist(&g.ord(), &big.ord());
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!(d <= bound);
    }

    #[test]
    fn json_is_plain_array() {
        let v = omv(&[2.0, 1.5]);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, "[2.0,1.5]");
        assert!(serde_json::from_str::<OrderedMassVector>("[1.0,2.0]").is_err());
    }

    fn masses_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..5.0, 0..max_len)
    }

    proptest! {
        #[test]
        fn dist_is_a_metric(a in masses_strategy(12), b in masses_strategy(12), c in masses_strategy(12)) {
            let (a, b, c) = (ord(&a).unwrap(), ord(&b).unwrap(), ord(&c).unwrap());
            let ab = dist(&a, &b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, dist(&b, &a));
            prop_assert_eq!(dist(&a, &a), 0.0);
            prop_assert!(ab <= dist(&a, &c) + dist(&c, &b) + 1e-9);
            if ab == 0.0 {
                prop_assert_eq!(&a, &b);
            }
        }

        #[test]
        fn ord_idempotent_and_permutation_invariant(v in masses_strategy(16), rot in 0usize..16) {
            let once = ord(&v).unwrap();
            prop_assert_eq!(&ord(once.as_slice()).unwrap(), &once);
            let mut w = v.clone();
            if !w.is_empty() {
                let r = rot % w.len();
                w.rotate_left(r);
            }
            prop_assert_eq!(ord(&w).unwrap(), once);
        }

        #[test]
        fn merging_blocks_adds_cross_term(masses in prop::collection::vec(0.01f64..3.0, 2..12), split in 1usize..11) {
            let n = masses.len();
            let split = split.min(n - 1);
            let first: Vec<usize> = (0..split).collect();
            let second: Vec<usize> = (split..n).collect();
            let apart = WeightedPartition::new(vec![first.clone(), second.clone()], masses.clone()).unwrap();
            let w = apart.weights();
            let joined = WeightedPartition::new(vec![(0..n).collect()], masses).unwrap();
            prop_assert!((joined.s2() - apart.s2() - 2.0 * w[0] * w[1]).abs() < S2_TOLERANCE);
            prop_assert!(joined.s2() > apart.s2());
        }

        #[test]
        fn nested_graph_distance_is_bounded(
            masses in prop::collection::vec(0.0f64..2.0, 1..30),
            edges in prop::collection::vec((0usize..30, 0usize..30, any::<bool>()), 0..60),
        ) {
            let n = masses.len();
            let masses = ord(&masses).unwrap();
            let mut m = masses.as_slice().to_vec();
            m.resize(n, 0.0);
            let all: Vec<(usize, usize)> = edges.iter()
                .map(|&(i, j, _)| (i % n, j % n))
                .filter(|(i, j)| i != j)
                .collect();
            let sub: Vec<(usize, usize)> = edges.iter()
                .filter(|e| e.2)
                .map(|&(i, j, _)| (i % n, j % n))
                .filter(|(i, j)| i != j)
                .collect();
            let small = WeightedPartition::new(components(n, &sub), m.clone()).unwrap();
            let big = WeightedPartition::new(components(n, &all), m).unwrap();
            let bound = compare_via_s2(small.s2(), big.s2()).unwrap();
            prop_assert!(dist(&small.ord(), &big.ord()) <= bound + 1e-9);
        }
    }
}

//! Counter-based clock field: the shared randomness of the graphical construction.
//!
//! Every pair `{i, j}` and every vertex `i` owns one unit-rate exponential,
//! computed on demand as a pure function of the seed and the indices. Any two
//! consumers holding the same seed therefore see identical clocks for the
//! indices they share, whatever initial vector or truncation level they use.
//!
//! # PRF construction
//!
//! All arithmetic is on wrapping `u64`.
//!
//! * `mix(z)` is the SplitMix64 finalizer:
//!   `z ^= z >> 30; z *= 0xbf58476d1ce4e5b9; z ^= z >> 27; z *= 0x94d049bb133111eb; z ^= z >> 31`.
//! * Each stream has a key pair `k0 = mix(seed ^ D)`, `k1 = mix(k0 ^ 0x9e3779b97f4a7c15)`
//!   with domain label `D = 0x706169725f636c6b` (ASCII `pair_clk`) for pair
//!   clocks and `D = 0x766572745f636c6b` (`vert_clk`) for vertex clocks.
//! * The index code is `(hi << 32) | lo` for a pair with `lo < hi`, and `i` for a vertex.
//! * `h = mix(mix(code ^ k0) + k1)`.
//! * `U = ((h >> 12) + 0.5) / 2^52`, which lies strictly inside `(0, 1)`, and the clock
//!   value is `-ln(1 - U)`.
//!
//! Vertex indices are 0-based and must be below `2^32`.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

const PAIR_DOMAIN: u64 = 0x7061_6972_5f63_6c6b;
const VERTEX_DOMAIN: u64 = 0x7665_7274_5f63_6c6b;
const KEY_SPREAD: u64 = 0x9e37_79b9_7f4a_7c15;
const TWO_POW_M52: f64 = 1.0 / 4_503_599_627_370_496.0;

/// Relative slack separating the cheap edge test from the exact one.
const FAST_PATH_SLACK: f64 = 1e-9;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit seed for replica `index` of stream `tag`.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    mix64(mix64(mix64(base ^ KEY_SPREAD).wrapping_add(tag)) ^ index.wrapping_mul(KEY_SPREAD))
}

/// Parses a seed given as decimal or as `0x`-prefixed hexadecimal.
pub fn parse_seed(text: &str) -> Result<u64> {
    let t = text.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse::<u64>(),
    };
    parsed.map_err(|_| Error::invalid(format!("seed {text:?} is not a 64-bit integer")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct StreamKey(u64, u64);

impl StreamKey {
    fn new(seed: u64, domain: u64) -> Self {
        let k0 = mix64(seed ^ domain);
        Self(k0, mix64(k0 ^ KEY_SPREAD))
    }

    #[inline]
    fn uniform(self, code: u64) -> f64 {
        let h = mix64(mix64(code ^ self.0).wrapping_add(self.1));
        ((h >> 12) as f64 + 0.5) * TWO_POW_M52
    }
}

#[inline]
fn pair_code(i: usize, j: usize) -> u64 {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(hi < (1 << 32), "vertex index exceeds 2^32");
    ((hi as u64) << 32) | lo as u64
}

#[inline]
fn exp_from_uniform(u: f64) -> f64 {
    -(1.0 - u).ln()
}

/// Source of unit-rate exponential clocks for pairs and vertices.
///
/// Implementations must be pure: the same query always yields the same value.
pub trait ClockSource {
    /// Uniform variate behind the pair clock `{i, j}`; requires `i != j`.
    fn pair_uniform(&self, i: usize, j: usize) -> f64;

    /// Uniform variate behind the vertex clock `i`.
    fn vertex_uniform(&self, i: usize) -> f64;

    fn pair_exp(&self, i: usize, j: usize) -> f64 {
        exp_from_uniform(self.pair_uniform(i, j))
    }

    fn vertex_exp(&self, i: usize) -> f64 {
        exp_from_uniform(self.vertex_uniform(i))
    }
}

/// The seeded clock family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockField {
    seed: u64,
    pair_key: StreamKey,
    vertex_key: StreamKey,
}

impl ClockField {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            pair_key: StreamKey::new(seed, PAIR_DOMAIN),
            vertex_key: StreamKey::new(seed, VERTEX_DOMAIN),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// ξ for the unordered pair `{i, j}`.
    pub fn unit_pair_exp(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::invalid(format!("pair clock needs distinct vertices, got {i} twice")));
        }
        Ok(self.pair_exp(i, j))
    }

    /// Unit-rate lightning clock of vertex `i`; dividing by λ gives the rate-λ clock.
    pub fn unit_vertex_exp(&self, i: usize) -> f64 {
        self.vertex_exp(i)
    }
}

impl ClockSource for ClockField {
    #[inline]
    fn pair_uniform(&self, i: usize, j: usize) -> f64 {
        debug_assert_ne!(i, j);
        self.pair_key.uniform(pair_code(i, j))
    }

    #[inline]
    fn vertex_uniform(&self, i: usize) -> f64 {
        self.vertex_key.uniform(i as u64)
    }
}

/// Clocks that keep the within-block pair clocks of one field and take the
/// cross pairs and all vertex clocks from another.
///
/// Blocks are `0..split` and `split..`. Used to resample lightning and cross
/// edges while holding the two restricted graphs fixed.
#[derive(Debug, Clone, Copy)]
pub struct ResampledCross {
    pub frozen: ClockField,
    pub fresh: ClockField,
    pub split: usize,
}

impl ClockSource for ResampledCross {
    fn pair_uniform(&self, i: usize, j: usize) -> f64 {
        if (i < self.split) == (j < self.split) {
            self.frozen.pair_uniform(i, j)
        } else {
            self.fresh.pair_uniform(i, j)
        }
    }

    fn vertex_uniform(&self, i: usize) -> f64 {
        self.fresh.vertex_uniform(i)
    }
}

/// Negative-control clocks: every query perturbs the field, so repeated
/// queries disagree. Exists only so self-tests can prove they detect it.
#[derive(Debug)]
pub struct CorruptedClocks {
    inner: ClockField,
    counter: AtomicU64,
}

impl CorruptedClocks {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ClockField::new(seed),
            counter: AtomicU64::new(0),
        }
    }

    fn jitter(&self) -> u64 {
        self.counter.fetch_add(1, Ordering::Relaxed)
    }
}

impl ClockSource for CorruptedClocks {
    fn pair_uniform(&self, i: usize, j: usize) -> f64 {
        let drift = self.jitter().wrapping_add(1).wrapping_mul(KEY_SPREAD);
        ClockField::new(self.inner.seed ^ drift).pair_uniform(i, j)
    }

    fn vertex_uniform(&self, i: usize) -> f64 {
        let drift = self.jitter().wrapping_add(1).wrapping_mul(KEY_SPREAD);
        ClockField::new(self.inner.seed ^ drift).vertex_uniform(i)
    }
}

/// Clock view for one initial vector and deletion rate: converts unit clocks
/// into edge arrival and lightning times.
#[derive(Debug, Clone, Copy)]
pub struct EventClockView<'a, C: ClockSource + ?Sized> {
    masses: &'a [f64],
    lambda: f64,
    clocks: &'a C,
}

impl<'a, C: ClockSource + ?Sized> EventClockView<'a, C> {
    /// `masses[i]` is the mass of vertex `i`; vertices past the slice have mass 0.
    pub fn new(masses: &'a [f64], lambda: f64, clocks: &'a C) -> Self {
        debug_assert!(lambda >= 0.0);
        Self {
            masses,
            lambda,
            clocks,
        }
    }

    pub fn masses(&self) -> &'a [f64] {
        self.masses
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn clocks(&self) -> &'a C {
        self.clocks
    }

    #[inline]
    fn mass(&self, i: usize) -> f64 {
        self.masses.get(i).copied().unwrap_or(0.0)
    }

    /// Arrival time `ξ_{ij} / (m_i m_j)`, or `+∞` when either mass vanishes.
    pub fn edge_time(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::invalid(format!("edge needs distinct vertices, got {i} twice")));
        }
        Ok(self.edge_time_unchecked(i, j))
    }

    #[inline]
    pub(crate) fn edge_time_unchecked(&self, i: usize, j: usize) -> f64 {
        let p = self.mass(i) * self.mass(j);
        if p == 0.0 {
            return f64::INFINITY;
        }
        self.clocks.pair_exp(i, j) / p
    }

    /// Whether the edge `{i, j}` has arrived by time `t`; always agrees with
    /// `edge_time(i, j) <= t` but skips the logarithm when the answer is clear.
    #[inline]
    pub fn edge_within(&self, i: usize, j: usize, t: f64) -> bool {
        let p = self.mass(i) * self.mass(j);
        if p == 0.0 {
            return false;
        }
        let c = t * p;
        let u = self.clocks.pair_uniform(i, j);
        // -ln(1-u) lies in [u, u/(1-u)]
        if u > c * (1.0 + FAST_PATH_SLACK) {
            return false;
        }
        if u / (1.0 - u) < c * (1.0 - FAST_PATH_SLACK) {
            return true;
        }
        exp_from_uniform(u) / p <= t
    }

    /// Lightning time `λ_i / m_i = e_i / (λ m_i)`, or `+∞` when `λ m_i = 0`.
    pub fn strike_time(&self, i: usize) -> f64 {
        let rate = self.lambda * self.mass(i);
        if rate == 0.0 {
            return f64::INFINITY;
        }
        self.clocks.vertex_exp(i) / rate
    }
}

/// Smallest `t·m_i·m_j` for which an edge can ever be present: every clock
/// value is at least `2^-53`.
pub(crate) const MIN_EDGE_SCALE: f64 = 0.5 * TWO_POW_M52 * (1.0 - FAST_PATH_SLACK);

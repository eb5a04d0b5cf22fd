//! Row selection policies.
//!
//! [`RowSampler`] draws row indices without replacement with probability
//! proportional to their weights (squared row norms). Weights live in a
//! Fenwick tree, so each draw costs `O(log m)`: a uniform variate scaled by
//! the live total is inverted against cumulative weights, and the chosen
//! leaf is zeroed.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, StreamRng};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("weight {index} is {value}; weights must be positive and finite")]
    BadWeight { index: usize, value: f64 },
}

/// How the solver picks rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Without replacement, proportional to `||a_i||²`.
    #[default]
    Weighted,
    /// Rows `0, 1, …, m-1` in order.
    InOrder,
}

/// Binary indexed tree over `f64` weights.
#[derive(Debug, Clone)]
struct Fenwick {
    // 1-based; tree[i] sums the range (i - lowbit(i), i]
    tree: Vec<f64>,
}

impl Fenwick {
    fn from_weights(w: &[f64]) -> Self {
        let m = w.len();
        let mut tree = vec![0.0; m + 1];
        tree[1..].copy_from_slice(w);
        for i in 1..=m {
            let parent = i + (i & i.wrapping_neg());
            if parent <= m {
                tree[parent] += tree[i];
            }
        }
        Self { tree }
    }

    fn len(&self) -> usize {
        self.tree.len() - 1
    }

    fn add(&mut self, index: usize, delta: f64) {
        let mut i = index + 1;
        while i <= self.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    fn prefix(&self, count: usize) -> f64 {
        let mut i = count;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    fn total(&self) -> f64 {
        self.prefix(self.len())
    }

    /// Smallest index whose inclusive prefix sum exceeds `u`.
    fn find(&self, mut u: f64) -> usize {
        let m = self.len();
        let mut pos = 0;
        let mut step = if m == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - m.leading_zeros())
        };
        while step > 0 {
            let next = pos + step;
            if next <= m && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

// rebuild once the live total falls below this fraction of the total at the
// last build, bounding cancellation error from repeated subtraction
const REBUILD_FRACTION: f64 = 1.0 / 1024.0;

/// Weighted sampling without replacement over `0..m`.
#[derive(Debug, Clone)]
pub struct RowSampler {
    weights: Vec<f64>,
    live: Vec<bool>,
    tree: Fenwick,
    remaining: usize,
    built_total: f64,
    rng: StreamRng,
}

impl RowSampler {
    /// Sampler over `weights` with a generator seeded from `seed`.
    pub fn new(weights: &[f64], seed: u64) -> Result<Self, SamplerError> {
        Self::with_rng(weights, rng::from_seed(seed))
    }

    pub fn with_rng(weights: &[f64], rng: StreamRng) -> Result<Self, SamplerError> {
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w > 0.0 && w.is_finite()))
        {
            return Err(SamplerError::BadWeight { index, value });
        }
        let tree = Fenwick::from_weights(weights);
        Ok(Self {
            weights: weights.to_vec(),
            live: vec![true; weights.len()],
            built_total: tree.total(),
            tree,
            remaining: weights.len(),
            rng,
        })
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    /// Sum of not-yet-drawn weights as held by the tree.
    pub fn live_weight_total(&self) -> f64 {
        self.tree.total()
    }

    fn rebuild(&mut self) {
        let w: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.live)
            .map(|(&w, &l)| if l { w } else { 0.0 })
            .collect();
        self.tree = Fenwick::from_weights(&w);
        self.built_total = self.tree.total();
    }

    fn nearest_live(&self, i: usize) -> usize {
        let m = self.live.len();
        let i = i.min(m - 1);
        (0..m)
            .flat_map(|d| [i.checked_sub(d), i.checked_add(d).filter(|&j| j < m)])
            .flatten()
            .find(|&j| self.live[j])
            .expect("a live index exists while remaining > 0")
    }

    fn take(&mut self, i: usize) -> usize {
        self.live[i] = false;
        self.remaining -= 1;
        self.tree.add(i, -self.weights[i]);
        i
    }
}

impl Iterator for RowSampler {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self.remaining {
            0 => None,
            1 => {
                let i = self.nearest_live(0);
                Some(self.take(i))
            }
            _ => {
                let mut total = self.tree.total();
                if total < self.built_total * REBUILD_FRACTION {
                    self.rebuild();
                    total = self.built_total;
                }
                let u = self.rng.random::<f64>() * total;
                let mut i = self.tree.find(u);
                if i >= self.live.len() || !self.live[i] {
                    // only reachable through rounding at a boundary
                    i = self.nearest_live(i);
                }
                Some(self.take(i))
            }
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

/// Deterministic in-order row stream `0, 1, …, m-1`.
pub fn in_order_policy(m: usize) -> Range<usize> {
    0..m
}

/// A row stream of either kind.
#[derive(Debug, Clone)]
pub enum RowStream {
    Weighted(Box<RowSampler>),
    InOrder(Range<usize>),
}

impl RowStream {
    pub fn new(kind: SamplerKind, weights: &[f64], rng: StreamRng) -> Result<Self, SamplerError> {
        Ok(match kind {
            SamplerKind::Weighted => {
                RowStream::Weighted(Box::new(RowSampler::with_rng(weights, rng)?))
            }
            SamplerKind::InOrder => RowStream::InOrder(in_order_policy(weights.len())),
        })
    }
}

impl Iterator for RowStream {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            RowStream::Weighted(s) => s.next(),
            RowStream::InOrder(r) => r.next(),
        }
    }
}

//! Hierarchical K-ary partition of a box domain.
//!
//! Every cell at depth `h` is split into `K` equal slabs along coordinate
//! `h mod D`. Cells are half-open boxes `[low, high)` except on the domain's
//! upper face, so every point of the domain belongs to exactly one cell per
//! depth.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned box `[lows, highs]` in `D` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lows: Vec<f64>,
    highs: Vec<f64>,
}

impl Domain {
    pub fn new(lows: Vec<f64>, highs: Vec<f64>) -> Result<Self> {
        if lows.is_empty() {
            return Err(Error::invalid("domain needs at least one dimension"));
        }
        if lows.len() != highs.len() {
            return Err(Error::invalid(format!(
                "domain bounds have mismatched lengths {} and {}",
                lows.len(),
                highs.len()
            )));
        }
        for (j, (lo, hi)) in lows.iter().zip(&highs).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "coordinate {j}: need finite low < high, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lows, highs })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lows.len()
    }

    pub fn lows(&self) -> &[f64] {
        &self.lows
    }

    pub fn highs(&self) -> &[f64] {
        &self.highs
    }

    pub fn width(&self, j: usize) -> f64 {
        self.highs[j] - self.lows[j]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lows
            .iter()
            .zip(&self.highs)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lows.iter().zip(&self.highs))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

/// Address of a cell: `index` in `[0, K^depth)`, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub depth: u32,
    pub index: u64,
}

impl CellId {
    pub const ROOT: CellId = CellId { depth: 0, index: 0 };

    pub fn new(depth: u32, index: u64) -> Self {
        Self { depth, index }
    }

    /// Index in the 1-based convention used in reports.
    pub fn report_index(&self) -> u64 {
        self.index + 1
    }
}

impl std::fmt::Display for CellId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.depth, self.report_index())
    }
}

/// `K^exp` as an integer.
pub fn pow_k(k: u32, exp: u32) -> u64 {
    (k as u64).pow(exp)
}

/// `floor(log_K n)` computed in integer arithmetic.
pub fn floor_log(k: u32, n: u64) -> u32 {
    assert!(k >= 2, "branching factor must be at least 2");
    let mut depth = 0;
    let mut reach = k as u64;
    while reach <= n {
        depth += 1;
        match reach.checked_mul(k as u64) {
            Some(next) => reach = next,
            None => break,
        }
    }
    depth
}

/// The branching factor and index arithmetic of the tree, independent of
/// any geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionScheme {
    branching: u32,
}

impl PartitionScheme {
    pub fn new(branching: u32) -> Result<Self> {
        if branching < 2 {
            return Err(Error::invalid(format!(
                "branching factor must be >= 2, got {branching}"
            )));
        }
        Ok(Self { branching })
    }

    pub fn branching(&self) -> u32 {
        self.branching
    }

    /// Number of cells at `depth`.
    pub fn width_at(&self, depth: u32) -> u64 {
        pow_k(self.branching, depth)
    }

    pub fn children(&self, cell: CellId) -> Vec<CellId> {
        let k = self.branching as u64;
        (0..k)
            .map(|j| CellId::new(cell.depth + 1, k * cell.index + j))
            .collect()
    }

    pub fn parent(&self, cell: CellId) -> Option<CellId> {
        (cell.depth > 0).then(|| CellId::new(cell.depth - 1, cell.index / self.branching as u64))
    }

    pub fn ancestor(&self, cell: CellId, target_depth: u32) -> Result<CellId> {
        if target_depth > cell.depth {
            return Err(Error::invalid(format!(
                "ancestor depth {target_depth} is below cell {cell}"
            )));
        }
        let shift = pow_k(self.branching, cell.depth - target_depth);
        Ok(CellId::new(target_depth, cell.index / shift))
    }

    /// True when `cell` lies in the subtree rooted at `root` (inclusive).
    pub fn is_descendant(&self, cell: CellId, root: CellId) -> bool {
        cell.depth >= root.depth
            && self
                .ancestor(cell, root.depth)
                .map(|a| a == root)
                .unwrap_or(false)
    }

    /// Probability that a uniform random descent started at `source` passes
    /// through `target`.
    pub fn conditional_landing_probability(&self, source: CellId, target: CellId) -> f64 {
        if self.is_descendant(target, source) {
            (self.branching as f64).powi(-((target.depth - source.depth) as i32))
        } else if self.is_descendant(source, target) {
            1.0
        } else {
            0.0
        }
    }
}

/// A partition scheme bound to a concrete domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    domain: Domain,
    scheme: PartitionScheme,
}

impl Partition {
    pub fn new(domain: Domain, scheme: PartitionScheme) -> Self {
        Self { domain, scheme }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn scheme(&self) -> PartitionScheme {
        self.scheme
    }

    pub fn branching(&self) -> u32 {
        self.scheme.branching
    }

    /// How many of the first `depth` splits act on coordinate `j`.
    fn splits_on(&self, depth: u32, j: usize) -> u32 {
        let d = self.domain.dim() as u32;
        let j = j as u32;
        if depth <= j {
            0
        } else {
            (depth - j - 1) / d + 1
        }
    }

    /// Per-coordinate slab position of `cell`: entry `j` is the integer
    /// offset `p` such that the cell spans slab `p` of `K^s` slabs along `j`.
    fn slab_positions(&self, cell: CellId) -> Vec<u64> {
        let k = self.scheme.branching as u64;
        let d = self.domain.dim();
        let mut pos = vec![0u64; d];
        for level in 0..cell.depth {
            let digit = (cell.index / pow_k(self.scheme.branching, cell.depth - 1 - level)) % k;
            let j = level as usize % d;
            pos[j] = pos[j] * k + digit;
        }
        pos
    }

    fn slab_edge(&self, j: usize, splits: u32, p: u64) -> f64 {
        if p == 0 {
            return self.domain.lows[j];
        }
        let slabs = pow_k(self.scheme.branching, splits);
        if p >= slabs {
            return self.domain.highs[j];
        }
        self.domain.lows[j] + self.domain.width(j) * (p as f64 / slabs as f64)
    }

    pub fn cell_bounds(&self, cell: CellId) -> Domain {
        let pos = self.slab_positions(cell);
        let (lows, highs) = pos
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let s = self.splits_on(cell.depth, j);
                (self.slab_edge(j, s, p), self.slab_edge(j, s, p + 1))
            })
            .unzip();
        Domain { lows, highs }
    }

    pub fn cell_center(&self, cell: CellId) -> Vec<f64> {
        self.cell_bounds(cell).center()
    }

    /// The unique depth-`depth` cell containing `x`.
    pub fn locate(&self, x: &[f64], depth: u32) -> Result<CellId> {
        if !self.domain.contains(x) {
            return Err(Error::invalid(format!("point {x:?} outside the domain")));
        }
        let k = self.scheme.branching as u64;
        let d = self.domain.dim();
        let mut pos = Vec::with_capacity(d);
        for (j, &v) in x.iter().enumerate() {
            let s = self.splits_on(depth, j);
            let slabs = pow_k(self.scheme.branching, s);
            let rel = (v - self.domain.lows[j]) / self.domain.width(j);
            let mut p = ((rel * slabs as f64).floor().max(0.0) as u64).min(slabs - 1);
            // Snap to the exact edges used by `cell_bounds`.
            while p > 0 && v < self.slab_edge(j, s, p) {
                p -= 1;
            }
            while p + 1 < slabs && v >= self.slab_edge(j, s, p + 1) {
                p += 1;
            }
            pos.push(p);
        }
        // Re-interleave the per-coordinate digits, most significant first.
        let mut remaining: Vec<u32> = (0..d).map(|j| self.splits_on(depth, j)).collect();
        let mut index = 0u64;
        for level in 0..depth {
            let j = level as usize % d;
            remaining[j] -= 1;
            let digit = (pos[j] / pow_k(self.scheme.branching, remaining[j])) % k;
            index = index * k + digit;
        }
        Ok(CellId::new(depth, index))
    }

    /// Uniform point inside `cell`, never on a shared upper edge.
    pub fn sample_in<R: Rng + ?Sized>(&self, cell: CellId, rng: &mut R) -> Vec<f64> {
        let bounds = self.cell_bounds(cell);
        (0..bounds.dim())
            .map(|j| {
                let (lo, hi) = (bounds.lows[j], bounds.highs[j]);
                let v = lo + rng.gen::<f64>() * (hi - lo);
                if v >= hi {
                    hi.next_down().max(lo)
                } else {
                    v
                }
            })
            .collect()
    }

    /// Draw from `U_P(cell)`: descend through uniformly chosen children down
    /// to `max_depth`, then sample uniformly inside the reached cell.
    /// Returns the point and the reached cell.
    pub fn sample_descend<R: Rng + ?Sized>(
        &self,
        cell: CellId,
        max_depth: u32,
        rng: &mut R,
    ) -> (Vec<f64>, CellId) {
        let k = self.scheme.branching as u64;
        let mut reached = cell;
        while reached.depth < max_depth {
            reached = CellId::new(reached.depth + 1, reached.index * k + rng.gen_range(0..k));
        }
        (self.sample_in(reached, rng), reached)
    }
}

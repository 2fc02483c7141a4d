//! Brute-force value oracles over the average function.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::functions::TestFunction;
use super::process::{product_grid, RewardProcess};
use crate::error::{Error, Result};
use crate::partition::{pow_k, CellId, Partition};

/// Exact access to the average function `f` of a process (or `f_bar` under
/// stochastic feedback).
#[derive(Debug, Clone, Copy)]
pub struct AverageOracle<'a> {
    process: &'a RewardProcess,
}

impl<'a> AverageOracle<'a> {
    pub fn new(process: &'a RewardProcess) -> Self {
        Self { process }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.process.average(x)
    }

    pub fn known_argmax(&self) -> Option<Vec<f64>> {
        self.process.average_argmax()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupEstimate {
    pub argmax: Vec<f64>,
    pub value: f64,
}

/// Maximizes the average over a regular grid with `grid_points_per_dim`
/// points per axis, the centers of every depth-`refine_depth` cell, and the
/// declared maximizer when there is one.
///
/// For an `L`-Lipschitz average (sup norm) the value is within
/// `L * spacing / 2` of the true supremum, where `spacing` is the smaller
/// of the grid step and the refinement cell width.
pub fn sup_oracle(
    avg: &AverageOracle<'_>,
    partition: &Partition,
    grid_points_per_dim: usize,
    refine_depth: u32,
) -> Result<SupEstimate> {
    if grid_points_per_dim < 2 {
        return Err(Error::invalid(format!(
            "sup oracle needs at least 2 grid points per dimension, got {grid_points_per_dim}"
        )));
    }
    let mut best = SupEstimate {
        argmax: partition.domain().center(),
        value: f64::NEG_INFINITY,
    };
    let mut consider = |x: Vec<f64>| {
        let v = avg.value(&x);
        if v > best.value {
            best = SupEstimate {
                argmax: x,
                value: v,
            };
        }
    };
    if let Some(x) = avg.known_argmax() {
        consider(x);
    }
    for x in product_grid(partition.domain(), grid_points_per_dim) {
        consider(x);
    }
    for i in 0..pow_k(partition.branching(), refine_depth) {
        consider(partition.cell_center(CellId::new(refine_depth, i)));
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of `E_{x ~ U_P(cell)}[f(x)]`.
pub fn cell_mean_oracle<R: Rng + ?Sized>(
    avg: &AverageOracle<'_>,
    partition: &Partition,
    cell: CellId,
    samples: usize,
    max_depth: u32,
    rng: &mut R,
) -> Result<MeanEstimate> {
    if samples == 0 {
        return Err(Error::invalid("cell mean oracle needs at least one sample"));
    }
    let max_depth = max_depth.max(cell.depth);
    // Welford updates keep a constant function's mean exact.
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 1..=samples {
        let (x, _) = partition.sample_descend(cell, max_depth, rng);
        let v = avg.value(&x);
        let delta = v - mean;
        mean += delta / k as f64;
        m2 += delta * (v - mean);
    }
    let m = samples as f64;
    let var = if samples > 1 { m2 / (m - 1.0) } else { 0.0 };
    Ok(MeanEstimate {
        mean,
        std_error: (var / m).sqrt(),
    })
}

/// Points per axis of the in-cell grid used to estimate a cell's supremum.
const IN_CELL_GRID: usize = 33;

/// `N_h(epsilon)`: the number of depth-`depth` cells whose supremum is at
/// least `f* - epsilon`. Suprema are taken over a closed in-cell grid plus
/// the declared maximizer.
pub fn count_near_optimal_cells(
    f: &TestFunction,
    partition: &Partition,
    depth: u32,
    epsilon: f64,
) -> Result<u64> {
    if depth > 12 {
        return Err(Error::invalid(format!(
            "near-optimal cell count is a diagnostic limited to depth 12, got {depth}"
        )));
    }
    let domain = partition.domain();
    let optimum = f.optimum(domain);
    let f_star = match &optimum {
        Some((_, v)) => *v,
        None => product_grid(
            domain,
            1001.min(((1e6f64).powf(1.0 / domain.dim() as f64)) as usize),
        )
        .iter()
        .map(|x| f.eval(x))
        .fold(f64::NEG_INFINITY, f64::max),
    };
    let threshold = f_star - epsilon;
    let mut count = 0;
    for i in 0..pow_k(partition.branching(), depth) {
        let bounds = partition.cell_bounds(CellId::new(depth, i));
        let mut sup = product_grid(&bounds, IN_CELL_GRID)
            .iter()
            .map(|x| f.eval(x))
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some((x, v)) = &optimum {
            if bounds.contains(x) {
                sup = sup.max(*v);
            }
        }
        if sup >= threshold {
            count += 1;
        }
    }
    Ok(count)
}

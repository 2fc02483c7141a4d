//! Per-cell statistics, importance-weighted estimates and confidence bounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{floor_log, CellId, Partition, PartitionScheme};
use crate::rank::RankTable;

/// `delta = 4b / (f_max sqrt(n))`, clamped to `[1/n^2, 1/2]` so the
/// logarithms in every bound stay finite.
pub fn default_delta(range: f64, f_max: f64, horizon: u64) -> f64 {
    let n = horizon as f64;
    let raw = 4.0 * range / (f_max * n.sqrt());
    raw.max(1.0 / (n * n)).min(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    pub delta: f64,
    /// Noise or variation range `b`.
    pub range: f64,
    pub f_max: f64,
    pub horizon: u64,
}

impl ConfidenceParams {
    pub fn new(delta: f64, range: f64, f_max: f64, horizon: u64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if !(range >= 0.0 && range.is_finite()) {
            return Err(Error::invalid(format!("range b must be >= 0, got {range}")));
        }
        if !(f_max > 0.0 && f_max.is_finite()) {
            return Err(Error::invalid(format!("f_max must be > 0, got {f_max}")));
        }
        if horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        Ok(Self {
            delta,
            range,
            f_max,
            horizon,
        })
    }

    pub fn with_default_delta(range: f64, f_max: f64, horizon: u64) -> Result<Self> {
        if f_max.is_nan() || f_max <= 0.0 {
            return Err(Error::invalid(format!("f_max must be > 0, got {f_max}")));
        }
        Self::new(default_delta(range, f_max, horizon), range, f_max, horizon)
    }

    fn n(&self) -> f64 {
        self.horizon as f64
    }
}

/// The Zipf normalizer `sum_{h=1}^{floor(log_K n)} sum_{i=1}^{K^h} 1/(h i)`.
pub fn log_bar(branching: u32, horizon: u64) -> Result<f64> {
    if horizon < branching as u64 {
        return Err(Error::invalid(format!(
            "log_bar needs n >= K, got n = {horizon}, K = {branching}"
        )));
    }
    let depth = floor_log(branching, horizon);
    Ok((1..=depth)
        .map(|h| {
            let cells = (branching as u64).pow(h);
            (1..=cells)
                .map(|i| 1.0 / (h as f64 * i as f64))
                .sum::<f64>()
        })
        .sum())
}

/// Exploration radius `sqrt(log(4 n^3 / delta) / (2 T))`.
pub fn iid_radius(pulls: u64, params: &ConfidenceParams) -> f64 {
    let n = params.n();
    ((4.0 * n * n * n / params.delta).ln() / (2.0 * pulls as f64)).sqrt()
}

/// Lower confidence score `f_hat - sqrt(log(4 n^3 / delta) / (2 T))`, or
/// `-inf` for an unpulled cell.
pub fn lcb_score(stats: &CellStats, params: &ConfidenceParams) -> f64 {
    match stats.mean() {
        None => f64::NEG_INFINITY,
        Some(mean) => mean - iid_radius(stats.pulls, params),
    }
}

/// Deviation bound of the uniform importance-weighted sums at depth `h`:
/// `sqrt(2 n f_max^2 K^h log(n^2/delta)) + (f_max^2 / 3) K^h log(n^2/delta)`.
pub fn adv_bound(depth: u32, branching: u32, params: &ConfidenceParams) -> f64 {
    let n = params.n();
    let width = (branching as f64).powi(depth as i32);
    let log_term = (n * n / params.delta).ln();
    let f2 = params.f_max * params.f_max;
    (2.0 * n * f2 * width * log_term).sqrt() + f2 / 3.0 * width * log_term
}

/// Deviation bound of a cell's importance-weighted sum under Zipf sampling:
/// `f_max sqrt(2 h logbar log(2n^2/delta) R) + f_max logbar log(2n^2/delta) / 3`
/// where `R` is the cell's cumulative rank.
pub fn vroom_bound(depth: u32, rank_sum: u64, params: &ConfidenceParams, log_bar: f64) -> f64 {
    let n = params.n();
    let log_term = (2.0 * n * n / params.delta).ln();
    params.f_max * (2.0 * depth as f64 * log_bar * log_term * rank_sum as f64).sqrt()
        + params.f_max * log_bar * log_term / 3.0
}

/// Running statistics of one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    /// Number of rounds whose point landed in the cell.
    pub pulls: u64,
    pub reward_sum: f64,
    /// Sum of importance-weighted estimates.
    pub iw_sum: f64,
}

impl CellStats {
    /// Empirical mean `f_hat`, if the cell was ever pulled.
    pub fn mean(&self) -> Option<f64> {
        (self.pulls > 0).then(|| self.reward_sum / self.pulls as f64)
    }
}

/// Zipf distribution over `(depth, rank)`: `p = 1 / (h j logbar)` for
/// `h in 1..=H_max`, `j in 1..=K^h`.
#[derive(Debug, Clone)]
pub struct SamplingDistribution {
    branching: u32,
    max_depth: u32,
    log_bar: f64,
    /// `harmonic[j] = sum_{i=1}^{j} 1/i`.
    harmonic: Vec<f64>,
    /// Cumulative depth masses `sum_{h'<=h} harmonic[K^h'] / h'`.
    depth_cdf: Vec<f64>,
}

impl SamplingDistribution {
    pub fn new(branching: u32, horizon: u64) -> Result<Self> {
        let log_bar = log_bar(branching, horizon)?;
        let max_depth = floor_log(branching, horizon);
        let widest = (branching as u64).pow(max_depth) as usize;
        let mut harmonic = Vec::with_capacity(widest + 1);
        harmonic.push(0.0);
        let mut acc = 0.0;
        for i in 1..=widest {
            acc += 1.0 / i as f64;
            harmonic.push(acc);
        }
        let mut depth_cdf = Vec::with_capacity(max_depth as usize);
        let mut total = 0.0;
        for h in 1..=max_depth {
            total += harmonic[(branching as u64).pow(h) as usize] / h as f64;
            depth_cdf.push(total);
        }
        Ok(Self {
            branching,
            max_depth,
            log_bar,
            harmonic,
            depth_cdf,
        })
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn log_bar(&self) -> f64 {
        self.log_bar
    }

    pub fn branching(&self) -> u32 {
        self.branching
    }

    /// Probability of selecting the rank-`rank` cell of depth `depth`.
    pub fn probability(&self, depth: u32, rank: usize) -> f64 {
        if depth == 0 || depth > self.max_depth {
            return 0.0;
        }
        1.0 / (depth as f64 * rank as f64 * self.log_bar)
    }

    /// Exact inverse-CDF draw of `(depth, rank)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u32, usize) {
        let total = *self.depth_cdf.last().expect("at least one depth");
        let u = rng.gen::<f64>() * total;
        let slot = self
            .depth_cdf
            .partition_point(|&c| c <= u)
            .min(self.depth_cdf.len() - 1);
        let depth = slot as u32 + 1;
        let below = if slot == 0 {
            0.0
        } else {
            self.depth_cdf[slot - 1]
        };
        let width = (self.branching as u64).pow(depth) as usize;
        // Harmonic mass within the depth, rescaled by h.
        let target = (u - below) * depth as f64;
        let rank = self.harmonic[1..=width]
            .partition_point(|&c| c <= target)
            .min(width - 1)
            + 1;
        (depth, rank)
    }
}

/// Probability that a round's sample is observed by a cell's
/// importance-weighted estimate: `P(x_t in P_{h,i} and h >= h_t)`.
pub trait ObservationModel {
    fn observation_probability(&self, cell: CellId) -> f64;

    /// Probabilities for every cell of a root-to-leaf path, indexed by depth.
    fn path_probabilities(&self, path: &[CellId]) -> Vec<f64> {
        path.iter()
            .map(|&c| self.observation_probability(c))
            .collect()
    }
}

/// Sampling from the root only: a depth-`h` cell is observed with
/// probability `K^-h`.
#[derive(Debug, Clone, Copy)]
pub struct RootSampling {
    pub scheme: PartitionScheme,
}

impl ObservationModel for RootSampling {
    fn observation_probability(&self, cell: CellId) -> f64 {
        (self.scheme.branching() as f64).powi(-(cell.depth as i32))
    }
}

/// Zipf sampling over ranked cells; `tables[h - 1]` ranks depth `h`.
#[derive(Debug, Clone, Copy)]
pub struct ZipfSampling<'a> {
    pub dist: &'a SamplingDistribution,
    pub tables: &'a [RankTable],
}

impl ObservationModel for ZipfSampling<'_> {
    /// `sum_{h'=1}^{h} p(h', rank of the depth-h' ancestor) K^-(h - h')`.
    fn observation_probability(&self, cell: CellId) -> f64 {
        let k = self.dist.branching() as u64;
        let kf = k as f64;
        let mut prob = 0.0;
        for d in 1..=cell.depth {
            let ancestor = cell.index / k.pow(cell.depth - d);
            let rank = self.tables[d as usize - 1].rank_of(ancestor as usize);
            prob = prob / kf + self.dist.probability(d, rank);
        }
        prob
    }

    fn path_probabilities(&self, path: &[CellId]) -> Vec<f64> {
        let kf = self.dist.branching() as f64;
        let mut prob = 0.0;
        path.iter()
            .map(|c| {
                if c.depth == 0 {
                    return 0.0;
                }
                let rank = self.tables[c.depth as usize - 1].rank_of(c.index as usize);
                prob = prob / kf + self.dist.probability(c.depth, rank);
                prob
            })
            .collect()
    }
}

/// Statistics for every cell of depth `0..=max_depth`.
#[derive(Debug, Clone)]
pub struct StatsStore {
    scheme: PartitionScheme,
    layers: Vec<Vec<CellStats>>,
}

impl StatsStore {
    pub fn new(scheme: PartitionScheme, max_depth: u32) -> Self {
        let layers = (0..=max_depth)
            .map(|h| vec![CellStats::default(); scheme.width_at(h) as usize])
            .collect();
        Self { scheme, layers }
    }

    pub fn max_depth(&self) -> u32 {
        self.layers.len() as u32 - 1
    }

    pub fn get(&self, cell: CellId) -> &CellStats {
        &self.layers[cell.depth as usize][cell.index as usize]
    }

    pub fn layer(&self, depth: u32) -> &[CellStats] {
        &self.layers[depth as usize]
    }

    /// Cells containing `x` at every depth `0..=max_depth`.
    pub fn path(&self, partition: &Partition, x: &[f64]) -> Result<Vec<CellId>> {
        let leaf = partition.locate(x, self.max_depth())?;
        (0..=self.max_depth())
            .map(|h| self.scheme.ancestor(leaf, h))
            .collect()
    }

    /// Attributes `(x, y)` to every cell on its path: pull counts and reward
    /// sums at all depths, importance-weighted sums at depths at or below
    /// the selected cell's. Returns the path.
    pub fn record_sample(
        &mut self,
        partition: &Partition,
        x: &[f64],
        y: f64,
        selected: CellId,
        model: &dyn ObservationModel,
    ) -> Result<Vec<CellId>> {
        let path = self.path(partition, x)?;
        if path[selected.depth.min(self.max_depth()) as usize] != selected {
            return Err(Error::invariant(format!(
                "sample {x:?} did not land in its selected cell {selected}"
            )));
        }
        let probs = model.path_probabilities(&path);
        for (cell, prob) in path.iter().zip(probs) {
            let stats = &mut self.layers[cell.depth as usize][cell.index as usize];
            stats.pulls += 1;
            stats.reward_sum += y;
            if cell.depth >= selected.depth {
                if prob.is_nan() || prob <= 0.0 {
                    return Err(Error::invariant(format!(
                        "zero observation probability for {cell}"
                    )));
                }
                stats.iw_sum += y / prob;
            }
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Domain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn default_delta_examples() {
        assert!(close(default_delta(0.1, 1.0, 100), 0.04, 1e-15));
        assert_eq!(default_delta(0.0, 1.0, 100), 1.0 / 10_000.0);
        assert_eq!(default_delta(10.0, 1.0, 4), 0.5);
    }

    #[test]
    fn log_bar_examples() {
        // Direct summation: depth 1 gives 1 + 1/2, depth 2 gives (1 + 1/2 + 1/3 + 1/4) / 2.
        assert!(close(log_bar(2, 2).unwrap(), 1.5, 1e-15));
        assert!(close(log_bar(2, 4).unwrap(), 1.5 + 25.0 / 24.0, 1e-15));
        assert!(close(log_bar(2, 4).unwrap(), 2.541_666_666_666_667, 1e-12));
        assert!(log_bar(3, 2).is_err());
        // The logarithmic bound fails only at the smallest horizon.
        assert!(log_bar(2, 2).unwrap() > 2.0 * 2f64.ln());
        for k in [2u32, 3, 5] {
            for n in [k as u64, 10, 100, 1000, 65_536] {
                if n >= k as u64 && n >= 3 {
                    assert!(log_bar(k, n).unwrap() <= 2.0 * (n as f64).ln());
                }
            }
        }
    }

    #[test]
    fn lcb_examples() {
        let params = ConfidenceParams::new(0.04, 0.1, 1.0, 16).unwrap();
        assert_eq!(lcb_score(&CellStats::default(), &params), f64::NEG_INFINITY);
        let stats = CellStats {
            pulls: 8,
            reward_sum: 4.8,
            iw_sum: 0.0,
        };
        let radius = ((4.0f64 * 4096.0 / 0.04).ln() / 16.0).sqrt();
        assert!(close(lcb_score(&stats, &params), 0.6 - radius, 1e-12));
        let many = CellStats {
            pulls: 1 << 50,
            reward_sum: 0.6 * (1u64 << 50) as f64,
            iw_sum: 0.0,
        };
        assert!(close(lcb_score(&many, &params), 0.6, 1e-6));
    }

    #[test]
    fn adv_bound_examples() {
        let params = ConfidenceParams::new(0.04, 0.1, 1.0, 16).unwrap();
        let l = 6400f64.ln();
        assert!(close(
            adv_bound(1, 2, &params),
            (64.0 * l).sqrt() + 2.0 / 3.0 * l,
            1e-12
        ));
        for k in [2, 3, 7] {
            assert!(close(
                adv_bound(0, k, &params),
                (32.0 * l).sqrt() + l / 3.0,
                1e-12
            ));
        }
        for h in 0..6 {
            assert!(adv_bound(h + 1, 2, &params) > adv_bound(h, 2, &params));
        }
    }

    #[test]
    fn vroom_bound_examples() {
        let params = ConfidenceParams::new(0.04, 0.1, 1.0, 16).unwrap();
        let lb = log_bar(2, 16).unwrap();
        let l = (2.0f64 * 256.0 / 0.04).ln();
        assert!(close(vroom_bound(1, 0, &params, lb), lb * l / 3.0, 1e-12));
        let t = 11u64;
        let expected = (2.0 * lb * l * t as f64).sqrt() + lb * l / 3.0;
        assert!(close(vroom_bound(1, t, &params, lb), expected, 1e-12));
    }

    #[test]
    fn zipf_probabilities_sum_to_one() {
        for k in [2u32, 3] {
            for e in 4..=16 {
                let n = 1u64 << e;
                let dist = SamplingDistribution::new(k, n).unwrap();
                let mut total = 0.0;
                for h in 1..=dist.max_depth() {
                    for j in 1..=(k as usize).pow(h) {
                        total += dist.probability(h, j);
                    }
                }
                assert!(close(total, 1.0, 1e-12), "k={k} n={n} total={total}");
            }
        }
    }

    #[test]
    fn zipf_first_cell_probability() {
        let dist = SamplingDistribution::new(2, 4).unwrap();
        assert!(close(
            dist.probability(1, 1),
            0.393_442_622_950_819_7,
            1e-12
        ));
        assert!(close(
            dist.probability(2, 2),
            0.098_360_655_737_704_9,
            1e-12
        ));
    }

    #[test]
    fn observation_probability_examples() {
        let scheme = PartitionScheme::new(2).unwrap();
        assert_eq!(
            RootSampling { scheme }.observation_probability(CellId::new(3, 5)),
            0.125
        );
        // K = 2, n = 4: depth-1 ancestor at rank 1, the cell itself at rank 2.
        let dist = SamplingDistribution::new(2, 4).unwrap();
        let mut tables = vec![RankTable::new(2), RankTable::new(4)];
        tables[1].set_score(0, 1.0, 1);
        let cell = CellId::new(2, 1);
        assert_eq!(tables[0].rank_of(0), 1);
        assert_eq!(tables[1].rank_of(1), 2);
        let model = ZipfSampling {
            dist: &dist,
            tables: &tables,
        };
        let p = model.observation_probability(cell);
        assert!(close(p, 0.295_081_967_213_114_8, 1e-12), "{p}");
        let path = [CellId::ROOT, CellId::new(1, 0), cell];
        let along = model.path_probabilities(&path);
        assert!(close(along[2], p, 1e-15));
        assert_eq!(along[0], 0.0);
    }

    #[test]
    fn record_sample_respects_selected_depth() {
        let partition = Partition::new(Domain::unit(1).unwrap(), PartitionScheme::new(2).unwrap());
        let dist = SamplingDistribution::new(2, 4).unwrap();
        let tables = vec![RankTable::new(2), RankTable::new(4)];
        let model = ZipfSampling {
            dist: &dist,
            tables: &tables,
        };
        let mut store = StatsStore::new(partition.scheme(), 2);
        let selected = CellId::new(2, 1);
        let path = store
            .record_sample(&partition, &[0.3], 0.8, selected, &model)
            .unwrap();
        assert_eq!(path, vec![CellId::ROOT, CellId::new(1, 0), selected]);
        let ancestor = store.get(CellId::new(1, 0));
        assert_eq!(ancestor.pulls, 1);
        assert_eq!(ancestor.reward_sum, 0.8);
        assert_eq!(ancestor.iw_sum, 0.0);
        let leaf = store.get(selected);
        assert!(close(
            leaf.iw_sum,
            0.8 / model.observation_probability(selected),
            1e-15
        ));

        let root = RootSampling {
            scheme: partition.scheme(),
        };
        let mut store = StatsStore::new(partition.scheme(), 2);
        store
            .record_sample(&partition, &[0.6], 0.8, CellId::ROOT, &root)
            .unwrap();
        assert!(close(store.get(CellId::new(2, 2)).iw_sum, 3.2, 1e-15));
        assert!(store
            .record_sample(&partition, &[0.6], 0.8, CellId::new(1, 0), &root)
            .is_err());
    }

    #[test]
    fn pull_counts_stay_tree_consistent() {
        let partition = Partition::new(Domain::unit(2).unwrap(), PartitionScheme::new(3).unwrap());
        let scheme = partition.scheme();
        let mut store = StatsStore::new(scheme, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = RootSampling { scheme };
        for _ in 0..500 {
            let (x, _) = partition.sample_descend(CellId::ROOT, 4, &mut rng);
            store
                .record_sample(&partition, &x, rng.gen(), CellId::ROOT, &model)
                .unwrap();
        }
        for h in 0..4 {
            for (i, parent) in store.layer(h).iter().enumerate() {
                let kids: u64 = scheme
                    .children(CellId::new(h, i as u64))
                    .iter()
                    .map(|c| store.get(*c).pulls)
                    .sum();
                assert_eq!(parent.pulls, kids);
            }
        }
    }
}

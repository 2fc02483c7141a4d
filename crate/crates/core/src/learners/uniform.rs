//! Uniform-allocation baselines. Each cell is evaluated at one fixed
//! representative point and the recommendation is that point.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    argmax, Algorithm, Learner, LearnerConfig, Probe, Recommendation, RecommendationLaw, Rounds,
    Selection,
};
use crate::error::{Error, Result};
use crate::estimators::{CellStats, ConfidenceParams};
use crate::partition::{floor_log, CellId, Partition};

#[derive(Debug, Clone)]
struct Core {
    partition: Partition,
    params: ConfidenceParams,
    probe: Probe,
    probes: HashMap<CellId, Vec<f64>>,
    rng: ChaCha8Rng,
    rounds: Rounds,
    pending: Option<CellId>,
}

impl Core {
    fn new(partition: Partition, config: &LearnerConfig, seed: u64) -> Self {
        Self {
            partition,
            params: config.params,
            probe: config.probe,
            probes: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            rounds: Rounds::new(config.horizon()),
            pending: None,
        }
    }

    fn probe_point(&mut self, cell: CellId) -> Vec<f64> {
        if let Some(p) = self.probes.get(&cell) {
            return p.clone();
        }
        let p = match self.probe {
            Probe::Center => self.partition.cell_center(cell),
            Probe::Sampled => self.partition.sample_in(cell, &mut self.rng),
        };
        self.probes.insert(cell, p.clone());
        p
    }

    fn pull(&mut self, t: u64, cell: CellId) -> Result<Selection> {
        self.rounds.begin(t)?;
        self.pending = Some(cell);
        Ok(Selection {
            cell,
            point: self.probe_point(cell),
        })
    }

    fn finish(&mut self, t: u64) -> Result<CellId> {
        self.rounds.finish(t)?;
        self.pending
            .take()
            .ok_or_else(|| Error::invariant("no pending cell"))
    }

    fn recommend(&mut self, best: Option<(CellId, f64)>) -> Result<Recommendation> {
        self.rounds.close()?;
        let (cell, _) = best.ok_or_else(|| Error::invariant("no evaluated cell to recommend"))?;
        Ok(Recommendation {
            cell,
            point: self.probe_point(cell),
            law: RecommendationLaw::Point,
        })
    }
}

#[derive(Debug, Clone)]
struct Tallies {
    layers: Vec<Vec<CellStats>>,
}

impl Tallies {
    fn new(partition: &Partition, max_depth: u32) -> Self {
        let scheme = partition.scheme();
        Self {
            layers: (0..=max_depth)
                .map(|h| vec![CellStats::default(); scheme.width_at(h) as usize])
                .collect(),
        }
    }

    fn add(&mut self, cell: CellId, y: f64) {
        let s = &mut self.layers[cell.depth as usize][cell.index as usize];
        s.pulls += 1;
        s.reward_sum += y;
    }

    fn get(&self, cell: CellId) -> Option<&CellStats> {
        self.layers
            .get(cell.depth as usize)?
            .get(cell.index as usize)
    }

    /// Pulled cells with their empirical means, depth by depth.
    fn means(&self, depth: u32) -> impl Iterator<Item = (CellId, f64)> + '_ {
        self.layers[depth as usize]
            .iter()
            .enumerate()
            .filter_map(move |(i, s)| Some((CellId::new(depth, i as u64), s.mean()?)))
    }
}

/// Round-robin over the lowest-index cells of one depth: `budget` pulls,
/// each of the first `min(K^h, budget)` cells getting `q` or `q + 1`.
fn depth_schedule(partition: &Partition, depth: u32, budget: u64) -> impl Iterator<Item = CellId> {
    let width = partition.scheme().width_at(depth);
    (0..budget).map(move |j| CellId::new(depth, j % width))
}

/// Evaluates every cell of a fixed depth round-robin.
#[derive(Debug, Clone)]
struct FixedDepth {
    core: Core,
    tallies: Tallies,
    depth: u32,
    width: u64,
}

impl FixedDepth {
    fn new(partition: Partition, config: &LearnerConfig, seed: u64, depth: u32) -> Self {
        let width = partition.scheme().width_at(depth);
        Self {
            tallies: Tallies::new(&partition, depth),
            core: Core::new(partition, config, seed),
            depth,
            width,
        }
    }

    fn select(&mut self, t: u64) -> Result<Selection> {
        let cell = CellId::new(self.depth, (t - 1) % self.width);
        self.core.pull(t, cell)
    }

    fn observe(&mut self, t: u64, y: f64) -> Result<()> {
        let cell = self.core.finish(t)?;
        self.tallies.add(cell, y);
        Ok(())
    }

    fn recommend(&mut self) -> Result<Recommendation> {
        let best = argmax(self.tallies.means(self.depth));
        self.core.recommend(best)
    }
}

/// Evaluates every cell of depth `floor(log_K n)` and recommends the best
/// evaluated point. Meant for deterministic feedback.
#[derive(Debug, Clone)]
pub struct UniformDet(FixedDepth);

impl UniformDet {
    pub fn new(partition: Partition, config: &LearnerConfig, seed: u64) -> Result<Self> {
        let n = config.horizon();
        if n < partition.branching() as u64 {
            return Err(Error::config("n", "uniform-det needs n >= K"));
        }
        let depth = floor_log(partition.branching(), n);
        Ok(Self(FixedDepth::new(partition, config, seed, depth)))
    }

    pub fn depth(&self) -> u32 {
        self.0.depth
    }
}

/// Largest `h` with `(K / rho^2)^h <= n`.
pub fn known_smoothness_depth(branching: u32, rho: f64, horizon: u64) -> u32 {
    let base = branching as f64 / (rho * rho);
    let limit = horizon as f64 * (1.0 + 1e-12);
    let mut depth = 0;
    let mut reach = base;
    while reach <= limit {
        depth += 1;
        reach *= base;
    }
    depth
}

/// Pulls every cell of depth `floor(log_{K/rho^2} n)` equally often and
/// recommends the best empirical mean.
#[derive(Debug, Clone)]
pub struct UniformKnown(FixedDepth);

impl UniformKnown {
    pub fn new(partition: Partition, config: &LearnerConfig, seed: u64) -> Result<Self> {
        let (nu, rho) = config.smoothness.ok_or_else(|| {
            Error::config(
                "smoothness",
                "uniform-known needs the smoothness pair (nu, rho)",
            )
        })?;
        if !(nu > 0.0 && rho > 0.0 && rho < 1.0) {
            return Err(Error::config(
                "smoothness",
                format!("need nu > 0 and 0 < rho < 1, got ({nu}, {rho})"),
            ));
        }
        let n = config.horizon();
        let depth = known_smoothness_depth(partition.branching(), rho, n);
        if n / partition.scheme().width_at(depth) == 0 {
            return Err(Error::config(
                "n",
                format!("budget {n} cannot cover depth {depth}"),
            ));
        }
        Ok(Self(FixedDepth::new(partition, config, seed, depth)))
    }

    pub fn depth(&self) -> u32 {
        self.0.depth
    }
}

macro_rules! fixed_depth_learner {
    ($ty:ty, $algo:expr) => {
        impl Learner for $ty {
            fn algorithm(&self) -> Algorithm {
                $algo
            }

            fn horizon(&self) -> u64 {
                self.0.core.params.horizon
            }

            fn select(&mut self, t: u64) -> Result<Selection> {
                self.0.select(t)
            }

            fn observe(&mut self, t: u64, y: f64) -> Result<()> {
                self.0.observe(t, y)
            }

            fn recommend(&mut self) -> Result<Recommendation> {
                self.0.recommend()
            }

            fn pulls(&self, cell: CellId) -> Option<u64> {
                self.0.tallies.get(cell).map(|s| s.pulls)
            }
        }
    };
}

fixed_depth_learner!(UniformDet, Algorithm::UniformDet);
fixed_depth_learner!(UniformKnown, Algorithm::UniformKnown);

fn check_multi_depth_budget(name: &str, branching: u32, n: u64) -> Result<u32> {
    let max_depth = floor_log(branching, n);
    if max_depth == 0 || n < 4 * max_depth as u64 {
        return Err(Error::config(
            "n",
            format!("{name} needs n >= 4 floor(log_K n) with n >= K, got n = {n}"),
        ));
    }
    Ok(max_depth)
}

/// Spends half the budget spreading pulls over every depth, keeps the best
/// cell of each depth and validates the candidates on the remaining rounds.
#[derive(Debug, Clone)]
pub struct UniformCv {
    core: Core,
    tallies: Tallies,
    max_depth: u32,
    explore: Vec<CellId>,
    candidates: Vec<CellId>,
    validation: Vec<CellStats>,
}

impl UniformCv {
    pub fn new(partition: Partition, config: &LearnerConfig, seed: u64) -> Result<Self> {
        let n = config.horizon();
        let max_depth = check_multi_depth_budget("uniform-cv", partition.branching(), n)?;
        let per_depth = n / (2 * max_depth as u64);
        let explore: Vec<CellId> = (0..=max_depth)
            .flat_map(|h| depth_schedule(&partition, h, per_depth))
            .collect();
        let left = n - explore.len() as u64;
        if left < max_depth as u64 + 1 {
            return Err(Error::config(
                "n",
                format!(
                    "uniform-cv leaves {left} rounds to validate {} candidates",
                    max_depth + 1
                ),
            ));
        }
        Ok(Self {
            tallies: Tallies::new(&partition, max_depth),
            core: Core::new(partition, config, seed),
            max_depth,
            explore,
            candidates: Vec::new(),
            validation: Vec::new(),
        })
    }

    /// Rounds spent before validation starts.
    pub fn exploration_rounds(&self) -> usize {
        self.explore.len()
    }

    pub fn candidates(&self) -> &[CellId] {
        &self.candidates
    }

    pub fn validated_means(&self) -> Vec<Option<f64>> {
        self.validation.iter().map(CellStats::mean).collect()
    }

    /// The point at which `cell` is evaluated, once it has been pulled.
    pub fn probe(&self, cell: CellId) -> Option<&[f64]> {
        self.core.probes.get(&cell).map(Vec::as_slice)
    }
}

impl Learner for UniformCv {
    fn algorithm(&self) -> Algorithm {
        Algorithm::UniformCv
    }

    fn horizon(&self) -> u64 {
        self.core.params.horizon
    }

    fn select(&mut self, t: u64) -> Result<Selection> {
        let j = (t - 1) as usize;
        let cell = if j < self.explore.len() {
            self.explore[j]
        } else {
            if self.candidates.is_empty() {
                self.candidates = (0..=self.max_depth)
                    .filter_map(|h| argmax(self.tallies.means(h)).map(|(c, _)| c))
                    .collect();
                self.validation = vec![CellStats::default(); self.candidates.len()];
            }
            self.candidates[(j - self.explore.len()) % self.candidates.len()]
        };
        self.core.pull(t, cell)
    }

    fn observe(&mut self, t: u64, y: f64) -> Result<()> {
        let cell = self.core.finish(t)?;
        let j = (t - 1) as usize;
        if j < self.explore.len() {
            self.tallies.add(cell, y);
        } else {
            let slot = (j - self.explore.len()) % self.candidates.len();
            let s = &mut self.validation[slot];
            s.pulls += 1;
            s.reward_sum += y;
        }
        Ok(())
    }

    fn recommend(&mut self) -> Result<Recommendation> {
        let best = argmax(
            self.candidates
                .iter()
                .zip(&self.validation)
                .filter_map(|(c, s)| Some((*c, s.mean()?))),
        );
        self.core.recommend(best)
    }

    fn pulls(&self, cell: CellId) -> Option<u64> {
        self.tallies.get(cell).map(|s| s.pulls)
    }
}

/// `mean - b sqrt(log(n^2/delta) / pulls)`.
pub fn uniform_lcb_score(mean: f64, pulls: u64, params: &ConfidenceParams) -> f64 {
    let n = params.horizon as f64;
    mean - params.range * ((n * n / params.delta).ln() / pulls as f64).sqrt()
}

/// Spreads the whole budget over every depth and recommends the largest
/// lower confidence bound `f_hat - b sqrt(log(n^2/delta) / T)`.
#[derive(Debug, Clone)]
pub struct UniformLcb {
    core: Core,
    tallies: Tallies,
    max_depth: u32,
    schedule: Vec<CellId>,
}

impl UniformLcb {
    pub fn new(partition: Partition, config: &LearnerConfig, seed: u64) -> Result<Self> {
        let n = config.horizon();
        let max_depth = check_multi_depth_budget("uniform-lcb", partition.branching(), n)?;
        let depths = max_depth as u64 + 1;
        let per_depth = n / depths;
        let extra = n % depths;
        let schedule: Vec<CellId> = (0..=max_depth)
            .flat_map(|h| {
                let budget = per_depth + u64::from((h as u64) < extra);
                depth_schedule(&partition, h, budget)
            })
            .collect();
        debug_assert_eq!(schedule.len() as u64, n);
        Ok(Self {
            tallies: Tallies::new(&partition, max_depth),
            core: Core::new(partition, config, seed),
            max_depth,
            schedule,
        })
    }

    /// The score of every pulled cell, depth by depth.
    pub fn scores(&self) -> Vec<(CellId, f64)> {
        (0..=self.max_depth)
            .flat_map(|h| self.layer_scores(h))
            .collect()
    }

    fn layer_scores(&self, depth: u32) -> Vec<(CellId, f64)> {
        self.tallies
            .means(depth)
            .map(|(c, mean)| {
                let pulls = self.tallies.get(c).map_or(0, |s| s.pulls);
                (c, uniform_lcb_score(mean, pulls, &self.core.params))
            })
            .collect()
    }
}

impl Learner for UniformLcb {
    fn algorithm(&self) -> Algorithm {
        Algorithm::UniformLcb
    }

    fn horizon(&self) -> u64 {
        self.core.params.horizon
    }

    fn select(&mut self, t: u64) -> Result<Selection> {
        let cell = *self
            .schedule
            .get((t - 1) as usize)
            .ok_or_else(|| Error::invariant(format!("round {t} beyond the schedule")))?;
        self.core.pull(t, cell)
    }

    fn observe(&mut self, t: u64, y: f64) -> Result<()> {
        let cell = self.core.finish(t)?;
        self.tallies.add(cell, y);
        Ok(())
    }

    fn recommend(&mut self) -> Result<Recommendation> {
        let best = argmax(self.scores());
        self.core.recommend(best)
    }

    fn pulls(&self, cell: CellId) -> Option<u64> {
        self.tallies.get(cell).map(|s| s.pulls)
    }
}

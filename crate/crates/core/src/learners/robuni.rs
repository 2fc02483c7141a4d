use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    argmax, Algorithm, Learner, LearnerConfig, Recommendation, RecommendationLaw, Rounds, Selection,
};
use crate::error::{Error, Result};
use crate::estimators::{adv_bound, ConfidenceParams, RootSampling, StatsStore};
use crate::partition::{floor_log, CellId, Partition};

/// Samples every round from the root by uniform descent and recommends the
/// cell with the largest importance-weighted sum minus its deviation bound.
#[derive(Debug, Clone)]
pub struct Robuni {
    partition: Partition,
    params: ConfidenceParams,
    max_depth: u32,
    stats: StatsStore,
    rng: ChaCha8Rng,
    rounds: Rounds,
    pending: Option<Vec<f64>>,
}

impl Robuni {
    pub fn new(partition: Partition, config: &LearnerConfig, seed: u64) -> Result<Self> {
        let n = config.horizon();
        let max_depth = floor_log(partition.branching(), n);
        Ok(Self {
            stats: StatsStore::new(partition.scheme(), max_depth),
            partition,
            params: config.params,
            max_depth,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rounds: Rounds::new(n),
            pending: None,
        })
    }

    pub fn stats(&self) -> &StatsStore {
        &self.stats
    }

    /// `F~ - B^adv_h` for every tracked cell, depth by depth.
    pub fn scores(&self) -> impl Iterator<Item = (CellId, f64)> + '_ {
        let k = self.partition.branching();
        (0..=self.max_depth).flat_map(move |h| {
            let bound = adv_bound(h, k, &self.params);
            self.stats
                .layer(h)
                .iter()
                .enumerate()
                .map(move |(i, s)| (CellId::new(h, i as u64), s.iw_sum - bound))
        })
    }
}

impl Learner for Robuni {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Robuni
    }

    fn horizon(&self) -> u64 {
        self.params.horizon
    }

    fn select(&mut self, t: u64) -> Result<Selection> {
        self.rounds.begin(t)?;
        let (point, _) = self
            .partition
            .sample_descend(CellId::ROOT, self.max_depth, &mut self.rng);
        self.pending = Some(point.clone());
        Ok(Selection {
            cell: CellId::ROOT,
            point,
        })
    }

    fn observe(&mut self, t: u64, y: f64) -> Result<()> {
        self.rounds.finish(t)?;
        let x = self
            .pending
            .take()
            .ok_or_else(|| Error::invariant("no pending point"))?;
        let model = RootSampling {
            scheme: self.partition.scheme(),
        };
        self.stats
            .record_sample(&self.partition, &x, y, CellId::ROOT, &model)?;
        Ok(())
    }

    fn recommend(&mut self) -> Result<Recommendation> {
        self.rounds.close()?;
        let (cell, _) = argmax(self.scores()).ok_or_else(|| Error::invariant("no cells"))?;
        Ok(Recommendation {
            cell,
            point: self.partition.sample_in(cell, &mut self.rng),
            law: RecommendationLaw::CellUniform,
        })
    }

    fn pulls(&self, cell: CellId) -> Option<u64> {
        (cell.depth <= self.max_depth).then(|| self.stats.get(cell).pulls)
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    argmax, Algorithm, Learner, LearnerConfig, Recommendation, RecommendationLaw, Rounds, Selection,
};
use crate::error::{Error, Result};
use crate::estimators::{
    lcb_score, vroom_bound, ConfidenceParams, SamplingDistribution, StatsStore, ZipfSampling,
};
use crate::partition::{CellId, Partition};
use crate::rank::RankTable;

/// Ranks the cells of each depth by lower confidence bound and samples the
/// rank-`j` cell of depth `h` with probability `1 / (h j logbar)`.
#[derive(Debug, Clone)]
pub struct Vroom {
    partition: Partition,
    params: ConfidenceParams,
    dist: SamplingDistribution,
    /// `tables[h - 1]` ranks depth `h`.
    tables: Vec<RankTable>,
    stats: StatsStore,
    rng: ChaCha8Rng,
    rounds: Rounds,
    pending: Option<(CellId, Vec<f64>)>,
}

impl Vroom {
    pub fn new(partition: Partition, config: &LearnerConfig, seed: u64) -> Result<Self> {
        let n = config.horizon();
        let dist = SamplingDistribution::new(partition.branching(), n)?;
        let max_depth = dist.max_depth();
        let scheme = partition.scheme();
        let tables = (1..=max_depth)
            .map(|h| RankTable::new(scheme.width_at(h) as usize))
            .collect();
        Ok(Self {
            stats: StatsStore::new(scheme, max_depth),
            partition,
            params: config.params,
            dist,
            tables,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rounds: Rounds::new(n),
            pending: None,
        })
    }

    pub fn distribution(&self) -> &SamplingDistribution {
        &self.dist
    }

    pub fn rank_tables(&self) -> &[RankTable] {
        &self.tables
    }

    pub fn stats(&self) -> &StatsStore {
        &self.stats
    }

    /// Probability that the next round selects `cell` itself.
    pub fn selection_probability(&self, cell: CellId) -> f64 {
        match self.rank(cell) {
            Some(rank) => self.dist.probability(cell.depth, rank),
            None => 0.0,
        }
    }

    /// `sum_{s<=t} rank_s(cell)` for a cell of depth `1..=H_max`.
    pub fn rank_sum(&self, cell: CellId, t: u64) -> u64 {
        self.tables[cell.depth as usize - 1].rank_sum(cell.index as usize, t)
    }

    /// `F~ - B` for every ranked cell, depth by depth.
    pub fn scores(&self) -> impl Iterator<Item = (CellId, f64)> + '_ {
        let t = self.params.horizon;
        (1..=self.dist.max_depth()).flat_map(move |h| {
            let table = &self.tables[h as usize - 1];
            self.stats.layer(h).iter().enumerate().map(move |(i, s)| {
                let bound = vroom_bound(h, table.rank_sum(i, t), &self.params, self.dist.log_bar());
                (CellId::new(h, i as u64), s.iw_sum - bound)
            })
        })
    }
}

impl Learner for Vroom {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Vroom
    }

    fn horizon(&self) -> u64 {
        self.params.horizon
    }

    fn select(&mut self, t: u64) -> Result<Selection> {
        self.rounds.begin(t)?;
        let (depth, rank) = self.dist.sample(&mut self.rng);
        let index = self.tables[depth as usize - 1].cell_at(rank);
        let cell = CellId::new(depth, index as u64);
        let (point, _) = self
            .partition
            .sample_descend(cell, self.dist.max_depth(), &mut self.rng);
        self.pending = Some((cell, point.clone()));
        Ok(Selection { cell, point })
    }

    fn observe(&mut self, t: u64, y: f64) -> Result<()> {
        self.rounds.finish(t)?;
        let (cell, x) = self
            .pending
            .take()
            .ok_or_else(|| Error::invariant("no pending point"))?;
        let model = ZipfSampling {
            dist: &self.dist,
            tables: &self.tables,
        };
        let path = self
            .stats
            .record_sample(&self.partition, &x, y, cell, &model)?;
        // The new scores shape the ranks used from round t + 1 on.
        for c in path.into_iter().skip(1) {
            let score = lcb_score(self.stats.get(c), &self.params);
            self.tables[c.depth as usize - 1].set_score(c.index as usize, score, t + 1);
        }
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
        (cell.depth <= self.dist.max_depth()).then(|| self.stats.get(cell).pulls)
    }

    fn rank(&self, cell: CellId) -> Option<usize> {
        (cell.depth >= 1 && cell.depth <= self.dist.max_depth())
            .then(|| self.tables[cell.depth as usize - 1].rank_of(cell.index as usize))
    }
}

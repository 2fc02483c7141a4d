use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    Algorithm, Learner, LearnerConfig, Recommendation, RecommendationLaw, Rounds, Selection,
};
use crate::error::{Error, Result};
use crate::estimators::CellStats;
use crate::partition::{floor_log, CellId, Partition};

/// Greedy follow-the-leader over the deepest cells: visits every cell once
/// in index order, then always samples the cell with the best empirical mean.
#[derive(Debug, Clone)]
pub struct Ftl {
    partition: Partition,
    horizon: u64,
    depth: u32,
    cells: Vec<CellStats>,
    leader: Option<usize>,
    rng: ChaCha8Rng,
    rounds: Rounds,
    pending: Option<usize>,
}

impl Ftl {
    pub fn new(partition: Partition, config: &LearnerConfig, seed: u64) -> Result<Self> {
        let horizon = config.horizon();
        let depth = floor_log(partition.branching(), horizon);
        let width = partition.scheme().width_at(depth) as usize;
        Ok(Self {
            partition,
            horizon,
            depth,
            cells: vec![CellStats::default(); width],
            leader: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rounds: Rounds::new(horizon),
            pending: None,
        })
    }

    fn find_leader(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.cells.iter().enumerate() {
            if let Some(m) = s.mean() {
                if best.is_none_or(|(_, b)| m > b) {
                    best = Some((i, m));
                }
            }
        }
        best.map(|(i, _)| i)
    }
}

impl Learner for Ftl {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Ftl
    }

    fn horizon(&self) -> u64 {
        self.horizon
    }

    fn select(&mut self, t: u64) -> Result<Selection> {
        self.rounds.begin(t)?;
        let unvisited = (t - 1) as usize;
        let index = if unvisited < self.cells.len() {
            unvisited
        } else {
            self.leader
                .ok_or_else(|| Error::invariant("no leader after visiting all cells"))?
        };
        self.pending = Some(index);
        let cell = CellId::new(self.depth, index as u64);
        Ok(Selection {
            cell,
            point: self.partition.sample_in(cell, &mut self.rng),
        })
    }

    fn observe(&mut self, t: u64, y: f64) -> Result<()> {
        self.rounds.finish(t)?;
        let i = self
            .pending
            .take()
            .ok_or_else(|| Error::invariant("no pending cell"))?;
        let s = &mut self.cells[i];
        s.pulls += 1;
        s.reward_sum += y;
        let m = s.reward_sum / s.pulls as f64;
        self.leader = match self.leader {
            Some(l) if l == i => self.find_leader(),
            Some(l) => {
                let lm = self.cells[l].mean().unwrap_or(f64::NEG_INFINITY);
                if m > lm || (m == lm && i < l) {
                    Some(i)
                } else {
                    Some(l)
                }
            }
            None => Some(i),
        };
        Ok(())
    }

    fn recommend(&mut self) -> Result<Recommendation> {
        self.rounds.close()?;
        let i = self
            .leader
            .ok_or_else(|| Error::invariant("nothing observed"))?;
        let cell = CellId::new(self.depth, i as u64);
        Ok(Recommendation {
            cell,
            point: self.partition.sample_in(cell, &mut self.rng),
            law: RecommendationLaw::CellUniform,
        })
    }

    fn pulls(&self, cell: CellId) -> Option<u64> {
        (cell.depth == self.depth).then(|| self.cells.get(cell.index as usize).map(|s| s.pulls))?
    }
}

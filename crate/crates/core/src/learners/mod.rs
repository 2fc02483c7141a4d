//! Round-based learners: Robuni, VROOM, the uniform baselines and a
//! follow-the-leader strawman.

mod ftl;
mod robuni;
mod uniform;
mod vroom;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environments::MeteredProcess;
use crate::error::{Error, Result};
use crate::estimators::ConfidenceParams;
use crate::partition::{CellId, Partition};

pub use ftl::Ftl;
pub use robuni::Robuni;
pub use uniform::{
    known_smoothness_depth, uniform_lcb_score, UniformCv, UniformDet, UniformKnown, UniformLcb,
};
pub use vroom::Vroom;

/// The cell chosen in a round and the point to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub cell: CellId,
    pub point: Vec<f64>,
}

/// How the final point `x(n)` is distributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecommendationLaw {
    /// Uniform over the recommended cell.
    CellUniform,
    /// A point mass at `point`.
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub cell: CellId,
    /// One draw of `x(n)`.
    pub point: Vec<f64>,
    pub law: RecommendationLaw,
}

/// A learner interacting for exactly `n` rounds, `select` then `observe`,
/// before a single `recommend`.
pub trait Learner: Send {
    fn algorithm(&self) -> Algorithm;

    fn horizon(&self) -> u64;

    fn select(&mut self, t: u64) -> Result<Selection>;

    fn observe(&mut self, t: u64, y: f64) -> Result<()>;

    fn recommend(&mut self) -> Result<Recommendation>;

    /// Number of rounds whose point landed in `cell`, if tracked.
    fn pulls(&self, _cell: CellId) -> Option<u64> {
        None
    }

    /// Current rank of `cell` within its depth, if the learner ranks cells.
    fn rank(&self, _cell: CellId) -> Option<usize> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Robuni,
    Vroom,
    UniformDet,
    UniformKnown,
    UniformCv,
    UniformLcb,
    Ftl,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Robuni,
        Algorithm::Vroom,
        Algorithm::UniformDet,
        Algorithm::UniformKnown,
        Algorithm::UniformCv,
        Algorithm::UniformLcb,
        Algorithm::Ftl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Robuni => "robuni",
            Algorithm::Vroom => "vroom",
            Algorithm::UniformDet => "uniform-det",
            Algorithm::UniformKnown => "uniform-known",
            Algorithm::UniformCv => "uniform-cv",
            Algorithm::UniformLcb => "uniform-lcb",
            Algorithm::Ftl => "ftl",
        }
    }

    pub fn build(
        self,
        partition: &Partition,
        config: &LearnerConfig,
        seed: u64,
    ) -> Result<Box<dyn Learner>> {
        Ok(match self {
            Algorithm::Robuni => Box::new(Robuni::new(partition.clone(), config, seed)?),
            Algorithm::Vroom => Box::new(Vroom::new(partition.clone(), config, seed)?),
            Algorithm::UniformDet => Box::new(UniformDet::new(partition.clone(), config, seed)?),
            Algorithm::UniformKnown => {
                Box::new(UniformKnown::new(partition.clone(), config, seed)?)
            }
            Algorithm::UniformCv => Box::new(UniformCv::new(partition.clone(), config, seed)?),
            Algorithm::UniformLcb => Box::new(UniformLcb::new(partition.clone(), config, seed)?),
            Algorithm::Ftl => Box::new(Ftl::new(partition.clone(), config, seed)?),
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| {
                Error::config(
                    "algo",
                    format!(
                        "unknown algorithm `{s}`, expected one of {}",
                        Algorithm::ALL.map(Algorithm::name).join(", ")
                    ),
                )
            })
    }
}

/// Where the uniform baselines evaluate a cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Probe {
    Center,
    /// A point drawn uniformly in the cell on its first pull, then reused.
    #[default]
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub params: ConfidenceParams,
    /// `(nu, rho)`, needed by `uniform-known` only.
    pub smoothness: Option<(f64, f64)>,
    pub probe: Probe,
}

impl LearnerConfig {
    pub fn new(params: ConfidenceParams) -> Self {
        Self {
            params,
            smoothness: None,
            probe: Probe::Sampled,
        }
    }

    pub fn horizon(&self) -> u64 {
        self.params.horizon
    }
}

/// Enforces the strict select/observe alternation over rounds `1..=n`.
#[derive(Debug, Clone)]
pub(crate) struct Rounds {
    horizon: u64,
    completed: u64,
    pending: bool,
    recommended: bool,
}

impl Rounds {
    pub(crate) fn new(horizon: u64) -> Self {
        Self {
            horizon,
            completed: 0,
            pending: false,
            recommended: false,
        }
    }

    pub(crate) fn begin(&mut self, t: u64) -> Result<()> {
        if self.pending || t != self.completed + 1 || t > self.horizon {
            return Err(Error::invariant(format!(
                "select({t}) out of order after {} completed rounds of {}",
                self.completed, self.horizon
            )));
        }
        self.pending = true;
        Ok(())
    }

    pub(crate) fn finish(&mut self, t: u64) -> Result<()> {
        if !self.pending || t != self.completed + 1 {
            return Err(Error::invariant(format!(
                "observe({t}) without a matching select"
            )));
        }
        self.pending = false;
        self.completed = t;
        Ok(())
    }

    pub(crate) fn close(&mut self) -> Result<()> {
        if self.completed != self.horizon || self.pending || self.recommended {
            return Err(Error::invariant(format!(
                "recommend after {} of {} rounds",
                self.completed, self.horizon
            )));
        }
        self.recommended = true;
        Ok(())
    }
}

/// Per-round callback of [`run_learner`].
pub type RoundHook<'a> = dyn FnMut(u64, &Selection, &dyn Learner) + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub recommendation: Recommendation,
    /// Number of evaluations the environment served.
    pub evaluations: u64,
    /// Selections per depth.
    pub depth_histogram: Vec<u64>,
}

/// Runs `learner` against `process` for exactly its horizon, calling `hook`
/// after every observation.
pub fn run_learner(
    learner: &mut dyn Learner,
    process: &mut MeteredProcess<'_>,
    mut hook: Option<&mut RoundHook<'_>>,
) -> Result<Episode> {
    let n = learner.horizon();
    if process.process().horizon() != n {
        return Err(Error::invalid(format!(
            "learner horizon {n} differs from the environment's {}",
            process.process().horizon()
        )));
    }
    let mut depth_histogram = Vec::new();
    for t in 1..=n {
        let selection = learner.select(t)?;
        let y = process.evaluate(t, &selection.point)?;
        learner.observe(t, y)?;
        let depth = selection.cell.depth as usize;
        if depth_histogram.len() <= depth {
            depth_histogram.resize(depth + 1, 0);
        }
        depth_histogram[depth] += 1;
        if let Some(hook) = hook.as_deref_mut() {
            hook(t, &selection, &*learner);
        }
    }
    let recommendation = learner.recommend()?;
    if process.calls() != n {
        return Err(Error::invariant(format!(
            "{} evaluations consumed for a budget of {n}",
            process.calls()
        )));
    }
    Ok(Episode {
        recommendation,
        evaluations: process.calls(),
        depth_histogram,
    })
}

/// Strictly better score wins; earlier candidates win ties.
pub(crate) fn argmax<I: IntoIterator<Item = (CellId, f64)>>(
    candidates: I,
) -> Option<(CellId, f64)> {
    let mut best: Option<(CellId, f64)> = None;
    for (cell, score) in candidates {
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((cell, score));
        }
    }
    best
}

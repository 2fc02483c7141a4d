//! Seeded experiment runner: repetitions, simple-regret estimation, sweeps
//! over the budget and diagnostic traces.

mod env;
mod output;
pub mod stats;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use env::{parse_function, EnvSpec, LURE_CENTER, LURE_HEIGHT, LURE_SLOPE};
pub use output::{
    emit_diagnostics, write_json, write_run_csv, write_sweep_csv, RUN_CSV_HEADER, SWEEP_CSV_HEADER,
};

use crate::environments::{sup_oracle, AverageOracle, MeteredProcess, NoiseLaw, SupEstimate};
use crate::error::{Error, Result};
use crate::estimators::{default_delta, ConfidenceParams};
use crate::learners::{
    run_learner, Algorithm, Learner, LearnerConfig, Probe, RecommendationLaw, Selection,
};
use crate::partition::{floor_log, CellId, Domain, Partition, PartitionScheme};

/// Independent random streams of one repetition.
const LEARNER_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const EVALUATION_STREAM: u64 = 3;

/// Draws the seed of one named stream from a repetition seed.
pub fn derive_seed(rep_seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub algo: Algorithm,
    pub env: String,
    pub n: u64,
    /// Branching factor `K`.
    pub k: u32,
    /// Dimension of the unit cube domain.
    pub dim: usize,
    /// Noise range or adversarial variation budget.
    pub b: f64,
    /// Bound on `|f_t|`; defaults to the environment's declared bound.
    pub fmax: Option<f64>,
    /// Confidence level; defaults to `4b / (f_max sqrt(n))`, clamped.
    pub delta: Option<f64>,
    pub reps: usize,
    pub seed: u64,
    /// Grid points per dimension for the supremum oracle.
    pub grid: usize,
    /// Monte Carlo draws of `x(n)` per repetition.
    pub mc_samples: usize,
    pub noise: NoiseLaw,
    pub probe: Probe,
    /// Smoothness overrides for `uniform-known`.
    pub nu: Option<f64>,
    pub rho: Option<f64>,
    /// Record rank and pull traces of the optimal cells.
    pub trace: bool,
    /// Trace every this many rounds (the last round is always kept).
    pub trace_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algo: Algorithm::Vroom,
            env: "sto:wedge".into(),
            n: 1024,
            k: 2,
            dim: 1,
            b: 0.5,
            fmax: None,
            delta: None,
            reps: 20,
            seed: 0,
            grid: 2001,
            mc_samples: 256,
            noise: NoiseLaw::Uniform,
            probe: Probe::Sampled,
            nu: None,
            rho: None,
            trace: false,
            trace_every: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<EnvSpec> {
        if self.k < 2 {
            return Err(Error::config("k", format!("need K >= 2, got {}", self.k)));
        }
        if self.n < self.k as u64 {
            return Err(Error::config(
                "n",
                format!("need n >= K, got n = {}, K = {}", self.n, self.k),
            ));
        }
        if self.dim == 0 {
            return Err(Error::config("dim", "dimension must be at least 1"));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::config("b", format!("need b >= 0, got {}", self.b)));
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "need at least one repetition"));
        }
        if self.mc_samples == 0 {
            return Err(Error::config("mc-samples", "need at least one draw"));
        }
        if self.grid < 2 {
            return Err(Error::config("grid", "need at least two grid points"));
        }
        if self.trace_every == 0 {
            return Err(Error::config("trace-every", "must be at least 1"));
        }
        if let Some(f) = self.fmax {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::config("fmax", format!("need f_max > 0, got {f}")));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::config(
                    "delta",
                    format!("need 0 < delta < 1, got {d}"),
                ));
            }
        }
        self.env.parse()
    }
}

/// Outcome of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    /// Depth of the recommended cell.
    pub depth: u32,
    /// 1-based index of the recommended cell within its depth.
    pub index: u64,
    /// One draw of `x(n)`.
    pub point: Vec<f64>,
    pub law: RecommendationLaw,
    /// `sup f - E[f(x(n))]` for the average function.
    pub regret: f64,
    /// Monte Carlo standard error of `regret`.
    pub regret_se: f64,
    pub evaluations: u64,
    /// Selections per depth.
    pub depth_histogram: Vec<u64>,
}

/// Rank and pull history of the cells containing `x*`, one column per depth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    /// `i*_h` for `h = 0..=H_max`.
    pub optimal_cells: Vec<CellId>,
    pub rounds: Vec<u64>,
    /// `ranks[k][h]`: rank of `i*_h` at `rounds[k]`, if ranked.
    pub ranks: Vec<Vec<Option<usize>>>,
    pub pulls: Vec<Vec<Option<u64>>>,
}

impl Trace {
    fn snapshot(&mut self, t: u64, learner: &dyn Learner) {
        self.rounds.push(t);
        self.ranks.push(
            self.optimal_cells
                .iter()
                .map(|&c| learner.rank(c))
                .collect(),
        );
        self.pulls.push(
            self.optimal_cells
                .iter()
                .map(|&c| learner.pulls(c))
                .collect(),
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub env: String,
    pub n: u64,
    pub k: u32,
    pub dim: usize,
    pub b: f64,
    pub f_max: f64,
    pub delta: f64,
    pub seed: u64,
    pub mc_samples: usize,
    pub sup_value: f64,
    pub sup_argmax: Vec<f64>,
    pub mean_regret: f64,
    pub std_regret: f64,
    /// 95% Student-t interval for the mean regret; absent for one repetition.
    pub ci95: Option<[f64; 2]>,
    pub repetitions: Vec<RepRecord>,
    #[serde(skip)]
    pub traces: Vec<Trace>,
}

impl RunRecord {
    pub fn regrets(&self) -> Vec<f64> {
        self.repetitions.iter().map(|r| r.regret).collect()
    }
}

/// Everything shared by the repetitions of one configuration.
struct Setup {
    spec: EnvSpec,
    partition: Partition,
    learner_config: LearnerConfig,
    sup: SupEstimate,
    optimum: Option<Vec<f64>>,
}

fn prepare(config: &RunConfig) -> Result<Setup> {
    let spec = config.validate()?;
    let domain = Domain::unit(config.dim)?;
    let partition = Partition::new(domain.clone(), PartitionScheme::new(config.k)?);
    let reference = spec.build(&domain, config.n, config.b, config.noise, 0)?;
    let f_max = config.fmax.unwrap_or_else(|| reference.f_max());
    let range = reference.range();
    let delta = config
        .delta
        .unwrap_or_else(|| default_delta(range, f_max, config.n));
    let params = ConfidenceParams::new(delta, range, f_max, config.n)?;
    let smoothness = match (config.nu, config.rho) {
        (Some(nu), Some(rho)) => Some((nu, rho)),
        (None, None) => spec.smoothness(&domain, config.k),
        _ => return Err(Error::config("rho", "give both nu and rho or neither")),
    };
    let learner_config = LearnerConfig {
        params,
        smoothness,
        probe: config.probe,
    };
    let max_depth = floor_log(config.k, config.n);
    let sup = sup_oracle(
        &AverageOracle::new(&reference),
        &partition,
        config.grid,
        max_depth,
    )?;
    Ok(Setup {
        optimum: reference.average_argmax(),
        spec,
        partition,
        learner_config,
        sup,
    })
}

fn run_rep(config: &RunConfig, setup: &Setup, rep: usize) -> Result<(RepRecord, Option<Trace>)> {
    let rep_seed = config.seed ^ rep as u64;
    let process = setup.spec.build(
        setup.partition.domain(),
        config.n,
        config.b,
        config.noise,
        derive_seed(rep_seed, NOISE_STREAM),
    )?;
    let mut learner = config.algo.build(
        &setup.partition,
        &setup.learner_config,
        derive_seed(rep_seed, LEARNER_STREAM),
    )?;
    let mut metered = MeteredProcess::new(&process);

    let mut trace = match (&setup.optimum, config.trace) {
        (Some(x), true) => {
            let leaf = setup.partition.locate(x, floor_log(config.k, config.n))?;
            let scheme = setup.partition.scheme();
            let optimal_cells = (0..=leaf.depth)
                .map(|h| scheme.ancestor(leaf, h))
                .collect::<Result<Vec<_>>>()?;
            let mut t = Trace {
                optimal_cells,
                ..Trace::default()
            };
            t.snapshot(0, learner.as_ref());
            Some(t)
        }
        _ => None,
    };
    let episode = match trace.as_mut() {
        Some(tr) => {
            let every = config.trace_every;
            let n = config.n;
            let mut hook = |t: u64, _: &Selection, l: &dyn Learner| {
                if t.is_multiple_of(every) || t == n {
                    tr.snapshot(t, l);
                }
            };
            run_learner(learner.as_mut(), &mut metered, Some(&mut hook))?
        }
        None => run_learner(learner.as_mut(), &mut metered, None)?,
    };

    let rec = episode.recommendation;
    let avg = AverageOracle::new(&process);
    let (value, se) = match rec.law {
        RecommendationLaw::Point => (avg.value(&rec.point), 0.0),
        RecommendationLaw::CellUniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rep_seed, EVALUATION_STREAM));
            let m = config.mc_samples;
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for i in 0..m {
                let x = setup.partition.sample_in(rec.cell, &mut rng);
                let v = avg.value(&x);
                let d = v - mean;
                mean += d / (i + 1) as f64;
                m2 += d * (v - mean);
            }
            let se = if m > 1 {
                (m2 / (m - 1) as f64 / m as f64).sqrt()
            } else {
                0.0
            };
            (mean, se)
        }
    };
    let record = RepRecord {
        rep,
        seed: rep_seed,
        depth: rec.cell.depth,
        index: rec.cell.report_index(),
        point: rec.point,
        law: rec.law,
        regret: setup.sup.value - value,
        regret_se: se,
        evaluations: episode.evaluations,
        depth_histogram: episode.depth_histogram,
    };
    Ok((record, trace))
}

/// Runs `config.reps` independent repetitions in parallel. The output does
/// not depend on scheduling.
pub fn run_experiment(config: &RunConfig) -> Result<RunRecord> {
    let setup = prepare(config)?;
    if config.trace && setup.optimum.is_none() {
        tracing::warn!(env = %config.env, "optimum unknown; skipping diagnostic traces");
    }
    let results = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_rep(config, &setup, rep))
        .collect::<Result<Vec<_>>>()?;
    let (repetitions, traces): (Vec<RepRecord>, Vec<Option<Trace>>) = results.into_iter().unzip();
    let regrets: Vec<f64> = repetitions.iter().map(|r| r.regret).collect();
    tracing::debug!(algo = %config.algo, n = config.n, "finished {} repetitions", config.reps);
    Ok(RunRecord {
        algorithm: config.algo,
        env: setup.spec.to_string(),
        n: config.n,
        k: config.k,
        dim: config.dim,
        b: config.b,
        f_max: setup.learner_config.params.f_max,
        delta: setup.learner_config.params.delta,
        seed: config.seed,
        mc_samples: config.mc_samples,
        sup_value: setup.sup.value,
        sup_argmax: setup.sup.argmax.clone(),
        mean_regret: stats::mean(&regrets),
        std_regret: stats::std_dev(&regrets),
        ci95: stats::t_interval(&regrets, 0.95).map(|(lo, hi)| [lo, hi]),
        repetitions,
        traces: traces.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub env: String,
    pub n: u64,
    pub rep: usize,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub records: Vec<RunRecord>,
    /// Least-squares slope of log mean regret against log n.
    pub slope: Option<f64>,
}

impl SweepRecord {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.records
            .iter()
            .flat_map(|r| {
                r.repetitions.iter().map(move |rep| SweepRow {
                    algorithm: r.algorithm,
                    env: r.env.clone(),
                    n: r.n,
                    rep: rep.rep,
                    regret: rep.regret,
                })
            })
            .collect()
    }

    pub fn mean_regrets(&self) -> Vec<(u64, f64)> {
        self.records.iter().map(|r| (r.n, r.mean_regret)).collect()
    }
}

/// One run per budget in `n_values`, which must be strictly increasing.
pub fn sweep(config: &RunConfig, n_values: &[u64]) -> Result<SweepRecord> {
    if n_values.is_empty() {
        return Err(Error::config("n-list", "no budgets given"));
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(
            "n-list",
            "budgets must be strictly increasing",
        ));
    }
    let records = n_values
        .iter()
        .map(|&n| {
            run_experiment(&RunConfig {
                n,
                ..config.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.n as f64, r.mean_regret))
        .collect();
    Ok(SweepRecord {
        slope: stats::log_log_slope(&points),
        records,
    })
}

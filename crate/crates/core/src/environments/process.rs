//! Reward processes `f_1, ..., f_n` under the three feedback laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::functions::TestFunction;
use crate::error::{Error, Result};
use crate::partition::Domain;

/// Slack allowed when auditing `|f_t' - f_t| <= b` on a grid.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackKind {
    Deterministic,
    StochasticIid,
    Adversarial,
}

/// Law of the additive noise in the stochastic setting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseLaw {
    /// Uniform on `[-b, b]`.
    #[default]
    Uniform,
    /// `+b` or `-b` with equal probability.
    Rademacher,
}

/// Recipe for a non-stochastic sequence of functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversarySpec {
    /// `first` for rounds `1..=ceil(n/2)`, `second` afterwards.
    Switch {
        first: TestFunction,
        second: TestFunction,
    },
    /// `f_t = mean + (b/2) sin(2 pi t / n) modulation`, with `|modulation| <= 1`.
    Drift {
        mean: TestFunction,
        modulation: TestFunction,
    },
    /// The horizon is cut into `pool.len()` contiguous blocks; block `k`
    /// streams `pool[permutation[k]]`.
    TaskPermutation {
        pool: Vec<TestFunction>,
        permutation: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
struct Segment {
    /// Last round (inclusive) served by `f`.
    last: u64,
    f: TestFunction,
}

#[derive(Debug, Clone)]
enum Law {
    Fixed(TestFunction),
    Noisy {
        mean: TestFunction,
        noise: NoiseLaw,
    },
    Segments(Vec<Segment>),
    Drift {
        mean: TestFunction,
        modulation: TestFunction,
        amplitude: f64,
        /// `(1/n) sum_t sin(2 pi t / n)`, zero up to rounding.
        phase_mean: f64,
    },
}

/// An immutable reward environment. Evaluation is a pure function of
/// `(t, x, seed)`.
#[derive(Debug, Clone)]
pub struct RewardProcess {
    kind: FeedbackKind,
    domain: Domain,
    horizon: u64,
    range: f64,
    seed: u64,
    law: Law,
}

impl RewardProcess {
    pub fn deterministic(f: TestFunction, domain: Domain, horizon: u64) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(Self {
            kind: FeedbackKind::Deterministic,
            domain,
            horizon,
            range: 0.0,
            seed: 0,
            law: Law::Fixed(f),
        })
    }

    pub fn stochastic(
        mean: TestFunction,
        domain: Domain,
        horizon: u64,
        range: f64,
        noise: NoiseLaw,
        seed: u64,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        check_range(range)?;
        Ok(Self {
            kind: FeedbackKind::StochasticIid,
            domain,
            horizon,
            range,
            seed,
            law: Law::Noisy { mean, noise },
        })
    }

    /// Builds an adversarial process and certifies `|f_t'(x) - f_t(x)| <= b`
    /// with a grid audit.
    pub fn adversary(
        spec: AdversarySpec,
        domain: Domain,
        horizon: u64,
        range: f64,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        check_range(range)?;
        let law = match spec {
            AdversarySpec::Switch { first, second } => {
                let split = horizon.div_ceil(2);
                Law::Segments(vec![
                    Segment {
                        last: split,
                        f: first,
                    },
                    Segment {
                        last: horizon,
                        f: second,
                    },
                ])
            }
            AdversarySpec::Drift { mean, modulation } => {
                let peak = audit_points(&domain)
                    .iter()
                    .map(|x| modulation.eval(x).abs())
                    .fold(modulation.abs_bound(&domain), f64::max);
                if peak > 1.0 + AUDIT_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "drift modulation must satisfy |m| <= 1, found {peak:.6}"
                    )));
                }
                let n = horizon as f64;
                let phase_mean = (1..=horizon)
                    .map(|t| (std::f64::consts::TAU * t as f64 / n).sin())
                    .sum::<f64>()
                    / n;
                Law::Drift {
                    mean,
                    modulation,
                    amplitude: 0.5 * range,
                    phase_mean,
                }
            }
            AdversarySpec::TaskPermutation { pool, permutation } => {
                let m = pool.len();
                if m == 0 {
                    return Err(Error::invalid("task pool is empty"));
                }
                let mut seen = vec![false; m];
                if permutation.len() != m
                    || !permutation
                        .iter()
                        .all(|&p| p < m && !std::mem::replace(&mut seen[p], true))
                {
                    return Err(Error::invalid(format!(
                        "{permutation:?} is not a permutation of 0..{m}"
                    )));
                }
                if (m as u64) > horizon {
                    return Err(Error::invalid(format!(
                        "{m} tasks do not fit in a horizon of {horizon}"
                    )));
                }
                let (base, extra) = (horizon / m as u64, horizon % m as u64);
                let mut last = 0;
                let segments = permutation
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| {
                        last += base + u64::from((k as u64) < extra);
                        Segment {
                            last,
                            f: pool[p].clone(),
                        }
                    })
                    .collect();
                Law::Segments(segments)
            }
        };
        let process = Self {
            kind: FeedbackKind::Adversarial,
            domain,
            horizon,
            range,
            seed: 0,
            law,
        };
        let gap = process.audit_gap();
        if gap > range + AUDIT_TOLERANCE {
            return Err(Error::invalid(format!(
                "adversary varies by {gap:.6} across rounds, more than b = {range}"
            )));
        }
        Ok(process)
    }

    pub fn kind(&self) -> FeedbackKind {
        self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// The range `b`.
    pub fn range(&self) -> f64 {
        self.range
    }

    /// `f_t(x)`; rejects rounds outside `1..=n` and points outside the domain.
    pub fn evaluate(&self, t: u64, x: &[f64]) -> Result<f64> {
        if t == 0 || t > self.horizon {
            return Err(Error::invalid(format!(
                "round {t} outside 1..={}",
                self.horizon
            )));
        }
        if !self.domain.contains(x) {
            return Err(Error::invalid(format!("point {x:?} outside the domain")));
        }
        Ok(self.value_at(t, x))
    }

    fn value_at(&self, t: u64, x: &[f64]) -> f64 {
        match &self.law {
            Law::Fixed(f) => f.eval(x),
            Law::Noisy { mean, .. } => mean.eval(x) + self.noise(t),
            Law::Segments(segments) => segments
                .iter()
                .find(|s| t <= s.last)
                .expect("segments cover the horizon")
                .f
                .eval(x),
            Law::Drift {
                mean,
                modulation,
                amplitude,
                ..
            } => {
                let phase = (std::f64::consts::TAU * t as f64 / self.horizon as f64).sin();
                mean.eval(x) + amplitude * phase * modulation.eval(x)
            }
        }
    }

    /// The noise `epsilon_t`, reproducible for a given `(seed, t)`; zero for
    /// non-stochastic processes.
    pub fn noise(&self, t: u64) -> f64 {
        let Law::Noisy { noise, .. } = &self.law else {
            return 0.0;
        };
        if self.range == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);
        match noise {
            NoiseLaw::Uniform => self.range * (2.0 * rng.gen::<f64>() - 1.0),
            NoiseLaw::Rademacher => {
                if rng.gen::<bool>() {
                    self.range
                } else {
                    -self.range
                }
            }
        }
    }

    /// Declared bound on `|f_t(x)|` over all rounds and points.
    pub fn f_max(&self) -> f64 {
        match &self.law {
            Law::Fixed(f) => f.abs_bound(&self.domain),
            Law::Noisy { mean, .. } => mean.abs_bound(&self.domain) + self.range,
            Law::Segments(segments) => segments
                .iter()
                .map(|s| s.f.abs_bound(&self.domain))
                .fold(0.0, f64::max),
            Law::Drift {
                mean,
                modulation,
                amplitude,
                ..
            } => mean.abs_bound(&self.domain) + amplitude * modulation.abs_bound(&self.domain),
        }
    }

    /// The average function `f = (1/n) sum_t f_t` (or `f_bar` under
    /// stochastic feedback).
    pub fn average(&self, x: &[f64]) -> f64 {
        match &self.law {
            Law::Fixed(f) => f.eval(x),
            Law::Noisy { mean, .. } => mean.eval(x),
            Law::Segments(segments) => {
                let mut start = 0;
                let total: f64 = segments
                    .iter()
                    .map(|s| {
                        let len = s.last - start;
                        start = s.last;
                        len as f64 * s.f.eval(x)
                    })
                    .sum();
                total / self.horizon as f64
            }
            Law::Drift {
                mean,
                modulation,
                amplitude,
                phase_mean,
            } => mean.eval(x) + amplitude * phase_mean * modulation.eval(x),
        }
    }

    /// A known maximizer of the average function, when every component
    /// declares the same one.
    pub fn average_argmax(&self) -> Option<Vec<f64>> {
        let components: Vec<&TestFunction> = match &self.law {
            Law::Fixed(f) => vec![f],
            Law::Noisy { mean, .. } => vec![mean],
            Law::Segments(segments) => segments.iter().map(|s| &s.f).collect(),
            Law::Drift {
                mean, phase_mean, ..
            } => {
                if phase_mean.abs() > 1e-12 {
                    return None;
                }
                vec![mean]
            }
        };
        let mut optima = components.iter().map(|f| f.optimum(&self.domain));
        let (first, _) = optima.next()??;
        optima
            .all(|o| o.is_some_and(|(x, _)| x == first))
            .then_some(first)
    }

    /// Largest `|f_t'(x) - f_t(x)|` over the audit grid and all round pairs.
    pub fn audit_gap(&self) -> f64 {
        let points = audit_points(&self.domain);
        match &self.law {
            Law::Fixed(_) => 0.0,
            Law::Noisy { .. } => 2.0 * self.range,
            Law::Segments(segments) => {
                let mut gap = 0.0f64;
                for (i, a) in segments.iter().enumerate() {
                    for b in &segments[i + 1..] {
                        for x in &points {
                            gap = gap.max((a.f.eval(x) - b.f.eval(x)).abs());
                        }
                    }
                }
                gap
            }
            Law::Drift {
                modulation,
                amplitude,
                ..
            } => {
                let n = self.horizon as f64;
                let (lo, hi) = (1..=self.horizon)
                    .map(|t| (std::f64::consts::TAU * t as f64 / n).sin())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                        (lo.min(s), hi.max(s))
                    });
                points
                    .iter()
                    .map(|x| amplitude * (hi - lo) * modulation.eval(x).abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// A per-run view of a process that counts evaluations.
#[derive(Debug)]
pub struct MeteredProcess<'a> {
    process: &'a RewardProcess,
    calls: u64,
}

impl<'a> MeteredProcess<'a> {
    pub fn new(process: &'a RewardProcess) -> Self {
        Self { process, calls: 0 }
    }

    pub fn evaluate(&mut self, t: u64, x: &[f64]) -> Result<f64> {
        let y = self.process.evaluate(t, x)?;
        self.calls += 1;
        Ok(y)
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn process(&self) -> &'a RewardProcess {
        self.process
    }
}

fn check_horizon(horizon: u64) -> Result<()> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    Ok(())
}

fn check_range(range: f64) -> Result<()> {
    if !(range.is_finite() && range >= 0.0) {
        return Err(Error::invalid(format!(
            "range b must be finite and >= 0, got {range}"
        )));
    }
    Ok(())
}

/// Grid used to audit adversaries: a 10001-point line along every
/// coordinate through the domain center, plus a coarse product grid.
pub fn audit_points(domain: &Domain) -> Vec<Vec<f64>> {
    const LINE: usize = 10_001;
    let d = domain.dim();
    let center = domain.center();
    let mut points = Vec::new();
    for j in 0..d {
        for i in 0..LINE {
            let mut x = center.clone();
            x[j] = domain.lows()[j] + domain.width(j) * i as f64 / (LINE - 1) as f64;
            points.push(x);
        }
    }
    if d > 1 {
        let per_dim = if d == 2 { 101 } else { 11 };
        points.extend(product_grid(domain, per_dim));
    }
    points
}

/// Regular grid with `per_dim` points (endpoints included) along each axis.
pub fn product_grid(domain: &Domain, per_dim: usize) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let total = per_dim.pow(d as u32);
    (0..total)
        .map(|mut flat| {
            (0..d)
                .map(|j| {
                    let i = flat % per_dim;
                    flat /= per_dim;
                    domain.lows()[j] + domain.width(j) * i as f64 / (per_dim - 1) as f64
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn unit() -> Domain {
        Domain::unit(1).unwrap()
    }

    #[test]
    fn deterministic_wedge_value() {
        let p = RewardProcess::deterministic(TestFunction::wedge(), unit(), 10).unwrap();
        assert_eq!(p.evaluate(3, &[0.25]).unwrap(), 0.25);
        assert!(matches!(
            p.evaluate(0, &[0.25]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            p.evaluate(11, &[0.25]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            p.evaluate(1, &[1.25]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn zero_noise_is_exact() {
        let p =
            RewardProcess::stochastic(TestFunction::wedge(), unit(), 50, 0.0, NoiseLaw::Uniform, 9)
                .unwrap();
        for t in 1..=50 {
            assert_eq!(
                p.evaluate(t, &[0.3]).unwrap(),
                TestFunction::wedge().eval(&[0.3])
            );
        }
    }

    #[test]
    fn noise_is_keyed_by_round() {
        let p =
            RewardProcess::stochastic(TestFunction::wedge(), unit(), 50, 0.5, NoiseLaw::Uniform, 9)
                .unwrap();
        assert_eq!(
            p.evaluate(7, &[0.1]).unwrap(),
            p.evaluate(7, &[0.1]).unwrap()
        );
        assert_ne!(p.noise(7), p.noise(8));
    }

    #[test]
    fn noise_is_centered_and_bounded() {
        for law in [NoiseLaw::Uniform, NoiseLaw::Rademacher] {
            let b = 0.5;
            let n = 100_000u64;
            let p = RewardProcess::stochastic(TestFunction::constant(0.0), unit(), n, b, law, 42)
                .unwrap();
            let draws: Vec<f64> = (1..=n).map(|t| p.noise(t)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let sd = match law {
                NoiseLaw::Uniform => b / 3f64.sqrt(),
                NoiseLaw::Rademacher => b,
            };
            assert!(
                mean.abs() <= 3.0 * sd / (n as f64).sqrt(),
                "{law:?} mean {mean}"
            );
            assert!(draws.iter().all(|e| e.abs() <= b));
        }
    }

    #[test]
    fn switch_serves_halves() {
        let a = TestFunction::constant(0.1);
        let b = TestFunction::constant(0.3);
        let p = RewardProcess::adversary(
            AdversarySpec::Switch {
                first: a,
                second: b,
            },
            unit(),
            10,
            0.2,
        )
        .unwrap();
        assert_eq!(p.evaluate(5, &[0.4]).unwrap(), 0.1);
        assert_eq!(p.evaluate(7, &[0.4]).unwrap(), 0.3);
        assert!((p.average(&[0.4]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn switch_average_weights_ceil_and_floor() {
        let p = RewardProcess::adversary(
            AdversarySpec::Switch {
                first: TestFunction::constant(1.0),
                second: TestFunction::constant(0.0),
            },
            unit(),
            7,
            1.0,
        )
        .unwrap();
        assert_eq!(p.average(&[0.0]), 4.0 / 7.0);
    }

    #[test]
    fn switch_of_identical_functions_is_deterministic() {
        let f = TestFunction::wedge();
        let adv = RewardProcess::adversary(
            AdversarySpec::Switch {
                first: f.clone(),
                second: f.clone(),
            },
            unit(),
            20,
            0.0,
        )
        .unwrap();
        let det = RewardProcess::deterministic(f, unit(), 20).unwrap();
        for t in 1..=20 {
            let x = [t as f64 / 20.0];
            assert_eq!(adv.evaluate(t, &x).unwrap(), det.evaluate(t, &x).unwrap());
        }
    }

    #[test]
    fn zero_drift_is_deterministic() {
        let p = RewardProcess::adversary(
            AdversarySpec::Drift {
                mean: TestFunction::wedge(),
                modulation: TestFunction::constant(0.0),
            },
            unit(),
            32,
            0.4,
        )
        .unwrap();
        for t in 1..=32 {
            assert_eq!(
                p.evaluate(t, &[0.7]).unwrap(),
                TestFunction::wedge().eval(&[0.7])
            );
        }
    }

    #[test]
    fn switch_rejects_excess_variation() {
        let err = RewardProcess::adversary(
            AdversarySpec::Switch {
                first: TestFunction::constant(0.0),
                second: TestFunction::constant(0.5),
            },
            unit(),
            10,
            0.4,
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn drift_rejects_large_modulation() {
        let err = RewardProcess::adversary(
            AdversarySpec::Drift {
                mean: TestFunction::wedge(),
                modulation: TestFunction::constant(1.5),
            },
            unit(),
            10,
            0.4,
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn permutation_validation() {
        let pool = vec![TestFunction::constant(0.0), TestFunction::constant(0.1)];
        for bad in [vec![0, 0], vec![1], vec![0, 2]] {
            let err = RewardProcess::adversary(
                AdversarySpec::TaskPermutation {
                    pool: pool.clone(),
                    permutation: bad,
                },
                unit(),
                10,
                0.2,
            );
            assert!(matches!(err, Err(Error::InvalidArgument(_))));
        }
    }

    fn generated_adversaries() -> Vec<RewardProcess> {
        let shifted = |h: f64| TestFunction::Wedge {
            center: 0.625,
            height: h,
            slope: 2.0,
        };
        vec![
            RewardProcess::adversary(
                AdversarySpec::Switch {
                    first: shifted(0.25),
                    second: shifted(-0.25),
                },
                unit(),
                101,
                0.5,
            )
            .unwrap(),
            RewardProcess::adversary(
                AdversarySpec::Drift {
                    mean: TestFunction::DoubleSine,
                    modulation: TestFunction::linear(-1.0, 2.0),
                },
                unit(),
                64,
                0.3,
            )
            .unwrap(),
            RewardProcess::adversary(
                AdversarySpec::TaskPermutation {
                    pool: vec![
                        TestFunction::wedge(),
                        TestFunction::linear(0.0, 0.2),
                        TestFunction::constant(0.2),
                    ],
                    permutation: vec![2, 0, 1],
                },
                unit(),
                50,
                0.5,
            )
            .unwrap(),
        ]
    }

    #[test]
    fn adversaries_pass_grid_audit_over_all_round_pairs() {
        let xs: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
        for p in generated_adversaries() {
            let n = p.horizon();
            for &x in &xs {
                let values: Vec<f64> = (1..=n).map(|t| p.evaluate(t, &[x]).unwrap()).collect();
                let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    hi - lo <= p.range() + AUDIT_TOLERANCE,
                    "x={x} spread {}",
                    hi - lo
                );
                for v in &values {
                    assert!(v.abs() <= p.f_max() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn average_oracle_matches_round_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut processes = generated_adversaries();
        processes.push(RewardProcess::deterministic(TestFunction::DoubleSine, unit(), 33).unwrap());
        for p in processes {
            let n = p.horizon();
            for _ in 0..100 {
                let x = [rng.gen::<f64>()];
                let mean = (1..=n).map(|t| p.evaluate(t, &x).unwrap()).sum::<f64>() / n as f64;
                assert!((mean - p.average(&x)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn average_argmax_requires_agreement() {
        let ps = generated_adversaries();
        assert_eq!(ps[0].average_argmax(), Some(vec![0.625]));
        assert_eq!(ps[2].average_argmax(), None);
    }

    #[test]
    fn metered_process_counts_calls() {
        let p = RewardProcess::deterministic(TestFunction::wedge(), unit(), 5).unwrap();
        let mut m = MeteredProcess::new(&p);
        for t in 1..=5 {
            m.evaluate(t, &[0.5]).unwrap();
        }
        assert!(m.evaluate(6, &[0.5]).is_err());
        assert_eq!(m.calls(), 5);
    }
}

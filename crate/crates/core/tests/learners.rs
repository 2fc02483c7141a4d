use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use vroom_core::environments::{
    AverageOracle, MeteredProcess, NoiseLaw, RewardProcess, TestFunction,
};
use vroom_core::estimators::{ConfidenceParams, SamplingDistribution};
use vroom_core::harness::EnvSpec;
use vroom_core::learners::{
    known_smoothness_depth, run_learner, uniform_lcb_score, Algorithm, Episode, Ftl, Learner,
    LearnerConfig, Probe, Robuni, UniformCv, UniformKnown, UniformLcb, Vroom,
};
use vroom_core::partition::{CellId, Domain, Partition, PartitionScheme};
use vroom_core::Error;

fn partition(k: u32) -> Partition {
    Partition::new(Domain::unit(1).unwrap(), PartitionScheme::new(k).unwrap())
}

fn process(env: &str, n: u64, b: f64, seed: u64) -> RewardProcess {
    env.parse::<EnvSpec>()
        .unwrap()
        .build(&Domain::unit(1).unwrap(), n, b, NoiseLaw::Uniform, seed)
        .unwrap()
}

fn config_for(env: &str, process: &RewardProcess, probe: Probe) -> LearnerConfig {
    let n = process.horizon();
    let params = ConfidenceParams::with_default_delta(process.range(), process.f_max(), n).unwrap();
    let spec: EnvSpec = env.parse().unwrap();
    LearnerConfig {
        params,
        smoothness: spec.smoothness(&Domain::unit(1).unwrap(), 2),
        probe,
    }
}

fn episode(algo: Algorithm, env: &str, n: u64, b: f64, seed: u64) -> (Episode, RewardProcess) {
    let p = process(env, n, b, seed ^ 0xabc);
    let config = config_for(env, &p, Probe::Sampled);
    let mut learner = algo.build(&partition(2), &config, seed).unwrap();
    let ep = run_learner(learner.as_mut(), &mut MeteredProcess::new(&p), None).unwrap();
    (ep, p)
}

fn contains_half(cell: CellId) -> bool {
    let bounds = partition(2).cell_bounds(cell);
    bounds.lows()[0] <= 0.5 && 0.5 <= bounds.highs()[0]
}

#[test]
fn every_learner_spends_exactly_the_budget() {
    for algo in Algorithm::ALL {
        for n in [16, 100, 1000] {
            let (ep, _) = episode(algo, "sto:wedge", n, 0.5, 1);
            assert_eq!(ep.evaluations, n, "{algo} at n = {n}");
            assert_eq!(ep.depth_histogram.iter().sum::<u64>(), n);
        }
    }
}

#[test]
fn learners_replay_under_a_fixed_seed() {
    for algo in Algorithm::ALL {
        let trace = |seed| {
            let p = process("sto:double-sine", 300, 0.3, 5);
            let config = config_for("sto:double-sine", &p, Probe::Sampled);
            let mut learner = algo.build(&partition(2), &config, seed).unwrap();
            let mut points = Vec::new();
            for t in 1..=300 {
                let s = learner.select(t).unwrap();
                let y = p.evaluate(t, &s.point).unwrap();
                learner.observe(t, y).unwrap();
                points.push((s.cell, s.point));
            }
            (points, learner.recommend().unwrap())
        };
        assert_eq!(trace(3), trace(3), "{algo}");
    }
}

#[test]
fn protocol_violations_are_invariant_errors() {
    let p = process("det:wedge", 16, 0.0, 0);
    let config = config_for("det:wedge", &p, Probe::Center);
    for algo in Algorithm::ALL {
        let mut learner = algo.build(&partition(2), &config, 0).unwrap();
        assert!(matches!(learner.observe(1, 0.0), Err(Error::Invariant(_))));
        assert!(matches!(learner.select(2), Err(Error::Invariant(_))));
        assert!(matches!(learner.recommend(), Err(Error::Invariant(_))));
        learner.select(1).unwrap();
        assert!(matches!(learner.select(1), Err(Error::Invariant(_))));
    }
}

#[test]
fn robuni_samples_uniformly_from_the_root() {
    let rounds = 100_000u64;
    let p = process("det:wedge", rounds, 0.0, 0);
    let mut robuni = Robuni::new(
        partition(2),
        &config_for("det:wedge", &p, Probe::Sampled),
        7,
    )
    .unwrap();
    let part = partition(2);
    let mut counts = [0u64; 8];
    for t in 1..=rounds {
        let s = robuni.select(t).unwrap();
        assert_eq!(s.cell, CellId::ROOT);
        counts[part.locate(&s.point, 3).unwrap().index as usize] += 1;
        robuni.observe(t, 0.0).unwrap();
    }
    let sigma = (rounds as f64 * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
    for c in counts {
        assert!(
            (c as f64 - rounds as f64 / 8.0).abs() <= 3.0 * sigma,
            "{counts:?}"
        );
    }
}

#[test]
fn robuni_recommends_the_root_for_a_constant() {
    let (ep, _) = episode(Algorithm::Robuni, "det:const(0.7)", 1024, 0.0, 0);
    assert_eq!(ep.recommendation.cell, CellId::ROOT);
}

#[test]
fn robuni_finds_the_wedge_peak_without_noise() {
    let hits = (0..20)
        .filter(|&seed| {
            let (ep, _) = episode(Algorithm::Robuni, "det:wedge", 1 << 14, 0.0, seed);
            contains_half(ep.recommendation.cell)
        })
        .count();
    assert!(hits >= 18, "{hits} of 20");
}

#[test]
fn robuni_scores_use_the_adversarial_bound() {
    let p = process("sto:wedge", 256, 0.5, 1);
    let config = config_for("sto:wedge", &p, Probe::Sampled);
    let mut robuni = Robuni::new(partition(2), &config, 1).unwrap();
    run_learner(&mut robuni, &mut MeteredProcess::new(&p), None).unwrap();
    let root_f = robuni.stats().get(CellId::ROOT).iw_sum;
    let (first, score) = robuni.scores().next().unwrap();
    assert_eq!(first, CellId::ROOT);
    let bound = vroom_core::estimators::adv_bound(0, 2, &config.params);
    assert!((score - (root_f - bound)).abs() < 1e-9);
}

#[test]
fn zipf_probability_example() {
    let dist = SamplingDistribution::new(2, 4).unwrap();
    assert!((dist.probability(1, 1) - 0.393_443).abs() < 1e-6);
    assert!((dist.probability(2, 2) - 0.098_361).abs() < 1e-6);
}

#[test]
fn zipf_draws_fit_the_exact_law() {
    let dist = SamplingDistribution::new(2, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut slots = Vec::new();
    for h in 1..=4u32 {
        for j in 1..=1usize << h {
            slots.push((h, j));
        }
    }
    let mut counts = vec![0u64; slots.len()];
    let draws = 1_000_000;
    for _ in 0..draws {
        let (h, j) = dist.sample(&mut rng);
        counts[(1usize << h) - 2 + j - 1] += 1;
    }
    let chi2: f64 = slots
        .iter()
        .zip(&counts)
        .map(|(&(h, j), &c)| {
            let e = draws as f64 * dist.probability(h, j);
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let p = 1.0 - ChiSquared::new((slots.len() - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
}

#[test]
fn vroom_never_selects_the_root_and_ranks_every_depth() {
    let p = process("sto:wedge", 512, 0.5, 2);
    let mut vroom = Vroom::new(
        partition(2),
        &config_for("sto:wedge", &p, Probe::Sampled),
        2,
    )
    .unwrap();
    for t in 1..=512 {
        let s = vroom.select(t).unwrap();
        assert!(s.cell.depth >= 1 && s.cell.depth <= 9);
        vroom.observe(t, p.evaluate(t, &s.point).unwrap()).unwrap();
    }
    assert_eq!(vroom.rank_tables().len(), 9);
    assert_eq!(vroom.rank(CellId::ROOT), None);
    let rec = vroom.recommend().unwrap();
    assert!(rec.cell.depth >= 1);
}

#[test]
fn vroom_vanishes_on_the_lure() {
    let mean = |n| {
        (0..20)
            .map(|seed| {
                let (ep, p) = episode(Algorithm::Vroom, "lure", n, 0.25, seed);
                regret(&ep, &p, seed)
            })
            .sum::<f64>()
            / 20.0
    };
    let (small, large) = (mean(1 << 10), mean(1 << 14));
    assert!(large < small, "{small} -> {large}");
}

/// Regret of a recommendation by Monte Carlo over the cell when needed.
fn regret(ep: &Episode, p: &RewardProcess, seed: u64) -> f64 {
    let avg = AverageOracle::new(p);
    let sup = avg.value(&p.average_argmax().unwrap());
    let part = partition(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let value = match ep.recommendation.law {
        vroom_core::learners::RecommendationLaw::Point => avg.value(&ep.recommendation.point),
        vroom_core::learners::RecommendationLaw::CellUniform => {
            (0..256)
                .map(|_| avg.value(&part.sample_in(ep.recommendation.cell, &mut rng)))
                .sum::<f64>()
                / 256.0
        }
    };
    sup - value
}

#[test]
fn uniform_det_regret_examples() {
    for probe in [Probe::Center, Probe::Sampled] {
        let p = process("det:wedge", 8, 0.0, 0);
        let config = config_for("det:wedge", &p, probe);
        let mut learner = Algorithm::UniformDet
            .build(&partition(2), &config, 4)
            .unwrap();
        let ep = run_learner(learner.as_mut(), &mut MeteredProcess::new(&p), None).unwrap();
        let r = regret(&ep, &p, 0);
        assert!(r <= 0.125, "{probe:?}: {r}");
        if probe == Probe::Center {
            assert!(r <= 0.0625);
        }
        assert_eq!(ep.recommendation.cell.depth, 3);
    }
}

#[test]
fn uniform_known_depth_and_allocation() {
    assert_eq!(known_smoothness_depth(2, 0.5, 64), 2);
    assert_eq!(known_smoothness_depth(2, 0.5, 63), 1);
    let p = process("sto:wedge", 64, 0.5, 0);
    let mut config = config_for("sto:wedge", &p, Probe::Sampled);
    config.smoothness = Some((1.0, 0.5));
    let mut learner = UniformKnown::new(partition(2), &config, 0).unwrap();
    assert_eq!(learner.depth(), 2);
    run_learner(&mut learner, &mut MeteredProcess::new(&p), None).unwrap();
    for i in 0..4 {
        assert_eq!(learner.pulls(CellId::new(2, i)), Some(16));
    }
    config.smoothness = None;
    assert!(matches!(
        UniformKnown::new(partition(2), &config, 0),
        Err(Error::Config { ref key, .. }) if key == "smoothness"
    ));
}

#[test]
fn uniform_known_meets_its_guarantee() {
    let n = 1 << 12;
    let mut failures = 0;
    for seed in 0..20 {
        let (ep, p) = episode(Algorithm::UniformKnown, "sto:wedge", n, 0.5, seed);
        let config = config_for("sto:wedge", &p, Probe::Sampled);
        let depth = known_smoothness_depth(2, 0.5, n);
        let per_cell = (n >> depth) as f64;
        let delta = config.params.delta;
        let bound = 0.5f64.powi(depth as i32)
            + 2.0 * 0.5 * ((2.0 * n as f64 / delta).ln() / per_cell).sqrt();
        if regret(&ep, &p, seed) > bound {
            failures += 1;
        }
    }
    let delta = config_for(
        "sto:wedge",
        &process("sto:wedge", n, 0.5, 0),
        Probe::Sampled,
    )
    .params
    .delta;
    assert!(
        failures as f64 / 20.0 <= delta + 0.05,
        "{failures} failures"
    );
}

#[test]
fn uniform_cv_allocation_example() {
    let p = process("det:wedge", 64, 0.0, 0);
    let config = config_for("det:wedge", &p, Probe::Sampled);
    let mut cv = UniformCv::new(partition(2), &config, 3).unwrap();
    assert_eq!(cv.exploration_rounds(), 7 * 5);
    run_learner(&mut cv, &mut MeteredProcess::new(&p), None).unwrap();
    assert_eq!(cv.pulls(CellId::ROOT), Some(5));
    assert_eq!(cv.pulls(CellId::new(1, 0)), Some(3));
    assert_eq!(cv.pulls(CellId::new(1, 1)), Some(2));
    for h in 3..=6u32 {
        for i in 0..5 {
            assert_eq!(cv.pulls(CellId::new(h, i)), Some(1), "depth {h}");
        }
        assert_eq!(cv.pulls(CellId::new(h, 5)), Some(0));
    }
    assert_eq!(cv.candidates().len(), 7);
    // Without noise the validated mean is the value at the probe point.
    for (cell, mean) in cv.candidates().iter().zip(cv.validated_means()) {
        let x = cv.probe(*cell).unwrap();
        assert_eq!(mean.unwrap(), TestFunction::wedge().eval(x));
    }
}

#[test]
fn uniform_cv_validation_is_unbiased() {
    // Pooled z-score of validated mean minus the noiseless probe value.
    let (mut sum, mut var) = (0.0, 0.0);
    for seed in 0..200 {
        let p = process("sto:wedge", 256, 0.5, seed + 1000);
        let config = config_for("sto:wedge", &p, Probe::Sampled);
        let mut cv = UniformCv::new(partition(2), &config, seed).unwrap();
        run_learner(&mut cv, &mut MeteredProcess::new(&p), None).unwrap();
        let validation_rounds = 256 - cv.exploration_rounds();
        let candidates = cv.candidates().to_vec();
        for (k, (cell, mean)) in candidates.iter().zip(cv.validated_means()).enumerate() {
            let pulls = validation_rounds / candidates.len()
                + usize::from(k < validation_rounds % candidates.len());
            sum += mean.unwrap() - TestFunction::wedge().eval(cv.probe(*cell).unwrap());
            // Uniform noise on [-b, b] has variance b^2 / 3.
            var += 0.25 / 3.0 / pulls as f64;
        }
    }
    let z = sum / var.sqrt();
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn uniform_lcb_score_example() {
    let params = ConfidenceParams::new(0.04, 0.3, 1.0, 64).unwrap();
    let log_term = (4096.0f64 / 0.04).ln();
    let steady = uniform_lcb_score(0.5, 4, &params);
    let lucky = uniform_lcb_score(0.6, 1, &params);
    assert!((steady - (0.5 - 0.3 * (log_term / 4.0).sqrt())).abs() < 1e-12);
    assert!((lucky - (0.6 - 0.3 * log_term.sqrt())).abs() < 1e-12);
    assert!(steady > lucky);
}

#[test]
fn uniform_lcb_without_noise_picks_the_best_value() {
    let p = process("det:wedge", 256, 0.0, 0);
    let config = config_for("det:wedge", &p, Probe::Sampled);
    let mut lcb = UniformLcb::new(partition(2), &config, 5).unwrap();
    let ep = run_learner(&mut lcb, &mut MeteredProcess::new(&p), None).unwrap();
    let scores = lcb.scores();
    let best = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let chosen = scores
        .iter()
        .find(|s| s.0 == ep.recommendation.cell)
        .unwrap();
    assert_eq!(chosen.1, best);
    assert_eq!(best, TestFunction::wedge().eval(&ep.recommendation.point));
}

#[test]
fn ftl_single_round() {
    let p =
        RewardProcess::deterministic(TestFunction::wedge(), Domain::unit(1).unwrap(), 1).unwrap();
    let params = ConfidenceParams::new(0.5, 0.0, 0.5, 1).unwrap();
    let mut ftl = Ftl::new(partition(2), &LearnerConfig::new(params), 0).unwrap();
    let ep = run_learner(&mut ftl, &mut MeteredProcess::new(&p), None).unwrap();
    assert_eq!(ep.recommendation.cell, CellId::ROOT);
}

#[test]
fn ftl_converges_without_noise() {
    for seed in 0..5 {
        let (ep, _) = episode(Algorithm::Ftl, "det:wedge", 1 << 12, 0.0, seed);
        assert_eq!(ep.recommendation.cell.depth, 12);
        assert!(
            contains_half(ep.recommendation.cell) || {
                let b = partition(2).cell_bounds(ep.recommendation.cell);
                (b.lows()[0] - 0.5).abs() <= 1.0 / 4096.0
                    || (b.highs()[0] - 0.5).abs() <= 1.0 / 4096.0
            }
        );
    }
}

#[test]
fn ftl_is_lured() {
    for n in [1 << 10, 1 << 12, 1 << 14] {
        let mean = (0..10)
            .map(|seed| {
                let (ep, p) = episode(Algorithm::Ftl, "lure", n, 0.25, seed);
                regret(&ep, &p, seed)
            })
            .sum::<f64>()
            / 10.0;
        assert!(mean >= 0.1, "n = {n}: {mean}");
    }
}

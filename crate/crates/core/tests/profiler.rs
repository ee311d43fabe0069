use proptest::prelude::*;
use rand::Rng as _;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use pipeplan::catalog::builtin_pipeline;
use pipeplan::landscape::{generate_landscape, Difficulty};
use pipeplan::model::{PlanSpace, TierTopology, Verdict};
use pipeplan::profiler::{
    fixed_n_baseline, profile_plan, stratify, t_test_p_value, variance_random, variance_stratified, PrefixCache,
    RunningStats, SessionLimits, Stratification,
};
use pipeplan::rng::{derive, seeded};
use pipeplan::workload::Workload;

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 1..8).prop_map(|raw| {
        let s: f64 = raw.iter().sum();
        let mut p: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let rest: f64 = p[1..].iter().sum();
        p[0] = 1.0 - rest;
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn stratified_variance_never_exceeds_random(
        p in weights(),
        mu in prop::collection::vec(0.0f64..1.0, 8),
        s2 in prop::collection::vec(0.0f64..0.25, 8),
        n in 1usize..2000,
    ) {
        let k = p.len();
        let r = variance_random(&p, &mu[..k], &s2[..k], n).unwrap();
        let s = variance_stratified(&p, &s2[..k], n).unwrap();
        prop_assert!(s <= r);
    }
}

fn equal_strata(k: usize, per: usize) -> Stratification {
    let assignment: Vec<usize> = (0..k * per).map(|i| i / per).collect();
    Stratification {
        k,
        members: (0..k).map(|s| (s * per..(s + 1) * per).collect()).collect(),
        weights: vec![1.0 / k as f64; k],
        assignment,
        cursor: 0,
    }
}

#[test]
fn round_robin_estimator_is_unbiased() {
    let (k, per, n, trials) = (4, 250, 100, 4000);
    let s = equal_strata(k, per);
    let value = |case: usize| 0.2 * (case / per) as f64 + 0.1 * ((case * 7919) % 13) as f64 / 13.0;
    let population: f64 = (0..k * per).map(value).sum::<f64>() / (k * per) as f64;
    let mut rng = seeded(4);
    let means: Vec<f64> = (0..trials)
        .map(|_| {
            let mut st = s.restarted();
            (0..n).map(|_| value(st.next_case(&mut rng).unwrap())).sum::<f64>() / n as f64
        })
        .collect();
    let m = means.iter().sum::<f64>() / trials as f64;
    let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    assert!((m - population).abs() <= 4.0 * sd / (trials as f64).sqrt(), "{m} vs {population}");
}

#[test]
fn uniform_features_split_evenly() {
    for seed in 0..20u64 {
        let mut rng = seeded(seed);
        let pts: Vec<[f64; 2]> = (0..2000).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let s = stratify(&pts, 4, seed).unwrap();
        for w in &s.weights {
            assert!((w - 0.25).abs() <= 0.1, "seed {seed}: {:?}", s.weights);
        }
    }
}

#[test]
fn three_strata_share_draws_exactly() {
    let mut rng = seeded(2);
    let pts: Vec<[f64; 2]> = (0..300).map(|i| [(i % 3) as f64 * 10.0 + rng.random_range(0.0..1.0), 0.0]).collect();
    let mut s = stratify(&pts, 3, 1).unwrap();
    let mut counts = [0usize; 3];
    for _ in 0..300 {
        counts[s.next_draw(&mut rng).unwrap().0] += 1;
    }
    assert_eq!(counts, [100, 100, 100]);
}

#[test]
fn draws_within_a_stratum_are_uniform() {
    let mut s = equal_strata(2, 20);
    let mut rng = seeded(9);
    let mut counts = [0f64; 20];
    for _ in 0..10_000 {
        let (stratum, case) = s.next_draw(&mut rng).unwrap();
        if stratum == 0 {
            counts[case] += 1.0;
        }
    }
    let expected = counts.iter().sum::<f64>() / 20.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    let p = ChiSquared::new(19.0).unwrap().sf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

#[test]
fn threshold_mean_is_rarely_decided() {
    // Normal cases at exactly the threshold: every verdict is a false one.
    let limits = SessionLimits::default();
    let looks = limits.looks();
    let alpha = limits.per_look_alpha();
    let normal = rand_distr::Normal::new(0.7, 0.15).unwrap();
    let mut rng = seeded(12);
    let trials = 2000;
    let mut undecided = 0;
    for _ in 0..trials {
        let mut s = RunningStats::default();
        let mut decided = false;
        for n in 1..=limits.n_max {
            s.push(rand_distr::Distribution::sample(&normal, &mut rng));
            if looks.contains(&n) && t_test_p_value(&s, 0.7) < alpha {
                decided = true;
                break;
            }
        }
        undecided += !decided as usize;
    }
    assert!(undecided as f64 / trials as f64 >= 0.98, "{undecided}/{trials}");
}

#[test]
fn landscape_plan_at_its_own_mean_runs_to_the_cap() {
    let pipeline = builtin_pipeline("SR").unwrap();
    let landscape = generate_landscape(3, &pipeline, &Difficulty::default());
    let w = Workload::new(pipeline, TierTopology::three_tier_default(), landscape);
    let space = PlanSpace::search(&w.pipeline, &w.topology);
    let strat = stratify(&w.landscape.cases().features, 4, 0).unwrap();
    let mut rng = seeded(5);
    let mut capped = 0;
    let trials = 100;
    for _ in 0..trials {
        let plan = space.plan(rng.random_range(0..space.len()));
        let n = w.landscape.cases().len();
        let mean = (0..n).map(|c| w.landscape.case_accuracy(&plan.configuration, c)).sum::<f64>() / n as f64;
        let out = profile_plan(&plan, &w, &strat, None, mean, &SessionLimits::default(), &mut rng).unwrap();
        if out.verdict == Verdict::Inconclusive {
            assert_eq!(out.samples_used, 1000);
            capped += 1;
        }
    }
    assert!(capped as f64 / trials as f64 >= 0.95, "{capped}/{trials}");
}

#[test]
fn clear_margin_stops_at_the_first_look() {
    let pipeline = builtin_pipeline("VT").unwrap();
    let d = Difficulty {
        case_noise: 0.02,
        ..Difficulty::default()
    };
    let landscape = generate_landscape(8, &pipeline, &d);
    let w = Workload::new(pipeline, TierTopology::three_tier_default(), landscape);
    let space = PlanSpace::search(&w.pipeline, &w.topology);
    let strat = stratify(&w.landscape.cases().features, 4, 0).unwrap();
    let mut rng = seeded(6);
    let mut seen = 0;
    while seen < 20 {
        let plan = space.plan(rng.random_range(0..space.len()));
        let truth = w.landscape.true_accuracy(&plan.configuration);
        if truth < 0.5 {
            continue;
        }
        let out = profile_plan(&plan, &w, &strat, None, truth - 0.25, &SessionLimits::default(), &mut rng).unwrap();
        assert_eq!((out.verdict, out.samples_used), (Verdict::PassAccuracy, 50));
        seen += 1;
    }
}

#[test]
fn early_stop_beats_fixed_n_on_clear_plans() {
    let pipeline = builtin_pipeline("SR").unwrap();
    let fixed = fixed_n_baseline("SR").unwrap();
    let landscape = generate_landscape(21, &pipeline, &Difficulty::default());
    let w = Workload::new(pipeline, TierTopology::three_tier_default(), landscape);
    let space = PlanSpace::search(&w.pipeline, &w.topology);
    let strat = stratify(&w.landscape.cases().features, 4, 0).unwrap();
    let fixed_limits = SessionLimits {
        fixed_n: Some(fixed),
        ..SessionLimits::default()
    };
    let mut rng = seeded(8);
    let (mut fewer, mut total, mut agree) = (0, 0, 0);
    while total < 200 {
        let plan = space.plan(rng.random_range(0..space.len()));
        let truth = w.landscape.true_accuracy(&plan.configuration);
        let margin = rng.random_range(0.05..0.2) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let a = truth - margin;
        if !(0.0..1.0).contains(&a) {
            continue;
        }
        let seed = derive(1, &[total as u64]);
        let early = profile_plan(&plan, &w, &strat, None, a, &SessionLimits::default(), &mut seeded(seed)).unwrap();
        let full = profile_plan(&plan, &w, &strat, None, a, &fixed_limits, &mut seeded(seed)).unwrap();
        assert_eq!(full.samples_used, fixed);
        fewer += (early.samples_used < fixed) as usize;
        agree += (early.verdict == full.verdict) as usize;
        total += 1;
    }
    assert!(fewer as f64 / total as f64 >= 0.9, "fewer on {fewer}/{total}");
    assert!(agree as f64 / total as f64 >= 0.99, "agree on {agree}/{total}");
}

#[test]
fn cache_changes_cost_only() {
    let pipeline = builtin_pipeline("DVC").unwrap();
    let landscape = generate_landscape(4, &pipeline, &Difficulty::default());
    let w = Workload::new(pipeline, TierTopology::three_tier_default(), landscape);
    let space = PlanSpace::search(&w.pipeline, &w.topology);
    let strat = stratify(&w.landscape.cases().features, 4, 0).unwrap();
    let mut cache = PrefixCache::new();
    let mut rng = seeded(10);
    for i in 0..40u64 {
        let plan = space.plan(rng.random_range(0..space.len()));
        let a = rng.random_range(0.3..0.9);
        let plain = profile_plan(&plan, &w, &strat, None, a, &SessionLimits::default(), &mut seeded(i)).unwrap();
        let cached = profile_plan(&plan, &w, &strat, Some(&mut cache), a, &SessionLimits::default(), &mut seeded(i)).unwrap();
        assert_eq!(plain.accuracy_estimate.to_bits(), cached.accuracy_estimate.to_bits());
        assert_eq!((plain.verdict, plain.samples_used), (cached.verdict, cached.samples_used));
        assert!(cached.profiling_cost <= plain.profiling_cost);
    }
    // Profiling the same plan twice: the second session is served entirely from cache.
    let plan = space.plan(0);
    profile_plan(&plan, &w, &strat, Some(&mut cache), 0.5, &SessionLimits::default(), &mut seeded(99)).unwrap();
    let again = profile_plan(&plan, &w, &strat, Some(&mut cache), 0.5, &SessionLimits::default(), &mut seeded(99)).unwrap();
    assert_eq!(again.profiling_cost, 0.0);
}

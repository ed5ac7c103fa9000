use pareto_nas::arch::{validate, Backbone, SearchSpace};
use pareto_nas::cost::AnalyticCost;
use pareto_nas::evolution::{
    crossover, mutate, run_search, src_by_bins, BinRecord, SearchSettings,
};
use pareto_nas::metrics::spearman;
use pareto_nas::pareto::FrontierMode;
use pareto_nas::proxy::DecoderParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_settings(seed: u64) -> SearchSettings {
    SearchSettings {
        n_iter: 8,
        population: 40,
        parents: 8,
        mutated_per_iter: 16,
        crossover_per_iter: 16,
        rng_seed: seed,
        ..SearchSettings::default()
    }
}

#[test]
fn same_seed_same_frontier() {
    let space = SearchSpace::standard(Backbone::gpt2());
    let run = || {
        run_search(
            &space,
            &small_settings(11),
            &DecoderParams,
            &AnalyticCost::default(),
        )
        .unwrap()
    };
    let (a, sa) = run();
    let (b, sb) = run();
    assert_eq!(a, b);
    assert_eq!(sa.log, sb.log);
}

#[test]
fn archive_keys_unique_and_frontier_in_archive() {
    let space = SearchSpace::standard(Backbone::transformer_xl());
    let (_, state) = run_search(
        &space,
        &small_settings(5),
        &DecoderParams,
        &AnalyticCost::default(),
    )
    .unwrap();
    let mut keys: Vec<&str> = state
        .archive
        .points()
        .iter()
        .map(|p| p.config_key.as_str())
        .collect();
    let n = keys.len();
    keys.sort_unstable();
    keys.dedup();
    assert_eq!(keys.len(), n);
    assert_eq!(state.frontier_points().len(), state.frontier.len());
}

#[test]
fn hypervolume_never_drops_in_either_mode() {
    let space = SearchSpace::standard(Backbone::gpt2());
    for mode in [FrontierMode::NonDominated, FrontierMode::LowerConvexHull] {
        let settings = SearchSettings {
            frontier_mode: mode,
            ..small_settings(3)
        };
        let (_, state) =
            run_search(&space, &settings, &DecoderParams, &AnalyticCost::default()).unwrap();
        let hv: Vec<f64> = state.log.iter().map(|r| r.hypervolume).collect();
        assert!(hv.windows(2).all(|w| w[0] <= w[1]), "{mode:?}: {hv:?}");
    }
}

#[test]
fn caps_hold_on_frontier() {
    let space = SearchSpace::standard(Backbone::gpt2());
    let settings = SearchSettings {
        latency_cap_ms: Some(2.0),
        memory_cap_bytes: Some(200_000_000),
        ..small_settings(9)
    };
    let (frontier, state) =
        run_search(&space, &settings, &DecoderParams, &AnalyticCost::default()).unwrap();
    assert!(!frontier.is_empty());
    assert!(state.discarded_total > 0);
    for p in &frontier.points {
        assert!(p.latency_ms <= 2.0 && p.peak_memory_bytes <= 2e8);
    }
}

#[test]
fn homogeneous_space_stays_homogeneous() {
    let space = SearchSpace::standard(Backbone::gpt2()).homogeneous();
    let (_, state) = run_search(
        &space,
        &small_settings(1),
        &DecoderParams,
        &AnalyticCost::default(),
    )
    .unwrap();
    assert!(state
        .archive
        .points()
        .iter()
        .all(|p| p.config.is_homogeneous()));
}

#[test]
fn mutation_rate_is_near_nominal() {
    // d_model changes when resampled to a different value: p * (1 - 1/15).
    let space = SearchSpace::standard(Backbone::gpt2());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let trials = 10_000;
    let mut changed = 0;
    for _ in 0..trials {
        let c = space.sample_with(&mut rng).unwrap();
        if mutate(&c, &space, 0.3, &mut rng).d_model != c.d_model {
            changed += 1;
        }
    }
    let expected = 0.3 * (1.0 - 1.0 / 15.0);
    let freq = changed as f64 / trials as f64;
    // Five binomial standard deviations.
    let tol = 5.0 * (expected * (1.0 - expected) / trials as f64).sqrt();
    assert!((freq - expected).abs() < tol, "{freq} vs {expected}");
}

#[test]
fn operators_preserve_validity() {
    for (space, seed) in [
        (SearchSpace::standard(Backbone::gpt2()), 1),
        (
            SearchSpace::standard_with_embed_choices(Backbone::transformer_xl()),
            2,
        ),
        (SearchSpace::opt_range(), 3),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..2000 {
            let a = space.sample_with(&mut rng).unwrap();
            let b = space.sample_with(&mut rng).unwrap();
            let p = rng.gen_range(0.0..=1.0);
            let m = mutate(&a, &space, p, &mut rng);
            let x = crossover(&a, &b, &space, &mut rng);
            assert!(
                validate(&m, &space).is_empty(),
                "{:?}",
                validate(&m, &space)
            );
            assert!(
                validate(&x, &space).is_empty(),
                "{:?}",
                validate(&x, &space)
            );
        }
    }
}

#[test]
fn bins_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let recs: Vec<BinRecord> = (0..400)
        .map(|_| BinRecord {
            decoder_params: rng.gen_range(0..1000),
            true_quality: rng.gen_range(10.0..50.0),
            proxy_score: rng.gen_range(0.0..1.0),
        })
        .collect();
    let edges = [0, 250, 500, 750, 1000];
    let got = src_by_bins(&recs, &edges).unwrap();
    assert_eq!(got.len(), 4);
    for (b, bin) in got.iter().enumerate() {
        let inside: Vec<&BinRecord> = recs
            .iter()
            .filter(|r| r.decoder_params >= edges[b] && (r.decoder_params < edges[b + 1] || b == 3))
            .collect();
        let x: Vec<f64> = inside.iter().map(|r| r.proxy_score).collect();
        let y: Vec<f64> = inside.iter().map(|r| -r.true_quality).collect();
        assert_eq!(bin.count, inside.len());
        assert_eq!(bin.src, spearman(&x, &y).unwrap());
    }
    let whole = src_by_bins(&recs, &[0, 1000]).unwrap();
    let x: Vec<f64> = recs.iter().map(|r| r.proxy_score).collect();
    let y: Vec<f64> = recs.iter().map(|r| -r.true_quality).collect();
    assert_eq!(whole[0].src, spearman(&x, &y).unwrap());
}

//! The evolutionary Pareto-frontier search loop.
//!
//! Each iteration subsamples parents from the current frontier, builds a
//! batch of mutated, crossed-over and fresh random candidates, scores them
//! with a proxy and a cost provider, and re-extracts the frontier over the
//! whole archive.

use std::collections::{HashMap, HashSet};

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::{ArchConfig, SearchSpace};
use crate::cost::{config_key, CostProvider, CostSample};
use crate::error::{NasError, Result};
use crate::metrics::spearman;
use crate::pareto::{
    extract, hypervolume, non_dominated, Frontier, FrontierMode, ObjectivePoint, Reference,
};
use crate::proxy::{Proxy, ProxyScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSettings {
    /// Total iterations, counting the random seeding round as iteration 0.
    pub n_iter: usize,
    pub population: usize,
    pub parents: usize,
    pub mutated_per_iter: usize,
    pub crossover_per_iter: usize,
    pub mutation_prob: f64,
    pub latency_cap_ms: Option<f64>,
    pub memory_cap_bytes: Option<u64>,
    pub rng_seed: u64,
    pub frontier_mode: FrontierMode,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            n_iter: 30,
            population: 100,
            parents: 20,
            mutated_per_iter: 40,
            crossover_per_iter: 40,
            mutation_prob: 0.3,
            latency_cap_ms: None,
            memory_cap_bytes: None,
            rng_seed: 0,
            frontier_mode: FrontierMode::NonDominated,
        }
    }
}

impl SearchSettings {
    pub fn check(&self) -> Result<()> {
        if self.population == 0 {
            return Err(NasError::InvalidSettings(
                "population must be positive".into(),
            ));
        }
        if self.mutated_per_iter + self.crossover_per_iter + self.parents > self.population {
            return Err(NasError::InvalidSettings(format!(
                "mutated ({}) + crossover ({}) + parents ({}) exceeds population ({})",
                self.mutated_per_iter, self.crossover_per_iter, self.parents, self.population
            )));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(NasError::InvalidSettings(format!(
                "mutation_prob {} not in [0, 1]",
                self.mutation_prob
            )));
        }
        if self.latency_cap_ms.is_some_and(|c| c.is_nan() || c < 0.0) {
            return Err(NasError::InvalidSettings(
                "latency cap must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    fn admits(&self, cost: &CostSample) -> bool {
        self.latency_cap_ms.is_none_or(|cap| cost.latency_ms <= cap)
            && self
                .memory_cap_bytes
                .is_none_or(|cap| cost.peak_memory_bytes <= cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedPoint {
    pub config_key: String,
    pub config: ArchConfig,
    pub score: ProxyScore,
    pub cost: CostSample,
    pub true_ppl: Option<f64>,
    pub iteration: usize,
}

impl EvaluatedPoint {
    pub fn objective(&self) -> ObjectivePoint<String> {
        ObjectivePoint::new(
            self.score.value,
            self.cost.latency_ms,
            self.cost.peak_memory_bytes as f64,
            self.config_key.clone(),
        )
    }
}

/// One line of the search log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub evaluated: usize,
    pub discarded: usize,
    pub frontier_size: usize,
    pub hypervolume: f64,
}

/// Evaluated points in insertion order, unique by config key.
#[derive(Debug, Clone, Default)]
pub struct Archive {
    points: Vec<EvaluatedPoint>,
    index: HashMap<String, usize>,
}

impl Archive {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&EvaluatedPoint> {
        self.index.get(key).map(|&i| &self.points[i])
    }

    pub fn points(&self) -> &[EvaluatedPoint] {
        &self.points
    }

    fn push(&mut self, p: EvaluatedPoint) -> bool {
        if self.index.contains_key(&p.config_key) {
            return false;
        }
        self.index.insert(p.config_key.clone(), self.points.len());
        self.points.push(p);
        true
    }

    pub fn objectives(&self) -> Vec<ObjectivePoint<String>> {
        self.points.iter().map(EvaluatedPoint::objective).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SearchState {
    pub iteration: usize,
    pub archive: Archive,
    pub frontier: Frontier<String>,
    pub rng: ChaCha8Rng,
    pub reference: Option<Reference>,
    pub log: Vec<IterationRecord>,
    /// Candidates dropped for cap violations or failed evaluation.
    pub discarded_total: usize,
    /// Set when an iteration could not produce a single new candidate.
    pub exhausted_at: Option<usize>,
    seen: HashSet<String>,
}

impl SearchState {
    fn new(seed: u64, mode: FrontierMode) -> Self {
        SearchState {
            iteration: 0,
            archive: Archive::default(),
            frontier: Frontier {
                points: Vec::new(),
                mode,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
            reference: None,
            log: Vec::new(),
            discarded_total: 0,
            exhausted_at: None,
            seen: HashSet::new(),
        }
    }

    /// Frontier entries joined back to their archive records.
    pub fn frontier_points(&self) -> Vec<&EvaluatedPoint> {
        self.frontier
            .points
            .iter()
            .map(|p| {
                self.archive
                    .get(&p.payload)
                    .expect("frontier point in archive")
            })
            .collect()
    }
}

fn repair(mut c: ArchConfig, space: &SearchSpace, rng: &mut impl Rng) -> ArchConfig {
    let n = c.n_layer as usize;
    if space.homogeneous {
        let h = c.n_head.first().copied().unwrap_or(0);
        let f = c.d_inner.first().copied().unwrap_or(0);
        c.n_head = vec![h; n];
        c.d_inner = vec![f; n];
    }
    let valid_heads = space.head_choices_for(c.d_model);
    let mut replacement = None;
    for h in c.n_head.iter_mut() {
        if !valid_heads.contains(h) {
            // One draw per config keeps homogeneous layers identical.
            let r = *replacement
                .get_or_insert_with(|| *valid_heads.choose(rng).expect("feasible d_model"));
            *h = r;
        }
    }
    let floor = space.d_inner_floor(c.d_model).expect("feasible d_model");
    for f in c.d_inner.iter_mut() {
        let on_grid = space
            .d_inner_range
            .ceil(*f)
            .unwrap_or(space.d_inner_range.max);
        *f = on_grid.max(floor);
    }
    if space.d_embed_choices.is_empty() {
        c.d_embed = c.d_model;
    }
    c
}

/// Resamples each gene independently with probability `prob`, then repairs
/// the result (head divisibility, `d_inner` floor) instead of rejecting it.
pub fn mutate(
    config: &ArchConfig,
    space: &SearchSpace,
    prob: f64,
    rng: &mut impl Rng,
) -> ArchConfig {
    let feasible = space.feasible_d_models();
    let mut c = config.clone();
    if rng.gen_bool(prob) {
        c.n_layer = space.sample_n_layer(rng);
    }
    if rng.gen_bool(prob) {
        c.d_model = *feasible.choose(rng).expect("feasible set");
    }
    if rng.gen_bool(prob) {
        c.d_embed = space.sample_d_embed(c.d_model, rng);
    }
    if rng.gen_bool(prob) {
        c.k_factor = space.sample_k(rng);
    }
    let n = c.n_layer as usize;
    let old = config.n_layer as usize;
    if space.homogeneous {
        if rng.gen_bool(prob) {
            c.n_head = vec![space.sample_head(c.d_model, rng)];
        }
        if rng.gen_bool(prob) {
            c.d_inner = vec![space.sample_d_inner(c.d_model, rng)];
        }
    } else {
        c.n_head.truncate(n);
        c.d_inner.truncate(n);
        for i in 0..old.min(n) {
            if rng.gen_bool(prob) {
                c.n_head[i] = space.sample_head(c.d_model, rng);
            }
            if rng.gen_bool(prob) {
                c.d_inner[i] = space.sample_d_inner(c.d_model, rng);
            }
        }
        for _ in old..n {
            c.n_head.push(space.sample_head(c.d_model, rng));
            c.d_inner.push(space.sample_d_inner(c.d_model, rng));
        }
    }
    repair(c, space, rng)
}

/// Uniform per-gene crossover. Per-layer genes come index-wise from a random
/// parent where both have the layer, otherwise from the longer parent.
pub fn crossover(
    a: &ArchConfig,
    b: &ArchConfig,
    space: &SearchSpace,
    rng: &mut impl Rng,
) -> ArchConfig {
    let n_layer = if rng.gen_bool(0.5) {
        a.n_layer
    } else {
        b.n_layer
    };
    let d_model = if rng.gen_bool(0.5) {
        a.d_model
    } else {
        b.d_model
    };
    let d_embed = if rng.gen_bool(0.5) {
        a.d_embed
    } else {
        b.d_embed
    };
    let k_factor = if rng.gen_bool(0.5) {
        a.k_factor
    } else {
        b.k_factor
    };
    let longer = if a.n_layer >= b.n_layer { a } else { b };
    let shared = a.n_layer.min(b.n_layer) as usize;
    let mut n_head = Vec::with_capacity(n_layer as usize);
    let mut d_inner = Vec::with_capacity(n_layer as usize);
    for i in 0..n_layer as usize {
        if i < shared {
            let src = if rng.gen_bool(0.5) { a } else { b };
            n_head.push(src.n_head[i]);
            d_inner.push(src.d_inner[i]);
        } else {
            n_head.push(longer.n_head[i]);
            d_inner.push(longer.d_inner[i]);
        }
    }
    let child = ArchConfig {
        backbone: a.backbone,
        n_layer,
        d_model,
        d_embed,
        k_factor,
        n_head,
        d_inner,
        vocab_size: a.vocab_size,
    };
    repair(child, space, rng)
}

fn evaluate(
    config: &ArchConfig,
    proxy: &dyn Proxy,
    cost: &dyn CostProvider,
) -> Result<(ProxyScore, CostSample, Option<f64>)> {
    let score = proxy.score(config)?;
    let sample = cost.cost(config)?;
    Ok((score, sample, cost.true_quality(config)))
}

struct Batch {
    configs: Vec<(String, ArchConfig)>,
}

impl Batch {
    fn new() -> Self {
        Batch {
            configs: Vec::new(),
        }
    }

    fn offer(&mut self, c: ArchConfig, seen: &HashSet<String>, taken: &mut HashSet<String>) {
        let key = config_key(&c);
        if !seen.contains(&key) && taken.insert(key.clone()) {
            self.configs.push((key, c));
        }
    }
}

/// Attempts allowed per missing candidate when topping up with random samples.
const FILL_ATTEMPTS_PER_SLOT: usize = 50;

/// Runs the search to completion.
///
/// Deterministic for a fixed `settings.rng_seed` whenever the proxy and cost
/// provider are deterministic; evaluation may run in parallel because results
/// are merged in candidate order.
pub fn run_search(
    space: &SearchSpace,
    settings: &SearchSettings,
    proxy: &dyn Proxy,
    cost: &dyn CostProvider,
) -> Result<(Frontier<String>, SearchState)> {
    settings.check()?;
    let feasible = space.feasibility()?;
    let mut state = SearchState::new(settings.rng_seed, settings.frontier_mode);
    let parallel = proxy.parallel_safe() && cost.parallel_safe();

    for iteration in 0..settings.n_iter {
        state.iteration = iteration;
        let mut batch = Batch::new();
        let mut taken = HashSet::new();
        let target = if iteration == 0 {
            settings.population
        } else {
            settings.population - settings.parents
        };

        if iteration > 0 && !state.frontier.is_empty() {
            let rng = &mut state.rng;
            let k = settings.parents.min(state.frontier.len()).max(1);
            let parents: Vec<&ArchConfig> = state
                .frontier
                .points
                .iter()
                .choose_multiple(rng, k)
                .into_iter()
                .map(|p| {
                    &state
                        .archive
                        .get(&p.payload)
                        .expect("frontier in archive")
                        .config
                })
                .collect();
            for _ in 0..settings.mutated_per_iter {
                let p = parents.choose(rng).expect("nonempty");
                let child = mutate(p, space, settings.mutation_prob, rng);
                batch.offer(child, &state.seen, &mut taken);
            }
            for _ in 0..settings.crossover_per_iter {
                let a = parents.choose(rng).expect("nonempty");
                let b = parents.choose(rng).expect("nonempty");
                let child = crossover(a, b, space, rng);
                batch.offer(child, &state.seen, &mut taken);
            }
        }
        let mut attempts = 0;
        let budget = FILL_ATTEMPTS_PER_SLOT * target.max(1);
        while batch.configs.len() < target && attempts < budget {
            let c = space.sample_unchecked(&feasible, &mut state.rng);
            batch.offer(c, &state.seen, &mut taken);
            attempts += 1;
        }

        if batch.configs.is_empty() {
            log::warn!("search space exhausted at iteration {iteration}; stopping early");
            state.exhausted_at = Some(iteration);
            break;
        }

        let results: Vec<Result<(ProxyScore, CostSample, Option<f64>)>> = if parallel {
            batch
                .configs
                .par_iter()
                .map(|(_, c)| evaluate(c, proxy, cost))
                .collect()
        } else {
            batch
                .configs
                .iter()
                .map(|(_, c)| evaluate(c, proxy, cost))
                .collect()
        };

        let mut evaluated = 0;
        let mut discarded = 0;
        for ((key, config), result) in batch.configs.into_iter().zip(results) {
            state.seen.insert(key.clone());
            match result {
                Ok((score, sample, true_ppl)) if settings.admits(&sample) => {
                    state.archive.push(EvaluatedPoint {
                        config_key: key,
                        config,
                        score,
                        cost: sample,
                        true_ppl,
                        iteration,
                    });
                    evaluated += 1;
                }
                Ok(_) => discarded += 1,
                Err(e) => {
                    log::warn!("discarding candidate {key}: {e}");
                    discarded += 1;
                }
            }
        }
        state.discarded_total += discarded;

        let objectives = state.archive.objectives();
        state.frontier = extract(&objectives, settings.frontier_mode);
        if state.reference.is_none() && !objectives.is_empty() {
            state.reference = Some(initial_reference(&objectives, settings));
        }
        let hv = match &state.reference {
            Some(r) => archive_hypervolume(&objectives, r),
            None => 0.0,
        };
        state.log.push(IterationRecord {
            iteration,
            evaluated,
            discarded,
            frontier_size: state.frontier.len(),
            hypervolume: hv,
        });
    }
    Ok((state.frontier.clone(), state))
}

/// Evaluates a fixed population in one round instead of evolving one.
/// Used to replay a tabular benchmark whose configurations are all known.
pub fn run_replay(
    configs: &[ArchConfig],
    settings: &SearchSettings,
    proxy: &dyn Proxy,
    cost: &dyn CostProvider,
) -> Result<(Frontier<String>, SearchState)> {
    let mut state = SearchState::new(settings.rng_seed, settings.frontier_mode);
    let results: Vec<_> = if proxy.parallel_safe() && cost.parallel_safe() {
        configs
            .par_iter()
            .map(|c| evaluate(c, proxy, cost))
            .collect()
    } else {
        configs.iter().map(|c| evaluate(c, proxy, cost)).collect()
    };
    let (mut evaluated, mut discarded) = (0, 0);
    for (config, result) in configs.iter().zip(results) {
        let key = config_key(config);
        if !state.seen.insert(key.clone()) {
            continue;
        }
        match result {
            Ok((score, sample, true_ppl)) if settings.admits(&sample) => {
                state.archive.push(EvaluatedPoint {
                    config_key: key,
                    config: config.clone(),
                    score,
                    cost: sample,
                    true_ppl,
                    iteration: 0,
                });
                evaluated += 1;
            }
            Ok(_) => discarded += 1,
            Err(e) => {
                log::warn!("discarding candidate {key}: {e}");
                discarded += 1;
            }
        }
    }
    state.discarded_total = discarded;
    let objectives = state.archive.objectives();
    state.frontier = extract(&objectives, settings.frontier_mode);
    if !objectives.is_empty() {
        state.reference = Some(initial_reference(&objectives, settings));
    }
    let hypervolume = state
        .reference
        .as_ref()
        .map_or(0.0, |r| archive_hypervolume(&objectives, r));
    state.log.push(IterationRecord {
        iteration: 0,
        evaluated,
        discarded,
        frontier_size: state.frontier.len(),
        hypervolume,
    });
    Ok((state.frontier.clone(), state))
}

/// Fixed hypervolume reference: the caps when set, otherwise the worst
/// latency/memory and lowest score of the first evaluated batch.
fn initial_reference(points: &[ObjectivePoint<String>], settings: &SearchSettings) -> Reference {
    let worst = |f: fn(&ObjectivePoint<String>) -> f64| {
        points.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
    };
    Reference {
        score: points.iter().map(|p| p.score).fold(f64::INFINITY, f64::min),
        latency_ms: settings
            .latency_cap_ms
            .unwrap_or_else(|| worst(|p| p.latency_ms)),
        peak_memory_bytes: settings
            .memory_cap_bytes
            .map(|m| m as f64)
            .unwrap_or_else(|| worst(|p| p.peak_memory_bytes)),
    }
}

/// Hypervolume of the archive's non-dominated set inside the reference box.
/// Points outside the box contribute nothing, so the value can only grow as
/// the archive grows.
pub fn archive_hypervolume(points: &[ObjectivePoint<String>], reference: &Reference) -> f64 {
    let inside: Vec<ObjectivePoint<String>> = points
        .iter()
        .filter(|p| reference.admits(p))
        .cloned()
        .collect();
    let nd = non_dominated(&inside);
    hypervolume(&nd.points, reference).expect("points filtered to the reference box")
}

/// Input row for [`src_by_bins`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRecord {
    pub decoder_params: u64,
    /// Lower is better (e.g. perplexity).
    pub true_quality: f64,
    /// Higher is better.
    pub proxy_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSrc {
    pub lo: u64,
    pub hi: u64,
    pub count: usize,
    pub src: f64,
}

/// SRC between proxy score and negated true quality within each decoder
/// parameter bin. Bins are `[e_i, e_{i+1})`, the last one closed.
pub fn src_by_bins(records: &[BinRecord], edges: &[u64]) -> Result<Vec<BinSrc>> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NasError::InvalidSettings(format!(
            "bin edges {edges:?} must be strictly increasing, len >= 2"
        )));
    }
    let bins = edges.len() - 1;
    (0..bins)
        .map(|b| {
            let (lo, hi) = (edges[b], edges[b + 1]);
            let last = b + 1 == bins;
            let members: Vec<&BinRecord> = records
                .iter()
                .filter(|r| {
                    r.decoder_params >= lo
                        && (r.decoder_params < hi || (last && r.decoder_params == hi))
                })
                .collect();
            if members.is_empty() {
                return Err(NasError::EmptyBin(b));
            }
            let x: Vec<f64> = members.iter().map(|r| r.proxy_score).collect();
            let y: Vec<f64> = members.iter().map(|r| -r.true_quality).collect();
            Ok(BinSrc {
                lo,
                hi,
                count: members.len(),
                src: spearman(&x, &y)?,
            })
        })
        .collect()
}

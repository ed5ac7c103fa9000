//! Python bindings for the `pareto-nas` engine.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::pareto_nas as core;
use core::arch::{ArchConfig, Backbone, BackboneTag, SearchSpace};
use core::cost::{builtin_profile, AnalyticCost, QueryShape};
use core::error::NasError;
use core::evolution::SearchSettings;
use core::params::{AdaptiveEmbeddingSpec, ParamBreakdown};
use core::pareto::{FrontierMode, ObjectivePoint, Reference};

fn to_py(e: NasError) -> PyErr {
    match core::cli::exit_code(&e) {
        core::cli::EXIT_INVALID => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_backbone(name: &str) -> PyResult<Backbone> {
    BackboneTag::parse(name)
        .map(Backbone::from_tag)
        .ok_or_else(|| PyValueError::new_err(format!("unknown backbone {name:?}")))
}

fn parse_mode(mode: &str) -> PyResult<FrontierMode> {
    FrontierMode::parse(mode)
        .ok_or_else(|| PyValueError::new_err(format!("unknown frontier mode {mode:?}")))
}

#[pyclass(
    name = "ArchConfig",
    module = "pareto_nas",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyArchConfig {
    inner: ArchConfig,
}

#[pymethods]
impl PyArchConfig {
    #[new]
    #[pyo3(signature = (backbone, d_model, n_head, d_inner, d_embed=None, k_factor=1, vocab_size=None))]
    fn new(
        backbone: &str,
        d_model: u32,
        n_head: Vec<u32>,
        d_inner: Vec<u32>,
        d_embed: Option<u32>,
        k_factor: u32,
        vocab_size: Option<u32>,
    ) -> PyResult<Self> {
        let bb = parse_backbone(backbone)?;
        let mut c = ArchConfig::heterogeneous(bb, d_model, n_head, d_inner);
        c.d_embed = d_embed.unwrap_or(d_model);
        c.k_factor = k_factor;
        c.vocab_size = vocab_size.unwrap_or_else(|| bb.default_vocab_size());
        c.check_structure().map_err(to_py)?;
        Ok(PyArchConfig { inner: c })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: ArchConfig =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyArchConfig { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    fn key(&self) -> String {
        core::cost::config_key(&self.inner)
    }

    #[getter]
    fn n_layer(&self) -> u32 {
        self.inner.n_layer
    }

    #[getter]
    fn d_model(&self) -> u32 {
        self.inner.d_model
    }

    #[getter]
    fn n_head(&self) -> Vec<u32> {
        self.inner.n_head.clone()
    }

    #[getter]
    fn d_inner(&self) -> Vec<u32> {
        self.inner.d_inner.clone()
    }

    #[getter]
    fn aspect_ratio(&self) -> f64 {
        core::arch::aspect_ratio(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "ArchConfig({:?}, n_layer={}, d_model={}, n_head={:?}, d_inner={:?})",
            self.inner.backbone.tag,
            self.inner.n_layer,
            self.inner.d_model,
            self.inner.n_head,
            self.inner.d_inner
        )
    }
}

#[pyclass(
    name = "SearchSpace",
    module = "pareto_nas",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PySearchSpace {
    inner: SearchSpace,
}

#[pymethods]
impl PySearchSpace {
    /// `gpt2`, `gpt2-homogeneous`, `transformer_xl`, `opt`, ...
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        core::cli::space_preset(name)
            .map(|inner| PySearchSpace { inner })
            .ok_or_else(|| PyValueError::new_err(format!("unknown space preset {name:?}")))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: SearchSpace =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.check().map_err(to_py)?;
        Ok(PySearchSpace { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("space serializes")
    }

    fn sample(&self, seed: u64) -> PyResult<PyArchConfig> {
        core::arch::sample(&self.inner, seed)
            .map(|inner| PyArchConfig { inner })
            .map_err(to_py)
    }

    /// Violated rules as `"field: message"` strings; empty when valid.
    fn validate(&self, config: &PyArchConfig) -> Vec<String> {
        core::arch::validate(&config.inner, &self.inner)
            .iter()
            .map(ToString::to_string)
            .collect()
    }
}

#[pyclass(name = "ParamBreakdown", module = "pareto_nas", frozen, get_all)]
struct PyParamBreakdown {
    per_layer: Vec<u64>,
    decoder_total: u64,
    embedding_total: u64,
    grand_total: u64,
}

impl From<ParamBreakdown> for PyParamBreakdown {
    fn from(b: ParamBreakdown) -> Self {
        PyParamBreakdown {
            per_layer: b.per_layer,
            decoder_total: b.decoder_total,
            embedding_total: b.embedding_total,
            grand_total: b.grand_total,
        }
    }
}

#[pyfunction]
fn count_decoder(config: &PyArchConfig) -> PyResult<PyParamBreakdown> {
    core::params::count_decoder(&config.inner)
        .map(Into::into)
        .map_err(to_py)
}

/// Decoder plus embedding counts using the default adaptive-embedding layout.
#[pyfunction]
fn count_total(config: &PyArchConfig) -> PyResult<PyParamBreakdown> {
    let spec = AdaptiveEmbeddingSpec::for_config(&config.inner);
    core::params::count_total(&config.inner, &spec)
        .map(Into::into)
        .map_err(to_py)
}

#[pyfunction]
fn sample(space: &PySearchSpace, seed: u64) -> PyResult<PyArchConfig> {
    space.sample(seed)
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    core::metrics::spearman(&x, &y).map_err(to_py)
}

/// `truth` quality is lower-is-better, `proxy` score higher-is-better.
#[pyfunction]
fn common_ratio(
    truth: Vec<(String, f64)>,
    proxy: Vec<(String, f64)>,
    top_percent: f64,
) -> PyResult<f64> {
    core::metrics::common_ratio(&truth, &proxy, top_percent).map_err(to_py)
}

fn objective_points(points: &[(f64, f64, f64)]) -> Vec<ObjectivePoint<usize>> {
    points
        .iter()
        .enumerate()
        .map(|(i, &(s, l, m))| ObjectivePoint::new(s, l, m, i))
        .collect()
}

/// Indices of the frontier of `(score, latency_ms, peak_memory_bytes)` points.
#[pyfunction]
#[pyo3(signature = (points, mode="nd"))]
fn non_dominated(points: Vec<(f64, f64, f64)>, mode: &str) -> PyResult<Vec<usize>> {
    let f = core::pareto::extract(&objective_points(&points), parse_mode(mode)?);
    Ok(f.points.iter().map(|p| p.payload).collect())
}

#[pyfunction]
fn hypervolume(points: Vec<(f64, f64, f64)>, reference: (f64, f64, f64)) -> PyResult<f64> {
    let r = Reference {
        score: reference.0,
        latency_ms: reference.1,
        peak_memory_bytes: reference.2,
    };
    core::pareto::hypervolume(&objective_points(&points), &r).map_err(to_py)
}

/// `(exact_matches, rows, max_abs_delta_m, passed)` over the embedded tables.
#[pyfunction]
fn verify_tables() -> PyResult<(usize, usize, f64, bool)> {
    let r = core::fixtures::verify_tables(&core::fixtures::golden_rows().map_err(to_py)?)
        .map_err(to_py)?;
    Ok((r.exact_matches, r.rows.len(), r.max_abs_delta_m, r.pass))
}

type FrontierRow = (PyArchConfig, f64, f64, u64);

/// Runs the search with the decoder-parameter proxy and analytic costs.
/// Returns the frontier as `(config, score, latency_ms, peak_memory_bytes)`
/// tuples and the per-iteration hypervolumes.
#[pyfunction]
#[pyo3(signature = (space, seed=0, n_iter=30, population=100, latency_cap_ms=None, memory_cap_bytes=None, frontier_mode="nd", profile="synthetic"))]
#[allow(clippy::too_many_arguments)]
fn run_search(
    py: Python<'_>,
    space: &PySearchSpace,
    seed: u64,
    n_iter: usize,
    population: usize,
    latency_cap_ms: Option<f64>,
    memory_cap_bytes: Option<u64>,
    frontier_mode: &str,
    profile: &str,
) -> PyResult<(Vec<FrontierRow>, Vec<f64>)> {
    let defaults = SearchSettings::default();
    let scale = |v: usize| v * population / defaults.population;
    let settings = SearchSettings {
        n_iter,
        population,
        parents: scale(defaults.parents),
        mutated_per_iter: scale(defaults.mutated_per_iter),
        crossover_per_iter: scale(defaults.crossover_per_iter),
        latency_cap_ms,
        memory_cap_bytes,
        rng_seed: seed,
        frontier_mode: parse_mode(frontier_mode)?,
        ..defaults
    };
    let cost = AnalyticCost {
        profile: builtin_profile(profile)
            .ok_or_else(|| PyValueError::new_err(format!("unknown device profile {profile:?}")))?,
        shape: QueryShape::default(),
    };
    let space = space.inner.clone();
    let (_, state) = py
        .detach(|| {
            core::evolution::run_search(&space, &settings, &core::proxy::DecoderParams, &cost)
        })
        .map_err(to_py)?;
    let frontier = state
        .frontier_points()
        .into_iter()
        .map(|p| {
            (
                PyArchConfig {
                    inner: p.config.clone(),
                },
                p.score.value,
                p.cost.latency_ms,
                p.cost.peak_memory_bytes,
            )
        })
        .collect();
    Ok((frontier, state.log.iter().map(|r| r.hypervolume).collect()))
}

#[pymodule]
fn pareto_nas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArchConfig>()?;
    m.add_class::<PySearchSpace>()?;
    m.add_class::<PyParamBreakdown>()?;
    m.add_function(wrap_pyfunction!(count_decoder, m)?)?;
    m.add_function(wrap_pyfunction!(count_total, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(common_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(non_dominated, m)?)?;
    m.add_function(wrap_pyfunction!(hypervolume, m)?)?;
    m.add_function(wrap_pyfunction!(verify_tables, m)?)?;
    m.add_function(wrap_pyfunction!(run_search, m)?)?;
    Ok(())
}

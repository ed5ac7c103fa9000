//! Training-free, hardware-aware architecture search for decoder-only
//! Transformers.
//!
//! The decoder parameter count stands in for trained perplexity; an
//! evolutionary loop then grows a Pareto frontier over (score, latency,
//! peak memory) using analytic, measured or tabulated costs.

pub mod arch;
pub mod cli;
pub mod cost;
pub mod error;
pub mod evolution;
pub mod fixtures;
pub mod metrics;
pub mod params;
pub mod pareto;
pub mod plugin;
pub mod proxy;

pub use arch::{sample, validate, ArchConfig, Backbone, BackboneTag, GridRange, SearchSpace};
pub use cost::{config_key, AnalyticCost, CostProvider, CostSample, MeasuredCost, TabularCost};
pub use error::{NasError, Result};
pub use evolution::{run_search, SearchSettings, SearchState};
pub use metrics::{common_ratio, spearman};
pub use params::{count_decoder, count_total, AdaptiveEmbeddingSpec, ParamBreakdown};
pub use pareto::{
    extract, hypervolume, lower_convex_hull, non_dominated, Frontier, FrontierMode, ObjectivePoint,
};
pub use proxy::{DecoderParams, Proxy, ProxyScore};

//! Latency and peak-memory providers: analytic estimate, external
//! measurement command and precomputed table lookup.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arch::ArchConfig;
use crate::error::{NasError, Result};
use crate::params::count_decoder;
use crate::plugin::PluginCommand;

pub const DEFAULT_SEQ_LEN: u32 = 192;
pub const DEFAULT_REPEATS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostSource {
    Analytic,
    Measured,
    Tabular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSample {
    pub latency_ms: f64,
    pub peak_memory_bytes: u64,
    pub repeats: u32,
    pub source: CostSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostQuery {
    pub config: ArchConfig,
    pub seq_len: u32,
    pub batch: u32,
    pub bytes_per_param: u32,
}

impl CostQuery {
    pub fn new(config: ArchConfig) -> Self {
        CostQuery {
            config,
            seq_len: DEFAULT_SEQ_LEN,
            batch: 1,
            bytes_per_param: 4,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.seq_len == 0 || self.batch == 0 || self.bytes_per_param == 0 {
            return Err(NasError::InvalidConfig(
                "seq_len, batch and bytes_per_param must be positive".into(),
            ));
        }
        let bb = &self.config.backbone;
        if bb.include_positional_embedding && self.seq_len > bb.max_positions {
            return Err(NasError::InvalidConfig(format!(
                "seq_len {} exceeds max_positions {}",
                self.seq_len, bb.max_positions
            )));
        }
        Ok(())
    }
}

/// Synthetic device description for the analytic estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub throughput_flops_per_ms: f64,
    #[serde(default = "one")]
    pub memory_overhead_factor: f64,
    #[serde(default = "four")]
    pub bytes_per_activation: u32,
}

fn one() -> f64 {
    1.0
}

fn four() -> u32 {
    4
}

impl Default for DeviceProfile {
    fn default() -> Self {
        DeviceProfile {
            throughput_flops_per_ms: 1e9,
            memory_overhead_factor: 1.0,
            bytes_per_activation: 4,
        }
    }
}

/// Named profiles shipped with the tool. All are synthetic.
pub fn builtin_profile(name: &str) -> Option<DeviceProfile> {
    let p = match name {
        "synthetic" | "synthetic-default" => DeviceProfile::default(),
        "synthetic-slow" => DeviceProfile {
            throughput_flops_per_ms: 1e8,
            ..DeviceProfile::default()
        },
        "synthetic-fast" => DeviceProfile {
            throughput_flops_per_ms: 1e10,
            ..DeviceProfile::default()
        },
        _ => return None,
    };
    Some(p)
}

/// Forward-pass FLOPs: per layer `8 s d^2 + 4 s^2 d + 4 s d f`.
pub fn analytic_flops(config: &ArchConfig, seq_len: u32) -> u64 {
    let s = seq_len as u64;
    let d = config.d_model as u64;
    config
        .d_inner
        .iter()
        .map(|&f| 8 * s * d * d + 4 * s * s * d + 4 * s * d * f as u64)
        .sum()
}

pub fn estimate(query: &CostQuery, profile: &DeviceProfile) -> Result<CostSample> {
    query.check()?;
    let c = &query.config;
    let flops = analytic_flops(c, query.seq_len);
    let weights = count_decoder(c)?.decoder_total * query.bytes_per_param as u64;
    let s = query.seq_len as u64;
    let max_inner = c.d_inner.iter().copied().max().unwrap_or(0) as u64;
    let max_heads = c.n_head.iter().copied().max().unwrap_or(0) as u64;
    let per_token = 4 * c.d_model as u64 + max_inner + max_heads * s;
    let activations = query.batch as u64 * s * per_token * profile.bytes_per_activation as u64;
    let raw = weights + activations;
    let peak_memory_bytes = if profile.memory_overhead_factor == 1.0 {
        raw
    } else {
        (raw as f64 * profile.memory_overhead_factor).round() as u64
    };
    Ok(CostSample {
        latency_ms: flops as f64 / profile.throughput_flops_per_ms,
        peak_memory_bytes,
        repeats: 1,
        source: CostSource::Analytic,
    })
}

#[derive(Debug, Deserialize)]
struct MeasureReply {
    latency_ms: f64,
    peak_memory_bytes: u64,
    #[serde(default)]
    repeats: Option<u32>,
}

/// Runs a measurement command once. The command receives the config JSON on
/// stdin and `PARETO_NAS_SEQ_LEN` / `PARETO_NAS_BATCH` in its environment; it
/// is expected to average its own repeats.
pub fn measure(query: &CostQuery, command: &PluginCommand) -> Result<CostSample> {
    query.check()?;
    let env = [
        ("PARETO_NAS_SEQ_LEN", query.seq_len.to_string()),
        ("PARETO_NAS_BATCH", query.batch.to_string()),
    ];
    let reply: MeasureReply = command
        .call(&query.config, &env)
        .map_err(NasError::MeasurementFailure)?;
    if !(reply.latency_ms.is_finite() && reply.latency_ms >= 0.0) {
        return Err(NasError::MeasurementFailure(format!(
            "bad latency {}",
            reply.latency_ms
        )));
    }
    Ok(CostSample {
        latency_ms: reply.latency_ms,
        peak_memory_bytes: reply.peak_memory_bytes,
        repeats: reply.repeats.unwrap_or(DEFAULT_REPEATS).max(1),
        source: CostSource::Measured,
    })
}

/// SHA-256 (hex) of the compact, key-sorted JSON serialization.
pub fn config_key(config: &ArchConfig) -> String {
    hex::encode(Sha256::digest(canonical_json(config).as_bytes()))
}

pub fn canonical_json(config: &ArchConfig) -> String {
    // serde_json's default map is a BTreeMap, so keys come out sorted.
    let value = serde_json::to_value(config).expect("config serializes");
    serde_json::to_string(&value).expect("value serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub latency_ms: f64,
    pub peak_memory_bytes: u64,
    pub true_ppl: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableRow {
    config_key: String,
    latency_ms: f64,
    peak_memory_bytes: u64,
    true_ppl: Option<f64>,
}

/// Precomputed costs keyed by canonical config key. Insertion order is kept
/// for output.
#[derive(Debug, Clone, Default)]
pub struct CostTable {
    keys: Vec<String>,
    entries: HashMap<String, TableEntry>,
}

impl CostTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces an entry.
    pub fn insert(&mut self, key: String, entry: TableEntry) {
        if self.entries.insert(key.clone(), entry).is_none() {
            self.keys.push(key);
        }
    }

    pub fn get(&self, key: &str) -> Option<&TableEntry> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TableEntry)> {
        self.keys.iter().map(|k| (k.as_str(), &self.entries[k]))
    }

    pub fn from_reader(reader: impl io::Read) -> Result<Self> {
        let mut table = CostTable::new();
        let mut rdr = csv::Reader::from_reader(reader);
        for row in rdr.deserialize() {
            let row: TableRow = row?;
            table.insert(
                row.config_key,
                TableEntry {
                    latency_ms: row.latency_ms,
                    peak_memory_bytes: row.peak_memory_bytes,
                    true_ppl: row.true_ppl,
                },
            );
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn write_to(&self, writer: impl io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (key, e) in self.iter() {
            w.serialize(TableRow {
                config_key: key.to_string(),
                latency_ms: e.latency_ms,
                peak_memory_bytes: e.peak_memory_bytes,
                true_ppl: e.true_ppl,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }
}

pub fn lookup(query: &CostQuery, table: &CostTable) -> Result<CostSample> {
    let key = config_key(&query.config);
    let e = table.get(&key).ok_or(NasError::MissingEntry(key))?;
    Ok(CostSample {
        latency_ms: e.latency_ms,
        peak_memory_bytes: e.peak_memory_bytes,
        repeats: 1,
        source: CostSource::Tabular,
    })
}

/// Query parameters shared by every candidate in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryShape {
    pub seq_len: u32,
    pub batch: u32,
    pub bytes_per_param: u32,
}

impl Default for QueryShape {
    fn default() -> Self {
        QueryShape {
            seq_len: DEFAULT_SEQ_LEN,
            batch: 1,
            bytes_per_param: 4,
        }
    }
}

impl QueryShape {
    pub fn query(&self, config: &ArchConfig) -> CostQuery {
        CostQuery {
            config: config.clone(),
            seq_len: self.seq_len,
            batch: self.batch,
            bytes_per_param: self.bytes_per_param,
        }
    }
}

pub trait CostProvider: Send + Sync {
    fn cost(&self, config: &ArchConfig) -> Result<CostSample>;

    /// Whether candidates may be costed concurrently.
    fn parallel_safe(&self) -> bool {
        true
    }

    /// Ground-truth quality (lower is better) when the provider knows it.
    fn true_quality(&self, _config: &ArchConfig) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnalyticCost {
    pub profile: DeviceProfile,
    pub shape: QueryShape,
}

impl CostProvider for AnalyticCost {
    fn cost(&self, config: &ArchConfig) -> Result<CostSample> {
        estimate(&self.shape.query(config), &self.profile)
    }
}

#[derive(Debug, Clone)]
pub struct MeasuredCost {
    pub command: PluginCommand,
    pub shape: QueryShape,
    /// Off by default: concurrent runs perturb each other's timings.
    pub allow_parallel: bool,
}

impl CostProvider for MeasuredCost {
    fn cost(&self, config: &ArchConfig) -> Result<CostSample> {
        measure(&self.shape.query(config), &self.command)
    }

    fn parallel_safe(&self) -> bool {
        self.allow_parallel
    }
}

#[derive(Debug, Clone, Default)]
pub struct TabularCost {
    pub table: CostTable,
}

impl CostProvider for TabularCost {
    fn cost(&self, config: &ArchConfig) -> Result<CostSample> {
        lookup(&CostQuery::new(config.clone()), &self.table)
    }

    fn true_quality(&self, config: &ArchConfig) -> Option<f64> {
        self.table.get(&config_key(config)).and_then(|e| e.true_ppl)
    }
}

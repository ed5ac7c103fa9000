//! Embedded golden architecture tables and synthetic tabular benchmarks.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arch::{ArchConfig, Backbone, BackboneTag, SearchSpace};
use crate::cost::{config_key, CostProvider, CostTable, TableEntry};
use crate::error::{NasError, Result};
use crate::metrics::spearman;
use crate::params::count_decoder;
use crate::pareto::{d_avg, non_dominated, ObjectivePoint, QualityPoint};

/// The published architecture tables, one row per model.
pub const APPENDIX_I_CSV: &str = include_str!("../fixtures/appendix_i.csv");

/// SHA-256 of [`APPENDIX_I_CSV`]; a mismatch means the corpus changed.
pub const APPENDIX_I_SHA256: &str =
    "6559d4720a5d80bbc6723b542b114cb1a8ae22a0ed7f860b98373ae6ce724825";

/// Rows known to deviate at one decimal, as `(table_id, model_id, reason)`.
/// Each entry may deviate by at most 0.1M.
pub const ALLOWLIST: &[(&str, &str, &str)] = &[];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRow {
    pub table_id: String,
    pub model_id: String,
    pub backbone: BackboneTag,
    pub n_layer: u32,
    pub d_model: u32,
    pub n_head_list: Vec<u32>,
    pub d_inner_list: Vec<u32>,
    pub published_decoder_params_m: f64,
}

impl GoldenRow {
    pub fn config(&self) -> ArchConfig {
        ArchConfig::heterogeneous(
            Backbone::from_tag(self.backbone),
            self.d_model,
            self.n_head_list.clone(),
            self.d_inner_list.clone(),
        )
    }
}

#[derive(Debug, Deserialize)]
struct RawRow {
    table_id: String,
    row_id: String,
    backbone: String,
    n_layer: u32,
    d_model: u32,
    n_head_list: String,
    d_inner_list: String,
    #[serde(rename = "paper_decoder_params_M")]
    published_decoder_params_m: f64,
}

fn parse_list(s: &str, what: &str, row: &str) -> Result<Vec<u32>> {
    s.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| NasError::Parse(format!("row {row}: bad {what} entry {t:?}")))
        })
        .collect()
}

pub fn parse_rows(csv_text: &str) -> Result<Vec<GoldenRow>> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let mut rows = Vec::new();
    for raw in reader.deserialize::<RawRow>() {
        let raw = raw.map_err(|e| NasError::Parse(e.to_string()))?;
        let id = format!("{}/{}", raw.table_id, raw.row_id);
        let backbone = BackboneTag::parse(&raw.backbone).ok_or_else(|| {
            NasError::Parse(format!("row {id}: unknown backbone {:?}", raw.backbone))
        })?;
        let mut n_head_list = parse_list(&raw.n_head_list, "n_head", &id)?;
        let mut d_inner_list = parse_list(&raw.d_inner_list, "d_inner", &id)?;
        // A single value stands for every layer.
        let n = raw.n_layer as usize;
        if n_head_list.len() == 1 {
            n_head_list = vec![n_head_list[0]; n];
        }
        if d_inner_list.len() == 1 {
            d_inner_list = vec![d_inner_list[0]; n];
        }
        if n_head_list.len() != n || d_inner_list.len() != n {
            return Err(NasError::Parse(format!(
                "row {id}: list lengths {}/{} differ from n_layer {n}",
                n_head_list.len(),
                d_inner_list.len()
            )));
        }
        rows.push(GoldenRow {
            table_id: raw.table_id,
            model_id: raw.row_id,
            backbone,
            n_layer: raw.n_layer,
            d_model: raw.d_model,
            n_head_list,
            d_inner_list,
            published_decoder_params_m: raw.published_decoder_params_m,
        });
    }
    Ok(rows)
}

/// The embedded corpus, parsed.
pub fn golden_rows() -> Result<Vec<GoldenRow>> {
    parse_rows(APPENDIX_I_CSV)
}

pub fn content_sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowCheck {
    pub table_id: String,
    pub model_id: String,
    pub decoder_total: u64,
    pub computed_m: f64,
    pub published_m: f64,
    pub abs_delta_m: f64,
    pub exact: bool,
    pub allowlisted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub rows: Vec<RowCheck>,
    pub exact_matches: usize,
    pub exact_fraction: f64,
    pub max_abs_delta_m: f64,
    pub pass: bool,
}

impl TableReport {
    pub fn deviations(&self) -> impl Iterator<Item = &RowCheck> {
        self.rows.iter().filter(|r| !r.exact)
    }
}

/// Decoder count in tenths of a million, rounded half up.
fn tenths_of_million(count: u64) -> i64 {
    ((count + 50_000) / 100_000) as i64
}

/// Compares each row's decoder count, rounded to 0.1M, with the published
/// figure. Passes when at least 99% match exactly, nothing deviates by more
/// than 0.1M and every inexact row is allowlisted.
pub fn verify_tables(rows: &[GoldenRow]) -> Result<TableReport> {
    let mut checks = Vec::with_capacity(rows.len());
    for row in rows {
        let b = count_decoder(&row.config())?;
        let computed = tenths_of_million(b.decoder_total);
        let published = (row.published_decoder_params_m * 10.0).round() as i64;
        let diff = (computed - published).abs();
        checks.push(RowCheck {
            table_id: row.table_id.clone(),
            model_id: row.model_id.clone(),
            decoder_total: b.decoder_total,
            computed_m: computed as f64 / 10.0,
            published_m: row.published_decoder_params_m,
            abs_delta_m: diff as f64 / 10.0,
            exact: diff == 0,
            allowlisted: ALLOWLIST
                .iter()
                .any(|(t, m, _)| *t == row.table_id && *m == row.model_id),
        });
    }
    let exact_matches = checks.iter().filter(|c| c.exact).count();
    let exact_fraction = if checks.is_empty() {
        0.0
    } else {
        exact_matches as f64 / checks.len() as f64
    };
    let max_abs_delta_m = checks.iter().map(|c| c.abs_delta_m).fold(0.0, f64::max);
    let pass = !checks.is_empty()
        && exact_matches * 100 >= checks.len() * 99
        && checks.iter().all(|c| c.abs_delta_m <= 0.1 + 1e-9)
        && checks.iter().all(|c| c.exact || c.allowlisted);
    Ok(TableReport {
        rows: checks,
        exact_matches,
        exact_fraction,
        max_abs_delta_m,
        pass,
    })
}

/// Power-law ground truth: `true_ppl = a * P^(-alpha) * exp(eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSettings {
    pub n: usize,
    /// Standard deviation of the log-normal factor.
    pub noise: f64,
    pub seed: u64,
    pub a: f64,
    pub alpha: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            n: 1200,
            noise: 0.0,
            seed: 0,
            a: 200.0,
            alpha: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRow {
    pub config_key: String,
    pub config: ArchConfig,
    pub decoder_params: u64,
    pub latency_ms: f64,
    pub peak_memory_bytes: u64,
    pub true_ppl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthBenchmark {
    pub settings: SynthSettings,
    pub rows: Vec<SynthRow>,
}

/// Samples `n` distinct configurations and attaches costs and a synthetic
/// perplexity.
pub fn synth_benchmark(
    space: &SearchSpace,
    settings: SynthSettings,
    cost: &dyn CostProvider,
) -> Result<SynthBenchmark> {
    if settings.n < 2 {
        return Err(NasError::InvalidSettings(format!(
            "n = {} must be at least 2",
            settings.n
        )));
    }
    if [settings.a, settings.alpha]
        .iter()
        .any(|v| v.is_nan() || *v <= 0.0)
        || settings.noise.is_nan()
        || settings.noise < 0.0
    {
        return Err(NasError::InvalidSettings(
            "a, alpha must be positive and noise nonnegative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let normal =
        Normal::new(0.0, settings.noise).map_err(|e| NasError::InvalidSettings(e.to_string()))?;
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(settings.n);
    let budget = 100 * settings.n;
    let mut attempts = 0;
    while rows.len() < settings.n {
        if attempts == budget {
            return Err(NasError::ExhaustedSpace(rows.len()));
        }
        attempts += 1;
        let config = space.sample_with(&mut rng)?;
        let key = config_key(&config);
        if !seen.insert(key.clone()) {
            continue;
        }
        let eps = normal.sample(&mut rng);
        let decoder_params = count_decoder(&config)?.decoder_total;
        let c = cost.cost(&config)?;
        rows.push(SynthRow {
            config_key: key,
            config,
            decoder_params,
            latency_ms: c.latency_ms,
            peak_memory_bytes: c.peak_memory_bytes,
            true_ppl: settings.a * (decoder_params as f64).powf(-settings.alpha) * eps.exp(),
        });
    }
    Ok(SynthBenchmark { settings, rows })
}

impl SynthBenchmark {
    pub fn table(&self) -> CostTable {
        let mut t = CostTable::new();
        for r in &self.rows {
            t.insert(
                r.config_key.clone(),
                TableEntry {
                    latency_ms: r.latency_ms,
                    peak_memory_bytes: r.peak_memory_bytes,
                    true_ppl: Some(r.true_ppl),
                },
            );
        }
        t
    }

    /// Writes `synth_<seed>.csv` (tabular cost format) and the matching
    /// `synth_<seed>.configs.jsonl` into `dir`, returning both paths.
    pub fn write(&self, dir: &Path) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("synth_{}.csv", self.settings.seed));
        let jsonl_path = dir.join(format!("synth_{}.configs.jsonl", self.settings.seed));
        self.table().save(&csv_path)?;
        let mut f = std::io::BufWriter::new(fs::File::create(&jsonl_path)?);
        for r in &self.rows {
            serde_json::to_writer(&mut f, &r.config)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        Ok((csv_path, jsonl_path))
    }
}

/// Frontier comparison between a proxy and the ground truth over a fixed
/// set of evaluated architectures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub src: f64,
    pub d_avg: f64,
    pub proxy_frontier: Vec<String>,
    pub truth_frontier: Vec<String>,
}

/// One architecture as seen by [`replay`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayPoint {
    pub id: String,
    pub latency_ms: f64,
    pub proxy_score: f64,
    pub true_ppl: f64,
}

/// Extracts latency/quality frontiers once by proxy score and once by true
/// perplexity, then reports SRC(proxy, -ppl) and the d_avg gap between them.
pub fn replay(points: &[ReplayPoint]) -> Result<ReplayReport> {
    let proxy_pts: Vec<ObjectivePoint<usize>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| ObjectivePoint::new(p.proxy_score, p.latency_ms, 0.0, i))
        .collect();
    let truth_pts: Vec<ObjectivePoint<usize>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| ObjectivePoint::new(-p.true_ppl, p.latency_ms, 0.0, i))
        .collect();
    let mut proxy_idx: Vec<usize> = non_dominated(&proxy_pts)
        .points
        .iter()
        .map(|p| p.payload)
        .collect();
    let mut truth_idx: Vec<usize> = non_dominated(&truth_pts)
        .points
        .iter()
        .map(|p| p.payload)
        .collect();
    proxy_idx.sort_by(|&a, &b| points[a].latency_ms.total_cmp(&points[b].latency_ms));
    truth_idx.sort_by(|&a, &b| points[a].latency_ms.total_cmp(&points[b].latency_ms));
    let quality = |idx: &[usize]| -> Vec<QualityPoint> {
        idx.iter()
            .map(|&i| QualityPoint {
                latency_ms: points[i].latency_ms,
                quality: points[i].true_ppl,
            })
            .collect()
    };
    let x: Vec<f64> = points.iter().map(|p| p.proxy_score).collect();
    let y: Vec<f64> = points.iter().map(|p| -p.true_ppl).collect();
    Ok(ReplayReport {
        src: spearman(&x, &y)?,
        d_avg: d_avg(&quality(&proxy_idx), &quality(&truth_idx))?,
        proxy_frontier: proxy_idx.iter().map(|&i| points[i].id.clone()).collect(),
        truth_frontier: truth_idx.iter().map(|&i| points[i].id.clone()).collect(),
    })
}

impl SynthBenchmark {
    /// Replay with the decoder parameter count as proxy.
    pub fn replay_points(&self) -> Vec<ReplayPoint> {
        self.rows
            .iter()
            .map(|r| ReplayPoint {
                id: r.config_key.clone(),
                latency_ms: r.latency_ms,
                proxy_score: r.decoder_params as f64,
                true_ppl: r.true_ppl,
            })
            .collect()
    }
}

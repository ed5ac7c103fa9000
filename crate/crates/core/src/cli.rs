//! The `pareto-nas` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input, 3 search space
//! exhausted (outputs are still written).

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arch::{ArchConfig, Backbone, SearchSpace};
use crate::cost::{
    builtin_profile, AnalyticCost, CostProvider, CostTable, DeviceProfile, MeasuredCost,
    QueryShape, TabularCost,
};
use crate::error::{NasError, Result};
use crate::evolution::{run_replay, run_search, EvaluatedPoint, SearchSettings, SearchState};
use crate::fixtures::{
    golden_rows, replay, synth_benchmark, verify_tables, ReplayPoint, SynthSettings,
};
use crate::metrics::{common_ratio, spearman, top_count};
use crate::params::{count_total, AdaptiveEmbeddingSpec};
use crate::pareto::{extract, FrontierMode, ObjectivePoint};
use crate::plugin::PluginCommand;
use crate::proxy::{builtin, ExternalProxy, Proxy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_EXHAUSTED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pareto-nas",
    version,
    about = "Training-free hardware-aware Transformer architecture search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the parameter breakdown of one architecture as JSON.
    Count {
        config: PathBuf,
        #[arg(long)]
        embedding_spec: Option<PathBuf>,
    },
    /// Run the evolutionary frontier search described by a run config.
    Search(SearchArgs),
    /// Rank-correlation (SRC) and top-k overlap (CR) of a proxy vs ground truth.
    Rank(RankArgs),
    /// Extract a frontier from scored points.
    Pareto(ParetoArgs),
    /// Check the decoder counter against the embedded published tables.
    VerifyTables {
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Write a synthetic tabular benchmark with power-law perplexities.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Nd,
    Hull,
}

impl From<ModeArg> for FrontierMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Nd => FrontierMode::NonDominated,
            ModeArg::Hull => FrontierMode::LowerConvexHull,
        }
    }
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    pub run_config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub device_profile: Option<String>,
    #[arg(long)]
    pub latency_cap_ms: Option<f64>,
    #[arg(long)]
    pub memory_cap_bytes: Option<u64>,
    #[arg(long, value_enum)]
    pub frontier_mode: Option<ModeArg>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Either `id,truth_quality,proxy_score` rows, or a tabular cost file
    /// when `--configs` is given.
    pub table: PathBuf,
    /// JSONL configurations whose keys index `table`; the proxy is then
    /// computed rather than read.
    #[arg(long)]
    pub configs: Option<PathBuf>,
    #[arg(long, default_value = "decoder_params")]
    pub proxy: String,
    /// External proxy command, run through `sh -c`.
    #[arg(long)]
    pub plugin: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "10,30,50,100")]
    pub topk: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    /// `id,score,latency_ms,peak_memory_bytes` rows.
    pub points: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Nd)]
    pub mode: ModeArg,
    /// Tabular cost file with `true_ppl`, keyed by the same ids.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Where to write the frontier CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1200)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.02)]
    pub alpha: f64,
    #[arg(long, default_value = "gpt2")]
    pub space: String,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    #[arg(long, default_value = "synthetic")]
    pub device_profile: String,
}

/// Search space given inline or by preset name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceSpec {
    Preset(String),
    Inline(SearchSpace),
}

impl Default for SpaceSpec {
    fn default() -> Self {
        SpaceSpec::Preset("gpt2".into())
    }
}

pub fn space_preset(name: &str) -> Option<SearchSpace> {
    Some(match name {
        "gpt2" => SearchSpace::standard(Backbone::gpt2()),
        "gpt2-homogeneous" => SearchSpace::standard(Backbone::gpt2()).homogeneous(),
        "transformer_xl" | "txl" => {
            SearchSpace::standard_with_embed_choices(Backbone::transformer_xl())
        }
        "transformer_xl-homogeneous" | "txl-homogeneous" => {
            SearchSpace::standard_with_embed_choices(Backbone::transformer_xl()).homogeneous()
        }
        "opt" => SearchSpace::opt_range(),
        _ => return None,
    })
}

impl SpaceSpec {
    pub fn resolve(&self) -> Result<SearchSpace> {
        match self {
            SpaceSpec::Preset(name) => space_preset(name)
                .ok_or_else(|| NasError::InvalidSettings(format!("unknown space preset {name:?}"))),
            SpaceSpec::Inline(s) => Ok(s.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxySpec {
    Builtin(String),
    Plugin {
        #[serde(flatten)]
        command: PluginCommand,
        #[serde(default = "one")]
        max_parallel: usize,
    },
}

fn one() -> usize {
    1
}

impl Default for ProxySpec {
    fn default() -> Self {
        ProxySpec::Builtin("decoder_params".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSpec {
    Analytic {
        #[serde(default = "default_profile")]
        profile: String,
        #[serde(default)]
        shape: Option<QueryShape>,
    },
    Measure {
        #[serde(flatten)]
        command: PluginCommand,
        #[serde(default)]
        shape: Option<QueryShape>,
        #[serde(default)]
        allow_parallel: bool,
    },
    Tabular {
        path: PathBuf,
        /// Configurations to replay; without it the evolutionary loop runs
        /// and unknown keys are discarded.
        #[serde(default)]
        configs: Option<PathBuf>,
    },
}

fn default_profile() -> String {
    "synthetic".into()
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec::Analytic {
            profile: default_profile(),
            shape: None,
        }
    }
}

/// Contents of a `search` run-config file. Every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub space: SpaceSpec,
    pub settings: SearchSettings,
    pub proxy: ProxySpec,
    pub cost: CostSpec,
    pub output_dir: Option<PathBuf>,
    pub device_profiles: BTreeMap<String, DeviceProfile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub seed: u64,
    pub build: String,
    pub wall_time_s: f64,
    /// File name to SHA-256 hex digest.
    pub artifacts: BTreeMap<String, String>,
}

pub fn exit_code(e: &NasError) -> i32 {
    match e {
        NasError::ExhaustedSpace(_) => EXIT_EXHAUSTED,
        NasError::InvalidConfig(_)
        | NasError::Divisibility { .. }
        | NasError::Cutoff(_)
        | NasError::Parse(_)
        | NasError::Json(_)
        | NasError::Csv(_)
        | NasError::InvalidSettings(_)
        | NasError::EmptyFeasibleSet(_)
        | NasError::IdMismatch(_)
        | NasError::LengthMismatch(..)
        | NasError::DegenerateSeries(_)
        | NasError::EmptyBin(_)
        | NasError::BadReference(_) => EXIT_INVALID,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Count {
            config,
            embedding_spec,
        } => cmd_count(&config, embedding_spec.as_deref()),
        Command::Search(args) => cmd_search(&args),
        Command::Rank(args) => cmd_rank(&args),
        Command::Pareto(args) => cmd_pareto(&args),
        Command::VerifyTables { format } => cmd_verify_tables(format),
        Command::Synth(args) => cmd_synth(&args),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| NasError::Parse(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn cmd_count(config: &Path, embedding_spec: Option<&Path>) -> Result<i32> {
    let config: ArchConfig = read_json(config)?;
    let spec = match embedding_spec {
        Some(p) => read_json(p)?,
        None => AdaptiveEmbeddingSpec::for_config(&config),
    };
    print_json(&count_total(&config, &spec)?)?;
    Ok(EXIT_OK)
}

fn resolve_profile(name: &str, custom: &BTreeMap<String, DeviceProfile>) -> Result<DeviceProfile> {
    custom
        .get(name)
        .cloned()
        .or_else(|| builtin_profile(name))
        .ok_or_else(|| NasError::InvalidSettings(format!("unknown device profile {name:?}")))
}

fn relative_to(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_configs(path: &Path) -> Result<Vec<ArchConfig>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| NasError::Parse(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn build_proxy(spec: &ProxySpec, jobs: Option<usize>) -> Result<Box<dyn Proxy>> {
    match spec {
        ProxySpec::Builtin(name) => builtin(name)
            .ok_or_else(|| NasError::InvalidSettings(format!("unknown proxy {name:?}"))),
        ProxySpec::Plugin {
            command,
            max_parallel,
        } => {
            let mut p = ExternalProxy::new(command.clone());
            p.max_parallel = jobs.map_or(*max_parallel, |j| j.min(*max_parallel));
            Ok(Box::new(p))
        }
    }
}

/// Sorted by (latency, memory, -score, key) so output is stable.
fn sorted_points(mut pts: Vec<&EvaluatedPoint>) -> Vec<&EvaluatedPoint> {
    pts.sort_by(|a, b| {
        a.cost
            .latency_ms
            .total_cmp(&b.cost.latency_ms)
            .then(a.cost.peak_memory_bytes.cmp(&b.cost.peak_memory_bytes))
            .then(b.score.value.total_cmp(&a.score.value))
            .then(a.config_key.cmp(&b.config_key))
    });
    pts
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_frontier_csv(path: &Path, pts: &[&EvaluatedPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "config_key",
        "score",
        "latency_ms",
        "peak_memory_bytes",
        "true_ppl",
    ])?;
    for p in pts {
        w.write_record([
            p.config_key.clone(),
            p.score.value.to_string(),
            p.cost.latency_ms.to_string(),
            p.cost.peak_memory_bytes.to_string(),
            opt_f64(p.true_ppl),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_archive_csv(path: &Path, pts: &[EvaluatedPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "config_key",
        "iteration",
        "score",
        "latency_ms",
        "peak_memory_bytes",
        "true_ppl",
        "config",
    ])?;
    for p in pts {
        w.write_record([
            p.config_key.clone(),
            p.iteration.to_string(),
            p.score.value.to_string(),
            p.cost.latency_ms.to_string(),
            p.cost.peak_memory_bytes.to_string(),
            opt_f64(p.true_ppl),
            serde_json::to_string(&p.config)?,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_search_outputs(dir: &Path, state: &SearchState) -> Result<Vec<&'static str>> {
    fs::create_dir_all(dir)?;
    let frontier = sorted_points(state.frontier_points());
    write_frontier_csv(&dir.join("frontier.csv"), &frontier)?;
    fs::write(
        dir.join("frontier.json"),
        serde_json::to_string_pretty(&frontier)? + "\n",
    )?;
    write_archive_csv(&dir.join("archive.csv"), state.archive.points())?;
    let mut log = String::new();
    for rec in &state.log {
        log.push_str(&serde_json::to_string(rec)?);
        log.push('\n');
    }
    fs::write(dir.join("search_log.jsonl"), log)?;
    Ok(vec![
        "frontier.csv",
        "frontier.json",
        "archive.csv",
        "search_log.jsonl",
    ])
}

/// d_avg and SRC of the archive when every point carries a true perplexity.
fn archive_replay(state: &SearchState) -> Option<crate::fixtures::ReplayReport> {
    let pts: Option<Vec<ReplayPoint>> = state
        .archive
        .points()
        .iter()
        .map(|p| {
            p.true_ppl.map(|t| ReplayPoint {
                id: p.config_key.clone(),
                latency_ms: p.cost.latency_ms,
                proxy_score: p.score.value,
                true_ppl: t,
            })
        })
        .collect();
    let pts = pts?;
    if pts.len() < 2 {
        return None;
    }
    match replay(&pts) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("replay metrics unavailable: {e}");
            None
        }
    }
}

pub fn cmd_search(args: &SearchArgs) -> Result<i32> {
    let start = Instant::now();
    let mut rc: RunConfig = read_json(&args.run_config)?;
    let base = args
        .run_config
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    if let Some(seed) = args.seed {
        rc.settings.rng_seed = seed;
    }
    if let Some(cap) = args.latency_cap_ms {
        rc.settings.latency_cap_ms = Some(cap);
    }
    if let Some(cap) = args.memory_cap_bytes {
        rc.settings.memory_cap_bytes = Some(cap);
    }
    if let Some(m) = args.frontier_mode {
        rc.settings.frontier_mode = m.into();
    }
    if let Some(name) = &args.device_profile {
        match &mut rc.cost {
            CostSpec::Analytic { profile, .. } => *profile = name.clone(),
            _ => {
                return Err(NasError::InvalidSettings(
                    "--device-profile needs an analytic cost provider".into(),
                ))
            }
        }
    }
    let output_dir = args
        .output_dir
        .clone()
        .or_else(|| rc.output_dir.as_ref().map(|p| relative_to(&base, p)))
        .unwrap_or_else(|| PathBuf::from("pareto-nas-out"));
    let space = rc.space.resolve()?;
    rc.settings.check()?;
    let proxy = build_proxy(&rc.proxy, args.jobs)?;

    let mut replay_configs = None;
    let cost: Box<dyn CostProvider> = match &rc.cost {
        CostSpec::Analytic { profile, shape } => Box::new(AnalyticCost {
            profile: resolve_profile(profile, &rc.device_profiles)?,
            shape: shape.unwrap_or_default(),
        }),
        CostSpec::Measure {
            command,
            shape,
            allow_parallel,
        } => Box::new(MeasuredCost {
            command: command.clone(),
            shape: shape.unwrap_or_default(),
            allow_parallel: *allow_parallel,
        }),
        CostSpec::Tabular { path, configs } => {
            if let Some(c) = configs {
                replay_configs = Some(read_configs(&relative_to(&base, c))?);
            }
            Box::new(TabularCost {
                table: CostTable::load(relative_to(&base, path))?,
            })
        }
    };

    let run = || match &replay_configs {
        Some(configs) => run_replay(configs, &rc.settings, proxy.as_ref(), cost.as_ref()),
        None => run_search(&space, &rc.settings, proxy.as_ref(), cost.as_ref()),
    };
    let (_, state) = match args.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| NasError::InvalidSettings(e.to_string()))?
            .install(run)?,
        None => run()?,
    };

    let names = write_search_outputs(&output_dir, &state)?;
    let mut artifacts = BTreeMap::new();
    for name in names {
        artifacts.insert(name.to_string(), file_sha256(&output_dir.join(name))?);
    }
    let manifest = RunManifest {
        command: std::env::args().collect::<Vec<_>>().join(" "),
        config_path: args.run_config.display().to_string(),
        seed: rc.settings.rng_seed,
        build: format!(
            "{} {}",
            env!("CARGO_PKG_VERSION"),
            option_env!("PARETO_NAS_GIT_REV").unwrap_or("unknown")
        ),
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts,
    };
    write_atomic(
        &output_dir.join("manifest.json"),
        (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes(),
    )?;

    let mut out = io::stdout().lock();
    writeln!(out, "iterations: {}", state.log.len())?;
    writeln!(out, "archive: {}", state.archive.len())?;
    writeln!(out, "frontier: {}", state.frontier.len())?;
    writeln!(out, "discarded: {}", state.discarded_total)?;
    if let Some(last) = state.log.last() {
        writeln!(out, "hypervolume: {}", last.hypervolume)?;
    }
    if let Some(r) = archive_replay(&state) {
        writeln!(out, "d_avg: {:.4}", r.d_avg)?;
        writeln!(out, "src: {:.4}", r.src)?;
    }
    writeln!(out, "output_dir: {}", output_dir.display())?;
    Ok(if state.exhausted_at.is_some() {
        EXIT_EXHAUSTED
    } else {
        EXIT_OK
    })
}

#[derive(Debug, Deserialize)]
struct RankRow {
    id: String,
    truth_quality: f64,
    proxy_score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrRow {
    pub top_percent: f64,
    pub m: usize,
    pub cr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub n: usize,
    pub src: f64,
    pub cr: Vec<CrRow>,
}

pub fn rank_report(
    truth: &[(String, f64)],
    proxy: &[(String, f64)],
    topk: &[f64],
) -> Result<RankReport> {
    let mut by_id: Vec<(&String, f64)> = proxy.iter().map(|(i, v)| (i, *v)).collect();
    by_id.sort_by(|a, b| a.0.cmp(b.0));
    let aligned: Vec<f64> = truth
        .iter()
        .map(|(id, _)| {
            by_id
                .binary_search_by(|p| p.0.cmp(id))
                .map(|i| by_id[i].1)
                .map_err(|_| NasError::IdMismatch(format!("no proxy score for {id}")))
        })
        .collect::<Result<_>>()?;
    let neg_truth: Vec<f64> = truth.iter().map(|(_, t)| -t).collect();
    let src = spearman(&aligned, &neg_truth)?;
    let cr = topk
        .iter()
        .map(|&k| {
            Ok(CrRow {
                top_percent: k,
                m: top_count(k, truth.len()),
                cr: common_ratio(truth, proxy, k)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RankReport {
        n: truth.len(),
        src,
        cr,
    })
}

pub fn cmd_rank(args: &RankArgs) -> Result<i32> {
    let (truth, proxy_scores) = match &args.configs {
        None => {
            let mut rdr = csv::Reader::from_path(&args.table)?;
            let rows: Vec<RankRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
            (
                rows.iter()
                    .map(|r| (r.id.clone(), r.truth_quality))
                    .collect::<Vec<_>>(),
                rows.iter()
                    .map(|r| (r.id.clone(), r.proxy_score))
                    .collect::<Vec<_>>(),
            )
        }
        Some(configs) => {
            let table = CostTable::load(&args.table)?;
            let proxy: Box<dyn Proxy> = match &args.plugin {
                Some(cmd) => Box::new(ExternalProxy::new(PluginCommand::new(
                    "sh",
                    ["-c", cmd.as_str()],
                ))),
                None => builtin(&args.proxy).ok_or_else(|| {
                    NasError::InvalidSettings(format!("unknown proxy {:?}", args.proxy))
                })?,
            };
            let mut truth = Vec::new();
            let mut scores = Vec::new();
            for c in read_configs(configs)? {
                let key = crate::cost::config_key(&c);
                let entry = table
                    .get(&key)
                    .ok_or_else(|| NasError::MissingEntry(key.clone()))?;
                let t = entry.true_ppl.ok_or_else(|| {
                    NasError::InvalidSettings(format!("row {key} has no true_ppl"))
                })?;
                truth.push((key.clone(), t));
                scores.push((key, proxy.score(&c)?.value));
            }
            (truth, scores)
        }
    };
    let report = rank_report(&truth, &proxy_scores, &args.topk)?;
    match args.format {
        Format::Json => print_json(&report)?,
        Format::Table => {
            let mut out = io::stdout().lock();
            writeln!(out, "n    {}", report.n)?;
            writeln!(out, "SRC  {:.4}", report.src)?;
            writeln!(out, "{:>8} {:>6} {:>8}", "top%", "m", "CR")?;
            for r in &report.cr {
                writeln!(out, "{:>8} {:>6} {:>8.4}", r.top_percent, r.m, r.cr)?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Deserialize)]
struct PointRow {
    id: String,
    score: f64,
    latency_ms: f64,
    peak_memory_bytes: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParetoSummary {
    pub mode: FrontierMode,
    pub n: usize,
    pub frontier: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_avg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub src: Option<f64>,
}

pub fn cmd_pareto(args: &ParetoArgs) -> Result<i32> {
    let mut rdr = csv::Reader::from_path(&args.points)?;
    let rows: Vec<PointRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    let pts: Vec<ObjectivePoint<String>> = rows
        .iter()
        .map(|r| ObjectivePoint::new(r.score, r.latency_ms, r.peak_memory_bytes, r.id.clone()))
        .collect();
    if let Some(p) = pts.iter().find(|p| !p.is_finite()) {
        return Err(NasError::Parse(format!(
            "non-finite objective for {}",
            p.payload
        )));
    }
    let frontier = extract(&pts, args.mode.into());
    let mut summary = ParetoSummary {
        mode: frontier.mode,
        n: pts.len(),
        frontier: frontier.points.iter().map(|p| p.payload.clone()).collect(),
        d_avg: None,
        src: None,
    };
    if let Some(truth) = &args.truth {
        let table = CostTable::load(truth)?;
        let replay_pts = rows
            .iter()
            .map(|r| {
                let t = table
                    .get(&r.id)
                    .and_then(|e| e.true_ppl)
                    .ok_or_else(|| NasError::IdMismatch(format!("no true_ppl for {}", r.id)))?;
                Ok(ReplayPoint {
                    id: r.id.clone(),
                    latency_ms: r.latency_ms,
                    proxy_score: r.score,
                    true_ppl: t,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let r = replay(&replay_pts)?;
        summary.d_avg = Some(r.d_avg);
        summary.src = Some(r.src);
    }
    if let Some(out) = &args.output {
        let mut w = csv::Writer::from_path(out)?;
        w.write_record(["id", "score", "latency_ms", "peak_memory_bytes"])?;
        for p in &frontier.points {
            w.write_record([
                p.payload.clone(),
                p.score.to_string(),
                p.latency_ms.to_string(),
                p.peak_memory_bytes.to_string(),
            ])?;
        }
        w.flush()?;
    }
    print_json(&summary)?;
    Ok(EXIT_OK)
}

pub fn cmd_verify_tables(format: Format) -> Result<i32> {
    let start = Instant::now();
    let report = verify_tables(&golden_rows()?)?;
    match format {
        Format::Json => print_json(&report)?,
        Format::Table => {
            let mut out = io::stdout().lock();
            for r in &report.rows {
                writeln!(
                    out,
                    "{:<8} {:<20} {:>8.1} {:>8.1} {}",
                    r.table_id,
                    r.model_id,
                    r.computed_m,
                    r.published_m,
                    if r.exact { "ok" } else { "DIFF" }
                )?;
            }
            writeln!(
                out,
                "{}/{} exact, max |delta| {:.1}M, {}",
                report.exact_matches,
                report.rows.len(),
                report.max_abs_delta_m,
                if report.pass { "PASS" } else { "FAIL" }
            )?;
        }
    }
    log::info!("verify-tables took {:?}", start.elapsed());
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILURE })
}

pub fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let space = space_preset(&args.space)
        .ok_or_else(|| NasError::InvalidSettings(format!("unknown space {:?}", args.space)))?;
    let cost = AnalyticCost {
        profile: resolve_profile(&args.device_profile, &BTreeMap::new())?,
        shape: QueryShape::default(),
    };
    let settings = SynthSettings {
        n: args.n,
        noise: args.noise,
        seed: args.seed,
        a: args.a,
        alpha: args.alpha,
    };
    let bench = synth_benchmark(&space, settings, &cost)?;
    let (csv_path, jsonl_path) = bench.write(&args.output_dir)?;
    print_json(&serde_json::json!({
        "rows": bench.rows.len(),
        "table": csv_path,
        "configs": jsonl_path,
    }))?;
    Ok(EXIT_OK)
}

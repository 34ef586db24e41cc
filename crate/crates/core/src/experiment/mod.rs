// SPDX-License-Identifier: Apache-2.0

//! Config-driven experiments and their reports.
//!
//! A run reads one JSON config, executes one experiment and writes
//! `report.json` plus `metrics.csv` (and `pareto.csv`, `dse_points.csv` for
//! sweeps) into the output directory. Reports are pure functions of the
//! resolved config, so identical inputs give byte-identical files.
//!
//! Seed precedence: `CAMFORMER_SEED`, then the config's `seed`. The resolved
//! seed replaces `noise.seed`.

pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attention::{
    camformer_attention, dense_attention_reference, margin_guarantee, recall_at_k, recall_bound,
    top_k_attention_reference, top_k_indices, SparsityConfig, ValueMatrix,
};
use crate::bacam::{pvt_error_stats, CamGeometry, Corner, NoiseConfig};
use crate::bitcore::{bipolar_dot, BitMatrix};
use crate::error::Error;
use crate::formats::{read_bit_matrix, read_int_matrix};
use crate::perfmodel::{
    dram_check, dse_sweep, simulate, AreaConfig, DramConfig, DseGrid, EnergyConfig, EventCounts, HardwareConfig,
    SimReport, Stage, TimingConfig, Workload,
};

pub use synth::{emit_synthetic, generate, Distribution, SyntheticSpec, SyntheticTensors, TensorPaths};

pub const REPORT_SCHEMA: u32 = 1;
pub const SEED_ENV: &str = "CAMFORMER_SEED";

/// Failure of a run, each class with its own process exit status.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("tensor input: {0}")]
    Tensor(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Tensor(_) => 2,
            RunError::Invariant(_) => 3,
            RunError::Output(_) => 4,
        }
    }
}

fn invariant(e: Error) -> RunError {
    RunError::Invariant(e.to_string())
}

fn config_err(e: Error) -> RunError {
    RunError::Config(e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Attn,
    NoiseStats,
    Recall,
    Perf,
    Dse,
    Dram,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Attn => "attn",
            ExperimentKind::NoiseStats => "noise-stats",
            ExperimentKind::Recall => "recall",
            ExperimentKind::Perf => "perf",
            ExperimentKind::Dse => "dse",
            ExperimentKind::Dram => "dram",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorInputs {
    pub queries: PathBuf,
    pub keys: PathBuf,
    pub values: PathBuf,
}

/// One experiment. Hardware sub-records left out take the preset's values;
/// fields left out of a given sub-record take `paper65nm` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub geometry: Option<CamGeometry>,
    #[serde(default)]
    pub sparsity: Option<SparsityConfig>,
    #[serde(default)]
    pub timing: Option<TimingConfig>,
    #[serde(default)]
    pub dram: Option<DramConfig>,
    #[serde(default)]
    pub energy: Option<EnergyConfig>,
    #[serde(default)]
    pub area: Option<AreaConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub workload: Workload,
    #[serde(default)]
    pub inputs: Option<TensorInputs>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    /// Relative to the config file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Keys searched per query; all keys when absent.
    #[serde(default)]
    pub valid_length: Option<usize>,
    /// noise-stats: samples for the mean error.
    #[serde(default)]
    pub trials: Option<u64>,
    /// noise-stats: samples for the maximum deviation.
    #[serde(default)]
    pub max_trials: Option<u64>,
    /// recall: minimum normalized score gap for the concentration bound.
    #[serde(default)]
    pub delta_min: Option<f64>,
    /// dram: query rate; the simulated throughput when absent.
    #[serde(default)]
    pub queries_per_s: Option<f64>,
    #[serde(default)]
    pub grid: Option<DseGrid>,
}

/// Command-line adjustments applied on top of a config file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOverrides {
    /// `(n, d_k, d_v)`; used when the config names no tensor files.
    pub synthetic: Option<(usize, usize, usize)>,
    pub output_dir: Option<PathBuf>,
    /// Raw value of the seed environment variable.
    pub seed_env: Option<String>,
}

impl RunOverrides {
    pub fn from_env() -> Self {
        Self {
            seed_env: std::env::var(SEED_ENV).ok(),
            ..Self::default()
        }
    }
}

/// A validated config with everything a run needs resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub hardware: HardwareConfig,
    pub seed: Option<u64>,
    pub base_dir: PathBuf,
    pub output_dir: PathBuf,
    pub config_hash: String,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, RunError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            RunError::Config(inner.to_string())
        } else {
            RunError::Config(format!("`{path}`: {inner}"))
        }
    })
}

fn is_stochastic(c: &ExperimentConfig) -> bool {
    match c.kind {
        ExperimentKind::NoiseStats | ExperimentKind::Recall => true,
        ExperimentKind::Attn => c.noise.sigma > 0.0 || c.inputs.is_none(),
        ExperimentKind::Perf | ExperimentKind::Dse | ExperimentKind::Dram => false,
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_config(path: &Path, overrides: &RunOverrides) -> Result<ResolvedConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let with_path = |e: RunError| match e {
        RunError::Config(m) => RunError::Config(format!("{}: {m}", path.display())),
        other => other,
    };
    let config = parse_config(&text).map_err(with_path)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    resolve(config, &base_dir, overrides).map_err(with_path)
}

pub fn resolve(
    mut config: ExperimentConfig,
    base_dir: &Path,
    overrides: &RunOverrides,
) -> Result<ResolvedConfig, RunError> {
    if let Some(raw) = &overrides.seed_env {
        let seed = raw
            .trim()
            .parse::<u64>()
            .map_err(|_| RunError::Config(format!("`{SEED_ENV}`: {raw:?} is not an unsigned 64-bit integer")))?;
        config.seed = Some(seed);
    }
    if let Some((n, d_k, d_v)) = overrides.synthetic {
        if config.inputs.is_none() {
            let base = config.synthetic.unwrap_or(SyntheticSpec::new(n, d_k, d_v));
            config.synthetic = Some(SyntheticSpec { n, d_k, d_v, ..base });
        }
    }
    if is_stochastic(&config) && config.seed.is_none() {
        return Err(RunError::Config(format!(
            "`seed`: required for {} experiments (or set {SEED_ENV})",
            config.kind.name()
        )));
    }
    if let Some(seed) = config.seed {
        config.noise.seed = seed;
    }

    let mut hardware = match &config.preset {
        Some(name) => HardwareConfig::preset(name).map_err(config_err)?,
        None => HardwareConfig::default(),
    };
    if let Some(g) = config.geometry {
        hardware.geometry = g;
    }
    if let Some(s) = config.sparsity {
        hardware.sparsity = s;
    }
    if let Some(t) = &config.timing {
        hardware.timing = t.clone();
    }
    if let Some(d) = &config.dram {
        hardware.dram = d.clone();
    }
    if let Some(e) = &config.energy {
        hardware.energy = e.clone();
    }
    if let Some(a) = &config.area {
        hardware.area = a.clone();
    }
    hardware.validate().map_err(config_err)?;
    config.noise.validate().map_err(config_err)?;
    config.workload.validate().map_err(config_err)?;
    if let Some(s) = &config.synthetic {
        s.validate().map_err(config_err)?;
    }
    match config.kind {
        ExperimentKind::Attn | ExperimentKind::Recall => {
            if config.inputs.is_none() && config.synthetic.is_none() {
                return Err(RunError::Config(
                    "`inputs`: tensor files or `synthetic` (or --synthetic n,d_k,d_v) are required".into(),
                ));
            }
        }
        ExperimentKind::NoiseStats => {
            for (name, v) in [("trials", config.trials), ("max_trials", config.max_trials)] {
                if v == Some(0) {
                    return Err(RunError::Config(format!("`{name}`: must be >= 1")));
                }
            }
        }
        ExperimentKind::Dram => {
            if let Some(q) = config.queries_per_s {
                if !(q > 0.0 && q.is_finite()) {
                    return Err(RunError::Config("`queries_per_s`: must be > 0".into()));
                }
            }
        }
        ExperimentKind::Perf | ExperimentKind::Dse => {}
    }
    if let Some(d) = config.delta_min {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(RunError::Config("`delta_min`: must be >= 0".into()));
        }
    }

    let canonical = serde_json::to_vec(&config).map_err(|e| RunError::Invariant(e.to_string()))?;
    let config_hash = hex(&Sha256::digest(&canonical));
    let output_dir = match (&overrides.output_dir, &config.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base_dir.join(o),
        (None, None) => base_dir.join("camformer-out"),
    };
    Ok(ResolvedConfig {
        seed: config.seed,
        config,
        hardware,
        base_dir: base_dir.to_path_buf(),
        output_dir,
        config_hash,
    })
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub metric: String,
    pub value: f64,
    pub unit: &'static str,
}

fn m(metric: impl Into<String>, value: f64, unit: &'static str) -> Metric {
    Metric {
        metric: metric.into(),
        value,
        unit,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: u32,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub results: serde_json::Value,
}

/// Where a run wrote its files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

struct Tensors {
    queries: BitMatrix,
    keys: BitMatrix,
    values: ValueMatrix,
    source: &'static str,
}

fn load_tensors(r: &ResolvedConfig) -> Result<Tensors, RunError> {
    let tensor_err = |e: Error| RunError::Tensor(e.to_string());
    let (queries, keys, values, source) = match (&r.config.inputs, &r.config.synthetic) {
        (Some(inputs), _) => {
            let q = read_bit_matrix(&r.base_dir.join(&inputs.queries)).map_err(tensor_err)?;
            let k = read_bit_matrix(&r.base_dir.join(&inputs.keys)).map_err(tensor_err)?;
            let v = read_int_matrix(&r.base_dir.join(&inputs.values)).map_err(tensor_err)?;
            (q, k, v, "files")
        }
        (None, Some(spec)) => {
            let seed = r.seed.ok_or_else(|| RunError::Config("`seed`: required".into()))?;
            let t = generate(spec, seed).map_err(config_err)?;
            (t.queries, t.keys, t.values, "synthetic")
        }
        (None, None) => return Err(RunError::Config("`inputs`: required".into())),
    };
    if queries.n_cols() != keys.n_cols() {
        return Err(RunError::Tensor(format!(
            "query width {} does not match key width {}",
            queries.n_cols(),
            keys.n_cols()
        )));
    }
    if values.matrix.n_rows() != keys.n_rows() {
        return Err(RunError::Tensor(format!(
            "{} value rows for {} keys",
            values.matrix.n_rows(),
            keys.n_rows()
        )));
    }
    Ok(Tensors {
        queries,
        keys,
        values: ValueMatrix::from(&values.matrix),
        source,
    })
}

fn valid_length(r: &ResolvedConfig, n: usize) -> Result<usize, RunError> {
    match r.config.valid_length {
        None => Ok(n),
        Some(l) if (1..=n).contains(&l) => Ok(l),
        Some(l) => Err(RunError::Config(format!("`valid_length`: {l} not in 1..={n}"))),
    }
}

/// Noise of query `q`: its tile streams never collide with another query's.
fn query_noise(noise: &NoiseConfig, q: usize) -> NoiseConfig {
    NoiseConfig {
        seed: noise.seed ^ ((q as u64) << 32),
        ..*noise
    }
}

/// Relative tolerance of the attention output against the dense oracle.
pub const ATTN_TOLERANCE: f64 = 1.0 / 32.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
struct AttnQuery {
    selected: Vec<usize>,
    merges: usize,
    output: Vec<f32>,
    max_dev_dense: f64,
    max_dev_topk: f64,
    recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct AttnResults {
    source: &'static str,
    n: usize,
    d_k: usize,
    d_v: usize,
    valid_length: usize,
    sigma: f64,
    k: usize,
    /// max |out - oracle| / max |oracle| over each query's outputs.
    max_dev_dense: f64,
    max_dev_topk: f64,
    tolerance: f64,
    within_tolerance_dense: bool,
    mean_recall: f64,
    events: EventCounts,
    queries: Vec<AttnQuery>,
}

fn normalized_dev(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let dev = got.iter().zip(want).fold(0.0f64, |a, (g, w)| a.max((g - w).abs()));
    if scale > 0.0 {
        dev / scale
    } else {
        dev
    }
}

fn run_attn(r: &ResolvedConfig) -> Result<(serde_json::Value, Vec<Metric>), RunError> {
    let t = load_tensors(r)?;
    let hw = &r.hardware;
    let len = valid_length(r, t.keys.n_rows())?;
    let prefix = t.keys.prefix(len).map_err(invariant)?;
    let prefix_values = ValueMatrix::new(
        len,
        t.values.n_cols(),
        (0..len).flat_map(|i| t.values.row(i).to_vec()).collect(),
    )
    .map_err(invariant)?;
    let k = hw.sparsity.k.min(len);
    let mut queries = Vec::new();
    let mut events = EventCounts::default();
    for (qi, q) in t.queries.rows().iter().enumerate() {
        let noise = query_noise(&r.config.noise, qi);
        let (out, trace) =
            camformer_attention(q, &t.keys, &t.values, &hw.geometry, &noise, &hw.sparsity, len).map_err(invariant)?;
        let got: Vec<f64> = out.iter().map(|x| x.to_f64()).collect();
        let dense = dense_attention_reference(q, &prefix, &prefix_values).map_err(invariant)?;
        let (topk, exact_idx) = top_k_attention_reference(q, &prefix, &prefix_values, k).map_err(invariant)?;
        let selected = trace.selected.indices();
        let hits = exact_idx.iter().filter(|i| selected.contains(i)).count();
        let c = EventCounts::from_trace(&trace, &hw.geometry);
        events = sum_counts(&events, &c);
        queries.push(AttnQuery {
            selected,
            merges: trace.merges,
            output: out.iter().map(|x| x.to_f32()).collect(),
            max_dev_dense: normalized_dev(&got, &dense),
            max_dev_topk: normalized_dev(&got, &topk),
            recall: hits as f64 / k as f64,
        });
    }
    let max_dense = queries.iter().fold(0.0f64, |a, q| a.max(q.max_dev_dense));
    let max_topk = queries.iter().fold(0.0f64, |a, q| a.max(q.max_dev_topk));
    let mean_recall = queries.iter().map(|q| q.recall).sum::<f64>() / queries.len() as f64;
    let res = AttnResults {
        source: t.source,
        n: t.keys.n_rows(),
        d_k: t.keys.n_cols(),
        d_v: t.values.n_cols(),
        valid_length: len,
        sigma: r.config.noise.sigma,
        k,
        max_dev_dense: max_dense,
        max_dev_topk: max_topk,
        tolerance: ATTN_TOLERANCE,
        within_tolerance_dense: max_dense <= ATTN_TOLERANCE,
        mean_recall,
        events,
        queries,
    };
    let metrics = vec![
        m("queries", res.queries.len() as f64, "count"),
        m("valid_length", len as f64, "keys"),
        m("k", k as f64, "keys"),
        m("max_dev_dense", max_dense, "fraction"),
        m("max_dev_topk", max_topk, "fraction"),
        m(
            "within_tolerance_dense",
            res.within_tolerance_dense as u8 as f64,
            "bool",
        ),
        m("mean_recall", mean_recall, "fraction"),
    ];
    Ok((to_value(&res)?, metrics))
}

fn sum_counts(a: &EventCounts, b: &EventCounts) -> EventCounts {
    EventCounts {
        cam_programs: a.cam_programs + b.cam_programs,
        cam_searches: a.cam_searches + b.cam_searches,
        adc_conversions: a.adc_conversions + b.adc_conversions,
        key_sram_bits: a.key_sram_bits + b.key_sram_bits,
        top2_selections: a.top2_selections + b.top2_selections,
        merges: a.merges + b.merges,
        lut_lookups: a.lut_lookups + b.lut_lookups,
        divisions: a.divisions + b.divisions,
        value_sram_write_bits: a.value_sram_write_bits + b.value_sram_write_bits,
        value_sram_read_bits: a.value_sram_read_bits + b.value_sram_read_bits,
        macs: a.macs + b.macs,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct CornerStats {
    corner: Corner,
    effective_sigma: f64,
    offset: f64,
    mean_abs_error: f64,
    /// `sigma * sqrt(2 / pi)`, the half-normal mean without offset or clamping.
    half_normal_mean: f64,
    mean_trials: u64,
    max_deviation: f64,
    max_trials: u64,
}

fn run_noise_stats(r: &ResolvedConfig) -> Result<(serde_json::Value, Vec<Metric>), RunError> {
    let trials = r.config.trials.unwrap_or(1_000_000);
    let max_trials = r.config.max_trials.unwrap_or(10_000);
    let mut corners = Vec::new();
    let mut metrics = Vec::new();
    for (i, corner) in [Corner::TT, Corner::SS, Corner::FF].into_iter().enumerate() {
        let noise = NoiseConfig {
            corner,
            ..r.config.noise
        };
        let i = i as u64;
        let mean = pvt_error_stats(&r.hardware.geometry, &mut noise.substream(2 * i), trials).map_err(invariant)?;
        let max =
            pvt_error_stats(&r.hardware.geometry, &mut noise.substream(2 * i + 1), max_trials).map_err(invariant)?;
        let sigma = noise.effective_sigma();
        let s = CornerStats {
            corner,
            effective_sigma: sigma,
            offset: noise.offset(),
            mean_abs_error: mean.mean_abs_error,
            half_normal_mean: sigma * (2.0 / std::f64::consts::PI).sqrt(),
            mean_trials: trials,
            max_deviation: max.max_deviation,
            max_trials,
        };
        let tag = format!("{corner:?}").to_lowercase();
        metrics.push(m(format!("{tag}_mean_abs_error"), s.mean_abs_error, "fraction"));
        metrics.push(m(format!("{tag}_max_deviation"), s.max_deviation, "fraction"));
        corners.push(s);
    }
    Ok((
        to_value(&serde_json::json!({ "sigma": r.config.noise.sigma, "corners": corners }))?,
        metrics,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct RecallQuery {
    pipeline_recall: f64,
    single_stage_recall: f64,
    epsilon: f64,
    margin: Option<f64>,
    certified: bool,
}

fn run_recall(r: &ResolvedConfig) -> Result<(serde_json::Value, Vec<Metric>), RunError> {
    let t = load_tensors(r)?;
    let hw = &r.hardware;
    let len = valid_length(r, t.keys.n_rows())?;
    let k = hw.sparsity.k.min(len);
    let prefix = t.keys.prefix(len).map_err(invariant)?;
    let mut rows = Vec::new();
    for (qi, q) in t.queries.rows().iter().enumerate() {
        let noise = query_noise(&r.config.noise, qi);
        let (_, trace) =
            camformer_attention(q, &t.keys, &t.values, &hw.geometry, &noise, &hw.sparsity, len).map_err(invariant)?;
        let exact: Vec<f64> = prefix
            .rows()
            .iter()
            .map(|key| bipolar_dot(q, key).map(|d| d as f64))
            .collect::<Result<_, _>>()
            .map_err(invariant)?;
        let noisy: Vec<f64> = trace.scores.iter().map(|&s| s as f64).collect();
        let truth = top_k_indices(&exact, k);
        let selected = trace.selected.indices();
        let pipeline_recall = truth.iter().filter(|i| selected.contains(i)).count() as f64 / k as f64;
        let single_stage_recall = recall_at_k(&exact, &noisy, k);
        let epsilon = exact.iter().zip(&noisy).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let (margin, certified) = if k < len {
            let certified = margin_guarantee(&exact, &noisy, k, epsilon).map_err(invariant)?;
            (
                Some(crate::attention::bounds::margin(&exact, k).map_err(invariant)?),
                certified,
            )
        } else {
            (None, false)
        };
        if certified && single_stage_recall < 1.0 {
            return Err(RunError::Invariant(format!(
                "query {qi}: margin exceeds 2 * epsilon = {} but recall@{k} = {single_stage_recall}",
                2.0 * epsilon
            )));
        }
        rows.push(RecallQuery {
            pipeline_recall,
            single_stage_recall,
            epsilon,
            margin,
            certified,
        });
    }
    let n_q = rows.len() as f64;
    let mean_pipeline = rows.iter().map(|x| x.pipeline_recall).sum::<f64>() / n_q;
    let min_pipeline = rows.iter().fold(1.0f64, |a, x| a.min(x.pipeline_recall));
    let mean_single = rows.iter().map(|x| x.single_stage_recall).sum::<f64>() / n_q;
    let certified = rows.iter().filter(|x| x.certified).count();
    let delta_min = r.config.delta_min.unwrap_or(0.1);
    let bound = recall_bound(k, len, t.keys.n_cols(), delta_min).map_err(invariant)?;
    let metrics = vec![
        m("queries", n_q, "count"),
        m("k", k as f64, "keys"),
        m("mean_pipeline_recall", mean_pipeline, "fraction"),
        m("min_pipeline_recall", min_pipeline, "fraction"),
        m("mean_single_stage_recall", mean_single, "fraction"),
        m("certified_queries", certified as f64, "count"),
        m("margin_violations", 0.0, "count"),
        m("miss_probability_bound", bound, "bound"),
    ];
    let res = serde_json::json!({
        "source": t.source,
        "n": t.keys.n_rows(),
        "d_k": t.keys.n_cols(),
        "valid_length": len,
        "k": k,
        "sigma": r.config.noise.sigma,
        "delta_min": delta_min,
        "miss_probability_bound": bound,
        "mean_pipeline_recall": mean_pipeline,
        "min_pipeline_recall": min_pipeline,
        "mean_single_stage_recall": mean_single,
        "certified_queries": certified,
        "margin_violations": 0,
        "queries": rows,
    });
    Ok((to_value(&res)?, metrics))
}

fn sim_metrics(s: &SimReport) -> Vec<Metric> {
    let mut out = vec![
        m("throughput", s.timing.throughput_qry_per_ms, "qry/ms"),
        m("period", s.timing.period_ns, "ns"),
    ];
    for st in &s.timing.stages {
        out.push(m(format!("{}_latency", st.stage.name()), st.latency_ns, "ns"));
        out.push(m(format!("{}_stall", st.stage.name()), st.stall_ns, "ns"));
    }
    out.extend([
        m("energy_per_query", s.energy.energy_per_query_nj, "nJ"),
        m("energy_efficiency", s.energy.efficiency_qry_per_mj, "qry/mJ"),
        m("dynamic_power", s.power.dynamic_w, "W"),
        m("static_power", s.power.static_w, "W"),
        m("power", s.power.total_w, "W"),
        m("area", s.area.total_mm2, "mm2"),
    ]);
    for c in &s.energy.components {
        out.push(m(format!("energy_share_{}", c.name), c.percent, "%"));
    }
    for c in &s.energy.stages {
        out.push(m(format!("energy_share_{}", c.name), c.percent, "%"));
    }
    out.push(m("area_share_sram", s.area.sram_percent, "%"));
    for b in &s.area.blocks {
        out.push(m(format!("area_share_{}", b.name), b.percent, "%"));
    }
    out.extend(dram_metrics(&s.dram));
    out
}

fn dram_metrics(d: &crate::perfmodel::DramReport) -> Vec<Metric> {
    vec![
        m("dram_bytes_per_query", d.bytes_per_query as f64, "B"),
        m("dram_rows_per_page", d.rows_per_page as f64, "rows"),
        m("dram_activations_per_query", d.activations_per_query as f64, "count"),
        m("dram_bandwidth", d.bandwidth_gb_per_s, "GB/s"),
        m("dram_latency_hidden", d.latency_hidden as u8 as f64, "bool"),
        m("dram_energy_per_query", d.energy_nj_per_query, "nJ"),
    ]
}

fn run_perf(r: &ResolvedConfig) -> Result<(serde_json::Value, Vec<Metric>), RunError> {
    let s = simulate(&r.config.workload, &r.hardware).map_err(config_err)?;
    check_report(&s)?;
    Ok((to_value(&s)?, sim_metrics(&s)))
}

/// Structural invariants every simulation report must satisfy.
fn check_report(s: &SimReport) -> Result<(), RunError> {
    let fail = |what: &str| Err(RunError::Invariant(what.to_string()));
    if s.timing.stages.iter().any(|st| st.stall_ns < 0.0) {
        return fail("negative stall");
    }
    if (s.timing.throughput_qry_per_ms * s.timing.period_ns - 1e6).abs() > 1e-6 {
        return fail("throughput is not the inverse period");
    }
    for shares in [&s.energy.components, &s.energy.stages, &s.area.blocks] {
        let sum: f64 = shares.iter().map(|x| x.percent).sum();
        if s.energy.energy_per_query_nj > 0.0 && (sum - 100.0).abs() > 1e-6 {
            return fail("breakdown does not sum to 100%");
        }
    }
    Ok(())
}

fn run_dram(r: &ResolvedConfig) -> Result<(serde_json::Value, Vec<Metric>), RunError> {
    let hw = &r.hardware;
    let qps = match r.config.queries_per_s {
        Some(q) => q,
        None => simulate(&r.config.workload, hw)
            .map_err(config_err)?
            .timing
            .queries_per_s(),
    };
    let d = dram_check(&r.config.workload, &hw.geometry, &hw.sparsity, &hw.dram, qps).map_err(config_err)?;
    let mut metrics = vec![m("queries_per_s", qps, "qry/s")];
    metrics.extend(dram_metrics(&d));
    Ok((
        to_value(&serde_json::json!({ "queries_per_s": qps, "dram": d }))?,
        metrics,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct PointRow {
    index: usize,
    n_mac: u32,
    k: usize,
    cam_h: usize,
    cam_w: usize,
    sys_clock_ghz: f64,
    cam_clock_ghz: f64,
    throughput_qry_per_ms: f64,
    power_w: f64,
    area_mm2: f64,
    energy_per_query_nj: f64,
    bottleneck: Stage,
    pareto: bool,
}

fn run_dse(r: &ResolvedConfig) -> Result<(serde_json::Value, Vec<Metric>, Vec<PointRow>), RunError> {
    let grid = r.config.grid.clone().unwrap_or_default();
    let res = dse_sweep(&r.config.workload, &r.hardware, &grid).map_err(config_err)?;
    for p in &res.points {
        check_report(&p.report)?;
    }
    let rows: Vec<PointRow> = res
        .points
        .iter()
        .map(|p| PointRow {
            index: p.index,
            n_mac: p.params.n_mac,
            k: p.params.k,
            cam_h: p.params.cam_h,
            cam_w: p.params.cam_w,
            sys_clock_ghz: p.params.sys_clock_ghz,
            cam_clock_ghz: p.params.cam_clock_ghz,
            throughput_qry_per_ms: p.report.timing.throughput_qry_per_ms,
            power_w: p.report.power.total_w,
            area_mm2: p.report.area.total_mm2,
            energy_per_query_nj: p.report.energy.energy_per_query_nj,
            bottleneck: p.report.timing.bottleneck,
            pareto: res.pareto.contains(&p.index),
        })
        .collect();
    let best = rows.iter().fold(0.0f64, |a, p| a.max(p.throughput_qry_per_ms));
    let metrics = vec![
        m("points", rows.len() as f64, "count"),
        m("pareto_points", res.pareto.len() as f64, "count"),
        m("best_throughput", best, "qry/ms"),
    ];
    Ok((to_value(&res)?, metrics, rows))
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, RunError> {
    serde_json::to_value(v).map_err(|e| RunError::Invariant(format!("report serialization: {e}")))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), RunError> {
    let out_err = |e: csv::Error| RunError::Output(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(out_err)?;
    for row in rows {
        w.serialize(row).map_err(out_err)?;
    }
    w.flush()
        .map_err(|e| RunError::Output(format!("{}: {e}", path.display())))
}

/// Executes a resolved config and writes its reports.
pub fn execute(r: &ResolvedConfig) -> Result<RunSummary, RunError> {
    let mut extra: Option<Vec<PointRow>> = None;
    let (results, metrics) = match r.config.kind {
        ExperimentKind::Attn => run_attn(r)?,
        ExperimentKind::NoiseStats => run_noise_stats(r)?,
        ExperimentKind::Recall => run_recall(r)?,
        ExperimentKind::Perf => run_perf(r)?,
        ExperimentKind::Dram => run_dram(r)?,
        ExperimentKind::Dse => {
            let (v, m, rows) = run_dse(r)?;
            extra = Some(rows);
            (v, m)
        }
    };
    let report = Report {
        schema: REPORT_SCHEMA,
        kind: r.config.kind,
        config_hash: r.config_hash.clone(),
        seed: r.seed,
        preset: r.config.preset.clone(),
        results,
    };
    let dir = &r.output_dir;
    fs::create_dir_all(dir).map_err(|e| RunError::Output(format!("{}: {e}", dir.display())))?;
    let report_path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| RunError::Invariant(e.to_string()))?;
    text.push('\n');
    fs::write(&report_path, text).map_err(|e| RunError::Output(format!("{}: {e}", report_path.display())))?;
    let metrics_path = dir.join("metrics.csv");
    write_csv(&metrics_path, &metrics)?;
    let mut files = vec![report_path, metrics_path];
    if let Some(rows) = extra {
        let points = dir.join("dse_points.csv");
        write_csv(&points, &rows)?;
        let pareto = dir.join("pareto.csv");
        let front: Vec<&PointRow> = rows.iter().filter(|p| p.pareto).collect();
        write_csv(&pareto, &front)?;
        files.extend([points, pareto]);
    }
    Ok(RunSummary {
        output_dir: dir.clone(),
        files,
    })
}

/// Loads, validates and executes the config at `path`.
pub fn run_experiment(path: &Path, overrides: &RunOverrides) -> Result<RunSummary, RunError> {
    let resolved = load_config(path, overrides)?;
    execute(&resolved)
}

// SPDX-License-Identifier: Apache-2.0

//! Python bindings.
//!
//! Bipolar vectors cross the boundary as lists of +1/-1 ints. Config records
//! cross as dicts and go through the same serde validation as JSON configs,
//! so unknown keys are rejected here too.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use camformer_core::attention::{self as attn, Bf16, SparsityConfig, ValueMatrix};
use camformer_core::bacam::{CamGeometry, NoiseConfig};
use camformer_core::bitcore::{self, pack_bipolar};
use camformer_core::experiment::{self, Distribution, RunError, RunOverrides, SyntheticSpec};
use camformer_core::formats;
use camformer_core::perfmodel::{self, DseGrid, HardwareConfig, Workload};

create_exception!(
    camformer,
    ConfigError,
    PyValueError,
    "Invalid config or parameter (CLI exit 1)."
);
create_exception!(
    camformer,
    TensorError,
    PyOSError,
    "Missing or corrupt tensor file (CLI exit 2)."
);
create_exception!(
    camformer,
    InvariantError,
    PyRuntimeError,
    "Internal invariant violation (CLI exit 3)."
);

fn core_err(e: camformer_core::Error) -> PyErr {
    match e {
        camformer_core::Error::Io { .. }
        | camformer_core::Error::BadMagic { .. }
        | camformer_core::Error::Corrupt { .. } => TensorError::new_err(e.to_string()),
        other => ConfigError::new_err(other.to_string()),
    }
}

fn run_err(e: RunError) -> PyErr {
    match e {
        RunError::Config(m) => ConfigError::new_err(m),
        RunError::Tensor(m) => TensorError::new_err(m),
        RunError::Invariant(m) => InvariantError::new_err(m),
        RunError::Output(m) => PyOSError::new_err(m),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| InvariantError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>, what: &str) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| ConfigError::new_err(format!("{what}: {e}")))
}

fn bipolar(values: &[i64]) -> PyResult<bitcore::BitVector> {
    let narrow: Vec<i8> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| match v {
            1 => Ok(1),
            -1 => Ok(-1),
            _ => Err(ConfigError::new_err(format!("element {i} is {v}, expected +1 or -1"))),
        })
        .collect::<PyResult<_>>()?;
    pack_bipolar(&narrow).map_err(core_err)
}

/// Binary matrix, one bipolar row per key or query.
#[pyclass(module = "camformer", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct BitMatrix {
    inner: bitcore::BitMatrix,
}

#[pymethods]
impl BitMatrix {
    #[new]
    fn new(rows: Vec<Vec<i64>>) -> PyResult<Self> {
        let rows = rows.iter().map(|r| bipolar(r)).collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: bitcore::BitMatrix::new(rows).map_err(core_err)?,
        })
    }

    /// Reads a BACAM1 file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: formats::read_bit_matrix(&path).map_err(core_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        formats::write_bit_matrix(&path, &self.inner).map_err(core_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n_rows(), self.inner.n_cols())
    }

    fn to_bipolar(&self) -> Vec<Vec<i8>> {
        self.inner.rows().iter().map(|r| r.to_bipolar()).collect()
    }

    fn row(&self, i: usize) -> PyResult<Vec<i8>> {
        if i >= self.inner.n_rows() {
            return Err(pyo3::exceptions::PyIndexError::new_err(i));
        }
        Ok(self.inner.row(i).to_bipolar())
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __repr__(&self) -> String {
        format!("BitMatrix(rows={}, cols={})", self.inner.n_rows(), self.inner.n_cols())
    }
}

/// Output and trace of one query.
#[pyclass(module = "camformer", frozen, get_all)]
struct AttentionResult {
    /// BF16 outputs widened to float.
    output: Vec<f32>,
    /// Attended key indices, best first.
    selected: Vec<usize>,
    /// Association score of every valid key.
    scores: Vec<i32>,
    /// Softmax weights aligned with `selected`.
    weights: Vec<f32>,
    merges: usize,
}

#[pymethods]
impl AttentionResult {
    fn __repr__(&self) -> String {
        format!(
            "AttentionResult(selected={}, merges={})",
            self.selected.len(),
            self.merges
        )
    }
}

fn value_matrix(values: &[Vec<f64>]) -> PyResult<ValueMatrix> {
    let cols = values.first().map_or(0, Vec::len);
    if values.iter().any(|r| r.len() != cols) {
        return Err(ConfigError::new_err("values rows differ in length"));
    }
    let flat: Vec<f64> = values.iter().flatten().copied().collect();
    ValueMatrix::from_f64(values.len(), cols, &flat).map_err(core_err)
}

/// Runs one query through the full pipeline.
#[pyfunction]
#[pyo3(signature = (query, keys, values, *, sigma=0.0, seed=0, cam_h=16, cam_w=None, ideal_adc=true, k1=2, group=16, k=32, valid_length=None))]
#[allow(clippy::too_many_arguments)]
fn camformer_attention(
    query: Vec<i64>,
    keys: &BitMatrix,
    values: Vec<Vec<f64>>,
    sigma: f64,
    seed: u64,
    cam_h: usize,
    cam_w: Option<usize>,
    ideal_adc: bool,
    k1: usize,
    group: usize,
    k: usize,
    valid_length: Option<usize>,
) -> PyResult<AttentionResult> {
    let q = bipolar(&query)?;
    let geometry = CamGeometry {
        cam_h,
        cam_w: cam_w.unwrap_or(q.len().min(64)),
        adc_ideal_full_scale: ideal_adc,
        ..CamGeometry::default()
    };
    let noise = NoiseConfig {
        sigma,
        seed,
        ..NoiseConfig::default()
    };
    let sparsity = SparsityConfig { k1, group, k };
    let v = value_matrix(&values)?;
    let len = valid_length.unwrap_or(keys.inner.n_rows());
    let (out, trace) =
        attn::camformer_attention(&q, &keys.inner, &v, &geometry, &noise, &sparsity, len).map_err(core_err)?;
    Ok(AttentionResult {
        output: out.iter().map(|x| x.to_f32()).collect(),
        selected: trace.selected.indices(),
        weights: trace.weights.entries.iter().map(|&(_, w)| w.to_f32()).collect(),
        scores: trace.scores,
        merges: trace.merges,
    })
}

/// Dense softmax attention in f64 over bipolar Q and K.
#[pyfunction]
fn dense_attention_reference(query: Vec<i64>, keys: &BitMatrix, values: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let q = bipolar(&query)?;
    attn::dense_attention_reference(&q, &keys.inner, &value_matrix(&values)?).map_err(core_err)
}

#[pyfunction]
fn bipolar_dot(a: Vec<i64>, b: Vec<i64>) -> PyResult<i64> {
    bitcore::bipolar_dot(&bipolar(&a)?, &bipolar(&b)?).map_err(core_err)
}

/// Nearest BF16 value, ties to even.
#[pyfunction]
fn bf16_round(x: f64) -> f64 {
    Bf16::from_f64(x).to_f64()
}

#[pyfunction]
fn bf16_bits(x: f64) -> u16 {
    Bf16::from_f64(x).to_bits()
}

#[pyfunction]
fn recall_bound(k: usize, n: usize, m: usize, delta_min: f64) -> PyResult<f64> {
    attn::recall_bound(k, n, m, delta_min).map_err(core_err)
}

fn hardware(preset: Option<&str>, overrides: Option<&Bound<'_, PyAny>>) -> PyResult<HardwareConfig> {
    let base = match preset {
        Some(name) => HardwareConfig::preset(name).map_err(core_err)?,
        None => HardwareConfig::default(),
    };
    let Some(obj) = overrides else {
        return Ok(base);
    };
    // Merge the given sections over the preset, one sub-record at a time.
    let mut merged = serde_json::to_value(&base).map_err(|e| InvariantError::new_err(e.to_string()))?;
    let patch: serde_json::Value = from_py(obj, "hardware")?;
    let Some(patch) = patch.as_object() else {
        return Err(ConfigError::new_err("hardware: expected a dict"));
    };
    for (k, v) in patch {
        merged[k] = v.clone();
    }
    serde_json::from_value(merged).map_err(|e| ConfigError::new_err(format!("hardware: {e}")))
}

fn workload(obj: Option<&Bound<'_, PyAny>>) -> PyResult<Workload> {
    obj.map_or(Ok(Workload::default()), |o| from_py(o, "workload"))
}

/// Timing, energy, power, area and DRAM report as a dict.
#[pyfunction]
#[pyo3(signature = (workload=None, hardware=None, preset=Some("paper65nm")))]
fn simulate<'py>(
    py: Python<'py>,
    workload: Option<&Bound<'py, PyAny>>,
    hardware: Option<&Bound<'py, PyAny>>,
    preset: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let hw = self::hardware(preset, hardware)?;
    let report = perfmodel::simulate(&self::workload(workload)?, &hw).map_err(core_err)?;
    to_py(py, &report)
}

/// Grid sweep; returns `{"points": [...], "pareto": [...]}`.
#[pyfunction]
#[pyo3(signature = (grid, workload=None, hardware=None, preset=Some("paper65nm")))]
fn dse_sweep<'py>(
    py: Python<'py>,
    grid: &Bound<'py, PyAny>,
    workload: Option<&Bound<'py, PyAny>>,
    hardware: Option<&Bound<'py, PyAny>>,
    preset: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let grid: DseGrid = from_py(grid, "grid")?;
    let hw = self::hardware(preset, hardware)?;
    let res = perfmodel::dse_sweep(&self::workload(workload)?, &hw, &grid).map_err(core_err)?;
    to_py(py, &res)
}

/// Runs a JSON config like `camformer run`; returns the written paths.
#[pyfunction]
#[pyo3(signature = (config, *, out=None, synthetic=None, seed=None))]
fn run_experiment(
    config: PathBuf,
    out: Option<PathBuf>,
    synthetic: Option<(usize, usize, usize)>,
    seed: Option<u64>,
) -> PyResult<Vec<PathBuf>> {
    let mut overrides = RunOverrides::from_env();
    overrides.output_dir = out;
    overrides.synthetic = synthetic;
    if let Some(s) = seed {
        overrides.seed_env = Some(s.to_string());
    }
    let summary = experiment::run_experiment(&config, &overrides).map_err(run_err)?;
    Ok(summary.files)
}

/// Writes seeded `queries.bacam`, `keys.bacam` and `values.baint` under `out`.
#[pyfunction]
#[pyo3(signature = (out, n, d_k, d_v, seed, *, queries=1, distribution="uniform", value_bits=8))]
#[allow(clippy::too_many_arguments)]
fn emit_synthetic(
    out: PathBuf,
    n: usize,
    d_k: usize,
    d_v: usize,
    seed: u64,
    queries: usize,
    distribution: &str,
    value_bits: u8,
) -> PyResult<(PathBuf, PathBuf, PathBuf)> {
    let distribution = match distribution {
        "uniform" => Distribution::Uniform,
        "adversarial-clustered" => Distribution::AdversarialClustered,
        other => return Err(ConfigError::new_err(format!("distribution: unknown {other:?}"))),
    };
    let spec = SyntheticSpec {
        queries,
        distribution,
        value_bits,
        ..SyntheticSpec::new(n, d_k, d_v)
    };
    let (_, p) = experiment::emit_synthetic(&out, &spec, seed).map_err(core_err)?;
    Ok((p.queries, p.keys, p.values))
}

/// Reads a BAINT1 file as `(rows, bits, signed)`.
#[pyfunction]
fn read_int_matrix<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let q = formats::read_int_matrix(&path).map_err(core_err)?;
    let rows: Vec<Vec<i64>> = (0..q.matrix.n_rows()).map(|r| q.matrix.row(r).to_vec()).collect();
    let d = PyDict::new(py);
    d.set_item("rows", rows)?;
    d.set_item("bits", q.bits)?;
    d.set_item("signed", q.signed)?;
    Ok(d)
}

#[pymodule(name = "camformer")]
fn camformer_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("TensorError", m.py().get_type::<TensorError>())?;
    m.add("InvariantError", m.py().get_type::<InvariantError>())?;
    m.add("PRESETS", perfmodel::PRESET_NAMES.to_vec())?;
    m.add_class::<BitMatrix>()?;
    m.add_class::<AttentionResult>()?;
    m.add_function(wrap_pyfunction!(camformer_attention, m)?)?;
    m.add_function(wrap_pyfunction!(dense_attention_reference, m)?)?;
    m.add_function(wrap_pyfunction!(bipolar_dot, m)?)?;
    m.add_function(wrap_pyfunction!(bf16_round, m)?)?;
    m.add_function(wrap_pyfunction!(bf16_bits, m)?)?;
    m.add_function(wrap_pyfunction!(recall_bound, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(dse_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(emit_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(read_int_matrix, m)?)?;
    Ok(())
}

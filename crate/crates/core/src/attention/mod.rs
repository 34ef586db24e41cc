// SPDX-License-Identifier: Apache-2.0

//! The three-stage attention pipeline: association (CAM scoring and stage-1
//! top-k), normalization (stage-2 top-k and LUT softmax) and
//! contextualization (sparse BF16 weighted sum of value rows).

pub mod bf16;
pub mod bounds;
pub mod context;
pub mod softmax;
pub mod topk;

use serde::{Deserialize, Serialize};

use crate::bacam::{CamGeometry, NoiseConfig};
use crate::bimv::{bimv_tiled, TilePlan};
use crate::bitcore::{bipolar_dot, BitMatrix, BitVector};
use crate::error::{Error, Result};

pub use bf16::{bf16_round, Accumulator, AccumulatorWidth, Bf16};
pub use bounds::{margin_guarantee, recall_at_k, recall_bound, top_k_indices};
pub use context::{contextualize, contextualize_with, ValueMatrix};
pub use softmax::{build_exp_lut, softmax_candidates, softmax_candidates_with, AttentionWeights, ExpLut};
pub use topk::{stage1_select, streaming_top_k, Candidate, CandidateSet, SparsityConfig};

/// Everything one query did on its way through the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub valid_length: usize,
    pub d_k: usize,
    pub d_v: usize,
    pub plan: TilePlan,
    /// Association scores for the valid keys.
    pub scores: Vec<i32>,
    /// Stage-1 survivors, one entry per horizontal tile.
    pub stage1: Vec<Vec<Candidate>>,
    pub selected: CandidateSet,
    pub merges: usize,
    pub weights: AttentionWeights,
}

impl ExecutionTrace {
    pub fn candidates_streamed(&self) -> usize {
        self.stage1.iter().map(Vec::len).sum()
    }
}

/// Runs one query through association, normalization and contextualization.
///
/// Only the first `valid_length` keys are searched (the causal prefix).
pub fn camformer_attention(
    query: &BitVector,
    keys: &BitMatrix,
    values: &ValueMatrix,
    geometry: &CamGeometry,
    noise: &NoiseConfig,
    sparsity: &SparsityConfig,
    valid_length: usize,
) -> Result<(Vec<Bf16>, ExecutionTrace)> {
    geometry.validate()?;
    sparsity.validate(geometry)?;
    if values.n_rows() != keys.n_rows() {
        return Err(Error::LengthMismatch {
            expected: keys.n_rows(),
            actual: values.n_rows(),
        });
    }
    let prefix;
    let active = if valid_length == keys.n_rows() {
        keys
    } else {
        prefix = keys.prefix(valid_length)?;
        &prefix
    };

    let scores = bimv_tiled(query, active, geometry, noise)?;
    let plan = TilePlan::new(valid_length, query.len(), geometry)?;
    let stage1 = (0..plan.horizontal_tiles)
        .map(|h| {
            let rows = plan.tile_rows(h, geometry);
            let k1 = sparsity.k1.min(rows.len());
            stage1_select(&scores.scores[rows.clone()], rows.start, k1)
        })
        .collect::<Result<Vec<_>>>()?;
    let outcome = streaming_top_k(stage1.iter().cloned(), sparsity)?;

    let lut = build_exp_lut(query.len())?;
    let weights = softmax_candidates(&outcome.set.candidates, &lut)?;
    let output = contextualize(&weights, values, 1)?;

    let trace = ExecutionTrace {
        valid_length,
        d_k: query.len(),
        d_v: values.n_cols(),
        plan,
        scores: scores.scores,
        stage1,
        selected: outcome.set,
        merges: outcome.merges,
        weights,
    };
    Ok((output, trace))
}

fn exact_scores(query: &BitVector, keys: &BitMatrix) -> Result<Vec<f64>> {
    keys.rows()
        .iter()
        .map(|k| bipolar_dot(query, k).map(|d| d as f64))
        .collect()
}

fn weighted_rows(values: &ValueMatrix, picks: &[(usize, f64)]) -> Vec<f64> {
    let z: f64 = picks.iter().map(|p| p.1).sum();
    (0..values.n_cols())
        .map(|c| picks.iter().map(|&(i, e)| e / z * values.row(i)[c].to_f64()).sum())
        .collect()
}

/// Dense `softmax(q·Kᵀ / sqrt(d_k)) · V` in `f64` over bipolar Q and K.
pub fn dense_attention_reference(query: &BitVector, keys: &BitMatrix, values: &ValueMatrix) -> Result<Vec<f64>> {
    let scores = exact_scores(query, keys)?;
    let scale = (query.len() as f64).sqrt();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let picks: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| (i, ((s - max) / scale).exp()))
        .collect();
    Ok(weighted_rows(values, &picks))
}

/// `f64` attention restricted to the exact single-stage top-`k` keys.
pub fn top_k_attention_reference(
    query: &BitVector,
    keys: &BitMatrix,
    values: &ValueMatrix,
    k: usize,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let scores = exact_scores(query, keys)?;
    let idx = top_k_indices(&scores, k);
    let scale = (query.len() as f64).sqrt();
    let max = scores[idx[0]];
    let picks: Vec<(usize, f64)> = idx.iter().map(|&i| (i, ((scores[i] - max) / scale).exp())).collect();
    Ok((weighted_rows(values, &picks), idx))
}

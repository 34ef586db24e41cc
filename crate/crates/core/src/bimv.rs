// SPDX-License-Identifier: Apache-2.0

//! Tiled binary vector-matrix multiplication over CAM tiles.
//!
//! Keys are split into horizontal tiles of `CAM_H` rows and vertical tiles of
//! `CAM_W` columns. Horizontal tiles concatenate; vertical tiles accumulate
//! their digitized scores in an exact integer register. Padded key rows and
//! padded query bits are zero. A zero/zero padded column always matches, so
//! each padded column inflates the tile score by exactly one and is
//! subtracted back out.

use serde::{Deserialize, Serialize};

use crate::bacam::{read_matchline, CamGeometry, NoiseConfig};
use crate::bitcore::{BitMatrix, BitVector, IntMatrix, SlicedIntMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePlan {
    pub keys: usize,
    pub dim: usize,
    pub horizontal_tiles: usize,
    pub vertical_tiles: usize,
    pub row_padding: usize,
    pub col_padding: usize,
}

impl TilePlan {
    pub fn new(keys: usize, dim: usize, geometry: &CamGeometry) -> Result<Self> {
        geometry.validate()?;
        if keys == 0 || dim == 0 {
            return Err(Error::Empty("key matrix"));
        }
        let horizontal_tiles = keys.div_ceil(geometry.cam_h);
        let vertical_tiles = dim.div_ceil(geometry.cam_w);
        Ok(Self {
            keys,
            dim,
            horizontal_tiles,
            vertical_tiles,
            row_padding: horizontal_tiles * geometry.cam_h - keys,
            col_padding: vertical_tiles * geometry.cam_w - dim,
        })
    }

    pub fn total_tiles(&self) -> usize {
        self.horizontal_tiles * self.vertical_tiles
    }

    /// Key index range covered by horizontal tile `h`, padding excluded.
    pub fn tile_rows(&self, h: usize, geometry: &CamGeometry) -> std::ops::Range<usize> {
        let start = h * geometry.cam_h;
        start..(start + geometry.cam_h).min(self.keys)
    }

    fn padded_cols(&self, v: usize, geometry: &CamGeometry) -> usize {
        let end = (v + 1) * geometry.cam_w;
        end.saturating_sub(self.dim).min(geometry.cam_w)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub scores: Vec<i32>,
    /// ADC code per (key, vertical tile), key-major.
    pub adc_codes: Vec<u32>,
    pub vertical_tiles: usize,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn codes_for(&self, key: usize) -> &[u32] {
        &self.adc_codes[key * self.vertical_tiles..(key + 1) * self.vertical_tiles]
    }
}

struct TileResult {
    scores: Vec<i32>,
    codes: Vec<u32>,
}

fn run_horizontal_tile(
    h: usize,
    plan: &TilePlan,
    query_segments: &[BitVector],
    keys: &BitMatrix,
    geometry: &CamGeometry,
    noise: &NoiseConfig,
) -> Result<TileResult> {
    let rows = plan.tile_rows(h, geometry);
    let valid = rows.len();
    let mut stream = noise.substream(h as u64);
    let mut scores = vec![0i32; valid];
    let mut codes = vec![0u32; valid * plan.vertical_tiles];
    let whole = plan.vertical_tiles == 1 && keys.n_cols() == geometry.cam_w;
    let blank = BitVector::zeros(geometry.cam_w)?;
    for (v, q) in query_segments.iter().enumerate() {
        let pad = plan.padded_cols(v, geometry) as i32;
        for (i, r) in rows.clone().enumerate() {
            let segment;
            let row = if whole {
                keys.row(r)
            } else {
                segment = keys.row(r).segment(v * geometry.cam_w, geometry.cam_w)?;
                &segment
            };
            let reading = read_matchline(row, q, geometry, &mut stream)?;
            scores[i] += reading.score - pad;
            codes[i * plan.vertical_tiles + v] = reading.code;
        }
        // Unused rows of a partial tile still draw noise, in row order.
        for _ in valid..geometry.cam_h {
            read_matchline(&blank, q, geometry, &mut stream)?;
        }
    }
    Ok(TileResult { scores, codes })
}

/// Scores `query` against every key, processing horizontal tiles in `order`.
///
/// Each horizontal tile draws noise from its own substream, so the output
/// does not depend on the order.
pub fn bimv_tiled_in_order(
    query: &BitVector,
    keys: &BitMatrix,
    geometry: &CamGeometry,
    noise: &NoiseConfig,
    order: &[usize],
) -> Result<ScoreVector> {
    if query.len() != keys.n_cols() {
        return Err(Error::LengthMismatch {
            expected: keys.n_cols(),
            actual: query.len(),
        });
    }
    noise.validate()?;
    let plan = TilePlan::new(keys.n_rows(), keys.n_cols(), geometry)?;
    let mut seen = vec![false; plan.horizontal_tiles];
    for &h in order {
        if h >= plan.horizontal_tiles || std::mem::replace(&mut seen[h], true) {
            return Err(Error::param("order", "must be a permutation of the tile indices"));
        }
    }
    if order.len() != plan.horizontal_tiles {
        return Err(Error::param("order", "must be a permutation of the tile indices"));
    }
    let segments = (0..plan.vertical_tiles)
        .map(|v| query.segment(v * geometry.cam_w, geometry.cam_w))
        .collect::<Result<Vec<_>>>()?;

    let mut out = ScoreVector {
        scores: vec![0; plan.keys],
        adc_codes: vec![0; plan.keys * plan.vertical_tiles],
        vertical_tiles: plan.vertical_tiles,
    };
    for &h in order {
        let res = run_horizontal_tile(h, &plan, &segments, keys, geometry, noise)?;
        let rows = plan.tile_rows(h, geometry);
        let vt = plan.vertical_tiles;
        out.scores[rows.clone()].copy_from_slice(&res.scores);
        out.adc_codes[rows.start * vt..rows.end * vt].copy_from_slice(&res.codes);
    }
    Ok(out)
}

pub fn bimv_tiled(
    query: &BitVector,
    keys: &BitMatrix,
    geometry: &CamGeometry,
    noise: &NoiseConfig,
) -> Result<ScoreVector> {
    let tiles = keys.n_rows().div_ceil(geometry.cam_h.max(1));
    let order: Vec<usize> = (0..tiles).collect();
    bimv_tiled_in_order(query, keys, geometry, noise, &order)
}

#[derive(Clone, Copy, Debug)]
pub enum IntOperand<'a> {
    Dense(&'a IntMatrix),
    Sliced(&'a SlicedIntMatrix),
}

impl IntOperand<'_> {
    fn n_rows(&self) -> usize {
        match self {
            IntOperand::Dense(m) => m.n_rows(),
            IntOperand::Sliced(s) => s.n_rows(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatmulMode {
    BitSliced,
    Direct,
}

/// `Σ_j w_j · V[idx_j]` over the selected rows.
///
/// Bit-sliced mode runs one binary pass per slice and shift-accumulates the
/// per-slice partial sums with the slice weights.
pub fn binary_integer_matmul(weights: &[(usize, i64)], values: IntOperand<'_>, mode: MatmulMode) -> Result<Vec<i64>> {
    let rows = values.n_rows();
    if let Some(&(index, _)) = weights.iter().find(|(i, _)| *i >= rows) {
        return Err(Error::IndexOutOfRange { index, len: rows });
    }
    match (mode, values) {
        (MatmulMode::Direct, IntOperand::Dense(m)) => Ok(direct(weights, m)),
        (MatmulMode::Direct, IntOperand::Sliced(s)) => Ok(direct(weights, &s.recombine())),
        (MatmulMode::BitSliced, IntOperand::Sliced(s)) => Ok(bit_sliced(weights, s)),
        (MatmulMode::BitSliced, IntOperand::Dense(_)) => Err(Error::SlicedOperandRequired),
    }
}

fn direct(weights: &[(usize, i64)], m: &IntMatrix) -> Vec<i64> {
    let mut out = vec![0i64; m.n_cols()];
    for &(idx, w) in weights {
        for (o, &x) in out.iter_mut().zip(m.row(idx)) {
            *o += w * x;
        }
    }
    out
}

fn bit_sliced(weights: &[(usize, i64)], s: &SlicedIntMatrix) -> Vec<i64> {
    let cols = s.n_cols();
    let mut out = vec![0i64; cols];
    for (k, slice) in s.slices().iter().enumerate() {
        let mut partial = vec![0i64; cols];
        for &(idx, w) in weights {
            let row = slice.row(idx);
            for (c, p) in partial.iter_mut().enumerate() {
                if row.bit(c) {
                    *p += w;
                }
            }
        }
        let sw = s.slice_weight(k);
        for (o, p) in out.iter_mut().zip(partial) {
            *o += sw * p;
        }
    }
    out
}

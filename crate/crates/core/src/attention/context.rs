// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::bf16::{Accumulator, AccumulatorWidth, Bf16};
use super::softmax::AttentionWeights;
use crate::bitcore::IntMatrix;
use crate::error::{Error, Result};

/// Row-major BF16 value matrix, one row per key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Bf16>,
}

impl ValueMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Bf16>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("value matrix"));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_f64(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| Bf16::from_f64(x)).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[Bf16] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Integer values are rounded to BF16; int8 and narrower convert exactly.
impl From<&IntMatrix> for ValueMatrix {
    fn from(m: &IntMatrix) -> Self {
        let data = m.data().iter().map(|&x| Bf16::from_f64(x as f64)).collect();
        Self::new(m.n_rows(), m.n_cols(), data).expect("IntMatrix is non-empty")
    }
}

/// Sparse weighted sum `Σ w_i · V[idx_i]` with BF16 MAC semantics.
///
/// Each output lane multiplies exactly, rounds into its accumulator after
/// every fused multiply-add, and visits weights in candidate order. `n_mac`
/// only affects timing.
pub fn contextualize(weights: &AttentionWeights, values: &ValueMatrix, n_mac: usize) -> Result<Vec<Bf16>> {
    contextualize_with(weights, values, n_mac, AccumulatorWidth::default())
}

pub fn contextualize_with(
    weights: &AttentionWeights,
    values: &ValueMatrix,
    n_mac: usize,
    width: AccumulatorWidth,
) -> Result<Vec<Bf16>> {
    if n_mac == 0 {
        return Err(Error::param("n_mac", "must be >= 1"));
    }
    if let Some(&(index, _)) = weights.entries.iter().find(|(i, _)| *i >= values.rows) {
        return Err(Error::IndexOutOfRange {
            index,
            len: values.rows,
        });
    }
    let mut lanes = vec![Accumulator::new(width); values.cols];
    for &(idx, w) in &weights.entries {
        for (acc, &v) in lanes.iter_mut().zip(values.row(idx)) {
            acc.mul_add(w, v);
        }
    }
    Ok(lanes.iter().map(Accumulator::read).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_weight_selects_row() {
        let v = ValueMatrix::from_f64(3, 2, &[1.0, 2.0, -3.5, 4.25, 5.0, 6.0]).unwrap();
        let w = AttentionWeights {
            entries: vec![(1, Bf16::ONE)],
        };
        let out = contextualize(&w, &v, 8).unwrap();
        assert_eq!(out, v.row(1).to_vec());
    }

    #[test]
    fn uniform_weights_over_identical_rows() {
        let row = [1.5, -2.0, 0.75, 100.0];
        let data: Vec<f64> = row.iter().copied().cycle().take(32 * 4).collect();
        let v = ValueMatrix::from_f64(32, 4, &data).unwrap();
        let w = AttentionWeights {
            entries: (0..32).map(|i| (i, Bf16::from_f64(1.0 / 32.0))).collect(),
        };
        let out = contextualize(&w, &v, 8).unwrap();
        assert_eq!(out, v.row(0).to_vec());
    }

    #[test]
    fn n_mac_does_not_change_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let data: Vec<f64> = (0..64 * 16).map(|_| rng.random_range(-4.0..4.0)).collect();
        let v = ValueMatrix::from_f64(64, 16, &data).unwrap();
        let w = AttentionWeights {
            entries: (0..32)
                .map(|i| (i * 2, Bf16::from_f64(rng.random_range(0.0..0.06))))
                .collect(),
        };
        let a = contextualize(&w, &v, 1).unwrap();
        assert_eq!(a, contextualize(&w, &v, 8).unwrap());
        assert_eq!(a, contextualize(&w, &v, 13).unwrap());
    }

    #[test]
    fn random_near_wide_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..200 {
            let data: Vec<f64> = (0..128 * 8).map(|_| rng.random_range(1.0..2.0)).collect();
            let v = ValueMatrix::from_f64(128, 8, &data).unwrap();
            let raw: Vec<f64> = (0..32).map(|_| rng.random_range(0.0..1.0)).collect();
            let z: f64 = raw.iter().sum();
            let w = AttentionWeights {
                entries: raw
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i * 4, Bf16::from_f64(x / z)))
                    .collect(),
            };
            let out = contextualize(&w, &v, 8).unwrap();
            for (c, got) in out.iter().enumerate() {
                let want: f64 = w.entries.iter().map(|&(i, x)| x.to_f64() * v.row(i)[c].to_f64()).sum();
                let got = got.to_f64();
                assert!((got - want).abs() <= want.abs() * 2f64.powi(-5), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn errors() {
        let v = ValueMatrix::from_f64(2, 1, &[1.0, 2.0]).unwrap();
        let w = AttentionWeights {
            entries: vec![(2, Bf16::ONE)],
        };
        assert!(matches!(
            contextualize(&w, &v, 1),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
        assert!(contextualize(&w, &v, 0).is_err());
    }
}

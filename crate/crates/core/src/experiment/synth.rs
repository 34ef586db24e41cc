// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic Q/K/V tensors.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitcore::{int_range, BitMatrix, BitVector, IntMatrix};
use crate::error::{Error, Result};
use crate::formats::{write_bit_matrix, write_int_matrix, QuantizedMatrix};

/// Keys placed in the similarity cluster of the adversarial distribution.
pub const CLUSTER_KEYS: usize = 32;
/// Alignment of the cluster, one CAM tile.
pub const CLUSTER_ALIGN: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    /// Independent fair bits.
    #[default]
    Uniform,
    /// `CLUSTER_KEYS` contiguous, tile-aligned keys lie within `d_k / 16`
    /// flips of a hidden center; every query does too. The true top-k then
    /// sits in a couple of tiles, which per-tile preselection cannot keep.
    AdversarialClustered,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d_k: usize,
    pub d_v: usize,
    #[serde(default = "one")]
    pub queries: usize,
    #[serde(default)]
    pub distribution: Distribution,
    /// Signed value width.
    #[serde(default = "eight")]
    pub value_bits: u8,
}

fn one() -> usize {
    1
}

fn eight() -> u8 {
    8
}

impl SyntheticSpec {
    pub fn new(n: usize, d_k: usize, d_v: usize) -> Self {
        Self {
            n,
            d_k,
            d_v,
            queries: 1,
            distribution: Distribution::Uniform,
            value_bits: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("synthetic.n", self.n),
            ("synthetic.d_k", self.d_k),
            ("synthetic.d_v", self.d_v),
            ("synthetic.queries", self.queries),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be >= 1"));
            }
        }
        if !(2..=16).contains(&self.value_bits) {
            return Err(Error::param("synthetic.value_bits", "must be in 2..=16"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticTensors {
    pub queries: BitMatrix,
    pub keys: BitMatrix,
    pub values: QuantizedMatrix,
    /// Key rows of the planted cluster, empty for the uniform distribution.
    pub cluster: std::ops::Range<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorPaths {
    pub queries: PathBuf,
    pub keys: PathBuf,
    pub values: PathBuf,
}

impl TensorPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            queries: dir.join("queries.bacam"),
            keys: dir.join("keys.bacam"),
            values: dir.join("values.baint"),
        }
    }
}

fn random_vector(rng: &mut ChaCha8Rng, d: usize) -> Result<BitVector> {
    let words = (0..d.div_ceil(64)).map(|_| rng.random()).collect();
    BitVector::from_words(d, words)
}

/// `center` with up to `max_flips` distinct random bits inverted.
fn near(rng: &mut ChaCha8Rng, center: &BitVector, max_flips: usize) -> BitVector {
    let mut v = center.clone();
    let flips = rng.random_range(0..=max_flips);
    let mut positions: Vec<usize> = (0..center.len()).collect();
    for i in 0..flips {
        let j = rng.random_range(i..positions.len());
        positions.swap(i, j);
        let p = positions[i];
        v.set(p, !v.bit(p));
    }
    v
}

/// Deterministic tensors for `spec` and `seed`.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticTensors> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keys: Vec<BitVector> = (0..spec.n)
        .map(|_| random_vector(&mut rng, spec.d_k))
        .collect::<Result<_>>()?;
    let (queries, cluster) = match spec.distribution {
        Distribution::Uniform => {
            let q = (0..spec.queries)
                .map(|_| random_vector(&mut rng, spec.d_k))
                .collect::<Result<_>>()?;
            (q, 0..0)
        }
        Distribution::AdversarialClustered => {
            let center = random_vector(&mut rng, spec.d_k)?;
            let spread = spec.d_k / 16;
            let size = CLUSTER_KEYS.min(spec.n);
            let slots = (spec.n - size) / CLUSTER_ALIGN;
            let start = rng.random_range(0..=slots) * CLUSTER_ALIGN;
            for key in &mut keys[start..start + size] {
                *key = near(&mut rng, &center, spread);
            }
            let q = (0..spec.queries).map(|_| near(&mut rng, &center, spread)).collect();
            (q, start..start + size)
        }
    };
    let (lo, hi) = int_range(spec.value_bits, true)?;
    let data = (0..spec.n * spec.d_v).map(|_| rng.random_range(lo..=hi)).collect();
    Ok(SyntheticTensors {
        queries: BitMatrix::new(queries)?,
        keys: BitMatrix::new(keys)?,
        values: QuantizedMatrix {
            matrix: IntMatrix::new(spec.n, spec.d_v, data)?,
            bits: spec.value_bits,
            signed: true,
        },
        cluster,
    })
}

/// Generates tensors and writes them as BACAM1/BAINT1 files under `dir`.
pub fn emit_synthetic(dir: &Path, spec: &SyntheticSpec, seed: u64) -> Result<(SyntheticTensors, TensorPaths)> {
    let tensors = generate(spec, seed)?;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let paths = TensorPaths::in_dir(dir);
    write_bit_matrix(&paths.queries, &tensors.queries)?;
    write_bit_matrix(&paths.keys, &tensors.keys)?;
    write_int_matrix(&paths.values, &tensors.values)?;
    Ok((tensors, paths))
}

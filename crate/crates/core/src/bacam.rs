// SPDX-License-Identifier: Apache-2.0

//! Numeric model of the binary-attention CAM analog path.
//!
//! A tile row's matchline settles to `m / CAM_W`, where `m` is the number of
//! matching cells. Noise is additive Gaussian on that voltage, shifted by a
//! PVT corner offset and clamped to `[0, 1]`. A SAR ADC then quantizes the
//! voltage and the score is recovered as `2 * code - CAM_W`.
//!
//! Noise samples come from `ChaCha8Rng::seed_from_u64(seed)` through
//! `rand_distr::StandardNormal`, one draw per row in row order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bitcore::{hamming_matches, BitMatrix, BitVector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CamGeometry {
    pub cam_h: usize,
    pub cam_w: usize,
    pub adc_bits: u32,
    /// Resolve all `CAM_W + 1` match levels instead of saturating at the
    /// top ADC code.
    pub adc_ideal_full_scale: bool,
}

impl Default for CamGeometry {
    fn default() -> Self {
        Self {
            cam_h: 16,
            cam_w: 64,
            adc_bits: 6,
            adc_ideal_full_scale: false,
        }
    }
}

impl CamGeometry {
    pub fn ideal(cam_h: usize, cam_w: usize) -> Self {
        Self {
            cam_h,
            cam_w,
            adc_bits: 6,
            adc_ideal_full_scale: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cam_h == 0 {
            return Err(Error::param("geometry.cam_h", "must be >= 1"));
        }
        if self.cam_w == 0 {
            return Err(Error::param("geometry.cam_w", "must be >= 1"));
        }
        if !(1..=16).contains(&self.adc_bits) {
            return Err(Error::param("geometry.adc_bits", "must be in 1..=16"));
        }
        Ok(())
    }

    /// Largest code the ADC can emit under the active policy.
    pub fn max_code(&self) -> u32 {
        if self.adc_ideal_full_scale {
            self.cam_w as u32
        } else {
            (1u32 << self.adc_bits) - 1
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corner {
    TT,
    SS,
    FF,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerParams {
    pub sigma_multiplier: f64,
    pub offset: f64,
}

/// Per-corner calibration knobs; only aggregate corner statistics are
/// published, so these are defaults rather than measurements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CornerTable {
    pub tt: CornerParams,
    pub ss: CornerParams,
    pub ff: CornerParams,
}

impl Default for CornerTable {
    fn default() -> Self {
        Self {
            tt: CornerParams {
                sigma_multiplier: 1.0,
                offset: 0.0,
            },
            ss: CornerParams {
                sigma_multiplier: 1.25,
                offset: -0.005,
            },
            ff: CornerParams {
                sigma_multiplier: 1.25,
                offset: 0.005,
            },
        }
    }
}

impl CornerTable {
    pub fn get(&self, corner: Corner) -> CornerParams {
        match corner {
            Corner::TT => self.tt,
            Corner::SS => self.ss,
            Corner::FF => self.ff,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Matchline error std. dev. as a fraction of full scale.
    pub sigma: f64,
    pub corner: Corner,
    pub corners: CornerTable,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma: 0.014,
            corner: Corner::TT,
            corners: CornerTable::default(),
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn with_sigma(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params = [self.corners.tt, self.corners.ss, self.corners.ff];
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("noise.sigma", "must be finite and >= 0"));
        }
        if params
            .iter()
            .any(|p| p.sigma_multiplier.is_nan() || p.sigma_multiplier < 0.0 || !p.offset.is_finite())
        {
            return Err(Error::param("noise.corners", "multipliers must be >= 0"));
        }
        Ok(())
    }

    pub fn effective_sigma(&self) -> f64 {
        self.sigma * self.corners.get(self.corner).sigma_multiplier
    }

    pub fn offset(&self) -> f64 {
        self.corners.get(self.corner).offset
    }

    /// Independent stream for tile `index`: the seed XOR the index.
    pub fn substream(&self, index: u64) -> NoiseModel {
        NoiseModel::new(Self {
            seed: self.seed ^ index,
            ..*self
        })
    }
}

/// A noise configuration plus its PRNG state. One per execution stream.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    config: NoiseConfig,
    rng: ChaCha8Rng,
}

impl NoiseModel {
    pub fn new(config: NoiseConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
        }
    }

    pub fn config(&self) -> &NoiseConfig {
        &self.config
    }

    /// Applies offset and noise to an ideal voltage, then clamps.
    pub fn perturb(&mut self, ideal: f64) -> f64 {
        let sigma = self.config.effective_sigma();
        let eps = if sigma > 0.0 {
            sigma * self.rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        (ideal + self.config.offset() + eps).clamp(0.0, 1.0)
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchlineReading {
    pub ideal: f64,
    pub voltage: f64,
    pub code: u32,
    pub score: i32,
}

/// Quantizes a matchline voltage: `code = clamp(round(v * CAM_W), 0, max_code)`.
pub fn digitize(v: f64, geometry: &CamGeometry) -> Result<(u32, i32)> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::VoltageOutOfRange(v));
    }
    let code = ((v * geometry.cam_w as f64).round() as u32).min(geometry.max_code());
    Ok((code, 2 * code as i32 - geometry.cam_w as i32))
}

/// Searches every row of `tile` against `query` in parallel.
pub fn search_tile(
    tile: &BitMatrix,
    query: &BitVector,
    geometry: &CamGeometry,
    noise: &mut NoiseModel,
) -> Result<Vec<MatchlineReading>> {
    if query.len() != geometry.cam_w {
        return Err(Error::LengthMismatch {
            expected: geometry.cam_w,
            actual: query.len(),
        });
    }
    if tile.n_cols() != geometry.cam_w {
        return Err(Error::LengthMismatch {
            expected: geometry.cam_w,
            actual: tile.n_cols(),
        });
    }
    if tile.n_rows() > geometry.cam_h {
        return Err(Error::TooManyRows {
            rows: tile.n_rows(),
            max: geometry.cam_h,
        });
    }
    tile.rows()
        .iter()
        .map(|row| read_matchline(row, query, geometry, noise))
        .collect()
}

/// One row's matchline: match fraction, perturbation, ADC. Draws exactly one
/// noise sample when sigma > 0.
pub(crate) fn read_matchline(
    row: &BitVector,
    query: &BitVector,
    geometry: &CamGeometry,
    noise: &mut NoiseModel,
) -> Result<MatchlineReading> {
    let m = hamming_matches(row, query)?;
    let ideal = m as f64 / geometry.cam_w as f64;
    let voltage = noise.perturb(ideal);
    let (code, score) = digitize(voltage, geometry)?;
    Ok(MatchlineReading {
        ideal,
        voltage,
        code,
        score,
    })
}

/// Per-tile energy parameters, in pJ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CamEnergyParams {
    pub e_program: f64,
    pub e_search: f64,
    pub e_adc: f64,
}

impl CamEnergyParams {
    pub fn validate(&self) -> Result<()> {
        if [self.e_program, self.e_search, self.e_adc]
            .iter()
            .any(|e| e.is_nan() || *e < 0.0)
        {
            return Err(Error::param("cam energy", "energies must be >= 0"));
        }
        Ok(())
    }
}

/// Energy per operation when one programmed tile serves `ops` searches.
pub fn per_op_energy(ops: u64, params: &CamEnergyParams) -> Result<f64> {
    if ops < 1 {
        return Err(Error::param("M", "must be >= 1"));
    }
    params.validate()?;
    Ok(params.e_program / ops as f64 + params.e_search + params.e_adc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvtStats {
    /// Mean of `|v - v*|` as a fraction of full scale.
    pub mean_abs_error: f64,
    pub max_deviation: f64,
    pub trials: u64,
}

/// Monte-Carlo matchline error over random rows and queries.
///
/// Row and query bits are drawn from the same stream as the noise, so the
/// result is a pure function of the noise configuration.
pub fn pvt_error_stats(geometry: &CamGeometry, noise: &mut NoiseModel, trials: u64) -> Result<PvtStats> {
    geometry.validate()?;
    noise.config().validate()?;
    if trials == 0 {
        return Err(Error::param("trials", "must be >= 1"));
    }
    let words = geometry.cam_w.div_ceil(64);
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for _ in 0..trials {
        let row: Vec<u64> = (0..words).map(|_| noise.rng().random()).collect();
        let query: Vec<u64> = (0..words).map(|_| noise.rng().random()).collect();
        let row = BitVector::from_words(geometry.cam_w, row)?;
        let query = BitVector::from_words(geometry.cam_w, query)?;
        let ideal = hamming_matches(&row, &query)? as f64 / geometry.cam_w as f64;
        let err = (noise.perturb(ideal) - ideal).abs();
        sum += err;
        max = max.max(err);
    }
    Ok(PvtStats {
        mean_abs_error: sum / trials as f64,
        max_deviation: max,
        trials,
    })
}

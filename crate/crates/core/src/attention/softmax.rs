// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::bf16::{bf16_round, Accumulator, AccumulatorWidth, Bf16};
use super::topk::Candidate;
use crate::error::{Error, Result};

/// 256-entry BF16 table of `exp(s / sqrt(d_k))` for every 8-bit score `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpLut {
    d_k: usize,
    entries: Vec<Bf16>,
}

impl ExpLut {
    pub const ENTRIES: usize = 256;

    pub fn d_k(&self) -> usize {
        self.d_k
    }

    #[inline]
    pub fn lookup(&self, score: i8) -> Bf16 {
        self.entries[(score as i16 + 128) as usize]
    }

    pub fn entries(&self) -> &[Bf16] {
        &self.entries
    }

    pub fn size_bytes(&self) -> usize {
        self.entries.len() * std::mem::size_of::<u16>()
    }
}

pub fn build_exp_lut(d_k: usize) -> Result<ExpLut> {
    if d_k == 0 {
        return Err(Error::param("d_k", "must be >= 1"));
    }
    let scale = (d_k as f64).sqrt();
    let entries = (-128i32..=127).map(|s| bf16_round((s as f64 / scale).exp())).collect();
    Ok(ExpLut { d_k, entries })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights {
    pub entries: Vec<(usize, Bf16)>,
}

impl AttentionWeights {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w.to_f64()).sum()
    }
}

/// LUT softmax over the selected candidates.
///
/// The denominator is accumulated in candidate order and read out as BF16;
/// each weight is then one BF16 division.
pub fn softmax_candidates(candidates: &[Candidate], lut: &ExpLut) -> Result<AttentionWeights> {
    softmax_candidates_with(candidates, lut, AccumulatorWidth::default())
}

pub fn softmax_candidates_with(
    candidates: &[Candidate],
    lut: &ExpLut,
    width: AccumulatorWidth,
) -> Result<AttentionWeights> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate set"));
    }
    let numerators: Vec<Bf16> = candidates.iter().map(|c| lut.lookup(c.score)).collect();
    let mut acc = Accumulator::new(width);
    for &e in &numerators {
        acc.add(e);
    }
    let denominator = acc.read();
    let entries = candidates
        .iter()
        .zip(&numerators)
        .map(|(c, &e)| (c.index, e / denominator))
        .collect();
    Ok(AttentionWeights { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cands(scores: &[i8]) -> Vec<Candidate> {
        scores
            .iter()
            .enumerate()
            .map(|(index, &score)| Candidate { index, score })
            .collect()
    }

    fn wide_softmax(scores: &[i8], d_k: usize) -> Vec<f64> {
        let e: Vec<f64> = scores.iter().map(|&s| (s as f64 / (d_k as f64).sqrt()).exp()).collect();
        let z: f64 = e.iter().sum();
        e.iter().map(|x| x / z).collect()
    }

    #[test]
    fn lut_shape_and_values() {
        let lut = build_exp_lut(64).unwrap();
        assert_eq!(lut.entries().len(), 256);
        assert_eq!(lut.size_bytes(), 512);
        assert_eq!(lut.lookup(0), Bf16::ONE);
        assert_eq!(lut.lookup(8).to_f64(), 2.71875);
        assert_eq!(lut.lookup(8), bf16_round(std::f64::consts::E));
        assert_eq!(lut.lookup(-8), bf16_round((-1.0f64).exp()));
        assert!(lut.entries().windows(2).all(|w| w[0] <= w[1]));
        assert!(build_exp_lut(0).is_err());
    }

    #[test]
    fn uniform_scores() {
        let lut = build_exp_lut(64).unwrap();
        let w = softmax_candidates(&cands(&[17; 32]), &lut).unwrap();
        assert!(w.entries.iter().all(|&(_, x)| x.to_f64() == 0.03125));
    }

    #[test]
    fn dominant_score() {
        let lut = build_exp_lut(64).unwrap();
        let mut s = [-64i8; 32];
        s[5] = 64;
        let w = softmax_candidates(&cands(&s), &lut).unwrap();
        let top = w.entries[5].1.to_f64();
        let oracle = wide_softmax(&s, 64)[5];
        assert!(oracle > 0.999);
        assert!((top - oracle).abs() <= 2f64.powi(-7));
        assert!(top > 0.99);
    }

    #[test]
    fn empty_rejected() {
        let lut = build_exp_lut(64).unwrap();
        assert!(matches!(softmax_candidates(&[], &lut), Err(Error::Empty(_))));
    }

    #[test]
    fn random_scores_near_wide_precision() {
        let lut = build_exp_lut(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..2000 {
            let s: Vec<i8> = (0..32).map(|_| rng.random_range(-64..=64)).collect();
            let w = softmax_candidates(&cands(&s), &lut).unwrap();
            let oracle = wide_softmax(&s, 64);
            for ((_, got), want) in w.entries.iter().zip(&oracle) {
                assert!((got.to_f64() - want).abs() <= want * 2f64.powi(-6), "{got} vs {want}");
                assert!((0.0..=1.0).contains(&got.to_f64()));
            }
            assert!((w.sum() - 1.0).abs() <= 2f64.powi(-7), "sum {}", w.sum());
        }
    }

    #[test]
    fn bf16_register_drifts() {
        let lut = build_exp_lut(64).unwrap();
        let w = softmax_candidates_with(&cands(&[17; 32]), &lut, AccumulatorWidth::Bf16).unwrap();
        assert!(w.entries.iter().all(|&(_, x)| x.to_f64() != 0.03125));
    }

    #[test]
    fn shift_keeps_argmax() {
        let lut = build_exp_lut(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..500 {
            let s: Vec<i8> = (0..32).map(|_| rng.random_range(-60..=60)).collect();
            let shift: i8 = rng.random_range(-60..=60);
            let t: Vec<i8> = s.iter().map(|&x| x + shift).collect();
            let argmax = |w: &AttentionWeights| {
                let best = w
                    .entries
                    .iter()
                    .map(|e| e.1)
                    .fold(Bf16::ZERO, |a, b| if b > a { b } else { a });
                w.entries.iter().position(|e| e.1 == best).unwrap()
            };
            let a = softmax_candidates(&cands(&s), &lut).unwrap();
            let b = softmax_candidates(&cands(&t), &lut).unwrap();
            let max = *s.iter().max().unwrap();
            assert_eq!(s[argmax(&a)], max);
            assert_eq!(s[argmax(&b)], max);
        }
    }
}

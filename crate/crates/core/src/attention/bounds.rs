// SPDX-License-Identifier: Apache-2.0

//! Recall guarantees for noisy top-k selection.

use crate::error::{Error, Result};

/// Hoeffding bound on the probability that any true top-`k` key is dropped
/// when scores are means of `m` Bernoulli matches: `k (N - k) exp(-2 m δ²)`.
///
/// The result is a bound and is not clamped to 1.
pub fn recall_bound(k: usize, n: usize, m: usize, delta_min: f64) -> Result<f64> {
    if k > n {
        return Err(Error::param("k", format!("{k} exceeds N = {n}")));
    }
    if m == 0 {
        return Err(Error::param("m", "must be >= 1"));
    }
    if delta_min.is_nan() || delta_min < 0.0 {
        return Err(Error::param("delta_min", "must be >= 0"));
    }
    let pairs = (k as f64) * ((n - k) as f64);
    if pairs == 0.0 {
        return Ok(0.0);
    }
    Ok(pairs * (-2.0 * m as f64 * delta_min * delta_min).exp())
}

/// Indices of the `k` largest scores, lower index first on ties.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Fraction of the true top-`k` retained by the approximate top-`k`.
pub fn recall_at_k(exact: &[f64], approx: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let truth = top_k_indices(exact, k);
    let got = top_k_indices(approx, k);
    truth.iter().filter(|i| got.contains(i)).count() as f64 / k as f64
}

/// Gap between the k-th and (k+1)-th largest score.
pub fn margin(scores: &[f64], k: usize) -> Result<f64> {
    if k == 0 || scores.len() < k + 1 {
        return Err(Error::param(
            "k",
            format!("need 1 <= k and k + 1 <= {} scores", scores.len()),
        ));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[k - 1] - sorted[k])
}

/// Certifies `recall@k = 1` when every score moved by at most `epsilon` and
/// the exact margin exceeds `2 * epsilon`.
pub fn margin_guarantee(exact: &[f64], perturbed: &[f64], k: usize, epsilon: f64) -> Result<bool> {
    if exact.len() != perturbed.len() {
        return Err(Error::LengthMismatch {
            expected: exact.len(),
            actual: perturbed.len(),
        });
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::param("epsilon", "must be >= 0"));
    }
    let gap = margin(exact, k)?;
    for (position, (a, b)) in exact.iter().zip(perturbed).enumerate() {
        let deviation = (a - b).abs();
        if deviation > epsilon {
            return Err(Error::PerturbationExceedsEpsilon {
                position,
                deviation,
                epsilon,
            });
        }
    }
    Ok(gap > 2.0 * epsilon)
}

// SPDX-License-Identifier: Apache-2.0

//! Hierarchical two-stage top-k selection.
//!
//! Stage 1 keeps the best `k1` scores of every CAM tile. Stage 2 streams those
//! candidates into a fixed-width merge module that keeps a running top-k.
//! Both stages run a bitonic sorting network; candidates are ranked by score
//! (higher first) and then by key index (lower first), so results are
//! deterministic under ties.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::bacam::CamGeometry;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub score: i8,
}

impl Candidate {
    /// Saturates a wide CAM score into the 8-bit candidate register.
    pub fn saturating(index: usize, score: i32) -> Self {
        Self {
            index,
            score: score.clamp(i8::MIN as i32, i8::MAX as i32) as i8,
        }
    }
}

/// `Less` means `a` ranks ahead of `b`.
pub fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score.cmp(&a.score).then(a.index.cmp(&b.index))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    /// Fewer candidates than requested were available.
    pub short: bool,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.candidates.iter().map(|c| c.index).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparsityConfig {
    /// Candidates kept per tile in stage 1.
    pub k1: usize,
    /// Tiles per stage-2 refinement group.
    pub group: usize,
    /// Final number of attended keys.
    pub k: usize,
}

impl Default for SparsityConfig {
    fn default() -> Self {
        Self {
            k1: 2,
            group: 16,
            k: 32,
        }
    }
}

impl SparsityConfig {
    pub fn validate(&self, geometry: &CamGeometry) -> Result<()> {
        if self.k1 == 0 || self.group == 0 || self.k == 0 {
            return Err(Error::param("sparsity", "k1, group and k must be >= 1"));
        }
        if self.k1 * self.group < self.k {
            return Err(Error::param("sparsity.k1", "k1 * group must be >= k"));
        }
        if self.k1 > geometry.cam_h {
            return Err(Error::param("sparsity.k1", "k1 must not exceed cam_h"));
        }
        Ok(())
    }

    /// Inputs of the stage-2 merge module: the running top-k plus one group.
    pub fn merge_width(&self) -> usize {
        self.k + self.group * self.k1
    }
}

/// Comparator depth of a bitonic sorter over `n` inputs (padded to 2^p).
pub fn bitonic_levels(n: usize) -> usize {
    let p = n.max(1).next_power_of_two().trailing_zeros() as usize;
    p * (p + 1) / 2
}

/// Sorts `items` best-first with a bitonic network. `None` ranks last.
fn bitonic_sort(items: &mut [Option<Candidate>]) {
    let n = items.len();
    debug_assert!(n.is_power_of_two());
    let before = |a: &Option<Candidate>, b: &Option<Candidate>| match (a, b) {
        (Some(x), Some(y)) => rank_order(x, y) == Ordering::Less,
        (Some(_), None) => true,
        _ => false,
    };
    let mut size = 2;
    while size <= n {
        let mut stride = size / 2;
        while stride > 0 {
            for i in 0..n {
                let j = i ^ stride;
                if j <= i {
                    continue;
                }
                let forward = i & size == 0;
                if forward == before(&items[j], &items[i]) {
                    items.swap(i, j);
                }
            }
            stride /= 2;
        }
        size *= 2;
    }
}

/// Best `k` of `items` through a bitonic network.
pub fn bitonic_top_k(items: &[Candidate], k: usize) -> Vec<Candidate> {
    if items.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut padded: Vec<Option<Candidate>> = items.iter().copied().map(Some).collect();
    padded.resize(items.len().next_power_of_two(), None);
    bitonic_sort(&mut padded);
    padded.into_iter().flatten().take(k).collect()
}

/// Top-`k1` of one tile's scores; `base` is the tile's first key index.
pub fn stage1_select(tile_scores: &[i32], base: usize, k1: usize) -> Result<Vec<Candidate>> {
    if k1 > tile_scores.len() {
        return Err(Error::param(
            "k1",
            format!("{k1} exceeds tile size {}", tile_scores.len()),
        ));
    }
    let items: Vec<Candidate> = tile_scores
        .iter()
        .enumerate()
        .map(|(i, &s)| Candidate::saturating(base + i, s))
        .collect();
    Ok(bitonic_top_k(&items, k1))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamOutcome {
    pub set: CandidateSet,
    pub streamed: usize,
    pub merges: usize,
}

/// Number of merge-module passes needed to stream tiles that yield
/// `per_tile` candidates each.
pub fn merge_count<I: IntoIterator<Item = usize>>(per_tile: I, k: usize, width: usize) -> usize {
    let mut buffered = 0;
    let mut merges = 0;
    for c in per_tile {
        if buffered + c > width {
            merges += 1;
            buffered = buffered.min(k);
        }
        buffered += c;
    }
    if buffered > k {
        merges += 1;
    }
    merges
}

/// Streams per-tile stage-1 candidates through the stage-2 merge module.
///
/// The buffer holds the running top-k plus newly arrived candidates. Before a
/// tile would overflow the module width, the buffer is reduced to its top-k.
/// With the default configuration this is one reduction after the first 32
/// tiles and one per 16-tile group afterwards.
pub fn streaming_top_k<I>(tiles: I, config: &SparsityConfig) -> Result<StreamOutcome>
where
    I: IntoIterator<Item = Vec<Candidate>>,
{
    let width = config.merge_width();
    let mut buffer: Vec<Candidate> = Vec::with_capacity(width);
    let mut streamed = 0;
    let mut merges = 0;
    for tile in tiles {
        if tile.len() > config.k1 {
            return Err(Error::param(
                "stream",
                format!("tile yielded {} candidates, k1 is {}", tile.len(), config.k1),
            ));
        }
        if buffer.len() + tile.len() > width {
            buffer = bitonic_top_k(&buffer, config.k);
            merges += 1;
        }
        streamed += tile.len();
        buffer.extend(tile);
    }
    if buffer.len() > config.k {
        buffer = bitonic_top_k(&buffer, config.k);
        merges += 1;
    } else {
        buffer.sort_by(rank_order);
    }
    Ok(StreamOutcome {
        set: CandidateSet {
            short: buffer.len() < config.k,
            candidates: buffer,
        },
        streamed,
        merges,
    })
}

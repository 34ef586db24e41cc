// SPDX-License-Identifier: Apache-2.0

//! Value-row prefetch traffic and whether DRAM latency hides behind the
//! pipeline.

use serde::{Deserialize, Serialize};

use super::Workload;
use crate::attention::topk::SparsityConfig;
use crate::bacam::CamGeometry;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DramConfig {
    pub t_rc_ns: f64,
    pub page_bytes: usize,
    /// One value row: 64 lanes of 16 bits.
    pub row_bytes: usize,
    /// One HBM3 channel.
    pub channel_gb_per_s: f64,
    pub banks: usize,
    pub energy_nj_per_bit: f64,
}

impl Default for DramConfig {
    fn default() -> Self {
        Self {
            t_rc_ns: 48.0,
            page_bytes: 8192,
            row_bytes: 128,
            channel_gb_per_s: 51.2,
            banks: 16,
            energy_nj_per_bit: 2.33,
        }
    }
}

impl DramConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_rc_ns > 0.0 && self.t_rc_ns.is_finite()) {
            return Err(Error::param("dram.t_rc_ns", "must be > 0"));
        }
        if self.row_bytes == 0 {
            return Err(Error::param("dram.row_bytes", "must be >= 1"));
        }
        if self.page_bytes == 0 || !self.page_bytes.is_multiple_of(self.row_bytes) {
            return Err(Error::param(
                "dram.page_bytes",
                "must be a positive multiple of row_bytes",
            ));
        }
        if !(self.channel_gb_per_s > 0.0 && self.channel_gb_per_s.is_finite()) {
            return Err(Error::param("dram.channel_gb_per_s", "must be > 0"));
        }
        if self.banks == 0 {
            return Err(Error::param("dram.banks", "must be >= 1"));
        }
        if self.energy_nj_per_bit.is_nan() || self.energy_nj_per_bit < 0.0 {
            return Err(Error::param("dram.energy_nj_per_bit", "must be >= 0"));
        }
        Ok(())
    }

    pub fn rows_per_page(&self) -> usize {
        self.page_bytes / self.row_bytes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DramReport {
    pub row_bytes: usize,
    pub rows_per_page: usize,
    /// Value rows prefetched per query, one per stage-1 candidate.
    pub fetches_per_query: usize,
    pub bytes_per_query: usize,
    /// Page activations per query; one activation serves the candidates of
    /// every key that shares the page.
    pub activations_per_query: usize,
    pub bandwidth_gb_per_s: f64,
    /// Busiest bank's row-cycle time per query.
    pub bank_busy_ns: f64,
    /// Channel occupancy per query.
    pub transfer_ns: f64,
    /// Issue-to-data time of the last fetch.
    pub last_fetch_ns: f64,
    pub period_ns: f64,
    pub latency_hidden: bool,
    /// Reported separately; not part of on-chip energy per query.
    pub energy_nj_per_query: f64,
}

/// Prefetch traffic at `queries_per_s` and whether it hides behind the
/// pipeline.
///
/// Candidates of a query are known by the end of its association slot and
/// consumed at the start of its contextualization slot, one period later.
/// Latency is hidden iff banks and channel sustain the traffic within one
/// period and the last row arrives within that slack.
pub fn dram_check(
    workload: &Workload,
    geometry: &CamGeometry,
    sparsity: &SparsityConfig,
    dram: &DramConfig,
    queries_per_s: f64,
) -> Result<DramReport> {
    workload.validate()?;
    geometry.validate()?;
    sparsity.validate(geometry)?;
    dram.validate()?;
    if !(queries_per_s > 0.0 && queries_per_s.is_finite()) {
        return Err(Error::param("queries_per_s", "must be > 0"));
    }
    let tiles = workload.n.div_ceil(geometry.cam_h);
    let per_head: usize = (0..tiles)
        .map(|h| sparsity.k1.min((workload.n - h * geometry.cam_h).min(geometry.cam_h)))
        .sum();
    let fetches = workload.heads * per_head;
    let bytes = fetches * dram.row_bytes;
    let rows_per_page = dram.rows_per_page();
    let activations = (workload.heads * workload.n.div_ceil(rows_per_page)).min(fetches);

    let period_ns = 1e9 / queries_per_s;
    let bandwidth = bytes as f64 * queries_per_s / 1e9;
    let bank_busy_ns = activations.div_ceil(dram.banks) as f64 * dram.t_rc_ns;
    let transfer_ns = bytes as f64 / dram.channel_gb_per_s;
    let last_fetch_ns = dram.t_rc_ns + dram.row_bytes as f64 / dram.channel_gb_per_s;
    let latency_hidden = bank_busy_ns <= period_ns && transfer_ns <= period_ns && last_fetch_ns <= period_ns;

    Ok(DramReport {
        row_bytes: dram.row_bytes,
        rows_per_page,
        fetches_per_query: fetches,
        bytes_per_query: bytes,
        activations_per_query: activations,
        bandwidth_gb_per_s: bandwidth,
        bank_busy_ns,
        transfer_ns,
        last_fetch_ns,
        period_ns,
        latency_hidden,
        energy_nj_per_query: bytes as f64 * 8.0 * dram.energy_nj_per_bit,
    })
}

// SPDX-License-Identifier: Apache-2.0

//! Stage latencies, fine- and coarse-grained pipelining.

use serde::{Deserialize, Serialize};

use super::Workload;
use crate::attention::topk::{bitonic_levels, merge_count, SparsityConfig};
use crate::bacam::CamGeometry;
use crate::error::{Error, Result};

/// Clocks and per-operation cycle counts.
///
/// CAM search cycles run on the CAM clock; everything else runs on the
/// system clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub sys_clock_ghz: f64,
    pub cam_clock_ghz: f64,
    /// CAM cycles per search, covering precharge, broadcast, match and
    /// charge share.
    pub cam_search: u32,
    /// System cycles to read out one tile through the shared ADCs.
    pub adc: u32,
    /// Cycles per comparator level of the per-tile top-k1 sorter.
    pub top2_sorter: u32,
    /// Cycles per comparator level of the stage-2 merge network.
    pub top32_merge: u32,
    pub lut_lookup: u32,
    pub t_div: u32,
    pub t_mac: u32,
    pub n_mac: u32,
    /// Fixed cycles per attended value row (weight fetch and issue).
    pub ctx_row_overhead: u32,
    /// Drain cycles of the MAC array.
    pub mac_fill: u32,
    pub softmax_pipelined: bool,
    /// Heads are split evenly over this many identical cores.
    pub cores: u32,
    /// Stretch the period when all cores together exceed one DRAM channel.
    pub shared_dram_contention: bool,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            sys_clock_ghz: 1.0,
            cam_clock_ghz: 0.5,
            cam_search: 2,
            adc: 5,
            top2_sorter: 1,
            top32_merge: 1,
            lut_lookup: 1,
            t_div: 10,
            t_mac: 1,
            n_mac: 8,
            ctx_row_overhead: 2,
            mac_fill: 10,
            softmax_pipelined: true,
            cores: 1,
            shared_dram_contention: false,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sys_clock_ghz > 0.0 && self.sys_clock_ghz.is_finite()) {
            return Err(Error::param("timing.sys_clock_ghz", "must be > 0"));
        }
        if !(self.cam_clock_ghz > 0.0 && self.cam_clock_ghz.is_finite()) {
            return Err(Error::param("timing.cam_clock_ghz", "must be > 0"));
        }
        let counts: [(&'static str, u32); 9] = [
            ("timing.cam_search", self.cam_search),
            ("timing.adc", self.adc),
            ("timing.top2_sorter", self.top2_sorter),
            ("timing.top32_merge", self.top32_merge),
            ("timing.lut_lookup", self.lut_lookup),
            ("timing.t_div", self.t_div),
            ("timing.t_mac", self.t_mac),
            ("timing.n_mac", self.n_mac),
            ("timing.cores", self.cores),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::param(name, "must be >= 1"));
            }
        }
        Ok(())
    }

    fn sys_ns(&self, cycles: u64) -> f64 {
        cycles as f64 / self.sys_clock_ghz
    }

    fn cam_ns(&self, cycles: u64) -> f64 {
        cycles as f64 / self.cam_clock_ghz
    }
}

/// Softmax over `k` weights with one divider of latency `t_div`.
///
/// Serial issue costs `k * t_div`; a pipelined divider accepts one operand
/// per cycle, so the last result lands after `(k - 1) + t_div`.
pub fn softmax_latency(t_div: u32, pipelined: bool, k: usize) -> Result<u64> {
    if t_div == 0 {
        return Err(Error::param("t_div", "must be >= 1"));
    }
    if k == 0 {
        return Ok(0);
    }
    let (t, k) = (t_div as u64, k as u64);
    Ok(if pipelined { (k - 1) + t } else { k * t })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub period: f64,
    pub stalls: Vec<f64>,
    /// Sum of all stalls.
    pub idle: f64,
}

/// Coarse-grained pipeline over stages that each take one slot per query.
///
/// The period is the slowest stage; every other stage stalls for the
/// difference.
pub fn coarse_schedule(stage_latencies: &[f64]) -> Result<Schedule> {
    if stage_latencies.is_empty() {
        return Err(Error::Empty("stage latencies"));
    }
    if let Some(bad) = stage_latencies.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::param(
            "stage latency",
            format!("{bad} is not a positive finite value"),
        ));
    }
    let period = stage_latencies.iter().copied().fold(f64::MIN, f64::max);
    let stalls: Vec<f64> = stage_latencies.iter().map(|l| period - l).collect();
    let idle = stalls.iter().sum();
    Ok(Schedule { period, stalls, idle })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Association,
    Normalization,
    Contextualization,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Association, Stage::Normalization, Stage::Contextualization];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Association => "association",
            Stage::Normalization => "normalization",
            Stage::Contextualization => "contextualization",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub latency_ns: f64,
    pub stall_ns: f64,
}

/// Per-core work of one query, shared by the timing and energy models.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryShape {
    pub heads_per_core: usize,
    pub horizontal_tiles: usize,
    pub vertical_tiles: usize,
    /// Stage-1 survivors per head.
    pub candidates: usize,
    /// Keys attended per head.
    pub attended: usize,
    /// Stage-2 merge passes per head.
    pub merges: usize,
}

impl QueryShape {
    pub fn new(workload: &Workload, geometry: &CamGeometry, sparsity: &SparsityConfig, cores: u32) -> Result<Self> {
        workload.validate()?;
        geometry.validate()?;
        sparsity.validate(geometry)?;
        if cores == 0 {
            return Err(Error::param("timing.cores", "must be >= 1"));
        }
        let horizontal_tiles = workload.n.div_ceil(geometry.cam_h);
        let per_tile: Vec<usize> = (0..horizontal_tiles)
            .map(|h| {
                let rows = (workload.n - h * geometry.cam_h).min(geometry.cam_h);
                sparsity.k1.min(rows)
            })
            .collect();
        let candidates = per_tile.iter().sum();
        Ok(Self {
            heads_per_core: workload.heads.div_ceil(cores as usize),
            horizontal_tiles,
            vertical_tiles: workload.d_k.div_ceil(geometry.cam_w),
            candidates,
            attended: sparsity.k.min(candidates),
            merges: merge_count(per_tile, sparsity.k, sparsity.merge_width()),
        })
    }

    pub fn tiles_per_head(&self) -> usize {
        self.horizontal_tiles * self.vertical_tiles
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub stages: Vec<StageTiming>,
    /// Tile issue interval of the association pipeline.
    pub tile_interval_ns: f64,
    /// Latency of the first tile beyond one interval.
    pub association_fill_ns: f64,
    pub period_ns: f64,
    pub idle_ns: f64,
    pub bottleneck: Stage,
    /// Queries per millisecond across all cores.
    pub throughput_qry_per_ms: f64,
    pub cores: u32,
    pub shape: QueryShape,
}

impl TimingReport {
    pub fn stage(&self, stage: Stage) -> &StageTiming {
        self.stages
            .iter()
            .find(|s| s.stage == stage)
            .expect("all stages present")
    }

    pub fn queries_per_s(&self) -> f64 {
        self.throughput_qry_per_ms * 1e3
    }
}

/// Stage latencies of one query on one core, in ns.
pub fn stage_latencies(
    workload: &Workload,
    geometry: &CamGeometry,
    sparsity: &SparsityConfig,
    timing: &TimingConfig,
) -> Result<(QueryShape, [f64; 3], f64, f64)> {
    timing.validate()?;
    let shape = QueryShape::new(workload, geometry, sparsity, timing.cores)?;
    let heads = shape.heads_per_core as u64;

    // Search, readout and top-k1 are a linear pipeline; the sorter accepts a
    // new tile every level time.
    let search = timing.cam_ns(timing.cam_search as u64);
    let adc = timing.sys_ns(timing.adc as u64);
    let sort_levels = bitonic_levels(geometry.cam_h) as u64;
    let sort_step = timing.sys_ns(timing.top2_sorter as u64);
    let interval = search.max(adc).max(sort_step);
    let first = search + adc + sort_step * sort_levels as f64;
    let fill = first - interval;
    let tiles = (shape.tiles_per_head() as u64 * heads) as f64;
    let association = fill + tiles * interval;

    let merge_cycles = shape.merges as u64 * bitonic_levels(sparsity.merge_width()) as u64 * timing.top32_merge as u64;
    let softmax_cycles = shape.attended as u64 * timing.lut_lookup as u64
        + softmax_latency(timing.t_div, timing.softmax_pipelined, shape.attended)?;
    let normalization = timing.sys_ns(heads * (merge_cycles + softmax_cycles));

    let per_row =
        (workload.d_v as u64).div_ceil(timing.n_mac as u64) * timing.t_mac as u64 + timing.ctx_row_overhead as u64;
    let contextualization = timing.sys_ns(heads * shape.attended as u64 * per_row + timing.mac_fill as u64);

    Ok((shape, [association, normalization, contextualization], interval, fill))
}

/// Timing section of a simulation report.
pub fn simulate_query(
    workload: &Workload,
    geometry: &CamGeometry,
    sparsity: &SparsityConfig,
    timing: &TimingConfig,
) -> Result<TimingReport> {
    let (shape, latencies, interval, fill) = stage_latencies(workload, geometry, sparsity, timing)?;
    let schedule = coarse_schedule(&latencies)?;
    Ok(report_from_schedule(
        shape,
        &latencies,
        schedule,
        interval,
        fill,
        timing.cores,
    ))
}

pub(crate) fn report_from_schedule(
    shape: QueryShape,
    latencies: &[f64; 3],
    schedule: Schedule,
    interval: f64,
    fill: f64,
    cores: u32,
) -> TimingReport {
    let stages: Vec<StageTiming> = Stage::ALL
        .iter()
        .zip(latencies)
        .zip(&schedule.stalls)
        .map(|((&stage, &latency_ns), &stall_ns)| StageTiming {
            stage,
            latency_ns,
            stall_ns,
        })
        .collect();
    let bottleneck = stages
        .iter()
        .find(|s| s.latency_ns == schedule.period)
        .map(|s| s.stage)
        .unwrap_or(Stage::Association);
    TimingReport {
        stages,
        tile_interval_ns: interval,
        association_fill_ns: fill,
        period_ns: schedule.period,
        idle_ns: schedule.idle,
        bottleneck,
        throughput_qry_per_ms: 1e6 / schedule.period,
        cores,
        shape,
    }
}

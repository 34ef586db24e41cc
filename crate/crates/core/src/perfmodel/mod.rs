// SPDX-License-Identifier: Apache-2.0

//! Cycle-approximate timing, DRAM, energy and area model.
//!
//! Per-operation cycle counts and per-event energies are free parameters.
//! The `paper65nm` preset is a calibration: its values were chosen so that
//! the BERT-Large workload reproduces published headline metrics, and it
//! makes no claim of predicting them from first principles.

pub mod dram;
pub mod dse;
pub mod energy;
pub mod timing;

use serde::{Deserialize, Serialize};

use crate::attention::topk::SparsityConfig;
use crate::bacam::CamGeometry;
use crate::error::{Error, Result};

pub use dram::{dram_check, DramConfig, DramReport};
pub use dse::{dse_sweep, pareto_front, DseGrid, DsePoint, DseResult};
pub use energy::{
    area_report, energy_report, AreaConfig, AreaReport, Component, EnergyConfig, EnergyReport, EventCounts, Share,
};
pub use timing::{coarse_schedule, simulate_query, softmax_latency, Schedule, Stage, TimingConfig, TimingReport};

/// Shape of one attention query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Workload {
    pub n: usize,
    pub d_k: usize,
    pub d_v: usize,
    pub heads: usize,
}

/// BERT-Large attention: 16 heads of 64 over 1024 tokens.
impl Default for Workload {
    fn default() -> Self {
        Self {
            n: 1024,
            d_k: 64,
            d_v: 64,
            heads: 16,
        }
    }
}

impl Workload {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("workload.n", self.n),
            ("workload.d_k", self.d_k),
            ("workload.d_v", self.d_v),
            ("workload.heads", self.heads),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be >= 1"));
            }
        }
        Ok(())
    }
}

pub const PRESET_NAMES: [&str; 1] = ["paper65nm"];

const PAPER65NM: &str = include_str!("../../presets/paper65nm.json");

/// Every hardware parameter of one design point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    pub geometry: CamGeometry,
    pub sparsity: SparsityConfig,
    pub timing: TimingConfig,
    pub dram: DramConfig,
    pub energy: EnergyConfig,
    pub area: AreaConfig,
}

impl HardwareConfig {
    /// Named calibration preset.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper65nm" => serde_json::from_str(PAPER65NM)
                .map_err(|e| Error::param("preset", format!("shipped preset is malformed: {e}"))),
            other => Err(Error::param(
                "preset",
                format!("unknown preset {other:?}; known: {}", PRESET_NAMES.join(", ")),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.sparsity.validate(&self.geometry)?;
        self.timing.validate()?;
        self.dram.validate()?;
        self.energy.validate()?;
        self.area.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub dynamic_w: f64,
    pub static_w: f64,
    pub total_w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub workload: Workload,
    pub timing: TimingReport,
    pub energy: EnergyReport,
    pub power: PowerReport,
    pub area: AreaReport,
    pub dram: DramReport,
}

/// Timing, energy, power, area and DRAM of `workload` on `hw`.
pub fn simulate(workload: &Workload, hw: &HardwareConfig) -> Result<SimReport> {
    hw.validate()?;
    let (shape, latencies, interval, fill) = timing::stage_latencies(workload, &hw.geometry, &hw.sparsity, &hw.timing)?;
    let mut schedule = coarse_schedule(&latencies)?;
    if hw.timing.shared_dram_contention {
        let demand = dram_check(workload, &hw.geometry, &hw.sparsity, &hw.dram, 1e9 / schedule.period)?;
        schedule.period = schedule.period.max(demand.transfer_ns);
        schedule.stalls = latencies.iter().map(|l| schedule.period - l).collect();
        schedule.idle = schedule.stalls.iter().sum();
    }
    let timing = timing::report_from_schedule(shape.clone(), &latencies, schedule, interval, fill, hw.timing.cores);

    let full = timing::QueryShape::new(workload, &hw.geometry, &hw.sparsity, 1)?;
    let events = EventCounts::from_shape(&full, workload, &hw.geometry);
    let energy = energy_report(&events, &hw.energy)?;
    let qps = timing.queries_per_s();
    let dynamic_w = energy.energy_per_query_nj * 1e-9 * qps;
    let static_w = hw.energy.static_power_w * hw.timing.cores as f64;
    let power = PowerReport {
        dynamic_w,
        static_w,
        total_w: dynamic_w + static_w,
    };
    let area = area_report(&hw.area, &hw.geometry, &hw.sparsity, hw.timing.n_mac, hw.timing.cores)?;
    let dram = dram_check(workload, &hw.geometry, &hw.sparsity, &hw.dram, qps)?;
    Ok(SimReport {
        workload: *workload,
        timing,
        energy,
        power,
        area,
        dram,
    })
}

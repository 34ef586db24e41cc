// SPDX-License-Identifier: Apache-2.0

//! Event-count energy model and block area model.

use serde::{Deserialize, Serialize};

use super::timing::{QueryShape, Stage};
use super::Workload;
use crate::attention::topk::{bitonic_levels, SparsityConfig};
use crate::attention::ExecutionTrace;
use crate::bacam::CamGeometry;
use crate::error::{Error, Result};

/// Bits per BF16 value-row lane.
const VALUE_BITS: u64 = 16;

/// Hardware events of one query across all heads.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub cam_programs: u64,
    pub cam_searches: u64,
    pub adc_conversions: u64,
    pub key_sram_bits: u64,
    pub top2_selections: u64,
    pub merges: u64,
    pub lut_lookups: u64,
    pub divisions: u64,
    /// Prefetched value rows written into the value buffer.
    pub value_sram_write_bits: u64,
    /// Attended value rows read by the MAC array.
    pub value_sram_read_bits: u64,
    pub macs: u64,
}

impl EventCounts {
    /// Counts for `workload` with every tile full and every head alike.
    pub fn for_workload(workload: &Workload, geometry: &CamGeometry, sparsity: &SparsityConfig) -> Result<Self> {
        let shape = QueryShape::new(workload, geometry, sparsity, 1)?;
        Ok(Self::from_shape(&shape, workload, geometry))
    }

    pub(crate) fn from_shape(shape: &QueryShape, workload: &Workload, geometry: &CamGeometry) -> Self {
        let heads = workload.heads as u64;
        let tiles = shape.tiles_per_head() as u64 * heads;
        let attended = shape.attended as u64 * heads;
        Self {
            cam_programs: tiles,
            cam_searches: tiles,
            adc_conversions: tiles * geometry.cam_h as u64,
            key_sram_bits: (workload.n * workload.d_k) as u64 * heads,
            top2_selections: shape.horizontal_tiles as u64 * heads,
            merges: shape.merges as u64 * heads,
            lut_lookups: attended,
            divisions: attended,
            value_sram_write_bits: shape.candidates as u64 * heads * workload.d_v as u64 * VALUE_BITS,
            value_sram_read_bits: attended * workload.d_v as u64 * VALUE_BITS,
            macs: attended * workload.d_v as u64,
        }
    }

    /// Counts of one head as recorded by the functional pipeline.
    pub fn from_trace(trace: &ExecutionTrace, geometry: &CamGeometry) -> Self {
        let tiles = trace.plan.total_tiles() as u64;
        let attended = trace.selected.len() as u64;
        let d_v = trace.d_v as u64;
        Self {
            cam_programs: tiles,
            cam_searches: tiles,
            adc_conversions: tiles * geometry.cam_h as u64,
            key_sram_bits: (trace.valid_length * trace.d_k) as u64,
            top2_selections: trace.stage1.len() as u64,
            merges: trace.merges as u64,
            lut_lookups: attended,
            divisions: attended,
            value_sram_write_bits: trace.candidates_streamed() as u64 * d_v * VALUE_BITS,
            value_sram_read_bits: attended * d_v * VALUE_BITS,
            macs: attended * d_v,
        }
    }

    pub fn scaled(&self, factor: u64) -> Self {
        Self {
            cam_programs: self.cam_programs * factor,
            cam_searches: self.cam_searches * factor,
            adc_conversions: self.adc_conversions * factor,
            key_sram_bits: self.key_sram_bits * factor,
            top2_selections: self.top2_selections * factor,
            merges: self.merges * factor,
            lut_lookups: self.lut_lookups * factor,
            divisions: self.divisions * factor,
            value_sram_write_bits: self.value_sram_write_bits * factor,
            value_sram_read_bits: self.value_sram_read_bits * factor,
            macs: self.macs * factor,
        }
    }
}

/// Per-event dynamic energies (pJ unless the name says otherwise).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub cam_program_pj: f64,
    pub cam_search_pj: f64,
    pub adc_pj: f64,
    pub key_sram_fj_per_bit: f64,
    pub value_sram_fj_per_bit: f64,
    pub mac_pj: f64,
    pub lut_pj: f64,
    pub divider_pj: f64,
    pub top2_pj: f64,
    pub merge_pj: f64,
    /// Leakage and clocking per core, added to dynamic power.
    pub static_power_w: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            cam_program_pj: 10.3,
            cam_search_pj: 2.59,
            adc_pj: 0.2686,
            key_sram_fj_per_bit: 20.98,
            value_sram_fj_per_bit: 13.0,
            mac_pj: 0.8728,
            lut_pj: 1.3,
            divider_pj: 3.0,
            top2_pj: 4.39,
            merge_pj: 20.8,
            static_power_w: 0.1486,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 11] = [
            ("energy.cam_program_pj", self.cam_program_pj),
            ("energy.cam_search_pj", self.cam_search_pj),
            ("energy.adc_pj", self.adc_pj),
            ("energy.key_sram_fj_per_bit", self.key_sram_fj_per_bit),
            ("energy.value_sram_fj_per_bit", self.value_sram_fj_per_bit),
            ("energy.mac_pj", self.mac_pj),
            ("energy.lut_pj", self.lut_pj),
            ("energy.divider_pj", self.divider_pj),
            ("energy.top2_pj", self.top2_pj),
            ("energy.merge_pj", self.merge_pj),
            ("energy.static_power_w", self.static_power_w),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be a finite value >= 0"));
            }
        }
        Ok(())
    }

    /// All per-event energies zero except the named component.
    pub fn isolate(&self, component: Component) -> Self {
        let mut e = Self {
            cam_program_pj: 0.0,
            cam_search_pj: 0.0,
            adc_pj: 0.0,
            key_sram_fj_per_bit: 0.0,
            value_sram_fj_per_bit: 0.0,
            mac_pj: 0.0,
            lut_pj: 0.0,
            divider_pj: 0.0,
            top2_pj: 0.0,
            merge_pj: 0.0,
            static_power_w: self.static_power_w,
        };
        match component {
            Component::ValueSram => e.value_sram_fj_per_bit = self.value_sram_fj_per_bit,
            Component::KeySram => e.key_sram_fj_per_bit = self.key_sram_fj_per_bit,
            Component::Mac => e.mac_pj = self.mac_pj,
            Component::BaCam => {
                e.cam_program_pj = self.cam_program_pj;
                e.cam_search_pj = self.cam_search_pj;
            }
            Component::Adc => e.adc_pj = self.adc_pj,
            Component::Top2 => e.top2_pj = self.top2_pj,
            Component::TopKMerge => e.merge_pj = self.merge_pj,
            Component::Softmax => {
                e.lut_pj = self.lut_pj;
                e.divider_pj = self.divider_pj;
            }
        }
        e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    ValueSram,
    KeySram,
    Mac,
    BaCam,
    Adc,
    Top2,
    TopKMerge,
    Softmax,
}

impl Component {
    pub const ALL: [Component; 8] = [
        Component::ValueSram,
        Component::KeySram,
        Component::Mac,
        Component::BaCam,
        Component::Adc,
        Component::Top2,
        Component::TopKMerge,
        Component::Softmax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::ValueSram => "value_sram",
            Component::KeySram => "key_sram",
            Component::Mac => "mac",
            Component::BaCam => "ba_cam",
            Component::Adc => "adc",
            Component::Top2 => "top2",
            Component::TopKMerge => "top_k_merge",
            Component::Softmax => "softmax",
        }
    }

    pub fn stage(self) -> Stage {
        match self {
            Component::KeySram | Component::BaCam | Component::Adc | Component::Top2 => Stage::Association,
            Component::TopKMerge | Component::Softmax => Stage::Normalization,
            Component::ValueSram | Component::Mac => Stage::Contextualization,
        }
    }

    fn energy_pj(self, c: &EventCounts, e: &EnergyConfig) -> f64 {
        match self {
            Component::ValueSram => {
                (c.value_sram_write_bits + c.value_sram_read_bits) as f64 * e.value_sram_fj_per_bit * 1e-3
            }
            Component::KeySram => c.key_sram_bits as f64 * e.key_sram_fj_per_bit * 1e-3,
            Component::Mac => c.macs as f64 * e.mac_pj,
            Component::BaCam => c.cam_programs as f64 * e.cam_program_pj + c.cam_searches as f64 * e.cam_search_pj,
            Component::Adc => c.adc_conversions as f64 * e.adc_pj,
            Component::Top2 => c.top2_selections as f64 * e.top2_pj,
            Component::TopKMerge => c.merges as f64 * e.merge_pj,
            Component::Softmax => c.lut_lookups as f64 * e.lut_pj + c.divisions as f64 * e.divider_pj,
        }
    }
}

/// One row of a breakdown table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub name: String,
    pub value: f64,
    pub percent: f64,
}

fn shares<'a>(items: impl IntoIterator<Item = (&'a str, f64)>) -> Vec<Share> {
    let items: Vec<(&str, f64)> = items.into_iter().collect();
    let total: f64 = items.iter().map(|i| i.1).sum();
    items
        .into_iter()
        .map(|(name, value)| Share {
            name: name.to_string(),
            value,
            percent: if total > 0.0 { 100.0 * value / total } else { 0.0 },
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub events: EventCounts,
    /// On-chip dynamic energy; DRAM is excluded.
    pub energy_per_query_nj: f64,
    pub efficiency_qry_per_mj: f64,
    /// Component breakdown, values in nJ.
    pub components: Vec<Share>,
    /// Stage breakdown, values in nJ.
    pub stages: Vec<Share>,
}

impl EnergyReport {
    pub fn component(&self, c: Component) -> &Share {
        self.components
            .iter()
            .find(|s| s.name == c.name())
            .expect("all components present")
    }

    pub fn stage(&self, s: Stage) -> &Share {
        self.stages
            .iter()
            .find(|x| x.name == s.name())
            .expect("all stages present")
    }
}

pub fn energy_report(events: &EventCounts, energy: &EnergyConfig) -> Result<EnergyReport> {
    energy.validate()?;
    let per: Vec<(Component, f64)> = Component::ALL
        .iter()
        .map(|&c| (c, c.energy_pj(events, energy) * 1e-3))
        .collect();
    let total: f64 = per.iter().map(|p| p.1).sum();
    let stages = shares(Stage::ALL.iter().map(|&s| {
        let v = per.iter().filter(|(c, _)| c.stage() == s).map(|p| p.1).sum();
        (s.name(), v)
    }));
    Ok(EnergyReport {
        events: events.clone(),
        energy_per_query_nj: total,
        efficiency_qry_per_mj: if total > 0.0 { 1e6 / total } else { f64::INFINITY },
        components: shares(per.iter().map(|(c, v)| (c.name(), *v))),
        stages,
    })
}

/// Block areas in mm². Datapath blocks scale with their instance count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaConfig {
    pub key_sram_mm2: f64,
    pub value_sram_mm2: f64,
    pub query_buffer_mm2: f64,
    pub control_mm2: f64,
    pub softmax_mm2: f64,
    pub cam_cell_mm2: f64,
    /// One ADC per CAM row.
    pub adc_mm2: f64,
    /// Per compare-exchange element of a bitonic network.
    pub top2_comparator_mm2: f64,
    pub merge_comparator_mm2: f64,
    pub mac_mm2: f64,
}

impl Default for AreaConfig {
    fn default() -> Self {
        Self {
            key_sram_mm2: 0.080,
            value_sram_mm2: 0.026,
            query_buffer_mm2: 0.0032,
            control_mm2: 0.0072,
            softmax_mm2: 0.012,
            // 16 x 64 cells: 0.018 mm²
            cam_cell_mm2: 1.7578125e-5,
            // 16 ADCs: 0.010 mm²
            adc_mm2: 6.25e-4,
            // 16 inputs, 80 comparators: 0.006 mm²
            top2_comparator_mm2: 7.5e-5,
            // 64 inputs, 672 comparators: 0.0676 mm²
            merge_comparator_mm2: 1.006e-4,
            mac_mm2: 0.00375,
        }
    }
}

impl AreaConfig {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 10] = [
            ("area.key_sram_mm2", self.key_sram_mm2),
            ("area.value_sram_mm2", self.value_sram_mm2),
            ("area.query_buffer_mm2", self.query_buffer_mm2),
            ("area.control_mm2", self.control_mm2),
            ("area.softmax_mm2", self.softmax_mm2),
            ("area.cam_cell_mm2", self.cam_cell_mm2),
            ("area.adc_mm2", self.adc_mm2),
            ("area.top2_comparator_mm2", self.top2_comparator_mm2),
            ("area.merge_comparator_mm2", self.merge_comparator_mm2),
            ("area.mac_mm2", self.mac_mm2),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be a finite value >= 0"));
            }
        }
        Ok(())
    }
}

/// Compare-exchange elements of a bitonic network over `n` inputs.
pub fn bitonic_comparators(n: usize) -> usize {
    n.max(1).next_power_of_two() / 2 * bitonic_levels(n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    /// Total over all cores.
    pub total_mm2: f64,
    pub per_core_mm2: f64,
    /// Blocks of one core, values in mm².
    pub blocks: Vec<Share>,
    /// Key SRAM, value SRAM and query buffer.
    pub sram_percent: f64,
}

impl AreaReport {
    pub fn block(&self, name: &str) -> Option<&Share> {
        self.blocks.iter().find(|s| s.name == name)
    }
}

pub fn area_report(
    area: &AreaConfig,
    geometry: &CamGeometry,
    sparsity: &SparsityConfig,
    n_mac: u32,
    cores: u32,
) -> Result<AreaReport> {
    area.validate()?;
    geometry.validate()?;
    let blocks = shares([
        ("key_sram", area.key_sram_mm2),
        ("value_sram", area.value_sram_mm2),
        ("query_buffer", area.query_buffer_mm2),
        (
            "top_k_merge",
            area.merge_comparator_mm2 * bitonic_comparators(sparsity.merge_width()) as f64,
        ),
        ("ba_cam", area.cam_cell_mm2 * (geometry.cam_h * geometry.cam_w) as f64),
        ("adc", area.adc_mm2 * geometry.cam_h as f64),
        (
            "top2",
            area.top2_comparator_mm2 * bitonic_comparators(geometry.cam_h) as f64,
        ),
        ("mac", area.mac_mm2 * n_mac as f64),
        ("softmax", area.softmax_mm2),
        ("control", area.control_mm2),
    ]);
    let per_core: f64 = blocks.iter().map(|b| b.value).sum();
    let sram_percent = blocks
        .iter()
        .filter(|b| matches!(b.name.as_str(), "key_sram" | "value_sram" | "query_buffer"))
        .map(|b| b.percent)
        .sum();
    Ok(AreaReport {
        total_mm2: per_core * cores as f64,
        per_core_mm2: per_core,
        blocks,
        sram_percent,
    })
}

// SPDX-License-Identifier: Apache-2.0

//! Grid sweeps over design parameters and their Pareto front.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate, HardwareConfig, SimReport, Workload};
use crate::error::{Error, Result};

/// Values to sweep per axis. An empty axis keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DseGrid {
    pub n_mac: Vec<u32>,
    pub k: Vec<usize>,
    pub cam_h: Vec<usize>,
    pub cam_w: Vec<usize>,
    pub sys_clock_ghz: Vec<f64>,
    pub cam_clock_ghz: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DseParams {
    pub n_mac: u32,
    pub k: usize,
    pub cam_h: usize,
    pub cam_w: usize,
    pub sys_clock_ghz: f64,
    pub cam_clock_ghz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsePoint {
    pub index: usize,
    pub params: DseParams,
    pub report: SimReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DseResult {
    pub points: Vec<DsePoint>,
    /// Indices into `points`, ascending.
    pub pareto: Vec<usize>,
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

impl DseGrid {
    /// Cartesian product in axis order; the last axis varies fastest.
    pub fn points(&self, base: &HardwareConfig) -> Vec<DseParams> {
        let mut out = Vec::new();
        for n_mac in axis(&self.n_mac, base.timing.n_mac) {
            for k in axis(&self.k, base.sparsity.k) {
                for cam_h in axis(&self.cam_h, base.geometry.cam_h) {
                    for cam_w in axis(&self.cam_w, base.geometry.cam_w) {
                        for sys in axis(&self.sys_clock_ghz, base.timing.sys_clock_ghz) {
                            for cam in axis(&self.cam_clock_ghz, base.timing.cam_clock_ghz) {
                                out.push(DseParams {
                                    n_mac,
                                    k,
                                    cam_h,
                                    cam_w,
                                    sys_clock_ghz: sys,
                                    cam_clock_ghz: cam,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

impl DseParams {
    pub fn apply(&self, base: &HardwareConfig) -> HardwareConfig {
        let mut hw = base.clone();
        hw.timing.n_mac = self.n_mac;
        hw.sparsity.k = self.k;
        hw.geometry.cam_h = self.cam_h;
        hw.geometry.cam_w = self.cam_w;
        hw.timing.sys_clock_ghz = self.sys_clock_ghz;
        hw.timing.cam_clock_ghz = self.cam_clock_ghz;
        hw
    }
}

/// `a` dominates `b`: no worse on throughput, power and area, better on one.
fn dominates(a: &SimReport, b: &SimReport) -> bool {
    let (ta, tb) = (a.timing.throughput_qry_per_ms, b.timing.throughput_qry_per_ms);
    let (pa, pb) = (a.power.total_w, b.power.total_w);
    let (aa, ab) = (a.area.total_mm2, b.area.total_mm2);
    ta >= tb && pa <= pb && aa <= ab && (ta > tb || pa < pb || aa < ab)
}

/// Indices of the non-dominated reports, ascending.
pub fn pareto_front(reports: &[&SimReport]) -> Vec<usize> {
    (0..reports.len())
        .filter(|&i| !reports.iter().any(|other| dominates(other, reports[i])))
        .collect()
}

/// Simulates every grid point concurrently; results keep grid order.
pub fn dse_sweep(workload: &Workload, base: &HardwareConfig, grid: &DseGrid) -> Result<DseResult> {
    let params = grid.points(base);
    if params.is_empty() {
        return Err(Error::Empty("design grid"));
    }
    let points = params
        .into_par_iter()
        .enumerate()
        .map(|(index, p)| {
            let report = simulate(workload, &p.apply(base))?;
            Ok(DsePoint {
                index,
                params: p,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SimReport> = points.iter().map(|p| &p.report).collect();
    let pareto = pareto_front(&refs);
    Ok(DseResult { points, pareto })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perfmodel::Stage;

    #[test]
    fn n_mac_eight_first_balances() {
        let grid = DseGrid {
            n_mac: (1..=8).collect(),
            ..DseGrid::default()
        };
        let r = dse_sweep(&Workload::default(), &HardwareConfig::default(), &grid).unwrap();
        assert_eq!(r.points.len(), 8);
        let balanced: Vec<u32> = r
            .points
            .iter()
            .filter(|p| p.report.timing.bottleneck != Stage::Contextualization)
            .map(|p| p.params.n_mac)
            .collect();
        assert_eq!(balanced.first(), Some(&8));
        let last = &r.points[7].report.timing;
        let ctx_stall = last.stage(Stage::Contextualization).stall_ns;
        assert!(ctx_stall < 0.01 * last.period_ns, "{ctx_stall}");
    }

    #[test]
    fn singleton_grid() {
        let r = dse_sweep(&Workload::default(), &HardwareConfig::default(), &DseGrid::default()).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.pareto, vec![0]);
    }

    #[test]
    fn dominated_point_drops_out() {
        let a = crate::perfmodel::simulate(&Workload::default(), &HardwareConfig::default()).unwrap();
        let mut b = a.clone();
        b.timing.throughput_qry_per_ms *= 0.5;
        b.power.total_w *= 2.0;
        b.area.total_mm2 *= 2.0;
        assert_eq!(pareto_front(&[&b, &a]), vec![1]);
        assert_eq!(pareto_front(&[&a, &a.clone()]), vec![0, 1]);
    }

    #[test]
    fn sweep_is_deterministic() {
        let grid = DseGrid {
            n_mac: vec![4, 8, 16],
            k: vec![16, 32],
            sys_clock_ghz: vec![0.5, 1.0],
            ..DseGrid::default()
        };
        let a = dse_sweep(&Workload::default(), &HardwareConfig::default(), &grid).unwrap();
        let b = dse_sweep(&Workload::default(), &HardwareConfig::default(), &grid).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.points.len(), 12);
        assert!(a.points.iter().enumerate().all(|(i, p)| p.index == i));
        for &i in &a.pareto {
            for p in &a.points {
                assert!(!dominates(&p.report, &a.points[i].report));
            }
        }
    }
}

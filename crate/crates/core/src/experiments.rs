//! Metric computation, resource estimation, and the sweep harness that
//! reproduces the design-space studies, emitting CSV/JSON tables.
//!
//! Sweep conventions:
//!
//! * `pci` — F versus channel-in width P_Ci for several throughputs G.
//! * `workers` — performance R versus the worker/lane split at fixed G,
//!   using the near-optimal P_Ci = G/(1-s) for each G.
//! * `banks` — unified versus crossbar at fixed total bandwidth: the
//!   crossbar splits the P_Ci-bit broadcast width into B_m banks of
//!   P_Ci/B_m bits each, so every row is bandwidth-paired.
//! * `scaling` — both balancers as the grid grows; the crossbar keeps
//!   B_m banks of full P_Ci-bit words (matching the unified run's
//!   single-point performance rather than its bandwidth).
//!
//! Workloads are synthetic 3x3 windows with C_i sized so every grid point
//! processes at least 512 chunks at that sweep's largest P_Ci.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::balancer::{paired_run, simulate_crossbar, simulate_unified, CrossbarModel};
use crate::config::{LayerKind, LayerShape, ParallelismConfig, SparsityModel};
use crate::error::SimError;
use crate::workload::GridWorkload;

/// Composite-metric outputs: performance R, efficiency eta, and F.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricF {
    pub r: f64,
    pub eta: f64,
    pub f: f64,
}

/// F = eta * R = 1 / (lambda * P_Ci * D^2).
pub fn metric_f(d: u64, p_ci: usize, lambda: f64) -> Result<MetricF, SimError> {
    if d == 0 {
        return Err(SimError::Config("latency D must be positive".into()));
    }
    if lambda <= 0.0 {
        return Err(SimError::Config("lambda must be positive".into()));
    }
    let r = 1.0 / d as f64;
    let b = lambda * p_ci as f64;
    let eta = r / b;
    Ok(MetricF { r, eta, f: eta * r })
}

/// DSP ledger entry comparing the sparse engine against a dense baseline.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResourceEstimate {
    pub dsp_dense: u64,
    pub dsp_sparse: u64,
    pub dsp_saved: u64,
    /// Decoder + balancer logic overhead, in LUT6s (affine model in G
    /// calibrated against the reported engine breakdowns).
    pub lut_overhead: u64,
    /// Binary-engine multiply-accumulate DSPs: P_Bm * P_Bn / lanes_per_dsp.
    pub dsp_binary: u64,
}

/// Sparse-path DSP savings: a fractional reduction of exactly 1 - G/P_Ci.
pub fn dsp_savings(
    g: usize,
    p_ci: usize,
    dense_base: u64,
    cfg: &ParallelismConfig,
) -> Result<ResourceEstimate, SimError> {
    if g > p_ci {
        return Err(SimError::Config(format!(
            "throughput G ({g}) cannot exceed P_Ci ({p_ci})"
        )));
    }
    let dsp_saved = dense_base * (p_ci - g) as u64 / p_ci as u64;
    Ok(ResourceEstimate {
        dsp_dense: dense_base,
        dsp_sparse: dense_base - dsp_saved,
        dsp_saved,
        lut_overhead: 2_000 + 8_000 * g as u64,
        dsp_binary: ((cfg.p_bm * cfg.p_bn).div_ceil(cfg.lanes_per_dsp)) as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Pci,
    Workers,
    Banks,
    Scaling,
}

impl std::str::FromStr for SweepKind {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "pci" => Ok(Self::Pci),
            "workers" => Ok(Self::Workers),
            "banks" => Ok(Self::Banks),
            "scaling" | "scale" => Ok(Self::Scaling),
            other => Err(SimError::Config(format!("unknown sweep kind `{other}`"))),
        }
    }
}

/// Sweep grids, seed counts, and metric constants.
#[derive(Debug, Clone, Serialize)]
pub struct MetricConfig {
    pub lambda: f64,
    /// Zero probability of the synthetic workload.
    pub sparsity: f64,
    pub seeds: usize,
    pub base_seed: u64,
    pub g_grid: Vec<usize>,
    pub pci_grid: Vec<usize>,
    pub workers_grid: Vec<usize>,
    pub banks_grid: Vec<usize>,
    pub scale_grid: Vec<usize>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            sparsity: 0.75,
            seeds: 32,
            base_seed: 1,
            g_grid: vec![2, 4, 8, 16],
            pci_grid: vec![4, 8, 16, 32, 64],
            workers_grid: vec![1, 2, 4, 8],
            banks_grid: vec![1, 2, 4, 8, 16],
            scale_grid: vec![1, 2, 4, 8, 16, 32, 64, 128],
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.lambda <= 0.0 {
            return Err(SimError::Config("lambda must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(SimError::Config("sparsity must be in [0, 1]".into()));
        }
        if self.seeds == 0 {
            return Err(SimError::Config("need at least one seed".into()));
        }
        Ok(())
    }
}

/// One sweep-table row. CSV columns follow the field order exactly.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub kind: String,
    #[serde(rename = "G")]
    pub g: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "P_Wo")]
    pub p_wo: usize,
    #[serde(rename = "P_Ci")]
    pub p_ci: usize,
    #[serde(rename = "B_m")]
    pub b_m: usize,
    #[serde(rename = "PTsPFx")]
    pub pts_pfx: usize,
    pub seed_count: usize,
    #[serde(rename = "D_mean")]
    pub d_mean: f64,
    #[serde(rename = "D_std")]
    pub d_std: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F_norm")]
    pub f_norm: f64,
}

/// Synthetic sweep workload: one 3x3 conv window per grid point, with
/// C_i scaled to the reference P_Ci so chunk counts stay >= 512.
pub fn synthetic_layer(p_ci_ref: usize) -> LayerShape {
    LayerShape {
        t_s: 1,
        f_h: 64,
        f_w: 64,
        c_i: 64 * p_ci_ref,
        c_o: 64,
        k_h: 3,
        k_w: 3,
        stride: 1,
        padding: 1,
        kind: LayerKind::Conv,
    }
}

/// The worker/lane split used across sweeps: two workers whenever the
/// throughput allows it.
pub fn split_throughput(g: usize) -> (usize, usize) {
    if g == 1 {
        (1, 1)
    } else {
        (2, g / 2)
    }
}

enum PointEngine {
    Unified { width_chunks: usize },
    Crossbar { model: CrossbarModel },
}

struct Point {
    kind: String,
    cfg: ParallelismConfig,
    layer: LayerShape,
    engine: PointEngine,
    b_m_label: usize,
}

fn seed_latencies(point: &Point, mcfg: &MetricConfig) -> Vec<u64> {
    (0..mcfg.seeds)
        .map(|i| {
            let model = SparsityModel::bernoulli(mcfg.sparsity, mcfg.base_seed + i as u64);
            let w = GridWorkload::generate(&point.layer, &model, &point.cfg, 0);
            match &point.engine {
                PointEngine::Unified { width_chunks } => {
                    if *width_chunks == 1 {
                        simulate_unified(&w, &point.cfg).cycles
                    } else {
                        paired_run(
                            &w,
                            &point.cfg,
                            *width_chunks,
                            &CrossbarModel::new(*width_chunks, point.cfg.p_ci, point.cfg.g()),
                        )
                        .expect("widths constructed to match")
                        .0
                        .cycles
                    }
                }
                PointEngine::Crossbar { model } => simulate_crossbar(&w, model, &point.cfg).cycles,
            }
        })
        .collect()
}

fn finish_row(point: &Point, mcfg: &MetricConfig, latencies: &[u64]) -> SweepRow {
    let n = latencies.len() as f64;
    let d_mean = latencies.iter().sum::<u64>() as f64 / n;
    let d_var = latencies
        .iter()
        .map(|&d| (d as f64 - d_mean).powi(2))
        .sum::<f64>()
        / n;
    let per_seed: Vec<MetricF> = latencies
        .iter()
        .map(|&d| metric_f(d, point.cfg.p_ci, mcfg.lambda).expect("D > 0"))
        .collect();
    let r = per_seed.iter().map(|m| m.r).sum::<f64>() / n;
    let f = per_seed.iter().map(|m| m.f).sum::<f64>() / n;
    SweepRow {
        kind: point.kind.clone(),
        g: point.cfg.g(),
        m: point.cfg.m,
        p_wo: point.cfg.p_wo,
        p_ci: point.cfg.p_ci,
        b_m: point.b_m_label,
        pts_pfx: point.cfg.grid_points(),
        seed_count: latencies.len(),
        d_mean,
        d_std: d_var.sqrt(),
        r,
        f,
        f_norm: 0.0,
    }
}

/// Runs one sweep kind over its grid, averaging each point over seeds.
/// Rows are deterministic for a given config and keyed independent of
/// execution order; F_norm is normalized to the per-(kind, G) maximum.
pub fn sweep(
    kind: SweepKind,
    mcfg: &MetricConfig,
    base: &ParallelismConfig,
) -> Result<Vec<SweepRow>, SimError> {
    mcfg.validate()?;
    base.validate()?;
    let mut points = Vec::new();
    match kind {
        SweepKind::Pci => {
            let layer = synthetic_layer(*mcfg.pci_grid.iter().max().unwrap_or(&16));
            for &g in &mcfg.g_grid {
                let (p_wo, m) = split_throughput(g);
                for &p_ci in &mcfg.pci_grid {
                    if p_ci % m != 0 {
                        continue;
                    }
                    let cfg = ParallelismConfig {
                        p_ci,
                        p_wo,
                        m,
                        ..base.clone()
                    };
                    points.push(Point {
                        kind: "pci".into(),
                        cfg,
                        layer: layer.clone(),
                        engine: PointEngine::Unified { width_chunks: 1 },
                        b_m_label: 1,
                    });
                }
            }
        }
        SweepKind::Workers => {
            for &g in &mcfg.g_grid {
                // Near-optimal width for this throughput at s = 0.75.
                let p_ci = (g as f64 / (1.0 - mcfg.sparsity)).round() as usize;
                for &p_wo in &mcfg.workers_grid {
                    if g % p_wo != 0 {
                        continue;
                    }
                    let m = g / p_wo;
                    if p_ci % m != 0 {
                        continue;
                    }
                    let cfg = ParallelismConfig {
                        p_ci,
                        p_wo,
                        m,
                        ..base.clone()
                    };
                    points.push(Point {
                        kind: "workers".into(),
                        cfg,
                        layer: synthetic_layer(p_ci),
                        engine: PointEngine::Unified { width_chunks: 1 },
                        b_m_label: 1,
                    });
                }
            }
        }
        SweepKind::Banks => {
            let layer = synthetic_layer(base.p_ci);
            let cfg = base.clone();
            points.push(Point {
                kind: "banks_unified".into(),
                cfg: cfg.clone(),
                layer: layer.clone(),
                engine: PointEngine::Unified { width_chunks: 1 },
                b_m_label: 1,
            });
            for &b_m in &mcfg.banks_grid {
                if base.p_ci % b_m != 0 {
                    continue;
                }
                // Fixed total bandwidth: B_m banks of P_Ci/B_m bits.
                let model = CrossbarModel::new(b_m, base.p_ci / b_m, cfg.g());
                points.push(Point {
                    kind: "banks_crossbar".into(),
                    cfg: cfg.clone(),
                    layer: layer.clone(),
                    engine: PointEngine::Crossbar { model },
                    b_m_label: b_m,
                });
            }
        }
        SweepKind::Scaling => {
            let layer = synthetic_layer(base.p_ci);
            for &n in &mcfg.scale_grid {
                let cfg = ParallelismConfig {
                    p_ts: 1,
                    p_fx: n,
                    ..base.clone()
                };
                points.push(Point {
                    kind: "scaling_unified".into(),
                    cfg: cfg.clone(),
                    layer: layer.clone(),
                    engine: PointEngine::Unified { width_chunks: 1 },
                    b_m_label: 1,
                });
                let model = CrossbarModel::new(base.b_m, base.p_ci, cfg.g());
                points.push(Point {
                    kind: "scaling_crossbar".into(),
                    cfg,
                    layer: layer.clone(),
                    engine: PointEngine::Crossbar { model },
                    b_m_label: base.b_m,
                });
            }
        }
    }

    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .map(|p| finish_row(p, mcfg, &seed_latencies(p, mcfg)))
        .collect();

    // Normalize F within each (kind, G) curve.
    let mut groups: std::collections::HashMap<(String, usize), f64> = Default::default();
    for row in &rows {
        let e = groups.entry((row.kind.clone(), row.g)).or_insert(0.0);
        *e = e.max(row.f);
    }
    for row in &mut rows {
        let max = groups[&(row.kind.clone(), row.g)];
        row.f_norm = if max > 0.0 { row.f / max } else { 0.0 };
    }
    Ok(rows)
}

/// P_Ci with the highest mean F among one G's pci-sweep rows.
pub fn argmax_f(rows: &[SweepRow], g: usize) -> Option<usize> {
    rows.iter()
        .filter(|r| r.kind == "pci" && r.g == g)
        .max_by(|a, b| a.f.total_cmp(&b.f))
        .map(|r| r.p_ci)
}

/// Least-squares R^2 of y against x.
pub fn linear_fit_r2(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy = points
        .iter()
        .map(|p| (p.0 - mx) * (p.1 - my))
        .sum::<f64>();
    let sxx = points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let syy = points.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>();
    if sxx == 0.0 || syy == 0.0 {
        return 1.0;
    }
    (sxy * sxy) / (sxx * syy)
}

/// Crossbar latency as its total bandwidth is scaled by whole multiples
/// of the unified width (per-bank words widen). Returns (multiplier,
/// mean crossbar D) pairs alongside the unified mean D.
pub fn bandwidth_match_scan(
    mcfg: &MetricConfig,
    base: &ParallelismConfig,
    multipliers: &[usize],
) -> Result<(f64, Vec<(usize, f64)>), SimError> {
    mcfg.validate()?;
    let layer = synthetic_layer(base.p_ci);
    let cfg = base.clone();
    let unified_point = Point {
        kind: "match_unified".into(),
        cfg: cfg.clone(),
        layer: layer.clone(),
        engine: PointEngine::Unified { width_chunks: 1 },
        b_m_label: 1,
    };
    let unified_mean = {
        let lat = seed_latencies(&unified_point, mcfg);
        lat.iter().sum::<u64>() as f64 / lat.len() as f64
    };
    let scans: Vec<(usize, f64)> = multipliers
        .par_iter()
        .map(|&k| {
            let model = CrossbarModel::new(base.b_m, k * base.p_ci / base.b_m, cfg.g());
            let point = Point {
                kind: "match_crossbar".into(),
                cfg: cfg.clone(),
                layer: layer.clone(),
                engine: PointEngine::Crossbar { model },
                b_m_label: base.b_m,
            };
            let lat = seed_latencies(&point, mcfg);
            (k, lat.iter().sum::<u64>() as f64 / lat.len() as f64)
        })
        .collect();
    Ok((unified_mean, scans))
}

/// Writes rows as CSV with the canonical column order.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)
            .map_err(|e| SimError::Config(format!("csv write failed: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rows as a JSON array mirroring the CSV columns.
pub fn write_json<W: Write>(rows: &[SweepRow], mut out: W) -> Result<(), SimError> {
    let text = serde_json::to_string_pretty(rows)
        .map_err(|e| SimError::Config(format!("json write failed: {e}")))?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

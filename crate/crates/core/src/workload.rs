//! Random workload generation and simulation-result types.
//!
//! Bitmaps are produced by a counter-based generator keyed on
//! (seed, layer, grid index, chunk index), so a workload is reproducible
//! regardless of the order in which chunks are generated.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bitmap::SpikeBitmap;
use crate::config::{LayerShape, ParallelismConfig, SparsityModel};

/// One simulated event; only recorded when tracing is enabled.
#[derive(Debug, Clone, Serialize)]
pub struct SimEvent {
    pub cycle: u64,
    pub grid: usize,
    pub worker: usize,
    pub chunk: usize,
}

/// Latency and utilization summary of one simulation run.
#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    /// Total simulated cycles (the paper-level latency D).
    pub cycles: u64,
    /// Cycles lost to conflicts or backpressure.
    pub stalls: u64,
    /// Busy fraction per grid point (unified) or per PE (crossbar).
    pub per_unit_busy: Vec<f64>,
    pub trace: Option<Vec<SimEvent>>,
}

impl SimResult {
    /// Ideal lower bound on D for a sparse-engine run: every one of the
    /// `grid_points * g` lanes busy every cycle.
    pub fn ideal_lower_bound(total_nonzeros: usize, grid_points: usize, g: usize) -> u64 {
        (total_nonzeros as u64).div_ceil((grid_points * g) as u64)
    }
}

/// Per-grid-point chunk bitmaps spanning one kernel window each.
///
/// `chunks[g][c]` is the `c`-th P_Ci-wide slice of grid point `g`'s
/// kernel window.
#[derive(Debug, Clone)]
pub struct GridWorkload {
    pub chunks: Vec<Vec<SpikeBitmap>>,
    pub chunk_width: usize,
}

impl GridWorkload {
    pub fn grid_points(&self) -> usize {
        self.chunks.len()
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks.first().map_or(0, Vec::len)
    }

    pub fn total_popcount(&self) -> usize {
        self.chunks
            .iter()
            .map(|g| g.iter().map(SpikeBitmap::popcount).sum::<usize>())
            .sum()
    }

    pub fn per_grid_popcount(&self) -> Vec<usize> {
        self.chunks
            .iter()
            .map(|g| g.iter().map(SpikeBitmap::popcount).sum())
            .collect()
    }

    /// Generates the workload for every grid point of a (P_Ts, P_Fx) array.
    pub fn generate(
        layer: &LayerShape,
        model: &SparsityModel,
        cfg: &ParallelismConfig,
        layer_index: usize,
    ) -> Self {
        Self::generate_at(layer, model, cfg, layer_index, 0, 0)
    }

    /// Like `generate`, but with the array anchored at global grid
    /// coordinates (`t_base`, `x_base`) so successive folds of one layer
    /// draw distinct, order-independent windows.
    pub fn generate_at(
        layer: &LayerShape,
        model: &SparsityModel,
        cfg: &ParallelismConfig,
        layer_index: usize,
        t_base: usize,
        x_base: usize,
    ) -> Self {
        let mut chunks = Vec::with_capacity(cfg.grid_points());
        for t in 0..cfg.p_ts {
            for x in 0..cfg.p_fx {
                chunks.push(generate_window(
                    layer,
                    model,
                    (t_base + t, x_base + x),
                    cfg,
                    layer_index,
                ));
            }
        }
        Self {
            chunks,
            chunk_width: cfg.p_ci,
        }
    }

    /// Re-slices every window into `width`-bit chunks (used by the crossbar
    /// baseline when its per-bank width differs from P_Ci).
    pub fn resliced(&self, width: usize) -> Self {
        let chunks = self
            .chunks
            .iter()
            .map(|gp| {
                let mut flat = SpikeBitmap::zeros(gp.len().max(1) * self.chunk_width);
                let mut base = 0;
                for c in gp {
                    for i in c.set_bits() {
                        flat.set(base + i, true);
                    }
                    base += self.chunk_width;
                }
                let total = gp.len() * self.chunk_width;
                (0..total.div_ceil(width))
                    .map(|j| {
                        let start = j * width;
                        let len = width.min(total - start);
                        let mut out = SpikeBitmap::zeros(width);
                        for i in 0..len {
                            if flat.get(start + i) {
                                out.set(i, true);
                            }
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        Self {
            chunks,
            chunk_width: width,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn mix_key(parts: &[u64]) -> u64 {
    let mut k = 0x51_7c_c1_b7_27_22_0a_95;
    for &p in parts {
        k = splitmix64(k ^ p);
    }
    k
}

fn layer_key(layer: &LayerShape) -> u64 {
    mix_key(&[
        layer.t_s as u64,
        layer.f_h as u64,
        layer.f_w as u64,
        layer.c_i as u64,
        layer.c_o as u64,
        layer.k_h as u64,
        layer.k_w as u64,
        layer.stride as u64,
        layer.padding as u64,
    ])
}

/// Generates the chunk bitmaps of one grid point's kernel window.
///
/// Returns `ceil(K_h*K_w*C_i / P_Ci)` chunks of width P_Ci; bits past the
/// window size in the final chunk are forced to zero.
pub fn generate_window(
    layer: &LayerShape,
    model: &SparsityModel,
    grid: (usize, usize),
    cfg: &ParallelismConfig,
    layer_index: usize,
) -> Vec<SpikeBitmap> {
    let window_bits = layer.window_bits();
    let chunk_count = window_bits.div_ceil(cfg.p_ci);
    let density = 1.0 - model.rate_for(layer_index);
    let lkey = layer_key(layer);
    (0..chunk_count)
        .map(|c| {
            let valid = cfg.p_ci.min(window_bits - c * cfg.p_ci);
            let key = mix_key(&[
                model.seed,
                lkey,
                layer_index as u64,
                grid.0 as u64,
                grid.1 as u64,
                c as u64,
            ]);
            bernoulli_bitmap(cfg.p_ci, valid, density, key)
        })
        .collect()
}

fn bernoulli_bitmap(width: usize, valid_bits: usize, density: f64, key: u64) -> SpikeBitmap {
    let mut out = SpikeBitmap::zeros(width);
    if density <= 0.0 {
        return out;
    }
    if density >= 1.0 {
        for i in 0..valid_bits {
            out.set(i, true);
        }
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let threshold = (density * u32::MAX as f64) as u32;
    for i in 0..valid_bits {
        if rng.next_u32() <= threshold {
            out.set(i, true);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LayerKind;

    fn layer(c_i: usize, k: usize) -> LayerShape {
        LayerShape {
            t_s: 1,
            f_h: 8,
            f_w: 8,
            c_i,
            c_o: 16,
            k_h: k,
            k_w: k,
            stride: 1,
            padding: k / 2,
            kind: LayerKind::Conv,
        }
    }

    #[test]
    fn full_sparsity_yields_all_zero_chunks() {
        let cfg = ParallelismConfig::default();
        let model = SparsityModel::bernoulli(1.0, 3);
        let chunks = generate_window(&layer(256, 3), &model, (0, 0), &cfg, 0);
        assert_eq!(chunks.len(), (9 * 256usize).div_ceil(16));
        assert!(chunks.iter().all(SpikeBitmap::is_zero));
    }

    #[test]
    fn zero_sparsity_yields_all_ones_chunks() {
        let cfg = ParallelismConfig::default();
        let model = SparsityModel::bernoulli(0.0, 3);
        let chunks = generate_window(&layer(256, 3), &model, (0, 0), &cfg, 0);
        assert!(chunks.iter().all(|c| c.popcount() == 16));
    }

    #[test]
    fn tail_chunk_masks_past_window() {
        let cfg = ParallelismConfig::default();
        let model = SparsityModel::bernoulli(0.0, 3);
        // 3*3*3 = 27 bits -> two chunks, tail has 11 valid bits.
        let chunks = generate_window(&layer(3, 3), &model, (0, 0), &cfg, 0);
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].popcount(), 16);
        assert_eq!(chunks[1].popcount(), 11);
    }

    #[test]
    fn generation_is_deterministic_and_grid_keyed() {
        let cfg = ParallelismConfig::default();
        let model = SparsityModel::bernoulli(0.75, 42);
        let a = generate_window(&layer(256, 3), &model, (0, 1), &cfg, 2);
        let b = generate_window(&layer(256, 3), &model, (0, 1), &cfg, 2);
        let c = generate_window(&layer(256, 3), &model, (1, 1), &cfg, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sample_mean_density_matches_bernoulli() {
        let cfg = ParallelismConfig::default();
        let model = SparsityModel::bernoulli(0.75, 7);
        let l = layer(256, 3);
        let mut ones = 0usize;
        let mut bits = 0usize;
        // 10^4 windows of 9*256 bits each.
        for g in 0..10_000 {
            let w = generate_window(&l, &model, (g % 7, g), &cfg, g % 13);
            ones += w.iter().map(SpikeBitmap::popcount).sum::<usize>();
            bits += l.window_bits();
        }
        let density = ones as f64 / bits as f64;
        assert!(
            (density - 0.25).abs() < 0.01,
            "density {density} not within 0.25 +/- 0.01"
        );
    }

    #[test]
    fn million_bit_density_tight() {
        let cfg = ParallelismConfig::default();
        let model = SparsityModel::bernoulli(0.75, 11);
        let l = layer(1024, 3);
        let mut ones = 0usize;
        let mut bits = 0usize;
        for g in 0..120 {
            let w = generate_window(&l, &model, (0, g), &cfg, 0);
            ones += w.iter().map(SpikeBitmap::popcount).sum::<usize>();
            bits += l.window_bits();
        }
        assert!(bits >= 1_000_000);
        let density = ones as f64 / bits as f64;
        assert!(
            (density - 0.25).abs() < 0.005,
            "density {density} beyond 0.25 +/- 0.005 over {bits} bits"
        );
    }

    #[test]
    fn reslice_preserves_bits() {
        let cfg = ParallelismConfig::default();
        let model = SparsityModel::bernoulli(0.5, 5);
        let w = GridWorkload::generate(&layer(64, 3), &model, &cfg, 0);
        let r = w.resliced(4);
        assert_eq!(r.total_popcount(), w.total_popcount());
        assert_eq!(r.chunk_count(), w.chunk_count() * 4);
    }
}

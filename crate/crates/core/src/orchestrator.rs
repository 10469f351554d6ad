//! Banked push/pop memory converting the unified input layout into the
//! kernel-window (im2col-style) output dataflow.
//!
//! The memory holds P_Fx banks of (P_Ts x P_Ci)-bit words. Channel slices
//! of one pixel are pushed to consecutive banks with the bank assignment
//! rotated by the pixel's column, so that during pop the P_Fx lanes of an
//! output-pixel group find the same channel slice of P_Fx consecutive
//! input columns in P_Fx distinct banks. Sliding the kernel window makes
//! the leading banks fetch one pixel-group ahead, which appears here as a
//! per-lane address step rather than a stateful rotation counter.
//!
//! Padding is synthesized as all-zero vectors at pop time and never
//! stored. Pop emits exactly one vector per cycle.

use serde::Serialize;

use crate::bitmap::SpikeBitmap;
use crate::config::{LayerShape, ParallelismConfig};
use crate::error::SimError;
use crate::workload::SimResult;

/// Dense binary feature map indexed (t, h, w, c).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMap {
    pub t_s: usize,
    pub f_h: usize,
    pub f_w: usize,
    pub c_i: usize,
    bits: Vec<u64>,
}

impl FeatureMap {
    pub fn zeros(t_s: usize, f_h: usize, f_w: usize, c_i: usize) -> Self {
        let n = t_s * f_h * f_w * c_i;
        Self {
            t_s,
            f_h,
            f_w,
            c_i,
            bits: vec![0; n.div_ceil(64)],
        }
    }

    pub fn random<R: rand::Rng>(
        t_s: usize,
        f_h: usize,
        f_w: usize,
        c_i: usize,
        density: f64,
        rng: &mut R,
    ) -> Self {
        let mut fm = Self::zeros(t_s, f_h, f_w, c_i);
        for t in 0..t_s {
            for h in 0..f_h {
                for w in 0..f_w {
                    for c in 0..c_i {
                        if rng.random::<f64>() < density {
                            fm.set(t, h, w, c, true);
                        }
                    }
                }
            }
        }
        fm
    }

    fn index(&self, t: usize, h: usize, w: usize, c: usize) -> usize {
        ((t * self.f_h + h) * self.f_w + w) * self.c_i + c
    }

    pub fn get(&self, t: usize, h: usize, w: usize, c: usize) -> bool {
        let i = self.index(t, h, w, c);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, t: usize, h: usize, w: usize, c: usize, v: bool) {
        let i = self.index(t, h, w, c);
        if v {
            self.bits[i / 64] |= 1 << (i % 64);
        } else {
            self.bits[i / 64] &= !(1 << (i % 64));
        }
    }

    /// One (P_Ts x P_Ci)-bit slice: timesteps of one t-block, channels of
    /// one slice. Bit layout is t-major: `t_local * p_ci + c_local`.
    pub fn slice(&self, t_block: usize, h: usize, w: usize, s: usize, p_ts: usize, p_ci: usize) -> SpikeBitmap {
        let mut out = SpikeBitmap::zeros(p_ts * p_ci);
        for tl in 0..p_ts {
            for cl in 0..p_ci {
                if self.get(t_block * p_ts + tl, h, w, s * p_ci + cl) {
                    out.set(tl * p_ci + cl, true);
                }
            }
        }
        out
    }
}

/// Derived addressing geometry shared by push, pop, and the oracle.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    p_fx: usize,
    p_ts: usize,
    p_ci: usize,
    stride: usize,
    /// Channel slices per pixel.
    s: usize,
    t_blocks: usize,
    row_depth: usize,
}

impl Geometry {
    fn derive(layer: &LayerShape, cfg: &ParallelismConfig) -> Result<Self, SimError> {
        let mut missing = Vec::new();
        if layer.c_i % cfg.p_ci != 0 {
            missing.push(format!("c_i {} % p_ci {}", layer.c_i, cfg.p_ci));
        }
        let s = layer.c_i / cfg.p_ci.max(1);
        if s % cfg.p_fx != 0 {
            missing.push(format!("channel slices {s} % p_fx {}", cfg.p_fx));
        }
        if layer.t_s % cfg.p_ts != 0 {
            missing.push(format!("t_s {} % p_ts {}", layer.t_s, cfg.p_ts));
        }
        if !missing.is_empty() {
            return Err(SimError::Config(format!(
                "orchestrator needs divisible dims: {}",
                missing.join(", ")
            )));
        }
        let max_u = (layer.f_w - 1) / layer.stride;
        let row_depth = (max_u / cfg.p_fx + 1) * layer.stride * s;
        Ok(Self {
            p_fx: cfg.p_fx,
            p_ts: cfg.p_ts,
            p_ci: cfg.p_ci,
            stride: layer.stride,
            s,
            t_blocks: layer.t_s / cfg.p_ts,
            row_depth,
        })
    }

    fn bank(&self, x: usize, slice: usize) -> usize {
        (x / self.stride + slice) % self.p_fx
    }

    fn addr(&self, t_block: usize, h: usize, f_h_row_base: usize, x: usize, slice: usize) -> usize {
        let u = x / self.stride;
        let v = x % self.stride;
        let intra = (u / self.p_fx) * (self.stride * self.s) + v * self.s + slice;
        (t_block * f_h_row_base + h) * self.row_depth + intra
    }
}

/// The banked memory after a push phase, ready to be popped.
#[derive(Debug, Clone)]
pub struct OrchestratorMemory {
    pub banks: usize,
    pub word_bits: usize,
    pub depth: usize,
    pub push_cycles: u64,
    words: Vec<Option<SpikeBitmap>>,
    geo: Geometry,
    f_h: usize,
    f_w: usize,
}

impl OrchestratorMemory {
    fn word(&self, bank: usize, addr: usize) -> Result<&SpikeBitmap, SimError> {
        if addr >= self.depth {
            return Err(SimError::MemoryOverflow {
                addr,
                depth: self.depth,
            });
        }
        self.words[bank * self.depth + addr]
            .as_ref()
            .ok_or_else(|| SimError::Config(format!("read of unwritten word b{bank}@{addr}")))
    }
}

/// Pushes a feature map through the interleaved banked layout.
///
/// Input arrives pixel-major as words of P_Fx consecutive channel slices;
/// each push cycle writes one word, one slice per bank, at the
/// stride-interleaved addresses. `depth_override` forces a configured
/// depth (for overflow testing); `None` sizes the memory to the layer.
pub fn push_stream(
    fm: &FeatureMap,
    layer: &LayerShape,
    cfg: &ParallelismConfig,
    depth_override: Option<usize>,
) -> Result<OrchestratorMemory, SimError> {
    if fm.t_s != layer.t_s || fm.f_h != layer.f_h || fm.f_w != layer.f_w || fm.c_i != layer.c_i {
        return Err(SimError::Config(
            "feature map dims do not match the layer".into(),
        ));
    }
    let geo = Geometry::derive(layer, cfg)?;
    let natural_depth = geo.t_blocks * layer.f_h * geo.row_depth;
    let depth = depth_override.unwrap_or(natural_depth);
    let mut mem = OrchestratorMemory {
        banks: geo.p_fx,
        word_bits: geo.p_ts * geo.p_ci,
        depth,
        push_cycles: 0,
        words: vec![None; geo.p_fx * depth],
        geo,
        f_h: layer.f_h,
        f_w: layer.f_w,
    };

    let words_per_pixel = geo.s / geo.p_fx;
    let mut banks_this_cycle = vec![false; geo.p_fx];
    for t_block in 0..geo.t_blocks {
        for h in 0..layer.f_h {
            for x in 0..layer.f_w {
                for wg in 0..words_per_pixel {
                    mem.push_cycles += 1;
                    banks_this_cycle.iter_mut().for_each(|b| *b = false);
                    for j in 0..geo.p_fx {
                        let slice = wg * geo.p_fx + j;
                        let bank = geo.bank(x, slice);
                        let addr = geo.addr(t_block, h, layer.f_h, x, slice);
                        if addr >= depth {
                            return Err(SimError::MemoryOverflow { addr, depth });
                        }
                        assert!(
                            !std::mem::replace(&mut banks_this_cycle[bank], true),
                            "two writes to bank {bank} in one push cycle"
                        );
                        let word = fm.slice(t_block, h, x, slice, geo.p_ts, geo.p_ci);
                        let cell = &mut mem.words[bank * depth + addr];
                        assert!(cell.is_none(), "word written twice: b{bank}@{addr}");
                        *cell = Some(word);
                    }
                }
            }
        }
    }
    Ok(mem)
}

/// One popped dataflow: the window vectors plus cycle accounting.
#[derive(Debug, Clone)]
pub struct PopStream {
    pub vectors: Vec<SpikeBitmap>,
    pub result: SimResult,
}

/// Pops the kernel-window dataflow: per output-pixel group, the full
/// window in (k_h, k_w, c_i-block) order, one vector per cycle, with
/// zero vectors synthesized where the window leaves the map.
pub fn pop_stream(
    mem: &OrchestratorMemory,
    layer: &LayerShape,
    cfg: &ParallelismConfig,
) -> Result<PopStream, SimError> {
    let geo = Geometry::derive(layer, cfg)?;
    if mem.f_h != layer.f_h || mem.f_w != layer.f_w || mem.geo.s != geo.s {
        return Err(SimError::Config(
            "memory was pushed with a different layer geometry".into(),
        ));
    }
    let vec_bits = geo.p_fx * geo.p_ts * geo.p_ci;
    let out_h = layer.out_h();
    let out_w = layer.out_w();
    let groups_w = out_w.div_ceil(geo.p_fx);
    let pad = layer.padding as i64;
    let mut vectors = Vec::new();
    let mut cycles = 0u64;
    let mut addr_of_bank: Vec<Option<usize>> = vec![None; geo.p_fx];

    for t_block in 0..geo.t_blocks {
        for o_h in 0..out_h {
            for og in 0..groups_w {
                for k_h in 0..layer.k_h {
                    let h = (o_h * layer.stride + k_h) as i64 - pad;
                    for k_w in 0..layer.k_w {
                        for slice in 0..geo.s {
                            cycles += 1;
                            let mut vector = SpikeBitmap::zeros(vec_bits);
                            if h >= 0 && (h as usize) < layer.f_h {
                                addr_of_bank.iter_mut().for_each(|a| *a = None);
                                for lane in 0..geo.p_fx {
                                    let oc = og * geo.p_fx + lane;
                                    if oc >= out_w {
                                        continue;
                                    }
                                    let x = (oc * layer.stride + k_w) as i64 - pad;
                                    if x < 0 || x as usize >= layer.f_w {
                                        continue;
                                    }
                                    let x = x as usize;
                                    let bank = geo.bank(x, slice);
                                    let addr =
                                        geo.addr(t_block, h as usize, layer.f_h, x, slice);
                                    match addr_of_bank[bank] {
                                        None => addr_of_bank[bank] = Some(addr),
                                        Some(prev) => assert_eq!(
                                            prev, addr,
                                            "two addresses requested in bank {bank} in one pop cycle"
                                        ),
                                    }
                                    let word = mem.word(bank, addr)?;
                                    for bit in word.set_bits() {
                                        vector.set(lane * geo.p_ts * geo.p_ci + bit, true);
                                    }
                                }
                            }
                            vectors.push(vector);
                        }
                    }
                }
            }
        }
    }

    Ok(PopStream {
        result: SimResult {
            cycles,
            stalls: 0,
            per_unit_busy: vec![1.0; geo.p_fx],
            trace: None,
        },
        vectors,
    })
}

/// Nested-loop oracle gathering padded windows straight from the dense map.
pub fn reference_im2col(
    fm: &FeatureMap,
    layer: &LayerShape,
    cfg: &ParallelismConfig,
) -> Result<Vec<SpikeBitmap>, SimError> {
    let geo = Geometry::derive(layer, cfg)?;
    let vec_bits = geo.p_fx * geo.p_ts * geo.p_ci;
    let out_h = layer.out_h();
    let out_w = layer.out_w();
    let groups_w = out_w.div_ceil(geo.p_fx);
    let pad = layer.padding as i64;
    let mut vectors = Vec::new();
    for t_block in 0..geo.t_blocks {
        for o_h in 0..out_h {
            for og in 0..groups_w {
                for k_h in 0..layer.k_h {
                    let h = (o_h * layer.stride + k_h) as i64 - pad;
                    for k_w in 0..layer.k_w {
                        for slice in 0..geo.s {
                            let mut vector = SpikeBitmap::zeros(vec_bits);
                            if h >= 0 && (h as usize) < layer.f_h {
                                for lane in 0..geo.p_fx {
                                    let oc = og * geo.p_fx + lane;
                                    if oc >= out_w {
                                        continue;
                                    }
                                    let x = (oc * layer.stride + k_w) as i64 - pad;
                                    if x < 0 || x as usize >= layer.f_w {
                                        continue;
                                    }
                                    let word = fm.slice(
                                        t_block,
                                        h as usize,
                                        x as usize,
                                        slice,
                                        geo.p_ts,
                                        geo.p_ci,
                                    );
                                    for bit in word.set_bits() {
                                        vector.set(lane * geo.p_ts * geo.p_ci + bit, true);
                                    }
                                }
                            }
                            vectors.push(vector);
                        }
                    }
                }
            }
        }
    }
    Ok(vectors)
}

/// Expected pop-stream length in vectors (equals pop cycles).
pub fn stream_length(layer: &LayerShape, cfg: &ParallelismConfig) -> Result<u64, SimError> {
    let geo = Geometry::derive(layer, cfg)?;
    Ok(geo.t_blocks as u64
        * layer.out_h() as u64
        * layer.out_w().div_ceil(geo.p_fx) as u64
        * (layer.k_h * layer.k_w) as u64
        * geo.s as u64)
}

/// Outcome of one push/pop-vs-oracle equivalence run.
#[derive(Debug, Clone, Serialize)]
pub struct OrchestratorCheck {
    pub vectors: u64,
    pub pop_cycles: u64,
    pub stalls: u64,
    pub first_divergence: Option<u64>,
}

/// Runs push + pop and compares byte-exactly against the oracle.
pub fn orchestrate_check(
    fm: &FeatureMap,
    layer: &LayerShape,
    cfg: &ParallelismConfig,
) -> Result<OrchestratorCheck, SimError> {
    let mem = push_stream(fm, layer, cfg, None)?;
    let popped = pop_stream(&mem, layer, cfg)?;
    let oracle = reference_im2col(fm, layer, cfg)?;
    let first_divergence = popped
        .vectors
        .iter()
        .zip(&oracle)
        .position(|(a, b)| a != b)
        .map(|i| i as u64)
        .or_else(|| {
            (popped.vectors.len() != oracle.len())
                .then_some(popped.vectors.len().min(oracle.len()) as u64)
        });
    Ok(OrchestratorCheck {
        vectors: oracle.len() as u64,
        pop_cycles: popped.result.cycles,
        stalls: popped.result.stalls,
        first_divergence,
    })
}

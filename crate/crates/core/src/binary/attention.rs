//! Functional reference and systolic-array timing for binary attention.
//!
//! All matrices are binary; inner products reduce to AND + popcount. The
//! score matrix S = binarize(QK^T) and output O = binarize(S V) use
//! integer arithmetic throughout, with the 1/sqrt(d) scaling folded into
//! the first threshold as a precomputed rounded integer.

use rand::Rng;
use serde::Serialize;

use crate::binary::transpose::{transpose_frame, Frame, TransposeMemory};
use crate::bitmap::SpikeBitmap;
use crate::error::SimError;

/// A binary matrix stored as one bitmap per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<SpikeBitmap>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![SpikeBitmap::zeros(cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn random<R: Rng>(rows: usize, cols: usize, density: f64, rng: &mut R) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if rng.random::<f64>() < density {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r].get(c)
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r].set(c, v);
    }

    pub fn row(&self, r: usize) -> &SpikeBitmap {
        &self.data[r]
    }

    pub fn transposed(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in self.data[r].set_bits() {
                out.set(c, r, true);
            }
        }
        out
    }

    /// Flattens per-timestep matrices into a (L, d, T_s)-ordered byte frame.
    pub fn frames_to_stream(frames: &[BinaryMatrix]) -> Frame {
        let t_s = frames.len();
        let l = frames[0].rows;
        let d = frames[0].cols;
        let mut data = Vec::with_capacity(l * d * t_s);
        for li in 0..l {
            for di in 0..d {
                for f in frames {
                    data.push(f.get(li, di) as u8);
                }
            }
        }
        Frame::new(l, d, t_s, data)
    }
}

/// Thresholding neuron: fires when an integer input reaches the effective
/// threshold. `scale_divisor` carries the embedding dim d whose square
/// root is folded in; the effective threshold is round(delta * sqrt(d)).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdNeuron {
    pub threshold: i64,
    pub scale_divisor: u64,
}

impl ThresholdNeuron {
    pub fn new(threshold: i64, scale_divisor: u64) -> Self {
        Self {
            threshold,
            scale_divisor,
        }
    }

    /// A plain threshold with no scaling folded in.
    pub fn unscaled(threshold: i64) -> Self {
        Self::new(threshold, 1)
    }

    pub fn effective_threshold(&self) -> i64 {
        (self.threshold as f64 * (self.scale_divisor as f64).sqrt()).round() as i64
    }

    pub fn fire(&self, input: i64) -> bool {
        input >= self.effective_threshold()
    }
}

/// Integer-exact reference for one timestep of binary attention.
///
/// S = binarize(Q K^T, round(delta1 * sqrt(d))); O = binarize(S V, delta2).
pub fn binary_attention_reference(
    q: &BinaryMatrix,
    k: &BinaryMatrix,
    v: &BinaryMatrix,
    score_neuron: &ThresholdNeuron,
    output_neuron: &ThresholdNeuron,
) -> BinaryMatrix {
    assert_eq!(q.cols, k.cols, "Q and K must share the embedding dim");
    assert_eq!(k.rows, v.rows, "K and V must share the sequence length");
    let l = q.rows;
    let d = v.cols;
    let mut score = BinaryMatrix::zeros(l, k.rows);
    for i in 0..l {
        for j in 0..k.rows {
            let dot = q.row(i).and(k.row(j)).expect("width checked").popcount() as i64;
            score.set(i, j, score_neuron.fire(dot));
        }
    }
    let vt = v.transposed();
    let mut out = BinaryMatrix::zeros(l, d);
    for i in 0..l {
        for j in 0..d {
            let dot = score
                .row(i)
                .and(vt.row(j))
                .expect("width checked")
                .popcount() as i64;
            out.set(i, j, output_neuron.fire(dot));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SystolicConfig {
    pub p_bm: usize,
    pub p_bn: usize,
    pub p_bk: usize,
}

impl SystolicConfig {
    pub fn new(p_bm: usize, p_bn: usize, p_bk: usize) -> Self {
        assert!(p_bm >= 1 && p_bn >= 1 && p_bk >= 1);
        Self { p_bm, p_bn, p_bk }
    }

    /// Total binary-engine parallelism.
    pub fn p_b(&self) -> usize {
        self.p_bm * self.p_bn * self.p_bk
    }

    /// Tile count for an (m x n) output with inner dimension k.
    pub fn tiles(&self, m: usize, n: usize, k: usize) -> u64 {
        (m.div_ceil(self.p_bm) * n.div_ceil(self.p_bn) * k.div_ceil(self.p_bk)) as u64
    }
}

/// Analytic cycle count for both attention matmuls over T_s timesteps.
pub fn systolic_cycle_formula(t_s: usize, l: usize, d: usize, cfg: &SystolicConfig) -> u64 {
    t_s as u64 * (cfg.tiles(l, l, d) + cfg.tiles(l, d, l))
}

/// Runs per-timestep binary attention on the systolic-array model.
///
/// V is routed through the implicit-transpose memory to d x L layout
/// before the second matmul; outputs are bit-exact with
/// `binary_attention_reference` and the cycle count follows the tile
/// formula for the two matmuls.
pub fn simulate_systolic(
    q_frames: &[BinaryMatrix],
    k_frames: &[BinaryMatrix],
    v_frames: &[BinaryMatrix],
    cfg: &SystolicConfig,
    score_neuron: &ThresholdNeuron,
    output_neuron: &ThresholdNeuron,
) -> Result<(Vec<BinaryMatrix>, u64), SimError> {
    let t_s = q_frames.len();
    if k_frames.len() != t_s || v_frames.len() != t_s {
        return Err(SimError::Config(
            "Q/K/V must have the same number of timestep frames".into(),
        ));
    }
    if t_s == 0 {
        return Ok((Vec::new(), 0));
    }
    let l = q_frames[0].rows;
    let d = q_frames[0].cols;
    for f in q_frames.iter().chain(k_frames).chain(v_frames) {
        if f.rows != l || f.cols != d {
            return Err(SimError::WidthMismatch {
                expected: l * d,
                got: f.rows * f.cols,
            });
        }
    }

    // Transpose V in one frame: (L, d, T_s) -> (T_s, d, L).
    let stream = BinaryMatrix::frames_to_stream(v_frames);
    let mut mem = TransposeMemory::new(t_s, d, l);
    let (popped, _stats) = transpose_frame(&mut mem, &stream)?;
    let mut vt_frames = Vec::with_capacity(t_s);
    for t in 0..t_s {
        let mut vt = BinaryMatrix::zeros(d, l);
        for di in 0..d {
            for li in 0..l {
                if popped[(t * d + di) * l + li] != 0 {
                    vt.set(di, li, true);
                }
            }
        }
        vt_frames.push(vt);
    }

    let mut cycles = 0u64;
    let mut outputs = Vec::with_capacity(t_s);
    for t in 0..t_s {
        let (q, k, vt) = (&q_frames[t], &k_frames[t], &vt_frames[t]);
        let score_raw = tiled_binary_matmul(q, k, l, l, d, cfg, &mut cycles);
        let mut score = BinaryMatrix::zeros(l, l);
        for i in 0..l {
            for j in 0..l {
                score.set(i, j, score_neuron.fire(score_raw[i][j]));
            }
        }
        // Second matmul reads V^T rows, so both operands stream row-wise.
        let out_raw = tiled_binary_matmul(&score, vt, l, d, l, cfg, &mut cycles);
        let mut out = BinaryMatrix::zeros(l, d);
        for i in 0..l {
            for j in 0..d {
                out.set(i, j, output_neuron.fire(out_raw[i][j]));
            }
        }
        outputs.push(out);
    }
    Ok((outputs, cycles))
}

/// Tiled AND-popcount matmul: `out[i][j] = sum_k a[i][k] & b[j][k]`.
/// One cycle per (P_Bm x P_Bn x P_Bk) tile.
fn tiled_binary_matmul(
    a: &BinaryMatrix,
    b: &BinaryMatrix,
    m: usize,
    n: usize,
    k_dim: usize,
    cfg: &SystolicConfig,
    cycles: &mut u64,
) -> Vec<Vec<i64>> {
    let mut acc = vec![vec![0i64; n]; m];
    let mut mi = 0;
    while mi < m {
        let mut ni = 0;
        while ni < n {
            let mut ki = 0;
            while ki < k_dim {
                *cycles += 1;
                let k_len = cfg.p_bk.min(k_dim - ki);
                for i in mi..m.min(mi + cfg.p_bm) {
                    for j in ni..n.min(ni + cfg.p_bn) {
                        let pa = a.row(i).slice(ki, k_len);
                        let pb = b.row(j).slice(ki, k_len);
                        acc[i][j] += pa.and(&pb).expect("same width").popcount() as i64;
                    }
                }
                ki += cfg.p_bk;
            }
            ni += cfg.p_bn;
        }
        mi += cfg.p_bm;
    }
    acc
}

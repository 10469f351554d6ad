//! Bit-exact model of the M-lane one-hot sparse decoder.
//!
//! Lane `m` of a decode step emits a one-hot vector marking the
//! `(m+1)`-th lowest set bit of the pending bitmap. The hardware derives
//! this with a look-ahead carry chain; `lane_signals` reproduces that
//! formulation so tests can check the two against each other.

use serde::Serialize;

use crate::bitmap::SpikeBitmap;

/// Decoder state between cycles. The tracker mirrors the remaining spike
/// count and equals `popcount(pending)` at every cycle boundary.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub pending: SpikeBitmap,
    pub tracker: usize,
    pub cycle: u64,
}

impl DecoderState {
    pub fn new(input: SpikeBitmap) -> Self {
        let tracker = input.popcount();
        Self {
            pending: input,
            tracker,
            cycle: 0,
        }
    }
}

/// Outputs of one decode step: per-lane one-hot bitmaps plus the extracted
/// bit positions in ascending order.
#[derive(Debug, Clone)]
pub struct LaneOutputs {
    pub onehot: Vec<SpikeBitmap>,
    pub indices: Vec<usize>,
}

/// Per-lane generate/carry/output signals of the carry-chain formulation.
///
/// For lane `m` and bit `n`:
///   g[m][n] = i[n] & c[m-1][n]          (lane -1 carry is identically 1)
///   c[m][n+1] = g[m][n] | c[m][n]       with c[m][0] = 0
///   o[m][n] = g[m][n] & !c[m][n]
pub struct LaneSignals {
    pub generate: Vec<Vec<bool>>,
    /// Carry vectors, one entry longer than the input width.
    pub carry: Vec<Vec<bool>>,
    pub onehot: Vec<Vec<bool>>,
}

/// Evaluates the carry-chain equations directly.
pub fn lane_signals(pending: &SpikeBitmap, m: usize) -> LaneSignals {
    let width = pending.width();
    let mut generate = vec![vec![false; width]; m];
    let mut carry = vec![vec![false; width + 1]; m];
    let mut onehot = vec![vec![false; width]; m];
    for lane in 0..m {
        for n in 0..width {
            let carry_in_prev_lane = if lane == 0 {
                true
            } else {
                carry[lane - 1][n]
            };
            let g = pending.get(n) && carry_in_prev_lane;
            generate[lane][n] = g;
            onehot[lane][n] = g && !carry[lane][n];
            carry[lane][n + 1] = g || carry[lane][n];
        }
    }
    LaneSignals {
        generate,
        carry,
        onehot,
    }
}

/// Extracts up to `m` spikes from the pending bitmap in one cycle.
///
/// Lane `m` emits the `(m+1)`-th lowest set bit if it exists. The new
/// pending clears exactly the extracted one-hots, and the tracker drops by
/// the number of bits actually extracted.
pub fn decode_step(state: &DecoderState, m: usize) -> (LaneOutputs, DecoderState) {
    assert!(m >= 1, "decoder needs at least one lane");
    let width = state.pending.width();
    let indices = state.pending.lowest_set_bits(m);
    let mut onehot = Vec::with_capacity(m);
    for lane in 0..m {
        let mut v = SpikeBitmap::zeros(width);
        if let Some(&idx) = indices.get(lane) {
            v.set(idx, true);
        }
        onehot.push(v);
    }
    let extracted = SpikeBitmap::from_indices(width, &indices);
    let pending = state.pending.and_not(&extracted).expect("same width");
    let next = DecoderState {
        tracker: state.tracker - indices.len(),
        pending,
        cycle: state.cycle + 1,
    };
    (LaneOutputs { onehot, indices }, next)
}

/// One trace entry: the positions extracted from one input in one cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeTraceEntry {
    pub cycle: u64,
    pub input_index: usize,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecodeTrace {
    pub cycles: u64,
    pub entries: Vec<DecodeTraceEntry>,
}

impl DecodeTrace {
    /// Extracted positions grouped per input, in extraction order.
    pub fn positions_per_input(&self, inputs: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); inputs];
        for e in &self.entries {
            out[e.input_index].extend_from_slice(&e.positions);
        }
        out
    }
}

/// Streams a sequence of bitmaps through the decoder and counts cycles.
///
/// A new input loads in the same cycle the tracker condition (<= M) is
/// met, so back-to-back inputs incur no bubble; an all-zero input still
/// occupies its load cycle.
pub fn decode_stream(inputs: &[SpikeBitmap], m: usize) -> DecodeTrace {
    assert!(m >= 1, "decoder needs at least one lane");
    let mut entries = Vec::new();
    let mut cycle = 0u64;
    let mut queue = inputs.iter().enumerate();
    let Some((mut cur_idx, first)) = queue.next() else {
        return DecodeTrace { cycles: 0, entries };
    };
    // Lean copy of the decode_step loop: the per-lane one-hot vectors are
    // not materialized, only the extracted positions.
    let mut pending = first.clone();
    let mut tracker = pending.popcount();
    loop {
        cycle += 1;
        let tracker_at_start = tracker;
        let positions = pending.lowest_set_bits(m);
        if !positions.is_empty() {
            tracker -= positions.len();
            for &p in &positions {
                pending.set(p, false);
            }
            entries.push(DecodeTraceEntry {
                cycle,
                input_index: cur_idx,
                positions,
            });
        }
        debug_assert_eq!(tracker, pending.popcount());
        if tracker_at_start <= m {
            // Current input drained this cycle; the next one loads now.
            match queue.next() {
                Some((idx, next_input)) => {
                    cur_idx = idx;
                    pending = next_input.clone();
                    tracker = pending.popcount();
                }
                None => break,
            }
        }
    }
    DecodeTrace { cycles: cycle, entries }
}

/// Analytic cycle count the stream loop must match:
/// each input costs `max(1, ceil(popcount / m))` cycles.
pub fn expected_stream_cycles(inputs: &[SpikeBitmap], m: usize) -> u64 {
    inputs
        .iter()
        .map(|b| (b.popcount() as u64).div_ceil(m as u64).max(1))
        .sum()
}

/// Reference decode: all set-bit positions in ascending order.
pub fn oracle_decode(b: &SpikeBitmap) -> Vec<usize> {
    b.set_bits().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm16(v: u64) -> SpikeBitmap {
        SpikeBitmap::from_u64(16, v)
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(oracle_decode(&bm16(0x9042)), vec![1, 6, 12, 15]);
        assert_eq!(oracle_decode(&bm16(0x400B)), vec![0, 1, 3, 14]);
        assert_eq!(
            oracle_decode(&SpikeBitmap::ones(8)),
            (0..8).collect::<Vec<_>>()
        );
    }

    #[test]
    fn four_lanes_extract_0x9042_in_one_step() {
        let state = DecoderState::new(bm16(0x9042));
        let (out, next) = decode_step(&state, 4);
        assert_eq!(out.indices, vec![1, 6, 12, 15]);
        assert!(next.pending.is_zero());
        assert_eq!(next.tracker, 0);
        for (lane, oh) in out.onehot.iter().enumerate() {
            assert_eq!(oh.popcount(), 1);
            assert!(oh.get(out.indices[lane]));
        }
    }

    #[test]
    fn single_lane_takes_four_steps() {
        let mut state = DecoderState::new(bm16(0x9042));
        let mut seen = Vec::new();
        for _ in 0..4 {
            let (out, next) = decode_step(&state, 1);
            seen.extend(out.indices);
            state = next;
        }
        assert_eq!(seen, vec![1, 6, 12, 15]);
        assert!(state.pending.is_zero());
    }

    #[test]
    fn empty_pending_is_a_no_op() {
        let state = DecoderState::new(bm16(0));
        let (out, next) = decode_step(&state, 8);
        assert!(out.indices.is_empty());
        assert!(out.onehot.iter().all(SpikeBitmap::is_zero));
        assert_eq!(next.tracker, 0);
        assert_eq!(next.cycle, 1);
    }

    #[test]
    fn stream_cycle_counts_match_figure() {
        let t = decode_stream(&[bm16(0x9042)], 4);
        assert_eq!(t.cycles, 1);
        let t = decode_stream(&[bm16(0x9042)], 1);
        assert_eq!(t.cycles, 4);
    }

    #[test]
    fn stream_trace_attributes_positions_to_inputs() {
        let inputs = vec![bm16(0x9042), bm16(0x0), bm16(0x400B)];
        let t = decode_stream(&inputs, 2);
        // ceil(4/2) + 1 + ceil(4/2) = 5 cycles.
        assert_eq!(t.cycles, 5);
        assert_eq!(t.cycles, expected_stream_cycles(&inputs, 2));
        let per_input = t.positions_per_input(3);
        assert_eq!(per_input[0], vec![1, 6, 12, 15]);
        assert!(per_input[1].is_empty());
        assert_eq!(per_input[2], vec![0, 1, 3, 14]);
    }

    #[test]
    fn carry_chain_matches_direct_extraction() {
        for v in [0x9042u64, 0x400B, 0x0, 0xFFFF, 0x8000, 0x1] {
            let b = bm16(v);
            for m in [1usize, 2, 4, 8] {
                let sig = lane_signals(&b, m);
                let (out, _) = decode_step(&DecoderState::new(b.clone()), m);
                for lane in 0..m {
                    let expected: Vec<usize> = (0..16).filter(|&n| sig.onehot[lane][n]).collect();
                    let got: Vec<usize> = out.onehot[lane].set_bits().collect();
                    assert_eq!(expected, got, "lane {lane} of 0x{v:x} with m={m}");
                }
            }
        }
    }

    #[test]
    fn random_streams_match_oracle_and_formula() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for m in [1usize, 2, 4] {
            let inputs: Vec<SpikeBitmap> = (0..1000)
                .map(|_| SpikeBitmap::from_u64(64, rng.random::<u64>()))
                .collect();
            let t = decode_stream(&inputs, m);
            assert_eq!(t.cycles, expected_stream_cycles(&inputs, m));
            let per_input = t.positions_per_input(inputs.len());
            for (inp, got) in inputs.iter().zip(per_input) {
                assert_eq!(got, oracle_decode(inp));
            }
        }
    }
}

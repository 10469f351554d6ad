//! Property tests for the model invariants.

use proptest::prelude::*;

use spikesim::balancer::{simulate_unified, sparsity_stability};
use spikesim::binary::{build_optimized_popcount, build_vanilla_popcount};
use spikesim::decoder::{decode_step, decode_stream, lane_signals, oracle_decode, DecoderState};
use spikesim::{GridWorkload, ParallelismConfig, SpikeBitmap};

fn bitmap_strategy(width: usize) -> impl Strategy<Value = SpikeBitmap> {
    prop::collection::vec(any::<bool>(), width).prop_map(move |bits| {
        let mut b = SpikeBitmap::zeros(width);
        for (i, set) in bits.into_iter().enumerate() {
            if set {
                b.set(i, true);
            }
        }
        b
    })
}

proptest! {
    /// Each decode step on a nonempty pending strictly decreases its
    /// popcount and never extracts more than M bits.
    #[test]
    fn decoder_progress_and_throughput(bits in bitmap_strategy(48), m in 1usize..=8) {
        let state = DecoderState::new(bits.clone());
        let (out, next) = decode_step(&state, m);
        prop_assert!(out.indices.len() <= m);
        prop_assert_eq!(out.indices.len(), m.min(bits.popcount()));
        if !bits.is_zero() {
            prop_assert!(next.pending.popcount() < bits.popcount());
        }
        prop_assert_eq!(next.tracker, next.pending.popcount());
    }

    /// The carry-chain formulation and the direct extraction agree, and
    /// the carry recurrence c[m][n+1] = g[m][n] | c[m][n] holds with
    /// c[m][0] = 0 and an always-set lane -1 carry.
    #[test]
    fn decoder_carry_consistency(bits in bitmap_strategy(24), m in 1usize..=6) {
        let sig = lane_signals(&bits, m);
        let (out, _) = decode_step(&DecoderState::new(bits.clone()), m);
        for lane in 0..m {
            prop_assert_eq!(sig.carry[lane][0], false);
            for n in 0..bits.width() {
                let prev = if lane == 0 { true } else { sig.carry[lane - 1][n] };
                let g = bits.get(n) && prev;
                prop_assert_eq!(sig.generate[lane][n], g);
                prop_assert_eq!(sig.carry[lane][n + 1], g || sig.carry[lane][n]);
            }
            let expected: Vec<usize> =
                (0..bits.width()).filter(|&n| sig.onehot[lane][n]).collect();
            let got: Vec<usize> = out.onehot[lane].set_bits().collect();
            prop_assert_eq!(expected, got);
        }
    }

    /// Streaming any input sequence extracts exactly the oracle positions
    /// and costs max(1, ceil(popcount/M)) cycles per input.
    #[test]
    fn decoder_stream_matches_oracle(
        inputs in prop::collection::vec(bitmap_strategy(32), 1..12),
        m in 1usize..=6,
    ) {
        let trace = decode_stream(&inputs, m);
        let expected: u64 = inputs
            .iter()
            .map(|b| (b.popcount() as u64).div_ceil(m as u64).max(1))
            .sum();
        prop_assert_eq!(trace.cycles, expected);
        let per_input = trace.positions_per_input(inputs.len());
        for (input, got) in inputs.iter().zip(per_input) {
            prop_assert_eq!(got, oracle_decode(input));
        }
    }

    /// Both popcount constructions equal popcount(a & b) at any width.
    #[test]
    fn popcount_networks_functional(width in 1usize..=40, a in any::<u64>(), b in any::<u64>()) {
        let ba = SpikeBitmap::from_u64(width.min(64), a);
        let bb = SpikeBitmap::from_u64(width.min(64), b);
        let expect = ba.and(&bb).unwrap().popcount() as u64;
        prop_assert_eq!(build_vanilla_popcount(width).evaluate(&ba, &bb).unwrap(), expect);
        prop_assert_eq!(build_optimized_popcount(width).evaluate(&ba, &bb).unwrap(), expect);
    }

    /// Unified latency respects the pacing and work lower bounds and is
    /// monotone in both workers and lanes.
    #[test]
    fn unified_bounds_and_monotonicity(
        seed in 0u64..5000,
        p_wo in 1usize..=3,
        m in 1usize..=4,
    ) {
        use spikesim::config::{LayerKind, LayerShape, SparsityModel};
        let layer = LayerShape {
            t_s: 1, f_h: 8, f_w: 8, c_i: 32, c_o: 8,
            k_h: 3, k_w: 3, stride: 1, padding: 1, kind: LayerKind::Conv,
        };
        let cfg = ParallelismConfig {
            p_ts: 1, p_fx: 4, p_ci: 8, p_wo, m,
            ..ParallelismConfig::default()
        };
        let model = SparsityModel::bernoulli(0.7, seed);
        let w = GridWorkload::generate(&layer, &model, &cfg, 0);
        let d = simulate_unified(&w, &cfg).cycles;
        let max_g = w.per_grid_popcount().into_iter().max().unwrap_or(0) as u64;
        let bound = (w.chunk_count() as u64).max(max_g.div_ceil(cfg.g() as u64));
        prop_assert!(d >= bound);

        let more_workers = ParallelismConfig { p_wo: p_wo + 1, ..cfg.clone() };
        prop_assert!(simulate_unified(&w, &more_workers).cycles <= d);
        let more_lanes = ParallelismConfig { m: m * 2, ..cfg.clone() };
        prop_assert!(simulate_unified(&w, &more_lanes).cycles <= d);
    }

    /// Stability is scale-free: identical grid points give zero, and any
    /// workload stays within [0, 0.5] of the theoretical maximum.
    #[test]
    fn stability_bounds(seed in 0u64..5000) {
        use spikesim::config::{LayerKind, LayerShape, SparsityModel};
        let layer = LayerShape {
            t_s: 1, f_h: 8, f_w: 8, c_i: 16, c_o: 8,
            k_h: 3, k_w: 3, stride: 1, padding: 1, kind: LayerKind::Conv,
        };
        let cfg = ParallelismConfig { p_ts: 2, p_fx: 4, p_ci: 8, ..ParallelismConfig::default() };
        let model = SparsityModel::bernoulli(0.5, seed);
        let w = GridWorkload::generate(&layer, &model, &cfg, 0);
        let s = sparsity_stability(&w);
        prop_assert!((0.0..=0.5).contains(&s));
    }
}

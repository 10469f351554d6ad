//! Engine workload arithmetic, binary-engine sizing, the latency-hiding
//! attention schedule, and end-to-end per-layer cycle accounting.
//!
//! The sparse engine computes the Q/K/V projections head after head with
//! no idle gaps; the binary engine starts a head's score matmul as soon as
//! that head's K finishes and its output matmul once both the score and V
//! are done. Exposed binary cycles are whatever the binary engine adds
//! beyond the sparse engine's total.

use serde::Serialize;

use crate::balancer::simulate_unified;
use crate::binary::attention::SystolicConfig;
use crate::config::{LayerKind, LayerShape, NetworkConfig, ParallelismConfig, SparsityModel};
use crate::error::SimError;
use crate::workload::GridWorkload;

/// Computational workloads and parallelism of the two engines for one
/// layer (per attention head, when one is present).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EngineWorkloads {
    pub w_s: u64,
    pub w_b: u64,
    pub p_s: u64,
    pub p_b: u64,
}

/// Workload/parallelism tuple: sparse work scales with the kernel-window
/// volume, binary work with the squared sequence length; `w_b` is zero for
/// layers without attention.
pub fn compute_workloads(
    layer: &LayerShape,
    has_attention: bool,
    cfg: &ParallelismConfig,
) -> EngineWorkloads {
    let spatial = (layer.f_h * layer.f_w) as u64;
    let w_s = layer.t_s as u64 * spatial * layer.c_i as u64 * cfg.p_co as u64;
    let w_b = if has_attention {
        layer.t_s as u64 * spatial * spatial * cfg.p_co as u64
    } else {
        0
    };
    EngineWorkloads {
        w_s,
        w_b,
        p_s: (cfg.p_ts * cfg.p_fx * cfg.p_ci * cfg.p_co) as u64,
        p_b: (cfg.p_bm * cfg.p_bn * cfg.p_bk) as u64,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RequiredPb {
    /// Exact balance point 2/3 * (F_h*F_w / C_i) * P_s.
    pub raw: f64,
    /// Smallest legal configuration at or above `raw`.
    pub rounded: u64,
    pub factorization: (usize, usize, usize),
}

/// Binary-engine parallelism needed to hide attention behind the
/// projections, rounded up to a power-of-two (P_Bm, P_Bn, P_Bk) split.
pub fn required_pb(seq_len: usize, c_i: usize, p_s: u64) -> RequiredPb {
    assert!(c_i > 0);
    let raw = 2.0 / 3.0 * seq_len as f64 / c_i as f64 * p_s as f64;
    let mut rounded = 1u64;
    while (rounded as f64) < raw {
        rounded *= 2;
    }
    let exp = rounded.trailing_zeros() as usize;
    // Inner-product length first (up to 16 lanes), then a near-square array.
    let k_exp = exp.min(4);
    let rest = exp - k_exp;
    let m_exp = rest.div_ceil(2);
    let n_exp = rest - m_exp;
    RequiredPb {
        raw,
        rounded,
        factorization: (1 << m_exp, 1 << n_exp, 1 << k_exp),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Sparse,
    Binary,
}

/// Attention-pipeline operations: three projections on the sparse engine,
/// two matmuls on the binary engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttnOp {
    Q,
    K,
    V,
    Score,
    Output,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScheduleEntry {
    pub engine: Engine,
    pub op: AttnOp,
    pub head: usize,
    pub start_cycle: u64,
    pub end_cycle: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
    pub total_cycles: u64,
    /// Binary time not overlapped by sparse work.
    pub exposed_binary_cycles: u64,
}

impl Schedule {
    /// Every entry starts at or after all of its dependencies end.
    pub fn respects_dependencies(&self) -> bool {
        let find = |op: AttnOp, head: usize| {
            self.entries
                .iter()
                .find(|e| e.op == op && e.head == head)
                .copied()
        };
        self.entries.iter().all(|e| match e.op {
            AttnOp::Score => {
                find(AttnOp::K, e.head).is_some_and(|k| e.start_cycle >= k.end_cycle)
            }
            AttnOp::Output => {
                let s_ok =
                    find(AttnOp::Score, e.head).is_some_and(|s| e.start_cycle >= s.end_cycle);
                let v_ok = find(AttnOp::V, e.head).is_some_and(|v| e.start_cycle >= v.end_cycle);
                s_ok && v_ok
            }
            _ => true,
        })
    }

    /// Per engine, entries must not overlap.
    pub fn engines_exclusive(&self) -> bool {
        for engine in [Engine::Sparse, Engine::Binary] {
            let mut spans: Vec<(u64, u64)> = self
                .entries
                .iter()
                .filter(|e| e.engine == engine)
                .map(|e| (e.start_cycle, e.end_cycle))
                .collect();
            spans.sort_unstable();
            if spans.windows(2).any(|w| w[1].0 < w[0].1) {
                return false;
            }
        }
        true
    }
}

/// Greedy non-preemptive list schedule of one attention block.
///
/// `sparse_latency` and `binary_latency` give per-op, per-head cycle
/// counts; entries with zero latency are scheduled as empty spans.
pub fn schedule_attention(
    heads: usize,
    sparse_latency: impl Fn(AttnOp, usize) -> u64,
    binary_latency: impl Fn(AttnOp, usize) -> u64,
) -> Schedule {
    let mut entries = Vec::with_capacity(heads * 5);
    let mut sparse_t = 0u64;
    let mut binary_free = 0u64;
    let mut sparse_total = 0u64;
    let mut total = 0u64;
    for head in 0..heads {
        let mut ends = [0u64; 3];
        for (i, op) in [AttnOp::Q, AttnOp::K, AttnOp::V].into_iter().enumerate() {
            let lat = sparse_latency(op, head);
            entries.push(ScheduleEntry {
                engine: Engine::Sparse,
                op,
                head,
                start_cycle: sparse_t,
                end_cycle: sparse_t + lat,
            });
            sparse_t += lat;
            sparse_total += lat;
            ends[i] = sparse_t;
        }
        let [_, k_end, v_end] = ends;

        let score_lat = binary_latency(AttnOp::Score, head);
        let score_start = binary_free.max(k_end);
        let score_end = score_start + score_lat;
        entries.push(ScheduleEntry {
            engine: Engine::Binary,
            op: AttnOp::Score,
            head,
            start_cycle: score_start,
            end_cycle: score_end,
        });

        let out_lat = binary_latency(AttnOp::Output, head);
        let out_start = score_end.max(v_end);
        let out_end = out_start + out_lat;
        entries.push(ScheduleEntry {
            engine: Engine::Binary,
            op: AttnOp::Output,
            head,
            start_cycle: out_start,
            end_cycle: out_end,
        });
        binary_free = out_end;
        total = total.max(out_end).max(sparse_t);
    }
    let schedule = Schedule {
        entries,
        total_cycles: total,
        exposed_binary_cycles: total - sparse_total,
    };
    debug_assert!(schedule.respects_dependencies());
    debug_assert!(schedule.engines_exclusive());
    schedule
}

/// Cycle report for one layer of an end-to-end run.
#[derive(Debug, Clone, Serialize)]
pub struct LayerReport {
    pub index: usize,
    pub kind: LayerKind,
    /// Zero-stall dataflow length the orchestrator streams for this layer.
    pub orchestrator_cycles: u64,
    pub sparse_cycles: u64,
    pub binary_cycles: u64,
    pub exposed_binary_cycles: u64,
    /// Contribution to the end-to-end total.
    pub total_cycles: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EndToEndReport {
    pub network: String,
    pub total_cycles: u64,
    pub per_layer: Vec<LayerReport>,
}

/// Analytic orchestrator stream length with ceil-padded tiling.
fn orchestrator_cycles(layer: &LayerShape, cfg: &ParallelismConfig) -> u64 {
    let s = layer.c_i.div_ceil(cfg.p_ci) as u64;
    let t_blocks = layer.t_s.div_ceil(cfg.p_ts) as u64;
    let groups_w = layer.out_w().div_ceil(cfg.p_fx) as u64;
    t_blocks * layer.out_h() as u64 * groups_w * (layer.k_h * layer.k_w) as u64 * s
}

/// Simulated sparse-engine cycles for one layer: the unified balancer run
/// over every temporal/spatial fold, scaled by output-channel folds.
fn sparse_layer_cycles(
    layer: &LayerShape,
    layer_index: usize,
    sparsity: &SparsityModel,
    cfg: &ParallelismConfig,
    co_per_fold: usize,
) -> u64 {
    use rayon::prelude::*;
    let t_blocks = layer.t_s.div_ceil(cfg.p_ts);
    let spatial_groups = layer.out_h() as u64 * layer.out_w().div_ceil(cfg.p_fx) as u64;
    let co_folds = layer.c_o.div_ceil(co_per_fold) as u64;
    let folds: Vec<(usize, usize)> = (0..t_blocks)
        .flat_map(|tb| (0..spatial_groups as usize).map(move |sg| (tb, sg)))
        .collect();
    let per_fold: u64 = folds
        .par_iter()
        .map(|&(tb, sg)| {
            let w = GridWorkload::generate_at(
                layer,
                sparsity,
                cfg,
                layer_index,
                tb * cfg.p_ts,
                sg * cfg.p_fx,
            );
            simulate_unified(&w, cfg).cycles
        })
        .sum();
    per_fold * co_folds
}

/// Runs the whole network through the layer-by-layer latency model.
///
/// Conv and linear layers cost their simulated sparse-engine latency (the
/// orchestrator stream is consumed in lockstep and adds no cycles).
/// Attention blocks schedule their Q/K/V projections against the binary
/// matmuls and cost the schedule's span.
pub fn end_to_end(
    net: &NetworkConfig,
    cfg: &ParallelismConfig,
    sparsity: &SparsityModel,
) -> Result<EndToEndReport, SimError> {
    cfg.validate()?;
    sparsity.validate()?;
    let syscfg = SystolicConfig::new(cfg.p_bm, cfg.p_bn, cfg.p_bk);
    let mut per_layer = Vec::with_capacity(net.layers.len());
    let mut total = 0u64;

    // Layers consumed by an attention block (its three projections).
    let mut block_of_layer = vec![None; net.layers.len()];
    for (bi, blk) in net.attention_blocks.iter().enumerate() {
        for off in 0..3 {
            block_of_layer[blk.q_layer + off] = Some(bi);
        }
    }

    let mut i = 0;
    while i < net.layers.len() {
        let layer = &net.layers[i];
        if let Some(bi) = block_of_layer[i] {
            let blk = &net.attention_blocks[bi];
            // One projection fold computes one head's P_Co-wide slice.
            let proj = sparse_layer_cycles(layer, i, sparsity, cfg, cfg.p_co)
                / blk.heads.max(1) as u64;
            let l = blk.seq_len;
            let d = blk.head_dim;
            let t_s = layer.t_s as u64;
            let score = t_s * syscfg.tiles(l, l, d);
            let output = t_s * syscfg.tiles(l, d, l);
            let schedule = schedule_attention(
                blk.heads,
                |_, _| proj,
                |op, _| match op {
                    AttnOp::Score => score,
                    AttnOp::Output => output,
                    _ => 0,
                },
            );
            per_layer.push(LayerReport {
                index: i,
                kind: LayerKind::AttentionProj,
                orchestrator_cycles: 3 * orchestrator_cycles(layer, cfg),
                sparse_cycles: 3 * proj * blk.heads as u64,
                binary_cycles: (score + output) * blk.heads as u64,
                exposed_binary_cycles: schedule.exposed_binary_cycles,
                total_cycles: schedule.total_cycles,
            });
            total += schedule.total_cycles;
            i += 3;
            continue;
        }
        let sparse = sparse_layer_cycles(layer, i, sparsity, cfg, cfg.p_co);
        per_layer.push(LayerReport {
            index: i,
            kind: layer.kind,
            orchestrator_cycles: orchestrator_cycles(layer, cfg),
            sparse_cycles: sparse,
            binary_cycles: 0,
            exposed_binary_cycles: 0,
            total_cycles: sparse,
        });
        total += sparse;
        i += 1;
    }

    Ok(EndToEndReport {
        network: net.name.clone(),
        total_cycles: total,
        per_layer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_layer_list, AttentionDefaults};

    fn unit_layer() -> LayerShape {
        LayerShape {
            t_s: 1,
            f_h: 1,
            f_w: 1,
            c_i: 1,
            c_o: 1,
            k_h: 1,
            k_w: 1,
            stride: 1,
            padding: 0,
            kind: LayerKind::Conv,
        }
    }

    #[test]
    fn unit_workloads_are_all_one() {
        let cfg = ParallelismConfig {
            p_ts: 1,
            p_fx: 1,
            p_ci: 1,
            p_co: 1,
            p_bm: 1,
            p_bn: 1,
            p_bk: 1,
            ..ParallelismConfig::default()
        };
        let w = compute_workloads(&unit_layer(), true, &cfg);
        assert_eq!((w.w_s, w.w_b, w.p_s, w.p_b), (1, 1, 1, 1));
    }

    #[test]
    fn non_attention_layer_has_zero_binary_work() {
        let cfg = ParallelismConfig::default();
        let w = compute_workloads(&unit_layer(), false, &cfg);
        assert_eq!(w.w_b, 0);
    }

    #[test]
    fn required_pb_matches_balance_arithmetic() {
        // L = 64, C_i = 256: P_b = P_s/6, inside [P_s/8, P_s/4].
        let r = required_pb(64, 256, 8192);
        assert!((r.raw - 8192.0 / 6.0).abs() < 1e-9);
        assert!(r.rounded >= 8192 / 8 && r.rounded <= 8192 / 4);
        let (a, b, c) = r.factorization;
        assert_eq!((a * b * c) as u64, r.rounded);
        assert!(r.rounded as f64 >= r.raw);
        assert!((r.rounded as f64) < 2.0 * r.raw);

        // L = F_h*F_w = C_i: P_b = (2/3) P_s.
        let r = required_pb(256, 256, 300);
        assert!((r.raw - 200.0).abs() < 1e-9);

        // L = 16, C_i = 512: P_b ~ P_s/48.
        let r = required_pb(16, 512, 4800);
        assert!((r.raw - 100.0).abs() < 1e-9);
    }

    #[test]
    fn zero_binary_jobs_expose_nothing() {
        let s = schedule_attention(4, |_, _| 10, |_, _| 0);
        assert_eq!(s.total_cycles, 4 * 3 * 10);
        assert_eq!(s.exposed_binary_cycles, 0);
        assert!(s.respects_dependencies());
        assert!(s.engines_exclusive());
    }

    #[test]
    fn balanced_pipeline_exposes_at_most_one_head_fill() {
        // 3 sparse jobs of T overlap 2 binary jobs of 1.5T.
        let t = 100u64;
        let s = schedule_attention(8, |_, _| t, |_, _| 3 * t / 2);
        assert!(s.respects_dependencies());
        assert!(
            s.exposed_binary_cycles <= 3 * t,
            "exposed {} > one head's fill {}",
            s.exposed_binary_cycles,
            3 * t
        );
    }

    #[test]
    fn halved_binary_parallelism_exposes_cycles() {
        let t = 100u64;
        let s = schedule_attention(8, |_, _| t, |_, _| 3 * t);
        assert!(s.exposed_binary_cycles > 0);
        assert!(s.total_cycles > 8 * 3 * t);
    }

    #[test]
    fn end_to_end_sparser_is_faster() {
        let att = AttentionDefaults::default();
        let net = parse_layer_list("16x8x8-32c3-mp2-64c3-ap-10", "tiny", 2, &att).unwrap();
        let cfg = ParallelismConfig {
            p_ts: 2,
            p_fx: 4,
            p_ci: 16,
            p_co: 16,
            ..ParallelismConfig::default()
        };
        let sparse = end_to_end(&net, &cfg, &SparsityModel::bernoulli(0.75, 3)).unwrap();
        let dense = end_to_end(&net, &cfg, &SparsityModel::bernoulli(0.0, 3)).unwrap();
        assert!(sparse.total_cycles < dense.total_cycles);
    }

    #[test]
    fn end_to_end_attention_hidden_when_balanced() {
        let att = AttentionDefaults::default();
        let net = parse_layer_list("64x4x4-attn(4,16)", "blk", 2, &att).unwrap();
        // Binary engine sized well above the balance point.
        let cfg = ParallelismConfig {
            p_ts: 2,
            p_fx: 4,
            p_ci: 16,
            p_co: 16,
            p_bm: 16,
            p_bn: 16,
            p_bk: 16,
            ..ParallelismConfig::default()
        };
        let report = end_to_end(&net, &cfg, &SparsityModel::bernoulli(0.75, 5)).unwrap();
        let blk = &report.per_layer[0];
        assert!(blk.binary_cycles > 0);
        let one_head_fill = blk.sparse_cycles / 4;
        assert!(
            blk.exposed_binary_cycles <= one_head_fill,
            "exposed {} > fill {}",
            blk.exposed_binary_cycles,
            one_head_fill
        );
    }
}

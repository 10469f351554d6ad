//! Cycle-level load-balancing models for the sparse engine.
//!
//! Two memory organizations are simulated over identical workloads:
//!
//! * `simulate_unified` — a single wide bank broadcasting chunks to every
//!   grid point, each backed by `P_Wo` workers of `M` decoder lanes.
//! * `simulate_crossbar` — the banked baseline where each PE fetches its
//!   next needed chunk through per-bank round-robin arbitration.
//!
//! The broadcast advances at most one chunk group per cycle and stalls
//! while any grid point lacks an idle worker; zero-popcount chunks
//! complete instantly without occupying a worker.

use serde::Serialize;

use crate::config::ParallelismConfig;
use crate::error::SimError;
use crate::workload::{GridWorkload, SimResult};

/// Simulates the unified wide-bank broadcast at one chunk per cycle.
pub fn simulate_unified(w: &GridWorkload, cfg: &ParallelismConfig) -> SimResult {
    simulate_unified_wide(w, cfg, 1)
}

/// Unified-bank simulation with a bank `width_chunks` chunks wide.
///
/// Each cycle the bank presents the next group of `width_chunks`
/// consecutive chunks; a grid point drains the group's nonzero chunks
/// into workers as they free, and the bank advances one cycle after the
/// whole array has accepted the group.
pub fn simulate_unified_wide(
    w: &GridWorkload,
    cfg: &ParallelismConfig,
    width_chunks: usize,
) -> SimResult {
    assert!(width_chunks >= 1);
    let grid_points = w.grid_points();
    let chunk_count = w.chunk_count();
    if grid_points == 0 || chunk_count == 0 {
        return SimResult {
            cycles: 0,
            stalls: 0,
            per_unit_busy: vec![0.0; grid_points],
            trace: None,
        };
    }
    let proc_cycles: Vec<Vec<u64>> = w
        .chunks
        .iter()
        .map(|gp| {
            gp.iter()
                .map(|c| (c.popcount() as u64).div_ceil(cfg.m as u64))
                .collect()
        })
        .collect();

    // busy_until[g][w]: last busy cycle of that worker (0 = never used).
    let mut busy_until = vec![vec![0u64; cfg.p_wo]; grid_points];
    let mut busy_total = vec![0u64; grid_points];
    let mut t_present = 0u64;
    let mut stalls = 0u64;
    let mut finish = 0u64;

    let mut group_start = 0;
    while group_start < chunk_count {
        let group_end = (group_start + width_chunks).min(chunk_count);
        t_present += 1;
        let mut drained_at = t_present;
        for g in 0..grid_points {
            for c in group_start..group_end {
                let proc = proc_cycles[g][c];
                if proc == 0 {
                    continue;
                }
                // Earliest-free worker takes the chunk.
                let slot = busy_until[g]
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, &b)| b)
                    .map(|(i, _)| i)
                    .expect("p_wo >= 1");
                let dispatch = t_present.max(busy_until[g][slot] + 1);
                busy_until[g][slot] = dispatch + proc - 1;
                busy_total[g] += proc;
                drained_at = drained_at.max(dispatch);
                finish = finish.max(busy_until[g][slot]);
            }
        }
        stalls += drained_at - t_present;
        t_present = drained_at;
        group_start = group_end;
    }

    let cycles = finish.max(t_present);
    let per_unit_busy = busy_total
        .iter()
        .map(|&b| b as f64 / (cfg.p_wo as u64 * cycles.max(1)) as f64)
        .collect();
    SimResult {
        cycles,
        stalls,
        per_unit_busy,
        trace: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GrantPolicy {
    RoundRobin,
}

/// Crossbar-banked baseline: `b_m` banks of `w_bits`-wide chunks, chunk
/// `c` resident at bank `c % b_m`, address `c / b_m`.
#[derive(Debug, Clone, Serialize)]
pub struct CrossbarModel {
    pub b_m: usize,
    pub w_bits: usize,
    pub grant_policy: GrantPolicy,
    /// Spikes consumed per cycle by one PE; defaults to the paired
    /// unified run's G so compute capability is matched.
    pub pe_throughput: usize,
}

impl CrossbarModel {
    pub fn new(b_m: usize, w_bits: usize, pe_throughput: usize) -> Self {
        Self {
            b_m,
            w_bits,
            grant_policy: GrantPolicy::RoundRobin,
            pe_throughput,
        }
    }

    /// Baseline matched to a unified run: per-bank width P_Ci, PE
    /// throughput G.
    pub fn matched(cfg: &ParallelismConfig, b_m: usize) -> Self {
        Self::new(b_m, cfg.p_ci, cfg.g())
    }
}

/// Simulates the crossbar baseline until every PE has consumed its window.
///
/// Per cycle each idle PE requests the (bank, address) of its next chunk
/// with nonzero popcount; each bank grants one address chosen round-robin
/// and all co-requesters of that address are served together. A served PE
/// consumes the chunk for `ceil(popcount / pe_throughput)` cycles before
/// its next request.
pub fn simulate_crossbar(
    w: &GridWorkload,
    model: &CrossbarModel,
    _cfg: &ParallelismConfig,
) -> SimResult {
    assert!(model.b_m >= 1 && model.pe_throughput >= 1);
    let resliced;
    let w = if model.w_bits == w.chunk_width {
        w
    } else {
        resliced = w.resliced(model.w_bits);
        &resliced
    };
    let n_pes = w.grid_points();
    if n_pes == 0 {
        return SimResult {
            cycles: 0,
            stalls: 0,
            per_unit_busy: vec![],
            trace: None,
        };
    }

    struct Need {
        bank: usize,
        addr: usize,
        proc: u64,
    }
    let needs: Vec<Vec<Need>> = w
        .chunks
        .iter()
        .map(|gp| {
            gp.iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(idx, c)| Need {
                    bank: idx % model.b_m,
                    addr: idx / model.b_m,
                    proc: (c.popcount() as u64).div_ceil(model.pe_throughput as u64),
                })
                .collect()
        })
        .collect();

    let mut pos = vec![0usize; n_pes];
    let mut ready_at = vec![1u64; n_pes];
    let mut busy_total = vec![0u64; n_pes];
    let mut stalls = 0u64;
    let mut last_end = 0u64;
    let mut t = 1u64;
    let mut requesters: Vec<Vec<usize>> = vec![Vec::new(); model.b_m];

    loop {
        let mut any_left = false;
        let mut next_t = u64::MAX;
        for bank in requesters.iter_mut() {
            bank.clear();
        }
        for pe in 0..n_pes {
            if pos[pe] >= needs[pe].len() {
                continue;
            }
            any_left = true;
            if ready_at[pe] <= t {
                requesters[needs[pe][pos[pe]].bank].push(pe);
            } else {
                next_t = next_t.min(ready_at[pe]);
            }
        }
        if !any_left {
            break;
        }
        if requesters.iter().all(Vec::is_empty) {
            // Everyone is consuming; jump to the next request time.
            t = next_t;
            continue;
        }
        let rr = ((t - 1) % n_pes as u64) as usize;
        for bank in &requesters {
            if bank.is_empty() {
                continue;
            }
            let winner = *bank
                .iter()
                .min_by_key(|&&pe| (pe + n_pes - rr) % n_pes)
                .expect("nonempty");
            let want = &needs[winner][pos[winner]];
            let (addr, bank_id) = (want.addr, want.bank);
            let mut served = 0usize;
            for &pe in bank {
                let need = &needs[pe][pos[pe]];
                if need.addr == addr && need.bank == bank_id {
                    let proc = need.proc;
                    ready_at[pe] = t + proc;
                    busy_total[pe] += proc;
                    last_end = last_end.max(t + proc - 1);
                    pos[pe] += 1;
                    served += 1;
                }
            }
            stalls += (bank.len() - served) as u64;
        }
        t += 1;
    }

    let cycles = last_end;
    let per_unit_busy = busy_total
        .iter()
        .map(|&b| b as f64 / cycles.max(1) as f64)
        .collect();
    SimResult {
        cycles,
        stalls,
        per_unit_busy,
        trace: None,
    }
}

/// Runs the unified and crossbar models on one workload with the parity
/// rule enforced: the unified bank must be exactly `b_m * w_bits` wide.
pub fn paired_run(
    w: &GridWorkload,
    cfg: &ParallelismConfig,
    unified_width_chunks: usize,
    model: &CrossbarModel,
) -> Result<(SimResult, SimResult), SimError> {
    let unified_bits = unified_width_chunks * cfg.p_ci;
    let crossbar_bits = model.b_m * model.w_bits;
    if unified_bits != crossbar_bits {
        return Err(SimError::Config(format!(
            "bandwidth mismatch in paired run: unified {unified_bits} bits vs crossbar {crossbar_bits} bits"
        )));
    }
    Ok((
        simulate_unified_wide(w, cfg, unified_width_chunks),
        simulate_crossbar(w, model, cfg),
    ))
}

/// Standard deviation of per-grid-point window popcounts as a fraction of
/// the theoretical maximum (the full window size in bits).
pub fn sparsity_stability(w: &GridWorkload) -> f64 {
    let counts = w.per_grid_popcount();
    assert!(counts.len() >= 2, "need at least two grid points");
    let max_bits = (w.chunk_count() * w.chunk_width) as f64;
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / counts.len() as f64;
    var.sqrt() / max_bits
}

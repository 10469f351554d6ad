//! Byte-granular implicit transpose through a banked SRAM model.
//!
//! The memory is a (bank, address, byte) structure of T_s banks, d
//! addresses per bank, and L bytes per address. A frame streaming in
//! (L, d, T_s) order is written one byte per bank per cycle — bank = t,
//! address = d-index, byte = l — and popped in (T_s, d, L) order with one
//! whole-word read per bank per cycle, realizing the permutation
//! `out[t][d'][l] = in[l][d'][t]` without an explicit buffer.

use crate::error::SimError;

/// Banked memory with single write and read ports per bank per cycle.
#[derive(Debug, Clone)]
pub struct TransposeMemory {
    pub banks: usize,
    pub addresses: usize,
    pub bytes_per_address: usize,
    data: Vec<Option<u8>>,
}

impl TransposeMemory {
    pub fn new(banks: usize, addresses: usize, bytes_per_address: usize) -> Self {
        assert!(banks >= 1 && addresses >= 1 && bytes_per_address >= 1);
        Self {
            banks,
            addresses,
            bytes_per_address,
            data: vec![None; banks * addresses * bytes_per_address],
        }
    }

    pub fn capacity_bytes(&self) -> usize {
        self.banks * self.addresses * self.bytes_per_address
    }

    fn idx(&self, bank: usize, addr: usize, byte: usize) -> usize {
        (bank * self.addresses + addr) * self.bytes_per_address + byte
    }

    fn write_byte(&mut self, bank: usize, addr: usize, byte: usize, value: u8) {
        let i = self.idx(bank, addr, byte);
        assert!(self.data[i].is_none(), "byte written twice in one frame");
        self.data[i] = Some(value);
    }

    fn read_word(&self, bank: usize, addr: usize) -> Vec<u8> {
        (0..self.bytes_per_address)
            .map(|b| self.data[self.idx(bank, addr, b)].expect("byte never written"))
            .collect()
    }
}

/// A frame of byte elements in (L, d, T_s) order:
/// `data[(l * dim + d') * timesteps + t]`.
#[derive(Debug, Clone)]
pub struct Frame {
    pub seq_len: usize,
    pub dim: usize,
    pub timesteps: usize,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn new(seq_len: usize, dim: usize, timesteps: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), seq_len * dim * timesteps);
        Self {
            seq_len,
            dim,
            timesteps,
            data,
        }
    }

    pub fn get(&self, l: usize, d: usize, t: usize) -> u8 {
        self.data[(l * self.dim + d) * self.timesteps + t]
    }
}

/// Port-usage accounting from one simulated frame.
#[derive(Debug, Clone, Copy)]
pub struct TransposeStats {
    pub push_cycles: u64,
    pub pop_cycles: u64,
    /// Maximum write addresses touched in any bank in any single cycle.
    pub max_writes_per_bank_cycle: usize,
    /// Maximum read addresses touched in any bank in any single cycle.
    pub max_reads_per_bank_cycle: usize,
}

/// Pushes a frame through a memory of the given geometry and pops it in
/// (T_s, d, L) order.
pub fn transpose_frame(
    mem: &mut TransposeMemory,
    frame: &Frame,
) -> Result<(Vec<u8>, TransposeStats), SimError> {
    if frame.timesteps > mem.banks {
        return Err(SimError::MemoryOverflow {
            addr: frame.timesteps,
            depth: mem.banks,
        });
    }
    if frame.dim > mem.addresses {
        return Err(SimError::MemoryOverflow {
            addr: frame.dim,
            depth: mem.addresses,
        });
    }
    if frame.seq_len > mem.bytes_per_address {
        return Err(SimError::MemoryOverflow {
            addr: frame.seq_len,
            depth: mem.bytes_per_address,
        });
    }

    let mut push_cycles = 0;
    let mut max_writes = 0;
    for l in 0..frame.seq_len {
        for d in 0..frame.dim {
            // One push cycle: every bank receives at most one byte write.
            push_cycles += 1;
            let mut writes_per_bank = vec![0usize; mem.banks];
            for t in 0..frame.timesteps {
                mem.write_byte(t, d, l, frame.get(l, d, t));
                writes_per_bank[t] += 1;
            }
            max_writes = max_writes.max(writes_per_bank.into_iter().max().unwrap_or(0));
        }
    }

    let mut out = Vec::with_capacity(frame.data.len());
    let mut pop_cycles = 0;
    let mut max_reads = 0;
    for t in 0..frame.timesteps {
        for d in 0..frame.dim {
            // One pop cycle: a single whole-word read from one bank.
            pop_cycles += 1;
            max_reads = max_reads.max(1);
            let word = mem.read_word(t, d);
            out.extend_from_slice(&word[..frame.seq_len]);
        }
    }

    Ok((
        out,
        TransposeStats {
            push_cycles,
            pop_cycles,
            max_writes_per_bank_cycle: max_writes,
            max_reads_per_bank_cycle: max_reads,
        },
    ))
}

/// Nested-loop reference permutation `out[t][d'][l] = in[l][d'][t]`.
pub fn reference_transpose(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame.data.len());
    for t in 0..frame.timesteps {
        for d in 0..frame.dim {
            for l in 0..frame.seq_len {
                out.push(frame.get(l, d, t));
            }
        }
    }
    out
}

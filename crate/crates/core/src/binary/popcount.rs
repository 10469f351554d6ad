//! Gate-level models of AND-PopCount circuits.
//!
//! Two constructions are built over the same gate set and evaluated
//! bit-exactly:
//!
//! * vanilla — an AND2 layer followed by a binary adder tree of FA/HA
//!   ripple adders; its depth is the number of tree levels.
//! * optimized — a first stage of 6:2 compressors (two LUT6s each, fusing
//!   three AND pairs with an initial count), then stages of 6:3
//!   compressors (three LUT6s each), then a carry-propagate adder.
//!
//! Cost counting: one LUT6 per AND2/FA/HA, two per C62, three per C63.
//! `CircuitCost::depth` counts reduction stages before the final
//! carry-propagate adder; the CPA contributes LUTs but not depth.

use serde::Serialize;

use crate::bitmap::SpikeBitmap;
use crate::error::SimError;

pub type WireId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GateKind {
    And2,
    Ha,
    Fa,
    C62,
    C63,
}

impl GateKind {
    pub fn lut6_cost(self) -> usize {
        match self {
            GateKind::And2 | GateKind::Ha | GateKind::Fa => 1,
            GateKind::C62 => 2,
            GateKind::C63 => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<WireId>,
    pub outputs: Vec<WireId>,
    /// Reduction stage this gate belongs to; 0 marks the AND layer and
    /// the final carry-propagate adder.
    pub stage: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CircuitCost {
    pub lut6_count: usize,
    pub depth: usize,
}

/// A DAG of logic nodes computing `popcount(a & b)` for two `width`-bit
/// inputs. Gates are stored in topological order.
#[derive(Debug, Clone)]
pub struct CompressorNetwork {
    width: usize,
    n_wires: usize,
    gates: Vec<Gate>,
    inputs_a: Vec<WireId>,
    inputs_b: Vec<WireId>,
    /// Final sum bits as (wire, weight) pairs.
    outputs: Vec<(WireId, u32)>,
    depth: usize,
    const_zero: WireId,
}

impl CompressorNetwork {
    fn new(width: usize) -> Self {
        let mut n = Self {
            width,
            n_wires: 0,
            gates: Vec::new(),
            inputs_a: Vec::new(),
            inputs_b: Vec::new(),
            outputs: Vec::new(),
            depth: 0,
            const_zero: 0,
        };
        n.const_zero = n.wire();
        n.inputs_a = (0..width).map(|_| n.wire()).collect();
        n.inputs_b = (0..width).map(|_| n.wire()).collect();
        n
    }

    fn wire(&mut self) -> WireId {
        let id = self.n_wires;
        self.n_wires += 1;
        id
    }

    fn push_gate(&mut self, kind: GateKind, inputs: Vec<WireId>, n_out: usize, stage: usize) -> Vec<WireId> {
        let outputs: Vec<WireId> = (0..n_out).map(|_| self.wire()).collect();
        self.gates.push(Gate {
            kind,
            inputs,
            outputs: outputs.clone(),
            stage,
        });
        outputs
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn cost(&self) -> CircuitCost {
        CircuitCost {
            lut6_count: self.gates.iter().map(|g| g.kind.lut6_cost()).sum(),
            depth: self.depth,
        }
    }

    /// Evaluates the network on two input vectors.
    pub fn evaluate(&self, a: &SpikeBitmap, b: &SpikeBitmap) -> Result<u64, SimError> {
        if a.width() != self.width {
            return Err(SimError::WidthMismatch {
                expected: self.width,
                got: a.width(),
            });
        }
        if b.width() != self.width {
            return Err(SimError::WidthMismatch {
                expected: self.width,
                got: b.width(),
            });
        }
        let mut values = vec![false; self.n_wires];
        for (i, &wid) in self.inputs_a.iter().enumerate() {
            values[wid] = a.get(i);
        }
        for (i, &wid) in self.inputs_b.iter().enumerate() {
            values[wid] = b.get(i);
        }
        for gate in &self.gates {
            let inp: Vec<bool> = gate.inputs.iter().map(|&w| values[w]).collect();
            match gate.kind {
                GateKind::And2 => {
                    values[gate.outputs[0]] = inp[0] && inp[1];
                }
                GateKind::Ha => {
                    values[gate.outputs[0]] = inp[0] ^ inp[1];
                    values[gate.outputs[1]] = inp[0] && inp[1];
                }
                GateKind::Fa => {
                    let ones = inp.iter().filter(|&&v| v).count();
                    values[gate.outputs[0]] = ones & 1 == 1;
                    values[gate.outputs[1]] = ones >= 2;
                }
                GateKind::C62 => {
                    let count = inp.chunks(2).filter(|p| p[0] && p[1]).count();
                    values[gate.outputs[0]] = count & 1 == 1;
                    values[gate.outputs[1]] = count >> 1 & 1 == 1;
                }
                GateKind::C63 => {
                    let count = inp.iter().filter(|&&v| v).count();
                    for (bit, &out) in gate.outputs.iter().enumerate() {
                        values[out] = count >> bit & 1 == 1;
                    }
                }
            }
        }
        Ok(self
            .outputs
            .iter()
            .map(|&(w, weight)| (values[w] as u64) << weight)
            .sum())
    }

    /// Structural sanity: inputs of every gate are produced before it.
    pub fn is_topologically_ordered(&self) -> bool {
        let fixed = 1 + 2 * self.width;
        let mut produced = vec![false; self.n_wires];
        for p in produced.iter_mut().take(fixed) {
            *p = true;
        }
        for gate in &self.gates {
            if !gate.inputs.iter().all(|&w| produced[w]) {
                return false;
            }
            for &o in &gate.outputs {
                produced[o] = true;
            }
        }
        true
    }
}

/// One multi-bit operand during tree construction: wires little-endian by
/// weight, with `base` the weight of bit 0.
#[derive(Clone)]
struct Operand {
    base: u32,
    bits: Vec<WireId>,
}

/// Ripple-adds two operands of equal base weight; cells are placed per
/// position according to how many signals (operand bits plus carry) meet.
fn ripple_add(n: &mut CompressorNetwork, a: &Operand, b: &Operand, stage: usize) -> Operand {
    assert_eq!(a.base, b.base);
    let width = a.bits.len().max(b.bits.len());
    let mut bits = Vec::with_capacity(width + 1);
    let mut carry: Option<WireId> = None;
    for i in 0..width {
        let mut sig: Vec<WireId> = Vec::with_capacity(3);
        if let Some(&w) = a.bits.get(i) {
            sig.push(w);
        }
        if let Some(&w) = b.bits.get(i) {
            sig.push(w);
        }
        if let Some(c) = carry.take() {
            sig.push(c);
        }
        match sig.len() {
            1 => bits.push(sig[0]),
            2 => {
                let out = n.push_gate(GateKind::Ha, sig, 2, stage);
                bits.push(out[0]);
                carry = Some(out[1]);
            }
            3 => {
                let out = n.push_gate(GateKind::Fa, sig, 2, stage);
                bits.push(out[0]);
                carry = Some(out[1]);
            }
            _ => unreachable!("position with no signals"),
        }
    }
    if let Some(c) = carry {
        bits.push(c);
    }
    Operand { base: a.base, bits }
}

/// Baseline construction: an AND2 per bit pair, then a binary adder tree.
pub fn build_vanilla_popcount(width: usize) -> CompressorNetwork {
    assert!(width >= 1);
    let mut n = CompressorNetwork::new(width);
    let mut operands: Vec<Operand> = (0..width)
        .map(|i| {
            let (a, b) = (n.inputs_a[i], n.inputs_b[i]);
            let out = n.push_gate(GateKind::And2, vec![a, b], 1, 0);
            Operand {
                base: 0,
                bits: vec![out[0]],
            }
        })
        .collect();
    let mut stage = 0;
    while operands.len() > 1 {
        stage += 1;
        let mut next = Vec::with_capacity(operands.len().div_ceil(2));
        let mut it = operands.chunks(2);
        for pair in &mut it {
            match pair {
                [a, b] => next.push(ripple_add(&mut n, a, b, stage)),
                [a] => next.push(a.clone()),
                _ => unreachable!(),
            }
        }
        operands = next;
    }
    n.depth = stage;
    let final_op = operands.pop().expect("width >= 1");
    n.outputs = final_op
        .bits
        .iter()
        .enumerate()
        .map(|(i, &w)| (w, final_op.base + i as u32))
        .collect();
    n
}

/// Optimized construction: C62 stage fusing AND pairs with an initial
/// count, C63 stages on equal-weight columns, then a standard ripple CPA
/// sized to the surviving operand width (HA at bit 0, FAs above).
pub fn build_optimized_popcount(width: usize) -> CompressorNetwork {
    assert!(width >= 1);
    let mut n = CompressorNetwork::new(width);

    // Stage 1: each C62 consumes up to three AND pairs (six inputs) and
    // emits a 2-bit count. Short groups pad with the constant-zero wire.
    let mut columns: Vec<Vec<WireId>> = vec![Vec::new(), Vec::new()];
    for group in (0..width).collect::<Vec<_>>().chunks(3) {
        let mut inputs = Vec::with_capacity(6);
        for &i in group {
            inputs.push(n.inputs_a[i]);
            inputs.push(n.inputs_b[i]);
        }
        while inputs.len() < 6 {
            inputs.push(n.const_zero);
        }
        let out = n.push_gate(GateKind::C62, inputs, 2, 1);
        columns[0].push(out[0]);
        columns[1].push(out[1]);
    }
    let mut depth = 1;

    // C63 stages: greedy groups of six equal-weight bits; leftovers fall
    // through. If a stage can form no C63 yet a column still holds more
    // than two wires, finish that column with 3:2 full adders.
    while columns.iter().any(|c| c.len() > 2) {
        depth += 1;
        let mut next: Vec<Vec<WireId>> = vec![Vec::new(); columns.len() + 3];
        let can_c63 = columns.iter().any(|c| c.len() >= 6);
        for (w, col) in columns.iter().enumerate() {
            let mut rest = col.as_slice();
            if can_c63 {
                while rest.len() >= 6 {
                    let (group, tail) = rest.split_at(6);
                    let out = n.push_gate(GateKind::C63, group.to_vec(), 3, depth);
                    next[w].push(out[0]);
                    next[w + 1].push(out[1]);
                    next[w + 2].push(out[2]);
                    rest = tail;
                }
            } else {
                while rest.len() >= 3 {
                    let (group, tail) = rest.split_at(3);
                    let out = n.push_gate(GateKind::Fa, group.to_vec(), 2, depth);
                    next[w].push(out[0]);
                    next[w + 1].push(out[1]);
                    rest = tail;
                }
            }
            next[w].extend_from_slice(rest);
        }
        while next.last().is_some_and(Vec::is_empty) {
            next.pop();
        }
        columns = next;
    }
    n.depth = depth;

    // Final carry-propagate adder over the two surviving operands.
    let single_operand = columns.iter().all(|c| c.len() <= 1);
    if single_operand {
        n.outputs = columns
            .iter()
            .enumerate()
            .filter_map(|(w, c)| c.first().map(|&wire| (wire, w as u32)))
            .collect();
        return n;
    }
    let cpa_width = columns.len();
    let mut outputs = Vec::with_capacity(cpa_width + 1);
    let mut carry: Option<WireId> = None;
    for (w, col) in columns.iter().enumerate() {
        let a = col.first().copied().unwrap_or(n.const_zero);
        let b = col.get(1).copied().unwrap_or(n.const_zero);
        let out = match carry.take() {
            None => n.push_gate(GateKind::Ha, vec![a, b], 2, 0),
            Some(c) => n.push_gate(GateKind::Fa, vec![a, b, c], 2, 0),
        };
        outputs.push((out[0], w as u32));
        carry = Some(out[1]);
    }
    if let Some(c) = carry {
        outputs.push((c, cpa_width as u32));
    }
    n.outputs = outputs;
    n
}

/// Evaluates any well-formed network against two inputs.
pub fn evaluate_network(
    n: &CompressorNetwork,
    a: &SpikeBitmap,
    b: &SpikeBitmap,
) -> Result<u64, SimError> {
    n.evaluate(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn oracle(a: &SpikeBitmap, b: &SpikeBitmap) -> u64 {
        a.and(b).unwrap().popcount() as u64
    }

    #[test]
    fn vanilla_width_1_is_a_single_and() {
        let n = build_vanilla_popcount(1);
        let cost = n.cost();
        assert_eq!(cost.lut6_count, 1);
        assert_eq!(cost.depth, 0);
    }

    #[test]
    fn vanilla_width_18_depth_five() {
        let n = build_vanilla_popcount(18);
        assert_eq!(n.cost().depth, 5);
        assert!(n.is_topologically_ordered());
    }

    #[test]
    fn optimized_width_18_depth_two() {
        let n = build_optimized_popcount(18);
        assert_eq!(n.cost().depth, 2);
        assert!(n.is_topologically_ordered());
    }

    #[test]
    fn optimized_width_3_is_one_c62() {
        let n = build_optimized_popcount(3);
        let cost = n.cost();
        assert_eq!(cost.lut6_count, 2);
        assert_eq!(cost.depth, 1);
    }

    #[test]
    fn width_18_lut_reduction_in_band() {
        let vanilla = build_vanilla_popcount(18).cost().lut6_count;
        let optimized = build_optimized_popcount(18).cost().lut6_count;
        assert!(optimized < vanilla);
        let reduction = 1.0 - optimized as f64 / vanilla as f64;
        assert!(
            (reduction - 0.52).abs() <= 0.05,
            "reduction {reduction} outside 52% +/- 5pp (vanilla {vanilla}, optimized {optimized})"
        );
    }

    #[test]
    fn exhaustive_equivalence_width_6() {
        let v = build_vanilla_popcount(6);
        let o = build_optimized_popcount(6);
        for a in 0u64..64 {
            for b in 0u64..64 {
                let ba = SpikeBitmap::from_u64(6, a);
                let bb = SpikeBitmap::from_u64(6, b);
                let expect = oracle(&ba, &bb);
                assert_eq!(v.evaluate(&ba, &bb).unwrap(), expect);
                assert_eq!(o.evaluate(&ba, &bb).unwrap(), expect);
            }
        }
    }

    #[test]
    fn trivial_cases() {
        let o = build_optimized_popcount(18);
        let zero = SpikeBitmap::zeros(18);
        let ones = SpikeBitmap::ones(18);
        assert_eq!(o.evaluate(&ones, &zero).unwrap(), 0);
        assert_eq!(o.evaluate(&ones, &ones).unwrap(), 18);
        let v = build_vanilla_popcount(18);
        assert_eq!(v.evaluate(&ones, &ones).unwrap(), 18);
    }

    #[test]
    fn randomized_equivalence_awkward_widths() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for width in [2usize, 4, 5, 7, 9, 11, 12, 13, 17, 19, 24, 33, 48, 64] {
            let v = build_vanilla_popcount(width);
            let o = build_optimized_popcount(width);
            for _ in 0..300 {
                let a = SpikeBitmap::from_u64(width, rng.random::<u64>());
                let b = SpikeBitmap::from_u64(width, rng.random::<u64>());
                let expect = oracle(&a, &b);
                assert_eq!(v.evaluate(&a, &b).unwrap(), expect, "vanilla width {width}");
                assert_eq!(o.evaluate(&a, &b).unwrap(), expect, "optimized width {width}");
            }
        }
    }

    #[test]
    fn width_mismatch_rejected() {
        let n = build_optimized_popcount(8);
        let a = SpikeBitmap::zeros(9);
        let b = SpikeBitmap::zeros(8);
        assert!(n.evaluate(&a, &b).is_err());
    }
}

//! Exhaustive bit-parallel simulation of netlists.
//!
//! Input vector `k` assigns bit `p` of `k` to primary input `p`. Each machine
//! word carries 64 consecutive input vectors.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cgp::{GateKind, Netlist};
use crate::error::{Error, Result};
use crate::lut::{check_width, MultLut, Signedness};

/// Largest input count accepted by [`simulate_all`].
pub const MAX_SIM_INPUTS: usize = 24;

const WORD_BITS: usize = 64;
const BLOCK_WORDS: usize = 256;

const LOW_PATTERNS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

/// Value of input `p` on the 64 vectors of word `q`.
#[inline]
pub(crate) fn input_word(p: usize, q: usize) -> u64 {
    if p < 6 {
        LOW_PATTERNS[p]
    } else if (q >> (p - 6)) & 1 == 1 {
        u64::MAX
    } else {
        0
    }
}

/// Gate list lowered to dense slot indices: slots `0..n_i` are inputs, slot
/// `n_i + g` is the output of gate `g`.
#[derive(Clone, Debug)]
pub(crate) struct Program {
    pub inputs: usize,
    pub ops: Vec<(GateKind, u32, u32)>,
    pub outputs: Vec<u32>,
}

impl Program {
    pub fn compile(net: &Netlist) -> Self {
        let n_i = net.inputs();
        let max_addr = net.gates().last().map(|g| g.addr as usize + 1).unwrap_or(n_i).max(n_i);
        let mut slot = vec![u32::MAX; max_addr];
        for (p, s) in slot.iter_mut().enumerate().take(n_i) {
            *s = p as u32;
        }
        let mut ops = Vec::with_capacity(net.gates().len());
        for (g, gate) in net.gates().iter().enumerate() {
            slot[gate.addr as usize] = (n_i + g) as u32;
            ops.push((gate.kind, slot[gate.inputs[0] as usize], slot[gate.inputs[1] as usize]));
        }
        let outputs = net.outputs().iter().map(|&o| slot[o as usize]).collect();
        Program {
            inputs: n_i,
            ops,
            outputs,
        }
    }

    pub fn slots(&self) -> usize {
        self.inputs + self.ops.len()
    }

    /// Evaluates all gates on `len` words. `buf` is slot-major and its input
    /// slots must already be filled.
    pub fn run(&self, buf: &mut [u64], len: usize) {
        debug_assert!(buf.len() >= self.slots() * len);
        for (g, &(kind, a, b)) in self.ops.iter().enumerate() {
            let out = (self.inputs + g) * len;
            let (src, dst) = buf.split_at_mut(out);
            let a = &src[a as usize * len..a as usize * len + len];
            let b = &src[b as usize * len..b as usize * len + len];
            let d = &mut dst[..len];
            macro_rules! lanes {
                ($f:expr) => {
                    for ((d, &x), &y) in d.iter_mut().zip(a).zip(b) {
                        *d = $f(x, y);
                    }
                };
            }
            match kind {
                GateKind::Buf => d.copy_from_slice(a),
                GateKind::Inv => lanes!(|x: u64, _y: u64| !x),
                GateKind::And => lanes!(|x: u64, y: u64| x & y),
                GateKind::Nand => lanes!(|x: u64, y: u64| !(x & y)),
                GateKind::Or => lanes!(|x: u64, y: u64| x | y),
                GateKind::Nor => lanes!(|x: u64, y: u64| !(x | y)),
                GateKind::Xor => lanes!(|x: u64, y: u64| x ^ y),
                GateKind::Xnor => lanes!(|x: u64, y: u64| !(x ^ y)),
            }
        }
    }
}

/// Per-output truth tables over all `2^n_i` input vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTables {
    inputs: usize,
    outputs: usize,
    words: usize,
    bits: Vec<u64>,
}

impl TruthTables {
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn vectors(&self) -> usize {
        1usize << self.inputs
    }

    /// Packed table of output `o`; bits past `2^n_i` are zero.
    pub fn table(&self, o: usize) -> &[u64] {
        &self.bits[o * self.words..(o + 1) * self.words]
    }

    #[inline]
    pub fn bit(&self, o: usize, k: usize) -> bool {
        (self.bits[o * self.words + k / WORD_BITS] >> (k % WORD_BITS)) & 1 == 1
    }

    /// Output bits on vector `k` packed with output 0 as the least significant bit.
    pub fn output_value(&self, k: usize) -> u64 {
        (0..self.outputs).fold(0, |acc, o| acc | ((self.bit(o, k) as u64) << o))
    }

    /// Concatenated little-endian bit dumps, output 0 first.
    pub fn to_raw(&self) -> Vec<u8> {
        let bytes_per_table = self.vectors().div_ceil(8);
        let mut out = Vec::with_capacity(bytes_per_table * self.outputs);
        for o in 0..self.outputs {
            let table: Vec<u8> = self.table(o).iter().flat_map(|w| w.to_le_bytes()).collect();
            out.extend_from_slice(&table[..bytes_per_table]);
        }
        out
    }

    /// `k,out_value` rows for debugging.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,out_value\n");
        for k in 0..self.vectors() {
            let _ = writeln!(s, "{k},{}", self.output_value(k));
        }
        s
    }

    /// Reads the tables as a two-operand function with `out_width` result
    /// bits. The first operand occupies the low half of the inputs.
    pub fn as_function(&self, signedness: Signedness, out_width: usize) -> Result<MultLut> {
        if !self.inputs.is_multiple_of(2) {
            return Err(Error::WidthMismatch(format!(
                "{} inputs cannot be split into two operands",
                self.inputs
            )));
        }
        if self.outputs != out_width {
            return Err(Error::WidthMismatch(format!(
                "circuit has {} outputs, expected {out_width}",
                self.outputs
            )));
        }
        let width = (self.inputs / 2) as u32;
        check_width(width)?;
        let n = self.vectors();
        let mut raw = vec![0u64; n];
        for o in 0..self.outputs {
            for (q, &word) in self.table(o).iter().enumerate() {
                let mut w = word;
                while w != 0 {
                    let t = w.trailing_zeros() as usize;
                    raw[q * WORD_BITS + t] |= 1 << o;
                    w &= w - 1;
                }
            }
        }
        let values = raw
            .into_iter()
            .map(|bits| signedness.decode(bits, out_width as u32))
            .collect();
        MultLut::new(width, signedness, values)
    }
}

/// Gate-by-gate reference evaluation of one input vector.
pub fn simulate_naive(net: &Netlist, vector: &[bool]) -> Result<Vec<bool>> {
    if vector.len() != net.inputs() {
        return Err(Error::WidthMismatch(format!(
            "vector has {} bits, netlist has {} inputs",
            vector.len(),
            net.inputs()
        )));
    }
    let mut values: Vec<(u32, bool)> = (0..net.inputs()).map(|p| (p as u32, vector[p])).collect();
    let lookup = |values: &[(u32, bool)], addr: u32| -> bool {
        let pos = values.binary_search_by_key(&addr, |&(a, _)| a).expect("topological order");
        values[pos].1
    };
    for g in net.gates() {
        let a = lookup(&values, g.inputs[0]);
        let b = lookup(&values, g.inputs[1]);
        values.push((g.addr, g.kind.eval_bit(a, b)));
    }
    Ok(net.outputs().iter().map(|&o| lookup(&values, o)).collect())
}

/// Simulates `net` on every input vector.
pub fn simulate_all(net: &Netlist) -> Result<TruthTables> {
    let n_i = net.inputs();
    if n_i > MAX_SIM_INPUTS {
        return Err(Error::Resource(format!(
            "exhaustive simulation of {n_i} inputs exceeds the {MAX_SIM_INPUTS}-input limit"
        )));
    }
    let prog = Program::compile(net);
    let vectors = 1usize << n_i;
    let words = vectors.div_ceil(WORD_BITS);
    let tail_mask = if vectors < WORD_BITS { (1u64 << vectors) - 1 } else { u64::MAX };
    let n_o = prog.outputs.len();

    let blocks: Vec<(usize, usize)> = (0..words)
        .step_by(BLOCK_WORDS)
        .map(|q0| (q0, BLOCK_WORDS.min(words - q0)))
        .collect();
    let partial: Vec<Vec<u64>> = blocks
        .par_iter()
        .map(|&(q0, len)| {
            let mut buf = vec![0u64; prog.slots() * len];
            for p in 0..n_i {
                for (k, w) in buf[p * len..(p + 1) * len].iter_mut().enumerate() {
                    *w = input_word(p, q0 + k);
                }
            }
            prog.run(&mut buf, len);
            let mut out = Vec::with_capacity(n_o * len);
            for &s in &prog.outputs {
                out.extend_from_slice(&buf[s as usize * len..(s as usize + 1) * len]);
            }
            out
        })
        .collect();

    let mut bits = vec![0u64; n_o * words];
    for (&(q0, len), out) in blocks.iter().zip(&partial) {
        for o in 0..n_o {
            bits[o * words + q0..o * words + q0 + len].copy_from_slice(&out[o * len..(o + 1) * len]);
        }
    }
    if tail_mask != u64::MAX {
        for o in 0..n_o {
            bits[o * words] &= tail_mask;
        }
    }
    Ok(TruthTables {
        inputs: n_i,
        outputs: n_o,
        words,
        bits,
    })
}

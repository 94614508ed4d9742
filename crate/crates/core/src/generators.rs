//! Conventional exact and approximate arithmetic circuits emitted as CGP
//! genomes with a single row and spare columns.
//!
//! Multipliers sum their partial-product rows one after another with
//! ripple-carry rows (an array multiplier). The truncated and broken-array
//! variants simply leave out partial products; the adder cells that would
//! only have handled those bits disappear through constant folding.

use std::sync::Arc;

use crate::cgp::{CgpParams, GateKind, GateSet, Genome, ARITY};
use crate::error::{Error, Result};
use crate::lut::{check_width, Signedness};

/// One spare node is inserted before every `SPARE_EVERY` gates (about 20%).
const SPARE_EVERY: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sig {
    Zero,
    One,
    Net(u32),
}

struct Builder {
    inputs: usize,
    gates: Vec<(GateKind, u32, u32)>,
    inverted_input: Option<u32>,
    zero: Option<u32>,
    one: Option<u32>,
}

impl Builder {
    fn new(inputs: usize) -> Self {
        Builder {
            inputs,
            gates: Vec::new(),
            inverted_input: None,
            zero: None,
            one: None,
        }
    }

    fn input(&self, p: usize) -> Sig {
        Sig::Net(p as u32)
    }

    fn push(&mut self, kind: GateKind, a: u32, b: u32) -> u32 {
        let addr = (self.inputs + self.gates.len()) as u32;
        self.gates.push((kind, a, b));
        addr
    }

    fn inv(&mut self, a: Sig) -> Sig {
        match a {
            Sig::Zero => Sig::One,
            Sig::One => Sig::Zero,
            Sig::Net(x) => Sig::Net(self.push(GateKind::Inv, x, x)),
        }
    }

    fn and(&mut self, a: Sig, b: Sig) -> Sig {
        match (a, b) {
            (Sig::Zero, _) | (_, Sig::Zero) => Sig::Zero,
            (Sig::One, x) | (x, Sig::One) => x,
            (Sig::Net(x), Sig::Net(y)) => Sig::Net(self.push(GateKind::And, x, y)),
        }
    }

    fn nand(&mut self, a: Sig, b: Sig) -> Sig {
        match (a, b) {
            (Sig::Zero, _) | (_, Sig::Zero) => Sig::One,
            (Sig::One, x) | (x, Sig::One) => self.inv(x),
            (Sig::Net(x), Sig::Net(y)) => Sig::Net(self.push(GateKind::Nand, x, y)),
        }
    }

    fn or(&mut self, a: Sig, b: Sig) -> Sig {
        match (a, b) {
            (Sig::One, _) | (_, Sig::One) => Sig::One,
            (Sig::Zero, x) | (x, Sig::Zero) => x,
            (Sig::Net(x), Sig::Net(y)) => Sig::Net(self.push(GateKind::Or, x, y)),
        }
    }

    fn xor(&mut self, a: Sig, b: Sig) -> Sig {
        match (a, b) {
            (Sig::Zero, x) | (x, Sig::Zero) => x,
            (Sig::One, x) | (x, Sig::One) => self.inv(x),
            (Sig::Net(x), Sig::Net(y)) if x == y => Sig::Zero,
            (Sig::Net(x), Sig::Net(y)) => Sig::Net(self.push(GateKind::Xor, x, y)),
        }
    }

    /// Sum and carry of three bits; degenerates to a half adder or a wire
    /// when some inputs are constant zero.
    fn full_add(&mut self, a: Sig, b: Sig, c: Sig) -> (Sig, Sig) {
        let p = self.xor(a, b);
        let s = self.xor(p, c);
        let g = self.and(a, b);
        let t = self.and(p, c);
        (s, self.or(g, t))
    }

    fn ripple_add(&mut self, x: &[Sig], y: &[Sig]) -> Vec<Sig> {
        let mut carry = Sig::Zero;
        x.iter()
            .zip(y)
            .map(|(&a, &b)| {
                let (s, c) = self.full_add(a, b, carry);
                carry = c;
                s
            })
            .collect()
    }

    fn inverted_input(&mut self) -> u32 {
        if let Some(a) = self.inverted_input {
            return a;
        }
        let a = self.push(GateKind::Inv, 0, 0);
        self.inverted_input = Some(a);
        a
    }

    /// Address carrying `s`. Constants are built once from input 0.
    fn materialize(&mut self, s: Sig) -> u32 {
        match s {
            Sig::Net(a) => a,
            Sig::Zero => {
                if let Some(a) = self.zero {
                    return a;
                }
                let n = self.inverted_input();
                let a = self.push(GateKind::Nor, 0, n);
                self.zero = Some(a);
                a
            }
            Sig::One => {
                if let Some(a) = self.one {
                    return a;
                }
                let n = self.inverted_input();
                let a = self.push(GateKind::Nand, 0, n);
                self.one = Some(a);
                a
            }
        }
    }

    /// Lays the circuit out on a single-row grid with spare nodes interleaved.
    fn into_genome(mut self, outputs: &[Sig], gates: &GateSet) -> Result<Genome> {
        let outs: Vec<u32> = outputs.iter().map(|&s| self.materialize(s)).collect();
        let spare_fn = gates
            .id_of(GateKind::Buf)
            .ok_or_else(|| Error::param("function set lacks BUF"))?;
        let ids: Vec<u32> = self
            .gates
            .iter()
            .map(|&(k, _, _)| {
                gates
                    .id_of(k)
                    .ok_or_else(|| Error::param(format!("function set lacks {k}")))
            })
            .collect::<Result<_>>()?;

        let n_i = self.inputs;
        let mut remap: Vec<u32> = (0..n_i as u32).collect();
        let mut nodes: Vec<[u32; ARITY + 1]> = Vec::new();
        for (g, (&(kind, a, b), &id)) in self.gates.iter().zip(&ids).enumerate() {
            if g % SPARE_EVERY == 0 {
                let prev = (n_i + nodes.len()) as u32 - 1;
                nodes.push([prev, prev, spare_fn]);
            }
            let (a, b) = (remap[a as usize], remap[b as usize]);
            let b = if kind.arity() == 1 { a } else { b };
            remap.push((n_i + nodes.len()) as u32);
            nodes.push([a, b, id]);
        }
        if nodes.is_empty() {
            nodes.push([0, 0, spare_fn]);
        }
        let params = Arc::new(CgpParams::new(n_i, outs.len(), 1, nodes.len(), gates.clone())?);
        let mut genes: Vec<u32> = nodes.into_iter().flatten().collect();
        genes.extend(outs.iter().map(|&o| remap[o as usize]));
        let genome = Genome::new(params, genes);
        debug_assert!(genome.is_valid());
        Ok(genome)
    }
}

/// Sums rows of column-aligned bits modulo `2^cols`.
fn sum_rows(b: &mut Builder, rows: Vec<Vec<Sig>>) -> Vec<Sig> {
    let mut rows = rows.into_iter().filter(|r| r.iter().any(|&s| s != Sig::Zero));
    let Some(mut acc) = rows.next() else {
        return Vec::new();
    };
    for row in rows {
        acc = b.ripple_add(&acc, &row);
    }
    acc
}

/// Unsigned array multiplier keeping only the partial products
/// `i_a & j_b` for which `keep(a, b)` holds.
fn unsigned_array(w: usize, keep: impl Fn(usize, usize) -> bool) -> Result<Genome> {
    let mut b = Builder::new(2 * w);
    let mut rows = Vec::with_capacity(w);
    for jb in 0..w {
        let mut row = vec![Sig::Zero; 2 * w];
        for ia in 0..w {
            if keep(ia, jb) {
                let (x, y) = (b.input(ia), b.input(w + jb));
                row[ia + jb] = b.and(x, y);
            }
        }
        rows.push(row);
    }
    let mut out = sum_rows(&mut b, rows);
    out.resize(2 * w, Sig::Zero);
    b.into_genome(&out, &GateSet::standard())
}

/// Two's-complement array multiplier in Baugh-Wooley form: partial products
/// involving exactly one sign bit are inverted and the constant
/// `2^w + 2^(2w-1)` is added.
fn signed_array(w: usize) -> Result<Genome> {
    let mut b = Builder::new(2 * w);
    let cols = 2 * w;
    let mut rows = Vec::with_capacity(w + 1);
    for jb in 0..w {
        let mut row = vec![Sig::Zero; cols];
        for ia in 0..w {
            let (x, y) = (b.input(ia), b.input(w + jb));
            let sign_terms = (ia == w - 1) as u8 + (jb == w - 1) as u8;
            row[ia + jb] = if sign_terms == 1 { b.nand(x, y) } else { b.and(x, y) };
        }
        rows.push(row);
    }
    let modulus = 1u128 << cols;
    let constant = ((1u128 << w) + (1u128 << (cols - 1))) % modulus;
    rows.push(
        (0..cols)
            .map(|c| if (constant >> c) & 1 == 1 { Sig::One } else { Sig::Zero })
            .collect(),
    );
    let mut out = sum_rows(&mut b, rows);
    out.resize(cols, Sig::Zero);
    b.into_genome(&out, &GateSet::standard())
}

/// Exact `w x w` multiplier with a `2w`-bit product.
pub fn gen_exact_multiplier(w: u32, signedness: Signedness) -> Result<Genome> {
    check_width(w)?;
    match signedness {
        Signedness::Unsigned => unsigned_array(w as usize, |_, _| true),
        Signedness::Signed => signed_array(w as usize),
    }
}

/// Unsigned array multiplier without the partial products of the `k` least
/// significant product columns; those output bits are constant zero.
pub fn gen_truncated_multiplier(w: u32, k: u32) -> Result<Genome> {
    check_width(w)?;
    if k >= 2 * w {
        return Err(Error::param(format!("truncation {k} must be below {}", 2 * w)));
    }
    unsigned_array(w as usize, |a, b| a + b >= k as usize)
}

/// Unsigned broken-array multiplier: cells of the first `hbl` partial-product
/// rows (above the horizontal break line) and of the `vbl` least significant
/// columns (right of the vertical break line) are omitted.
pub fn gen_broken_array_multiplier(w: u32, hbl: u32, vbl: u32) -> Result<Genome> {
    check_width(w)?;
    if hbl > w || vbl > w {
        return Err(Error::param(format!("break levels ({hbl}, {vbl}) must not exceed {w}")));
    }
    unsigned_array(w as usize, |a, b| b >= hbl as usize && a + b >= vbl as usize)
}

/// Ripple-carry adder of two `w`-bit operands with a `w+1`-bit sum.
pub fn gen_adder(w: u32) -> Result<Genome> {
    if w == 0 || w > 16 {
        return Err(Error::param(format!("adder width {w} outside 1..=16")));
    }
    let w = w as usize;
    let mut b = Builder::new(2 * w);
    let x: Vec<Sig> = (0..w).map(|k| b.input(k)).chain([Sig::Zero]).collect();
    let y: Vec<Sig> = (0..w).map(|k| b.input(w + k)).chain([Sig::Zero]).collect();
    let out = b.ripple_add(&x, &y);
    b.into_genome(&out, &GateSet::standard())
}

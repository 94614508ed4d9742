//! Exact WMED of multiplier circuits straight from bit-sliced simulation.
//!
//! Lanes are laid out as `L = j | i << w`, so for `w >= 6` every machine
//! word covers a single value of the weighted operand `i`. The error
//! `M(i,j) - i*j` is formed with a bit-sliced adder against precomputed
//! planes of `-i*j`, its absolute value is taken bit-sliced as well, and the
//! per-row sums come from population counts. Rows are visited in order of
//! decreasing weight so an evaluation can stop as soon as its partial sum
//! proves the bound is exceeded.

use std::cell::RefCell;

use crate::cgp::{decode, Genome, Netlist};
use crate::error::{Error, Result};
use crate::lut::Signedness;
use crate::metrics::{weighted_error, Pmf};
use crate::sim::{input_word, Program};

const WORD_BITS: usize = 64;
const BLOCK_WORDS: usize = 64;
const MAX_OUTPUTS: usize = 40;
/// Relative slack before a partial sum is trusted to exceed a bound.
const EXIT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
struct Segment {
    word: u32,
    row: u32,
    mask: u64,
}

#[derive(Clone, Debug)]
struct Block {
    words: Vec<u32>,
    segments: Vec<Segment>,
}

thread_local! {
    static SCRATCH: RefCell<Vec<u64>> = const { RefCell::new(Vec::new()) };
}

/// Reusable WMED evaluator for genomes with `2w` inputs and a fixed number
/// of outputs, bound to one pmf.
#[derive(Clone, Debug)]
pub struct MultiplierEvaluator {
    width: u32,
    signedness: Signedness,
    outputs: usize,
    planes: usize,
    p: Vec<f64>,
    /// Weight of each row, indexed by the raw bits of `i`.
    row_weight: Vec<f64>,
    /// Value-order index of each row.
    row_index: Vec<usize>,
    blocks: Vec<Block>,
    /// `planes` words of `-i*j` per simulation word.
    neg_exact: Vec<u64>,
}

impl MultiplierEvaluator {
    pub fn new(pmf: &Pmf, outputs: usize) -> Result<Self> {
        let w = pmf.width();
        let s = pmf.signedness();
        if outputs == 0 || outputs > MAX_OUTPUTS {
            return Err(Error::param(format!("{outputs} outputs outside 1..={MAX_OUTPUTS}")));
        }
        let wu = w as usize;
        let n = 1usize << wu;
        let planes = outputs.max(2 * wu) + 2;
        let words = (1usize << (2 * wu)).div_ceil(WORD_BITS);

        let row_index: Vec<usize> = (0..n as u64).map(|b| s.index_of(s.decode(b, w), w)).collect();
        let row_weight: Vec<f64> = row_index.iter().map(|&k| pmf.probabilities()[k]).collect();

        let mut order: Vec<usize> = (0..n).filter(|&r| row_weight[r] > 0.0).collect();
        order.sort_by(|&a, &b| row_weight[b].total_cmp(&row_weight[a]).then(a.cmp(&b)));

        let blocks = if wu >= 6 {
            let per_row = n / WORD_BITS;
            let rows_per_block = (BLOCK_WORDS / per_row).max(1);
            order
                .chunks(rows_per_block)
                .map(|rows| {
                    let mut block = Block {
                        words: Vec::new(),
                        segments: Vec::new(),
                    };
                    for &r in rows {
                        for q in r * per_row..(r + 1) * per_row {
                            block.words.push(q as u32);
                            block.segments.push(Segment {
                                word: q as u32,
                                row: r as u32,
                                mask: u64::MAX,
                            });
                        }
                    }
                    block
                })
                .collect()
        } else {
            let lanes = 1usize << wu;
            let row_mask = (1u64 << lanes) - 1;
            let rows_per_word = WORD_BITS / lanes;
            let mut block = Block {
                words: (0..words as u32).collect(),
                segments: Vec::new(),
            };
            for &r in &order {
                let (q, k) = (r / rows_per_word, r % rows_per_word);
                block.segments.push(Segment {
                    word: q as u32,
                    row: r as u32,
                    mask: row_mask << (k * lanes),
                });
            }
            block.segments.sort_by_key(|s| s.word);
            vec![block]
        };

        let mut neg_exact = vec![0u64; words * planes];
        let lane_mask = (1u64 << (2 * wu)) - 1;
        let value_mask = (1u64 << wu) - 1;
        let plane_mask = if planes >= 64 { u64::MAX } else { (1u64 << planes) - 1 };
        for q in 0..words {
            let dst = &mut neg_exact[q * planes..(q + 1) * planes];
            for t in 0..WORD_BITS {
                let lane = ((q * WORD_BITS + t) as u64) & lane_mask;
                let i = s.decode(lane >> wu, w);
                let j = s.decode(lane & value_mask, w);
                let neg = (i * j).wrapping_neg() as u64 & plane_mask;
                for (b, d) in dst.iter_mut().enumerate() {
                    *d |= ((neg >> b) & 1) << t;
                }
            }
        }

        Ok(MultiplierEvaluator {
            width: w,
            signedness: s,
            outputs,
            planes,
            p: pmf.probabilities().to_vec(),
            row_weight,
            row_index,
            blocks,
            neg_exact,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn signedness(&self) -> Signedness {
        self.signedness
    }

    fn check(&self, inputs: usize, outputs: usize) -> Result<()> {
        if inputs != 2 * self.width as usize || outputs != self.outputs {
            return Err(Error::WidthMismatch(format!(
                "circuit has {inputs} inputs and {outputs} outputs, evaluator expects {} and {}",
                2 * self.width,
                self.outputs
            )));
        }
        Ok(())
    }

    /// Exact WMED of a genome.
    pub fn wmed(&self, genome: &Genome) -> Result<f64> {
        let net = decode(genome)?;
        self.check(net.inputs(), net.outputs().len())?;
        Ok(self.eval_netlist(&net, None).expect("unbounded"))
    }

    /// Exact WMED if it is at most `bound`, `None` otherwise.
    pub fn wmed_within(&self, genome: &Genome, bound: f64) -> Result<Option<f64>> {
        let net = decode(genome)?;
        self.check(net.inputs(), net.outputs().len())?;
        Ok(self.eval_netlist(&net, Some(bound)))
    }

    /// Core evaluation; the caller guarantees matching dimensions.
    pub(crate) fn eval_netlist(&self, net: &Netlist, bound: Option<f64>) -> Option<f64> {
        let prog = Program::compile(net);
        let wu = self.width as usize;
        let n_rows = 1usize << wu;
        let scale = (1u64 << (2 * wu)) as f64;
        let limit = bound.map(|b| b * scale * (1.0 + EXIT_SLACK));
        let lane_bit: Vec<usize> = (0..2 * wu).map(|p| if p < wu { wu + p } else { p - wu }).collect();
        let signed = self.signedness == Signedness::Signed;
        let planes = self.planes;

        let mut row_sums = vec![0u64; n_rows];
        let mut partial = 0.0f64;

        SCRATCH.with(|cell| {
            let mut buf = cell.borrow_mut();
            for block in &self.blocks {
                let len = block.words.len();
                let need = prog.slots() * len;
                if buf.len() < need {
                    buf.resize(need, 0);
                }
                for (p, &lb) in lane_bit.iter().enumerate() {
                    for (d, &q) in buf[p * len..(p + 1) * len].iter_mut().zip(&block.words) {
                        *d = input_word(lb, q as usize);
                    }
                }
                prog.run(&mut buf, len);

                let mut seg = block.segments.iter().peekable();
                let mut err = [0u64; 64];
                for (k, &q) in block.words.iter().enumerate() {
                    let neg = &self.neg_exact[q as usize * planes..(q as usize + 1) * planes];
                    let top = buf[prog.outputs[self.outputs - 1] as usize * len + k];
                    let mut carry = 0u64;
                    for (b, (e, &nb)) in err[..planes].iter_mut().zip(neg).enumerate() {
                        let m = if b < self.outputs {
                            buf[prog.outputs[b] as usize * len + k]
                        } else if signed {
                            top
                        } else {
                            0
                        };
                        let x = m ^ nb;
                        *e = x ^ carry;
                        carry = (m & nb) | (carry & x);
                    }
                    let sign = err[planes - 1];
                    let mut carry = sign;
                    for e in err[..planes].iter_mut() {
                        let x = *e ^ sign;
                        *e = x ^ carry;
                        carry &= x;
                    }
                    while let Some(s) = seg.next_if(|s| s.word == q) {
                        let mut sum = 0u64;
                        for (b, &e) in err[..planes].iter().enumerate() {
                            sum += ((e & s.mask).count_ones() as u64) << b;
                        }
                        row_sums[s.row as usize] += sum;
                    }
                }
                if let Some(limit) = limit {
                    let mut rows: Vec<u32> = block.segments.iter().map(|s| s.row).collect();
                    rows.dedup();
                    for r in rows {
                        partial += self.row_weight[r as usize] * row_sums[r as usize] as f64;
                    }
                    if partial > limit {
                        return None;
                    }
                }
            }
            Some(())
        })?;

        let mut by_index = vec![0u64; n_rows];
        for (r, &s) in row_sums.iter().enumerate() {
            by_index[self.row_index[r]] = s;
        }
        let wmed = weighted_error(&self.p, &by_index, self.width);
        match bound {
            Some(b) if wmed > b => None,
            _ => Some(wmed),
        }
    }
}

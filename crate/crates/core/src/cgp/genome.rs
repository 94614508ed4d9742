//! CGP chromosome: grid parameters plus a flat integer string.
//!
//! Addresses `0..n_i` are primary inputs; node `n` (column-major, `r` nodes per
//! column) has address `n_i + n`. Each node takes `n_a + 1` genes: `n_a`
//! source addresses followed by a function id. The last `n_o` genes select
//! the sources of the primary outputs.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;

use crate::cgp::gate::GateSet;
use crate::error::{Error, Result};

/// Maximum node arity. The function set only contains 1- and 2-input gates.
pub const ARITY: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct CgpParams {
    pub inputs: usize,
    pub outputs: usize,
    pub rows: usize,
    pub cols: usize,
    pub gates: GateSet,
}

impl CgpParams {
    pub fn new(inputs: usize, outputs: usize, rows: usize, cols: usize, gates: GateSet) -> Result<Self> {
        if inputs == 0 || outputs == 0 || rows == 0 || cols == 0 {
            return Err(Error::param(format!(
                "grid parameters must be positive (n_i={inputs}, n_o={outputs}, r={rows}, c={cols})"
            )));
        }
        let addresses = inputs
            .checked_add(rows.checked_mul(cols).ok_or_else(|| Error::param("grid too large"))?)
            .ok_or_else(|| Error::param("grid too large"))?;
        if addresses > u32::MAX as usize {
            return Err(Error::param("grid too large"));
        }
        Ok(CgpParams {
            inputs,
            outputs,
            rows,
            cols,
            gates,
        })
    }

    pub fn arity(&self) -> usize {
        ARITY
    }

    pub fn nodes(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of addressable signals (inputs plus node outputs).
    pub fn addresses(&self) -> usize {
        self.inputs + self.nodes()
    }

    pub fn genome_size(&self) -> usize {
        genome_size(self)
    }

    pub fn node_address(&self, node: usize) -> usize {
        self.inputs + node
    }

    pub fn column_of(&self, node: usize) -> usize {
        node / self.rows
    }

    /// Exclusive upper bound of the legal source addresses for `node`:
    /// primary inputs and every node in a strictly earlier column.
    pub fn source_limit(&self, node: usize) -> usize {
        self.inputs + self.column_of(node) * self.rows
    }

    /// Exclusive upper bound of the legal values of gene `index`.
    pub fn gene_limit(&self, index: usize) -> usize {
        let node_genes = self.nodes() * (ARITY + 1);
        if index < node_genes {
            let node = index / (ARITY + 1);
            if index % (ARITY + 1) == ARITY {
                self.gates.len()
            } else {
                self.source_limit(node)
            }
        } else {
            self.addresses()
        }
    }

    pub fn output_gene(&self, output: usize) -> usize {
        self.nodes() * (ARITY + 1) + output
    }
}

/// `S = r * c * (n_a + 1) + n_o`.
pub fn genome_size(params: &CgpParams) -> usize {
    params.rows * params.cols * (ARITY + 1) + params.outputs
}

#[derive(Clone, Debug, PartialEq)]
pub struct Genome {
    params: Arc<CgpParams>,
    genes: Vec<u32>,
}

impl Genome {
    /// Wraps a gene string. Nothing is checked here, see [`Genome::validate`].
    pub fn new(params: Arc<CgpParams>, genes: Vec<u32>) -> Self {
        Genome { params, genes }
    }

    /// Genome with every gene drawn uniformly from its legal interval.
    pub fn random<R: Rng + ?Sized>(params: Arc<CgpParams>, rng: &mut R) -> Self {
        let genes = (0..params.genome_size())
            .map(|g| rng.gen_range(0..params.gene_limit(g)) as u32)
            .collect();
        Genome { params, genes }
    }

    pub fn params(&self) -> &CgpParams {
        &self.params
    }

    pub fn shared_params(&self) -> &Arc<CgpParams> {
        &self.params
    }

    pub fn genes(&self) -> &[u32] {
        &self.genes
    }

    pub fn genes_mut(&mut self) -> &mut [u32] {
        &mut self.genes
    }

    /// Genes of node `n`: `[src0, src1, function]`.
    pub fn node_genes(&self, node: usize) -> &[u32] {
        &self.genes[node * (ARITY + 1)..(node + 1) * (ARITY + 1)]
    }

    pub fn output_genes(&self) -> &[u32] {
        &self.genes[self.params.nodes() * (ARITY + 1)..]
    }

    /// Indices of all genes that break the feed-forward / range invariants.
    ///
    /// A wrong gene count is reported as an error, not as a violation list.
    pub fn validate(&self) -> Result<Vec<usize>> {
        let expected = self.params.genome_size();
        if self.genes.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: self.genes.len(),
            });
        }
        Ok(self
            .genes
            .iter()
            .enumerate()
            .filter(|&(idx, &g)| g as usize >= self.params.gene_limit(idx))
            .map(|(idx, _)| idx)
            .collect())
    }

    pub fn is_valid(&self) -> bool {
        matches!(self.validate(), Ok(v) if v.is_empty())
    }

    /// Serializes to the text format: a `cgp n_i n_o r c n_a |G|` header line,
    /// then the genes, one node (or output) per line.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = format!(
            "cgp {} {} {} {} {} {}\n",
            p.inputs,
            p.outputs,
            p.rows,
            p.cols,
            ARITY,
            p.gates.len()
        );
        for node in self.genes[..p.nodes() * (ARITY + 1)].chunks(ARITY + 1) {
            let line: Vec<String> = node.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        let outs: Vec<String> = self.output_genes().iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{}", outs.join(" "));
        out
    }

    /// Parses the text format. The function set is not part of the file and
    /// must match the header's declared size.
    pub fn from_text(text: &str, gates: GateSet) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::parse("empty genome file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 || fields[0] != "cgp" {
            return Err(Error::parse(format!("bad genome header {header:?}")));
        }
        let nums: Vec<usize> = fields[1..]
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| Error::parse(format!("bad header field {s:?}"))))
            .collect::<Result<_>>()?;
        let (n_i, n_o, r, c, n_a, n_fns) = (nums[0], nums[1], nums[2], nums[3], nums[4], nums[5]);
        if n_a != ARITY {
            return Err(Error::parse(format!("unsupported arity {n_a}, expected {ARITY}")));
        }
        if n_fns != gates.len() {
            return Err(Error::parse(format!(
                "genome declares {n_fns} gate functions, function set has {}",
                gates.len()
            )));
        }
        let params = CgpParams::new(n_i, n_o, r, c, gates)?;
        let genes = lines
            .flat_map(str::split_whitespace)
            .map(|s| s.parse::<u32>().map_err(|_| Error::parse(format!("bad gene {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if genes.len() != params.genome_size() {
            return Err(Error::LengthMismatch {
                expected: params.genome_size(),
                actual: genes.len(),
            });
        }
        Ok(Genome::new(Arc::new(params), genes))
    }
}

use std::sync::Arc;

use crate::cgp::gate::GateKind;
use crate::cgp::genome::{CgpParams, Genome, ARITY};
use crate::error::{Error, Result};

/// An active gate of a decoded genome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gate {
    pub addr: u32,
    pub func: u32,
    pub kind: GateKind,
    /// Source addresses. For unary gates both entries hold the single source.
    pub inputs: [u32; 2],
    pub cost: f64,
}

impl Gate {
    pub fn fan_in(&self) -> &[u32] {
        &self.inputs[..self.kind.arity()]
    }
}

/// Active-only gate graph in topological (address) order.
#[derive(Clone, Debug, PartialEq)]
pub struct Netlist {
    inputs: usize,
    gates: Vec<Gate>,
    outputs: Vec<u32>,
}

impl Netlist {
    /// Builds a netlist directly. Gates must be in increasing address order,
    /// addressed above the inputs, and read only earlier addresses.
    pub fn new(inputs: usize, gates: Vec<Gate>, outputs: Vec<u32>) -> Result<Self> {
        let mut prev = inputs as i64 - 1;
        let mut known: Vec<u32> = Vec::with_capacity(gates.len());
        for g in &gates {
            if (g.addr as i64) <= prev {
                return Err(Error::param(format!("gate address {} out of order", g.addr)));
            }
            for &src in g.fan_in() {
                if src >= g.addr || (src as usize >= inputs && known.binary_search(&src).is_err()) {
                    return Err(Error::param(format!("gate {} reads undefined address {src}", g.addr)));
                }
            }
            prev = g.addr as i64;
            known.push(g.addr);
        }
        for &o in &outputs {
            if o as usize >= inputs && known.binary_search(&o).is_err() {
                return Err(Error::param(format!("output reads undefined address {o}")));
            }
        }
        Ok(Netlist {
            inputs,
            gates,
            outputs,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[u32] {
        &self.outputs
    }

    pub fn active_count(&self) -> usize {
        self.gates.len()
    }

    /// Estimated area: the sum of gate costs over active gates.
    pub fn area(&self) -> f64 {
        self.gates.iter().map(|g| g.cost).sum()
    }

    /// Places the gates back at their addresses in a genome with the given
    /// grid. Unused nodes become buffers of input 0.
    pub fn to_genome(&self, params: Arc<CgpParams>) -> Result<Genome> {
        if params.inputs != self.inputs || params.outputs != self.outputs.len() {
            return Err(Error::WidthMismatch(format!(
                "netlist has {} inputs / {} outputs, grid has {} / {}",
                self.inputs,
                self.outputs.len(),
                params.inputs,
                params.outputs
            )));
        }
        let filler = params.gates.id_of(GateKind::Buf).unwrap_or(0);
        let mut genes = vec![0u32; params.genome_size()];
        for node in 0..params.nodes() {
            genes[node * (ARITY + 1) + ARITY] = filler;
        }
        for g in &self.gates {
            let node = g.addr as usize - self.inputs;
            if node >= params.nodes() {
                return Err(Error::param(format!("gate address {} does not fit the grid", g.addr)));
            }
            let base = node * (ARITY + 1);
            genes[base] = g.inputs[0];
            genes[base + 1] = g.inputs[1];
            genes[base + ARITY] = g.func;
        }
        for (o, &src) in self.outputs.iter().enumerate() {
            genes[params.output_gene(o)] = src;
        }
        let genome = Genome::new(params, genes);
        let bad = genome.validate()?;
        if !bad.is_empty() {
            return Err(Error::InvalidGenome(bad));
        }
        Ok(genome)
    }
}

/// Marks which nodes of a genome are reachable from an output. The genome
/// must already be valid.
pub fn active_nodes(genome: &Genome) -> Vec<bool> {
    let p = genome.params();
    let genes = genome.genes();
    let mut active = vec![false; p.nodes()];
    let mut stack: Vec<usize> = Vec::new();
    for &o in genome.output_genes() {
        if o as usize >= p.inputs {
            stack.push(o as usize - p.inputs);
        }
    }
    while let Some(node) = stack.pop() {
        if active[node] {
            continue;
        }
        active[node] = true;
        let base = node * (ARITY + 1);
        let kind = p.gates.get(genes[base + ARITY]).expect("validated genome").kind;
        for &src in &genes[base..base + kind.arity()] {
            if src as usize >= p.inputs {
                let n = src as usize - p.inputs;
                if !active[n] {
                    stack.push(n);
                }
            }
        }
    }
    active
}

/// Whether gene `index` influences the phenotype given the active mask.
pub fn is_expressed(genome: &Genome, active: &[bool], index: usize) -> bool {
    let p = genome.params();
    let node_genes = p.nodes() * (ARITY + 1);
    if index >= node_genes {
        return true;
    }
    let node = index / (ARITY + 1);
    if !active[node] {
        return false;
    }
    let slot = index % (ARITY + 1);
    if slot == ARITY {
        return true;
    }
    let func = genome.genes()[node * (ARITY + 1) + ARITY];
    slot < p.gates.get(func).expect("validated genome").kind.arity()
}

/// Decodes a valid genome to its active netlist.
pub fn decode(genome: &Genome) -> Result<Netlist> {
    let bad = genome.validate()?;
    if !bad.is_empty() {
        return Err(Error::InvalidGenome(bad));
    }
    Ok(decode_unchecked(genome))
}

pub(crate) fn decode_unchecked(genome: &Genome) -> Netlist {
    let p = genome.params();
    let genes = genome.genes();
    let active = active_nodes(genome);
    let gates = active
        .iter()
        .enumerate()
        .filter(|&(_, &a)| a)
        .map(|(node, _)| {
            let base = node * (ARITY + 1);
            let f = p.gates.get(genes[base + ARITY]).expect("validated genome");
            let a = genes[base];
            let b = if f.arity() == 1 { a } else { genes[base + 1] };
            Gate {
                addr: p.node_address(node) as u32,
                func: f.id,
                kind: f.kind,
                inputs: [a, b],
                cost: f.cost,
            }
        })
        .collect();
    Netlist {
        inputs: p.inputs,
        gates,
        outputs: genome.output_genes().to_vec(),
    }
}

//! Gate functions available to CGP nodes and their relative area costs.
//!
//! Costs are expressed in NAND2-equivalent units. Only relative comparisons
//! between circuits built from the same table are meaningful.

use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Buf,
    Inv,
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::Buf,
        GateKind::Inv,
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Buf | GateKind::Inv => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Buf => "BUF",
            GateKind::Inv => "INV",
            GateKind::And => "AND2",
            GateKind::Nand => "NAND2",
            GateKind::Or => "OR2",
            GateKind::Nor => "NOR2",
            GateKind::Xor => "XOR2",
            GateKind::Xnor => "XNOR2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let upper = name.trim().to_ascii_uppercase();
        let bare = upper.trim_end_matches('2');
        Some(match bare {
            "BUF" => GateKind::Buf,
            "INV" | "NOT" => GateKind::Inv,
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            _ => return None,
        })
    }

    /// Evaluates the gate on 64 input vectors at once. Unary gates ignore `b`.
    #[inline(always)]
    pub fn eval(self, a: u64, b: u64) -> u64 {
        match self {
            GateKind::Buf => a,
            GateKind::Inv => !a,
            GateKind::And => a & b,
            GateKind::Nand => !(a & b),
            GateKind::Or => a | b,
            GateKind::Nor => !(a | b),
            GateKind::Xor => a ^ b,
            GateKind::Xnor => !(a ^ b),
        }
    }

    #[inline]
    pub fn eval_bit(self, a: bool, b: bool) -> bool {
        self.eval(a as u64, b as u64) & 1 == 1
    }

    /// Default area in NAND2 equivalents.
    pub fn default_cost(self) -> f64 {
        match self {
            GateKind::Nand | GateKind::Nor => 1.0,
            GateKind::Inv | GateKind::Buf => 0.6,
            GateKind::And | GateKind::Or => 1.4,
            GateKind::Xor | GateKind::Xnor => 2.2,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One entry of the function set: the gene value `id` selects `kind`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateFn {
    pub id: u32,
    pub kind: GateKind,
    pub cost: f64,
}

impl GateFn {
    pub fn arity(&self) -> usize {
        self.kind.arity()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GateRow {
    id: u32,
    name: String,
    arity: usize,
    cost: f64,
}

/// Ordered function set. Gene value `k` selects `fns[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSet {
    fns: Vec<GateFn>,
}

impl GateSet {
    /// BUF, INV, AND2, NAND2, OR2, NOR2, XOR2, XNOR2 with the default costs.
    pub fn standard() -> Self {
        let fns = GateKind::ALL
            .iter()
            .enumerate()
            .map(|(id, &kind)| GateFn {
                id: id as u32,
                kind,
                cost: kind.default_cost(),
            })
            .collect();
        GateSet { fns }
    }

    pub fn new(fns: Vec<GateFn>) -> Result<Self> {
        if fns.is_empty() {
            return Err(Error::param("function set is empty"));
        }
        for (pos, f) in fns.iter().enumerate() {
            if f.id as usize != pos {
                return Err(Error::param(format!(
                    "gate ids must be 0..{} in order, found {} at position {pos}",
                    fns.len(),
                    f.id
                )));
            }
            if !(f.cost >= 0.0 && f.cost.is_finite()) {
                return Err(Error::param(format!("gate {} has invalid cost {}", f.kind, f.cost)));
            }
        }
        Ok(GateSet { fns })
    }

    pub fn len(&self) -> usize {
        self.fns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fns.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&GateFn> {
        self.fns.get(id as usize)
    }

    pub fn id_of(&self, kind: GateKind) -> Option<u32> {
        self.fns.iter().find(|f| f.kind == kind).map(|f| f.id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GateFn> {
        self.fns.iter()
    }

    /// CSV sidecar with header `id,name,arity,cost`.
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for f in &self.fns {
            wtr.serialize(GateRow {
                id: f.id,
                name: f.kind.name().to_string(),
                arity: f.arity(),
                cost: f.cost,
            })?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut fns = Vec::new();
        for row in rdr.deserialize() {
            let row: GateRow = row?;
            let kind = GateKind::from_name(&row.name)
                .ok_or_else(|| Error::parse(format!("unknown gate name {:?}", row.name)))?;
            if kind.arity() != row.arity {
                return Err(Error::parse(format!(
                    "gate {} declared with arity {}, expected {}",
                    row.name,
                    row.arity,
                    kind.arity()
                )));
            }
            fns.push(GateFn {
                id: row.id,
                kind,
                cost: row.cost,
            });
        }
        GateSet::new(fns)
    }
}

impl Default for GateSet {
    fn default() -> Self {
        GateSet::standard()
    }
}

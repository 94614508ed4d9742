//! Cartesian genetic programming representation of combinational circuits.

pub mod gate;
pub mod genome;
pub mod netlist;

pub use gate::{GateFn, GateKind, GateSet};
pub use genome::{genome_size, CgpParams, Genome, ARITY};
pub use netlist::{active_nodes, decode, is_expressed, Gate, Netlist};

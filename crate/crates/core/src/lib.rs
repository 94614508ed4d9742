//! Evolutionary design of approximate multipliers under a weighted mean
//! error distance constraint.
//!
//! Circuits are Cartesian genetic programming genomes ([`cgp`]), simulated
//! exhaustively ([`sim`]) and scored with the metrics of [`metrics`]. The
//! [`evolve`] module runs the (1+λ) search and Pareto sweeps; [`generators`]
//! provides exact seeds and conventional approximate baselines, and [`app`]
//! holds the image filter and quantized MLP harnesses.

pub mod app;
pub mod cgp;
pub mod error;
pub mod evolve;
pub mod generators;
pub mod lut;
pub mod metrics;
pub mod sim;

pub use cgp::{decode, genome_size, CgpParams, GateKind, GateSet, Genome, Netlist};
pub use error::{Error, Result};
pub use evolve::{evolve, fitness, mutate, pareto_sweep, EvoConfig, MultiplierEvaluator, ParetoSet, RunLog};
pub use lut::{MultLut, Signedness};
pub use metrics::{error_report, wmed, ErrorReport, Pmf};
pub use sim::{simulate_all, simulate_naive, TruthTables};

/// Version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! (1+λ) search minimizing area under a WMED constraint.

pub mod eval;
mod mutate;
pub mod pareto;

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgp::netlist::decode_unchecked;
use crate::cgp::{active_nodes, decode, is_expressed, Genome};
use crate::error::{Error, Result};
use crate::metrics::Pmf;

pub use eval::MultiplierEvaluator;
pub use mutate::mutate;
pub use pareto::{pareto_sweep, ParetoPoint, ParetoSet};

pub const DEFAULT_LAMBDA: usize = 4;
pub const DEFAULT_H: usize = 5;
pub const DEFAULT_ITERATIONS: u64 = 1_000_000;
pub const DEFAULT_RNG_SEED: u64 = 42;

#[derive(Clone, Debug)]
pub struct EvoConfig {
    pub lambda: usize,
    /// Largest number of genes touched by one mutation.
    pub h: usize,
    pub iterations: u64,
    /// WMED threshold as a plain fraction (not percent).
    pub target: f64,
    pub pmf: Pmf,
    pub seed: Genome,
    pub rng_seed: u64,
}

impl EvoConfig {
    pub fn new(seed: Genome, pmf: Pmf, target: f64) -> Self {
        EvoConfig {
            lambda: DEFAULT_LAMBDA,
            h: DEFAULT_H,
            iterations: DEFAULT_ITERATIONS,
            target,
            pmf,
            seed,
            rng_seed: DEFAULT_RNG_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0 || self.h == 0 || self.iterations == 0 {
            return Err(Error::param("lambda, h and iterations must all be at least 1"));
        }
        if !(self.target >= 0.0 && self.target.is_finite()) {
            return Err(Error::param(format!("target {} must be a finite non-negative number", self.target)));
        }
        let bad = self.seed.validate()?;
        if !bad.is_empty() {
            return Err(Error::InvalidGenome(bad));
        }
        Ok(())
    }
}

/// State of the parent after one generation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    /// Area of the parent, `None` while it violates the target.
    pub fitness: Option<f64>,
    pub wmed: f64,
    pub active_gates: usize,
}

#[derive(Clone, Debug)]
pub struct RunLog {
    pub records: Vec<GenerationRecord>,
    pub final_genome: Genome,
    pub wall_time: Duration,
}

impl RunLog {
    pub fn last(&self) -> &GenerationRecord {
        self.records.last().expect("the seed is always recorded")
    }

    /// One JSON object per generation. Wall time is left out so that logs of
    /// identical runs are byte-identical.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = serde_json::to_string(r).expect("plain record");
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

/// Constrained fitness: the area when `wmed <= target`, infinity otherwise.
pub fn fitness(candidate: &Genome, pmf: &Pmf, target: f64) -> Result<f64> {
    let net = decode(candidate)?;
    let ev = MultiplierEvaluator::new(pmf, candidate.params().outputs)?;
    if net.inputs() != 2 * pmf.width() as usize {
        return Err(Error::WidthMismatch(format!(
            "circuit has {} inputs, pmf describes {}-bit operands",
            net.inputs(),
            pmf.width()
        )));
    }
    Ok(match ev.eval_netlist(&net, Some(target)) {
        Some(_) => net.area(),
        None => f64::INFINITY,
    })
}

/// Mixes seed components into one 64-bit stream seed.
pub fn stream_seed(parts: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(0x243F_6A88_85A3_08D3, |h, &p| splitmix(h ^ splitmix(p)))
}

#[derive(Clone, Debug)]
struct Candidate {
    genome: Genome,
    active: Vec<bool>,
    area: f64,
    wmed: f64,
    gates: usize,
}

impl Candidate {
    fn overshoot(&self, target: f64) -> f64 {
        (self.wmed - target).max(0.0)
    }

    fn key(&self, target: f64) -> (f64, f64) {
        (self.overshoot(target), self.area)
    }
}

fn cmp_key(a: (f64, f64), b: (f64, f64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}

fn record(generation: u64, c: &Candidate, target: f64) -> GenerationRecord {
    GenerationRecord {
        generation,
        fitness: (c.wmed <= target).then_some(c.area),
        wmed: c.wmed,
        active_gates: c.gates,
    }
}

fn offspring(
    cfg: &EvoConfig,
    ev: &MultiplierEvaluator,
    parent: &Candidate,
    generation: u64,
    index: usize,
) -> Option<Candidate> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(&[cfg.rng_seed, generation, index as u64]));
    let (genome, touched) = mutate::mutate_tracked(&parent.genome, cfg.h, &mut rng);
    if touched.iter().all(|&g| !is_expressed(&parent.genome, &parent.active, g)) {
        return Some(Candidate {
            genome,
            active: parent.active.clone(),
            area: parent.area,
            wmed: parent.wmed,
            gates: parent.gates,
        });
    }
    let net = decode_unchecked(&genome);
    let area = net.area();
    let feasible_parent = parent.wmed <= cfg.target;
    let wmed = if feasible_parent {
        if area > parent.area {
            return None;
        }
        ev.eval_netlist(&net, Some(cfg.target))?
    } else {
        ev.eval_netlist(&net, None).expect("unbounded")
    };
    Some(Candidate {
        active: active_nodes(&genome),
        genome,
        area,
        wmed,
        gates: net.active_count(),
    })
}

/// Runs the search from `cfg.seed`. The returned genome is the final parent,
/// which is also the best individual seen.
pub fn evolve(cfg: &EvoConfig) -> Result<(Genome, RunLog)> {
    cfg.validate()?;
    let start = Instant::now();
    let net = decode(&cfg.seed)?;
    let ev = MultiplierEvaluator::new(&cfg.pmf, cfg.seed.params().outputs)?;
    if net.inputs() != 2 * cfg.pmf.width() as usize {
        return Err(Error::WidthMismatch(format!(
            "seed has {} inputs, pmf describes {}-bit operands",
            net.inputs(),
            cfg.pmf.width()
        )));
    }
    let mut parent = Candidate {
        genome: cfg.seed.clone(),
        active: active_nodes(&cfg.seed),
        area: net.area(),
        wmed: ev.eval_netlist(&net, None).expect("unbounded"),
        gates: net.active_count(),
    };
    let mut records = Vec::with_capacity(cfg.iterations.min(1 << 24) as usize + 1);
    records.push(record(0, &parent, cfg.target));

    let parallel = rayon::current_num_threads() > 1 && cfg.lambda > 1;
    for generation in 1..=cfg.iterations {
        let children: Vec<Option<Candidate>> = if parallel {
            (0..cfg.lambda)
                .into_par_iter()
                .map(|k| offspring(cfg, &ev, &parent, generation, k))
                .collect()
        } else {
            (0..cfg.lambda).map(|k| offspring(cfg, &ev, &parent, generation, k)).collect()
        };
        let best = children
            .into_iter()
            .flatten()
            .reduce(|a, b| {
                if cmp_key(b.key(cfg.target), a.key(cfg.target)) == Ordering::Less {
                    b
                } else {
                    a
                }
            });
        if let Some(best) = best {
            if cmp_key(best.key(cfg.target), parent.key(cfg.target)) != Ordering::Greater {
                parent = best;
            }
        }
        records.push(record(generation, &parent, cfg.target));
    }

    let log = RunLog {
        records,
        final_genome: parent.genome.clone(),
        wall_time: start.elapsed(),
    };
    Ok((parent.genome, log))
}

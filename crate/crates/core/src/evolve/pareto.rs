use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::cgp::{decode, Genome};
use crate::error::{Error, Result};
use crate::evolve::{evolve, stream_seed, EvoConfig, MultiplierEvaluator};

#[derive(Clone, Debug)]
pub struct ParetoPoint {
    pub target: f64,
    pub wmed: f64,
    pub area: f64,
    pub genome: Genome,
}

impl ParetoPoint {
    fn dominates(&self, other: &ParetoPoint) -> bool {
        self.wmed <= other.wmed && self.area <= other.area && (self.wmed < other.wmed || self.area < other.area)
    }
}

/// Non-dominated `(wmed, area)` points in increasing WMED order.
#[derive(Clone, Debug, Default)]
pub struct ParetoSet {
    pub points: Vec<ParetoPoint>,
}

impl ParetoSet {
    /// Keeps the non-dominated points. Of several identical points the first
    /// one survives.
    pub fn from_points(points: Vec<ParetoPoint>) -> Self {
        let mut kept: Vec<ParetoPoint> = Vec::new();
        for (k, p) in points.iter().enumerate() {
            let beaten = points.iter().any(|q| q.dominates(p))
                || points[..k].iter().any(|q| q.wmed == p.wmed && q.area == p.area);
            if !beaten {
                kept.push(p.clone());
            }
        }
        kept.sort_by(|a, b| a.wmed.total_cmp(&b.wmed).then(a.area.total_cmp(&b.area)));
        ParetoSet { points: kept }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV `target,wmed,area,genome_path` with the given path per point.
    pub fn to_csv(&self, genome_paths: &[String]) -> Result<String> {
        if genome_paths.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                actual: genome_paths.len(),
            });
        }
        let mut out = String::from("target,wmed,area,genome_path\n");
        for (p, path) in self.points.iter().zip(genome_paths) {
            let _ = writeln!(out, "{},{},{},{}", p.target, p.wmed, p.area, path);
        }
        Ok(out)
    }

    /// Writes each genome as `<dir>/point_<k>.cgp` and the CSV next to them,
    /// with paths relative to `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, csv_name: &str) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut paths = Vec::with_capacity(self.points.len());
        for (k, p) in self.points.iter().enumerate() {
            let name = format!("point_{k}.cgp");
            fs::write(dir.join(&name), p.genome.to_text())?;
            paths.push(name);
        }
        fs::write(dir.join(csv_name), self.to_csv(&paths)?)?;
        Ok(())
    }
}

/// Runs `repeats` searches per target and keeps the non-dominated best
/// results. Run `(t, r)` uses the stream seed `(base.rng_seed, t, r)`.
pub fn pareto_sweep(targets: &[f64], repeats: usize, base: &EvoConfig) -> Result<ParetoSet> {
    if targets.is_empty() || repeats == 0 {
        return Err(Error::param("a sweep needs at least one target and one repeat"));
    }
    let runs: Vec<(usize, usize)> = (0..targets.len())
        .flat_map(|t| (0..repeats).map(move |r| (t, r)))
        .collect();
    let results: Vec<Result<ParetoPoint>> = runs
        .par_iter()
        .map(|&(t, r)| {
            let mut cfg = base.clone();
            cfg.target = targets[t];
            cfg.rng_seed = stream_seed(&[base.rng_seed, t as u64, r as u64]);
            let (genome, _) = evolve(&cfg)?;
            let ev = MultiplierEvaluator::new(&cfg.pmf, genome.params().outputs)?;
            Ok(ParetoPoint {
                target: cfg.target,
                wmed: ev.wmed(&genome)?,
                area: decode(&genome)?.area(),
                genome,
            })
        })
        .collect();

    let mut best: Vec<Option<ParetoPoint>> = vec![None; targets.len()];
    for (&(t, _), res) in runs.iter().zip(results) {
        let p = res?;
        if p.wmed > p.target {
            continue;
        }
        let better = match &best[t] {
            None => true,
            Some(b) => (p.area, p.wmed) < (b.area, b.wmed),
        };
        if better {
            best[t] = Some(p);
        }
    }
    Ok(ParetoSet::from_points(best.into_iter().flatten().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgp::{CgpParams, GateSet};
    use std::sync::Arc;

    fn point(wmed: f64, area: f64) -> ParetoPoint {
        let params = Arc::new(CgpParams::new(1, 1, 1, 1, GateSet::standard()).unwrap());
        ParetoPoint {
            target: wmed,
            wmed,
            area,
            genome: Genome::new(params, vec![0, 0, 0, 0]),
        }
    }

    #[test]
    fn filter_drops_dominated_and_duplicates() {
        let set = ParetoSet::from_points(vec![
            point(0.1, 5.0),
            point(0.2, 6.0),
            point(0.0, 9.0),
            point(0.1, 5.0),
            point(0.3, 2.0),
        ]);
        let got: Vec<(f64, f64)> = set.points.iter().map(|p| (p.wmed, p.area)).collect();
        assert_eq!(got, vec![(0.0, 9.0), (0.1, 5.0), (0.3, 2.0)]);
    }

    #[test]
    fn csv_layout() {
        let set = ParetoSet::from_points(vec![point(0.5, 1.5)]);
        let csv = set.to_csv(&["a.cgp".into()]).unwrap();
        assert_eq!(csv, "target,wmed,area,genome_path\n0.5,0.5,1.5,a.cgp\n");
        assert!(set.to_csv(&[]).is_err());
    }
}

//! Loading inputs and writing run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use wmed_cgp::app::GrayImage;
use wmed_cgp::metrics::Pmf;
use wmed_cgp::{Error, GateSet, Genome, MultLut, Result, Signedness};

pub fn read_genome(path: &Path) -> Result<Genome> {
    let text = fs::read_to_string(path)?;
    let genome = Genome::from_text(&text, GateSet::standard())?;
    let bad = genome.validate()?;
    if !bad.is_empty() {
        return Err(Error::InvalidGenome(bad));
    }
    Ok(genome)
}

/// Writes the genome and its gate table sidecar `<path>.gates.csv`.
pub fn write_genome(path: &Path, genome: &Genome) -> Result<()> {
    create_parent(path)?;
    fs::write(path, genome.to_text())?;
    fs::write(sidecar(path, "gates.csv"), genome.params().gates.to_csv()?)?;
    Ok(())
}

pub fn signedness(signed: bool) -> Signedness {
    if signed {
        Signedness::Signed
    } else {
        Signedness::Unsigned
    }
}

/// A preset name (`uniform`, `d1`, `d2`) or a path to a pmf CSV.
pub fn load_pmf(source: &str, width: u32, s: Signedness) -> Result<Pmf> {
    let pmf = match source {
        "uniform" | "d1" | "d2" => Pmf::preset(source, width, s)?,
        path => Pmf::from_csv(fs::File::open(path)?)?,
    };
    if pmf.width() != width {
        return Err(Error::WidthMismatch(format!("pmf is {}-bit, circuit operands are {width}-bit", pmf.width())));
    }
    Ok(pmf)
}

pub fn operand_width(genome: &Genome) -> Result<u32> {
    let p = genome.params();
    if !p.inputs.is_multiple_of(2) || p.outputs > 2 * p.inputs {
        return Err(Error::WidthMismatch(format!(
            "{} inputs and {} outputs do not describe a multiplier",
            p.inputs, p.outputs
        )));
    }
    Ok(p.inputs as u32 / 2)
}

/// Multiplier behavior from a genome file or a raw table (`.lut`).
pub fn load_multiplier(path: &Path, s: Signedness) -> Result<MultLut> {
    if path.extension().is_some_and(|e| e == "lut") {
        MultLut::from_raw(&fs::read(path)?, s)
    } else {
        MultLut::from_genome(&read_genome(path)?, s)
    }
}

/// Clean/noisy fixture pairs. A `*_noisy.pgm` without a clean partner is
/// returned with `None`.
pub fn read_fixture_dir(dir: &Path) -> Result<Vec<(String, Option<GrayImage>, GrayImage)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.sort();
    let mut out = Vec::new();
    for p in &paths {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let Some(stem) = name.strip_suffix("_noisy.pgm") else {
            continue;
        };
        let clean_path = dir.join(format!("{stem}_clean.pgm"));
        let clean = if clean_path.exists() { Some(GrayImage::read_pgm(&clean_path)?) } else { None };
        out.push((stem.to_string(), clean, GrayImage::read_pgm(p)?));
    }
    if out.is_empty() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no *_noisy.pgm images in {}", dir.display()),
        )));
    }
    Ok(out)
}

pub fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    argv: Vec<String>,
    rng_seed: Option<u64>,
    workers: usize,
    config: &'a C,
}

/// `<output>.manifest.json` with everything needed to rerun the command.
pub fn write_manifest<C: Serialize>(output: &Path, command: &str, rng_seed: Option<u64>, config: &C) -> Result<()> {
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: wmed_cgp::VERSION,
        command,
        argv: std::env::args().collect(),
        rng_seed,
        workers: rayon::current_num_threads(),
        config,
    };
    create_parent(output)?;
    fs::write(sidecar(output, "manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

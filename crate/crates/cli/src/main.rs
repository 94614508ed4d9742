//! `wmed-cgp`: evolve and evaluate approximate multipliers from the shell.
//!
//! ```bash
//! wmed-cgp gen-seed --kind exact-mult --width 8 -o seed.cgp
//! wmed-cgp evolve --seed seed.cgp --pmf d2 --target 0.5 --iterations 100000 -o best.cgp --log run.jsonl
//! wmed-cgp eval --genome best.cgp --pmf d2
//! ```
//!
//! WMED thresholds are given in percent. Exit codes: 0 ok, 1 usage,
//! 2 I/O or parse failure, 3 invariant violation, 4 resource guard.

mod files;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use wmed_cgp::app::mlp::accuracy;
use wmed_cgp::app::{gaussian_filter, psnr, Dataset, QuantMlp};
use wmed_cgp::evolve::{DEFAULT_H, DEFAULT_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_RNG_SEED};
use wmed_cgp::generators::{gen_adder, gen_broken_array_multiplier, gen_exact_multiplier, gen_truncated_multiplier};
use wmed_cgp::metrics::Pmf;
use wmed_cgp::{decode, error_report, evolve, pareto_sweep, EvoConfig, Error, MultLut, Result, Signedness};

use files::*;

#[derive(Parser)]
#[command(name = "wmed-cgp", version, about = "Evolve approximate multipliers under a weighted error constraint")]
struct Cli {
    /// Threads for every parallel section (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a conventional circuit as a genome
    GenSeed(GenSeedArgs),
    /// Minimize area under a WMED threshold
    Evolve(EvolveArgs),
    /// Sweep several thresholds and keep the non-dominated results
    Pareto(ParetoArgs),
    /// Error report of a multiplier as JSON
    Eval(EvalArgs),
    /// Per-pair absolute error map as PGM and CSV
    Heatmap(HeatmapArgs),
    /// Write a pmf CSV
    Pmf(PmfArgs),
    /// PSNR of the Gaussian filter built on a multiplier
    FilterBench(FilterBenchArgs),
    /// MLP accuracy with a multiplier in every MAC
    NnBench(NnBenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SeedKind {
    ExactMult,
    Truncated,
    BrokenArray,
    Adder,
}

#[derive(Args, Serialize)]
struct GenSeedArgs {
    #[arg(long, value_enum, default_value = "exact-mult")]
    kind: SeedKind,
    #[arg(long)]
    width: u32,
    /// Two's-complement operands (exact multiplier only)
    #[arg(long)]
    signed: bool,
    /// Truncated product columns
    #[arg(long, default_value_t = 0)]
    k: u32,
    /// Horizontal break level
    #[arg(long, default_value_t = 0)]
    hbl: u32,
    /// Vertical break level
    #[arg(long, default_value_t = 0)]
    vbl: u32,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct SearchArgs {
    /// Seed genome
    #[arg(long)]
    seed: PathBuf,
    /// `uniform`, `d1`, `d2` or a pmf CSV
    #[arg(long, default_value = "uniform")]
    pmf: String,
    /// Operands are two's complement (preset pmfs only; a CSV carries its own)
    #[arg(long)]
    signed: bool,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: usize,
    /// Largest number of genes changed per mutation
    #[arg(long, default_value_t = DEFAULT_H)]
    h: usize,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: u64,
    #[arg(long, default_value_t = DEFAULT_RNG_SEED)]
    rng: u64,
}

#[derive(Args, Serialize)]
struct EvolveArgs {
    #[command(flatten)]
    search: SearchArgs,
    /// WMED threshold in percent
    #[arg(long)]
    target: f64,
    #[arg(short, long)]
    output: PathBuf,
    /// JSON-lines log, one record per generation
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ParetoArgs {
    #[command(flatten)]
    search: SearchArgs,
    /// Comma-separated WMED thresholds in percent
    #[arg(long, value_delimiter = ',', required = true)]
    targets: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Directory for `pareto.csv` and the point genomes
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Serialize)]
struct MultiplierArgs {
    /// Genome file, or a raw table with extension `.lut`
    #[arg(long)]
    genome: PathBuf,
    #[arg(long, default_value = "uniform")]
    pmf: String,
    #[arg(long)]
    signed: bool,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[command(flatten)]
    mult: MultiplierArgs,
    /// Also write the report here
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct HeatmapArgs {
    #[command(flatten)]
    mult: MultiplierArgs,
    /// PGM image; the CSV matrix goes to `<output>.csv`
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PmfKind {
    Uniform,
    Gaussian,
    FromWeights,
}

#[derive(Args, Serialize)]
struct PmfArgs {
    #[arg(long, value_enum)]
    kind: PmfKind,
    #[arg(long, default_value_t = 8)]
    width: u32,
    #[arg(long)]
    signed: bool,
    #[arg(long, default_value_t = 127.5)]
    mean: f64,
    #[arg(long, default_value_t = 32.0)]
    sigma: f64,
    /// Half-normal with its mode at the mean
    #[arg(long)]
    half: bool,
    /// Quantized model whose weight histogram is used (from-weights)
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct FilterBenchArgs {
    /// 8-bit unsigned multiplier genome or `.lut` table
    #[arg(long)]
    genome: PathBuf,
    /// Directory of `*_noisy.pgm` images with optional `*_clean.pgm` partners
    #[arg(long)]
    images: PathBuf,
    /// Per-image CSV
    #[arg(short, long)]
    output: PathBuf,
    /// Keep the filtered images next to the CSV
    #[arg(long)]
    save_images: bool,
}

#[derive(Args, Serialize)]
struct NnBenchArgs {
    /// 8-bit signed multiplier genome or `.lut` table
    #[arg(long)]
    genome: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// JSON summary
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn percent(p: f64) -> Result<f64> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("threshold {p}% must be finite and non-negative")));
    }
    Ok(p / 100.0)
}

fn base_config(a: &SearchArgs) -> Result<EvoConfig> {
    let seed = read_genome(&a.seed)?;
    let w = operand_width(&seed)?;
    let pmf = load_pmf(&a.pmf, w, signedness(a.signed))?;
    let mut cfg = EvoConfig::new(seed, pmf, 0.0);
    cfg.lambda = a.lambda;
    cfg.h = a.h;
    cfg.iterations = a.iterations;
    cfg.rng_seed = a.rng;
    Ok(cfg)
}

fn load_with_pmf(a: &MultiplierArgs) -> Result<(MultLut, Pmf)> {
    let s = signedness(a.signed);
    let probe = if a.pmf.ends_with(".csv") { Some(Pmf::from_csv(fs::File::open(&a.pmf)?)?) } else { None };
    let s = probe.as_ref().map_or(s, Pmf::signedness);
    let lut = load_multiplier(&a.genome, s)?;
    let pmf = match probe {
        Some(p) => p,
        None => load_pmf(&a.pmf, lut.width(), s)?,
    };
    Ok((lut, pmf))
}

fn gen_seed(a: &GenSeedArgs) -> Result<()> {
    let g = match a.kind {
        SeedKind::ExactMult => gen_exact_multiplier(a.width, signedness(a.signed))?,
        SeedKind::Truncated => gen_truncated_multiplier(a.width, a.k)?,
        SeedKind::BrokenArray => gen_broken_array_multiplier(a.width, a.hbl, a.vbl)?,
        SeedKind::Adder => gen_adder(a.width)?,
    };
    write_genome(&a.output, &g)?;
    write_manifest(&a.output, "gen-seed", None, a)?;
    let net = decode(&g)?;
    println!("{}", json!({ "area": net.area(), "active_gates": net.active_count(), "cols": g.params().cols }));
    Ok(())
}

fn run_evolve(a: &EvolveArgs) -> Result<()> {
    let mut cfg = base_config(&a.search)?;
    cfg.target = percent(a.target)?;
    let (best, log) = evolve(&cfg)?;
    let last = log.last();
    write_genome(&a.output, &best)?;
    if let Some(path) = &a.log {
        create_parent(path)?;
        fs::write(path, log.to_jsonl())?;
    }
    write_manifest(&a.output, "evolve", Some(cfg.rng_seed), a)?;
    println!(
        "{}",
        json!({
            "feasible": last.fitness.is_some(),
            "wmed": last.wmed,
            "area": decode(&best)?.area(),
            "active_gates": last.active_gates,
            "seconds": log.wall_time.as_secs_f64(),
        })
    );
    Ok(())
}

fn run_pareto(a: &ParetoArgs) -> Result<()> {
    let base = base_config(&a.search)?;
    let targets: Vec<f64> = a.targets.iter().map(|&t| percent(t)).collect::<Result<_>>()?;
    let set = pareto_sweep(&targets, a.repeats, &base)?;
    set.write(&a.out_dir, "pareto.csv")?;
    write_manifest(&a.out_dir.join("pareto.csv"), "pareto", Some(base.rng_seed), a)?;
    println!("{}", json!({ "points": set.len() }));
    Ok(())
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    let (lut, pmf) = load_with_pmf(&a.mult)?;
    let report = error_report(&lut, &pmf, false)?;
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(out) = &a.output {
        create_parent(out)?;
        fs::write(out, format!("{text}\n"))?;
        write_manifest(out, "eval", None, a)?;
    }
    println!("{text}");
    Ok(())
}

fn run_heatmap(a: &HeatmapArgs) -> Result<()> {
    let (lut, pmf) = load_with_pmf(&a.mult)?;
    let report = error_report(&lut, &pmf, true)?;
    let hm = report.heatmap.as_ref().expect("requested");
    create_parent(&a.output)?;
    hm.to_image().write_pgm(&a.output)?;
    fs::write(sidecar(&a.output, "csv"), hm.to_csv())?;
    write_manifest(&a.output, "heatmap", None, a)?;
    println!("{}", json!({ "wce": report.wce, "wmed": report.wmed }));
    Ok(())
}

fn run_pmf(a: &PmfArgs) -> Result<()> {
    let s = signedness(a.signed);
    let pmf = match a.kind {
        PmfKind::Uniform => Pmf::uniform(a.width, s)?,
        PmfKind::Gaussian => Pmf::gaussian(a.width, a.mean, a.sigma, a.half, s)?,
        PmfKind::FromWeights => {
            let path = a
                .model
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("from-weights needs --model".into()))?;
            Pmf::from_histogram(&QuantMlp::read(path)?.weights_histogram(), Signedness::Signed)?
        }
    };
    create_parent(&a.output)?;
    fs::write(&a.output, pmf.to_csv())?;
    write_manifest(&a.output, "pmf", None, a)?;
    Ok(())
}

fn run_filter_bench(a: &FilterBenchArgs) -> Result<()> {
    let lut = load_multiplier(&a.genome, Signedness::Unsigned)?;
    let exact = MultLut::exact(8, Signedness::Unsigned)?;
    let fixtures = read_fixture_dir(&a.images)?;
    let mut csv = String::from("image,psnr_vs_exact,psnr_vs_clean\n");
    let (mut sum_exact, mut sum_clean, mut n_clean) = (0.0, 0.0, 0usize);
    for (name, clean, noisy) in &fixtures {
        let reference = gaussian_filter(noisy, &exact)?;
        let out = gaussian_filter(noisy, &lut)?;
        let vs_exact = psnr(&reference, &out)?;
        sum_exact += vs_exact;
        let vs_clean = match clean {
            Some(c) => {
                let v = psnr(c, &out)?;
                sum_clean += v;
                n_clean += 1;
                v.to_string()
            }
            None => String::new(),
        };
        csv.push_str(&format!("{name},{vs_exact},{vs_clean}\n"));
        if a.save_images {
            let dir = a.output.parent().unwrap_or(Path::new("."));
            out.write_pgm(dir.join(format!("{name}_filtered.pgm")))?;
        }
    }
    create_parent(&a.output)?;
    fs::write(&a.output, csv)?;
    write_manifest(&a.output, "filter-bench", None, a)?;
    let n = fixtures.len() as f64;
    let mean_clean = (n_clean > 0).then(|| sum_clean / n_clean as f64);
    println!("{}", json!({ "images": fixtures.len(), "mean_psnr_vs_exact": sum_exact / n, "mean_psnr_vs_clean": mean_clean }));
    Ok(())
}

fn run_nn_bench(a: &NnBenchArgs) -> Result<()> {
    let lut = load_multiplier(&a.genome, Signedness::Signed)?;
    let model = QuantMlp::read(&a.model)?;
    let data = Dataset::read(&a.images, &a.labels)?;
    let exact = MultLut::exact(8, Signedness::Signed)?;
    let base = accuracy(&model.classify_all(&data.images, &exact)?, &data.labels);
    let approx = accuracy(&model.classify_all(&data.images, &lut)?, &data.labels);
    let summary = json!({
        "samples": data.len(),
        "exact_accuracy": base,
        "accuracy": approx,
        "drop_pp": (base - approx) * 100.0,
    });
    if let Some(out) = &a.output {
        create_parent(out)?;
        fs::write(out, serde_json::to_string_pretty(&summary)? + "\n")?;
        write_manifest(out, "nn-bench", None, a)?;
    }
    println!("{summary}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::InvalidParameter("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Resource(e.to_string()))?;
    }
    match &cli.command {
        Command::GenSeed(a) => gen_seed(a),
        Command::Evolve(a) => run_evolve(a),
        Command::Pareto(a) => run_pareto(a),
        Command::Eval(a) => run_eval(a),
        Command::Heatmap(a) => run_heatmap(a),
        Command::Pmf(a) => run_pmf(a),
        Command::FilterBench(a) => run_filter_bench(a),
        Command::NnBench(a) => run_nn_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

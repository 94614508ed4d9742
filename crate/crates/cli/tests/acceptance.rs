//! Exit criteria. Each test prints one `PASS`/`FAIL` line to stderr and
//! holds a shared lock so the wall-clock limits are measured without other
//! tests competing for the CPU.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmed_cgp::app::mlp::accuracy;
use wmed_cgp::app::{gaussian_filter, gaussian_filter_reference, psnr, Dataset, GrayImage, QuantMlp};
use wmed_cgp::cgp::{CgpParams, GateSet};
use wmed_cgp::generators::{gen_broken_array_multiplier, gen_exact_multiplier, gen_truncated_multiplier};
use wmed_cgp::metrics::{error_report, error_row_sums, wmed, Pmf};
use wmed_cgp::{decode, evolve, fitness, simulate_all, simulate_naive, EvoConfig, Genome, MultLut, Signedness};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n:>2}: {verdict}  {detail}");
    assert!(pass, "criterion {n} failed: {detail}");
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn random_lut(w: u32, s: Signedness, rng: &mut ChaCha8Rng) -> MultLut {
    let (lo, hi) = s.range(w);
    let fully_random = rng.gen_bool(0.5);
    let n = 1usize << (2 * w);
    let table: Vec<i64> = (0..n)
        .map(|_| {
            if fully_random {
                rng.gen_range(lo * hi.max(-lo)..=lo.abs().max(hi) * lo.abs().max(hi))
            } else if rng.gen_bool(0.25) {
                rng.gen_range(-40..=40)
            } else {
                0
            }
        })
        .collect();
    MultLut::from_fn(w, s, |i, j| {
        let k = (((i - lo) << w) + (j - lo)) as usize;
        if fully_random {
            table[k]
        } else {
            i * j + table[k]
        }
    })
    .unwrap()
}

fn random_pmf(w: u32, s: Signedness, rng: &mut ChaCha8Rng) -> Pmf {
    let mut counts: Vec<u64> = (0..1usize << w).map(|_| rng.gen_range(0..1000)).collect();
    counts[0] += 1;
    Pmf::from_histogram(&counts, s).unwrap()
}

/// Row sums and the weighted total by a plain double loop.
fn naive_wmed(lut: &MultLut, pmf: &Pmf) -> (Vec<u64>, f64) {
    let w = lut.width();
    let (lo, hi) = lut.signedness().range(w);
    let mut rows = Vec::new();
    let mut acc = 0.0;
    for i in lo..=hi {
        let mut row = 0u64;
        for j in lo..=hi {
            row += (i * j - lut.get(i, j)).unsigned_abs();
        }
        acc += pmf.prob(i) * row as f64;
        rows.push(row);
    }
    (rows, acc / (1u64 << (2 * w)) as f64)
}

fn lut_wmed(g: &Genome, pmf: &Pmf) -> f64 {
    wmed(&MultLut::from_genome(g, pmf.signedness()).unwrap(), pmf).unwrap()
}

/// Mean absolute error over all second operands for first operands in `xs`.
fn band_error(lut: &MultLut, xs: impl IntoIterator<Item = i64>) -> f64 {
    let (lo, hi) = lut.signedness().range(lut.width());
    let (mut sum, mut n) = (0u64, 0u64);
    for i in xs {
        for j in lo..=hi {
            sum += (i * j - lut.get(i, j)).unsigned_abs();
            n += 1;
        }
    }
    sum as f64 / n as f64
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && v[idx[end + 1]] == v[idx[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=end] {
            r[i] = avg;
        }
        k = end + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[test]
fn c01_wmed_matches_double_loop() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    let mut checked = 0;
    for w in [2, 3, 4] {
        for m in 0..100 {
            let s = if m % 2 == 0 { Signedness::Unsigned } else { Signedness::Signed };
            let lut = random_lut(w, s, &mut rng);
            let rows = error_row_sums(&lut);
            for _ in 0..10 {
                let pmf = random_pmf(w, s, &mut rng);
                let (naive_rows, naive) = naive_wmed(&lut, &pmf);
                if rows != naive_rows || wmed(&lut, &pmf).unwrap() != naive {
                    mismatches += 1;
                }
                checked += 1;
            }
        }
    }
    let t = start.elapsed();
    report(
        1,
        mismatches == 0 && t < Duration::from_secs(10),
        &format!("{checked} (multiplier, pmf) pairs, {mismatches} mismatches, {:.2}s (limit 10s)", secs(t)),
    );
}

#[test]
fn c02_simulator_matches_naive() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    let mut vectors = 0u64;
    for _ in 0..1000 {
        let n_i = rng.gen_range(1..=10);
        let p = CgpParams::new(n_i, rng.gen_range(1..=8), rng.gen_range(1..=4), rng.gen_range(1..=40), GateSet::standard())
            .unwrap();
        let net = decode(&Genome::random(Arc::new(p), &mut rng)).unwrap();
        let t = simulate_all(&net).unwrap();
        for k in 0..1usize << n_i {
            let bits: Vec<bool> = (0..n_i).map(|b| (k >> b) & 1 == 1).collect();
            let out = simulate_naive(&net, &bits).unwrap();
            if out.iter().enumerate().any(|(o, &v)| t.bit(o, k) != v) {
                bad += 1;
            }
            vectors += 1;
        }
    }
    let t = start.elapsed();
    report(
        2,
        bad == 0 && t < Duration::from_secs(60),
        &format!("1000 netlists, {vectors} vectors, {bad} disagreements, {:.2}s (limit 60s)", secs(t)),
    );
}

fn model_product(w: u32, i: i64, j: i64, keep: impl Fn(u32, u32) -> bool) -> i64 {
    let mut acc = 0;
    for a in 0..w {
        for b in 0..w {
            if keep(a, b) && (i >> a) & 1 == 1 && (j >> b) & 1 == 1 {
                acc += 1 << (a + b);
            }
        }
    }
    acc
}

fn count_mismatches(lut: &MultLut, model: impl Fn(i64, i64) -> i64) -> usize {
    let (lo, hi) = lut.signedness().range(lut.width());
    (lo..=hi).flat_map(|i| (lo..=hi).map(move |j| (i, j))).filter(|&(i, j)| lut.get(i, j) != model(i, j)).count()
}

#[test]
fn c03_generators_are_exact() {
    let _g = serial();
    let start = Instant::now();
    let (mut circuits, mut bad) = (0, 0);
    for w in 1..=8u32 {
        for s in [Signedness::Unsigned, Signedness::Signed] {
            let lut = MultLut::from_genome(&gen_exact_multiplier(w, s).unwrap(), s).unwrap();
            bad += count_mismatches(&lut, |i, j| i * j);
            circuits += 1;
        }
        let u = Signedness::Unsigned;
        for k in 0..2 * w {
            let lut = MultLut::from_genome(&gen_truncated_multiplier(w, k).unwrap(), u).unwrap();
            bad += count_mismatches(&lut, |i, j| model_product(w, i, j, |a, b| a + b >= k));
            circuits += 1;
        }
        for hbl in 0..=w {
            for vbl in 0..=w {
                let lut = MultLut::from_genome(&gen_broken_array_multiplier(w, hbl, vbl).unwrap(), u).unwrap();
                bad += count_mismatches(&lut, |i, j| model_product(w, i, j, |a, b| b >= hbl && a + b >= vbl));
                circuits += 1;
            }
        }
    }
    let t = start.elapsed();
    report(
        3,
        bad == 0 && t < Duration::from_secs(60),
        &format!("{circuits} circuits, {bad} wrong entries, {:.2}s (limit 60s)", secs(t)),
    );
}

#[test]
fn c04_evolution_feasibility_and_progress() {
    let _g = serial();
    let start = Instant::now();
    let seed = gen_exact_multiplier(4, Signedness::Unsigned).unwrap();
    let seed_area = decode(&seed).unwrap().area();
    let pmf = Pmf::uniform(4, Signedness::Unsigned).unwrap();
    let target = 0.01;
    let mut feasible = 0;
    let mut reduced = 0;
    let mut savings = Vec::new();
    for r in 0..10 {
        let mut cfg = EvoConfig::new(seed.clone(), pmf.clone(), target);
        cfg.lambda = 4;
        cfg.h = 5;
        cfg.iterations = 100_000;
        cfg.rng_seed = r;
        let (best, _) = evolve(&cfg).unwrap();
        feasible += (lut_wmed(&best, &pmf) <= target) as usize;
        let saving = 1.0 - decode(&best).unwrap().area() / seed_area;
        reduced += (saving >= 0.10) as usize;
        savings.push(format!("{:.1}%", saving * 100.0));
    }
    let t = start.elapsed();
    report(
        4,
        feasible == 10 && reduced >= 8 && t < Duration::from_secs(600),
        &format!(
            "{feasible}/10 feasible, {reduced}/10 with >=10% area saving (need 8) [{}], {:.1}s (limit 600s)",
            savings.join(" "),
            secs(t)
        ),
    );
}

#[test]
fn c05_fitness_boundary_is_inclusive() {
    let _g = serial();
    let mut ok = true;
    let mut cases = 0;
    for (w, ks) in [(4u32, 1..5u32), (8, 2..10)] {
        let pmf = Pmf::preset("d2", w, Signedness::Unsigned).unwrap();
        for k in ks {
            let g = gen_truncated_multiplier(w, k).unwrap();
            let e = lut_wmed(&g, &pmf);
            let area = decode(&g).unwrap().area();
            ok &= fitness(&g, &pmf, e).unwrap() == area;
            ok &= fitness(&g, &pmf, e.next_up()).unwrap() == area;
            ok &= fitness(&g, &pmf, e.next_down()).unwrap() == f64::INFINITY;
            cases += 3;
        }
    }
    report(5, ok, &format!("{cases} candidates at, just above and just below their own WMED"));
}

#[test]
fn c06_distribution_shapes_the_error() {
    let _g = serial();
    let start = Instant::now();
    let s = Signedness::Unsigned;
    let seed = gen_exact_multiplier(8, s).unwrap();
    let target = 0.05;
    let best_of = |pmf: &Pmf| {
        let mut best: Option<(f64, f64, Genome)> = None;
        for r in 0..10 {
            let mut cfg = EvoConfig::new(seed.clone(), pmf.clone(), target);
            cfg.iterations = 50_000;
            cfg.rng_seed = r;
            let (g, log) = evolve(&cfg).unwrap();
            let key = (decode(&g).unwrap().area(), log.last().wmed);
            if best.as_ref().is_none_or(|b| key < (b.0, b.1)) {
                best = Some((key.0, key.1, g));
            }
        }
        best.unwrap()
    };
    let d1 = Pmf::preset("d1", 8, s).unwrap();
    let d2 = Pmf::preset("d2", 8, s).unwrap();
    let (a1, e1, g1) = best_of(&d1);
    let (a2, e2, g2) = best_of(&d2);
    let l1 = MultLut::from_genome(&g1, s).unwrap();
    let l2 = MultLut::from_genome(&g2, s).unwrap();
    let centre = band_error(&l1, 112..=143);
    let edges = band_error(&l1, (0..=31).chain(224..=255));
    let low = band_error(&l2, 0..64);
    let high = band_error(&l2, 193..=255);
    // sanity: the heat map aggregation agrees with the direct band means
    let hm = error_report(&l1, &d1, true).unwrap().heatmap.unwrap();
    let agree = (hm.mean_over_columns(112..144) - centre).abs() < 1e-9;
    let t = start.elapsed();
    report(
        6,
        centre < edges && low < high && agree && e1 <= target && e2 <= target,
        &format!(
            "D1 best (area {a1:.1}, wmed {e1:.4}): centre {centre:.2} vs edges {edges:.2}; \
             D2 best (area {a2:.1}, wmed {e2:.4}): x<64 {low:.2} vs x>192 {high:.2}; {:.1}s",
            secs(t)
        ),
    );
}

#[test]
fn c07_uniform_wmed_is_mae_over_range() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for m in 0..100 {
        let w = 1 + m % 8;
        let s = if m % 3 == 0 { Signedness::Signed } else { Signedness::Unsigned };
        let lut = random_lut(w, s, &mut rng);
        let r = error_report(&lut, &Pmf::uniform(w, s).unwrap(), false).unwrap();
        worst = worst.max((r.wmed - r.mae / (1u64 << w) as f64).abs());
    }
    report(7, worst <= 1e-12, &format!("100 multipliers, max |wmed - mae/2^w| = {worst:e} (limit 1e-12)"));
}

fn fixtures() -> Vec<(GrayImage, GrayImage)> {
    let dir = data_dir().join("images");
    let mut clean: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with("_clean.pgm"))
        .collect();
    clean.sort();
    clean
        .iter()
        .map(|c| {
            let n = PathBuf::from(c.to_string_lossy().replace("_clean.pgm", "_noisy.pgm"));
            (GrayImage::read_pgm(c).unwrap(), GrayImage::read_pgm(n).unwrap())
        })
        .collect()
}

#[test]
fn c08_filter_quality_tracks_wmed() {
    let _g = serial();
    let start = Instant::now();
    let s = Signedness::Unsigned;
    let images = fixtures();
    let exact = MultLut::exact(8, s).unwrap();
    let references: Vec<GrayImage> = images.iter().map(|(_, n)| gaussian_filter_reference(n)).collect();
    let bit_exact = images
        .iter()
        .zip(&references)
        .all(|((c, n), r)| gaussian_filter(n, &exact).unwrap() == *r && gaussian_filter(c, &exact).unwrap() == gaussian_filter_reference(c));

    let pmf = Pmf::preset("d2", 8, s).unwrap();
    let seed = gen_exact_multiplier(8, s).unwrap();
    let targets = [0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2];
    let (mut errs, mut quality) = (Vec::new(), Vec::new());
    for &target in &targets {
        let mut cfg = EvoConfig::new(seed.clone(), pmf.clone(), target);
        cfg.iterations = 20_000;
        let (g, log) = evolve(&cfg).unwrap();
        let lut = MultLut::from_genome(&g, s).unwrap();
        let mean: f64 = images
            .iter()
            .zip(&references)
            .map(|((_, n), r)| psnr(r, &gaussian_filter(n, &lut).unwrap()).unwrap())
            .sum::<f64>()
            / images.len() as f64;
        errs.push(log.last().wmed);
        quality.push(mean);
    }
    let rho = spearman(&errs, &quality);
    let t = start.elapsed();
    let table: Vec<String> = errs.iter().zip(&quality).map(|(e, q)| format!("{:.4}:{q:.1}dB", e)).collect();
    report(
        8,
        bit_exact && targets.len() >= 6 && rho <= -0.7,
        &format!("exact bit-exact {bit_exact}; {} D2 multipliers [{}]; spearman {rho:.3} (limit -0.7); {:.1}s", targets.len(), table.join(" "), secs(t)),
    );
}

#[test]
fn c09_mlp_accuracy_tracks_wmed() {
    let _g = serial();
    let start = Instant::now();
    let s = Signedness::Signed;
    let model = QuantMlp::read(data_dir().join("mnist_mlp.qmlp")).unwrap();
    let data = Dataset::read(data_dir().join("mnist_test_images.idx"), data_dir().join("mnist_test_labels.idx")).unwrap();
    let exact = MultLut::exact(8, s).unwrap();
    let labels = model.classify_all(&data.images, &exact).unwrap();
    let bit_exact = data
        .images
        .iter()
        .zip(&labels)
        .all(|(img, &l)| {
            let r = model.infer_reference(img).unwrap();
            r.label == l && model.infer(img, &exact).unwrap().scores == r.scores
        });
    let base = accuracy(&labels, &data.labels);

    let pmf = Pmf::from_histogram(&model.weights_histogram(), s).unwrap();
    let seed = gen_exact_multiplier(8, s).unwrap();
    let drop_at = |target: f64| {
        let mut cfg = EvoConfig::new(seed.clone(), pmf.clone(), target);
        cfg.iterations = 200_000;
        let (g, log) = evolve(&cfg).unwrap();
        let lut = MultLut::from_genome(&g, s).unwrap();
        let acc = accuracy(&model.classify_all(&data.images, &lut).unwrap(), &data.labels);
        (log.last().wmed, (base - acc) * 100.0)
    };
    let (e_small, d_small) = drop_at(0.005);
    let (e_large, d_large) = drop_at(0.10);
    let t = start.elapsed();
    report(
        9,
        bit_exact
            && data.len() >= 2000
            && e_small <= 0.005
            && d_small <= 1.0
            && d_large >= 10.0
            && t < Duration::from_secs(300),
        &format!(
            "{} images, exact accuracy {:.2}% bit-exact {bit_exact}; wmed {e_small:.4} drop {d_small:.2}pp (limit 1.0); \
             wmed {e_large:.4} drop {d_large:.2}pp (need >= 10.0); {:.1}s (limit 300s)",
            data.len(),
            base * 100.0,
            secs(t)
        ),
    );
}

fn cli(dir: &Path, workers: &str, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_wmed-cgp"))
        .current_dir(dir)
        .arg("--workers")
        .arg(workers)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn c10_outputs_do_not_depend_on_workers() {
    let _g = serial();
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    cli(d, "1", &["gen-seed", "--width", "4", "-o", "seed.cgp"]);
    for workers in ["1", "4"] {
        let dir = format!("w{workers}");
        cli(d, workers, &["evolve", "--seed", "seed.cgp", "--target", "1", "--iterations", "5000", "--rng", "42", "-o", &format!("{dir}/best.cgp"), "--log", &format!("{dir}/run.jsonl")]);
        cli(d, workers, &["pareto", "--seed", "seed.cgp", "--targets", "0.5,1,2,5", "--repeats", "3", "--iterations", "2000", "--rng", "42", "--out-dir", &format!("{dir}/front")]);
    }
    let mut compared = Vec::new();
    let mut same = true;
    let mut files = vec!["best.cgp".to_string(), "run.jsonl".to_string(), "front/pareto.csv".to_string()];
    let front = fs::read_to_string(d.join("w1/front/pareto.csv")).unwrap();
    files.extend(front.lines().skip(1).map(|l| format!("front/{}", l.rsplit(',').next().unwrap())));
    for f in &files {
        let a = fs::read(d.join("w1").join(f)).unwrap();
        let b = fs::read(d.join("w4").join(f)).unwrap();
        same &= a == b;
        compared.push(f.clone());
    }
    report(10, same, &format!("byte-identical for workers 1 and 4: {}", compared.join(", ")));
}

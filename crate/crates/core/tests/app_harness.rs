use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmed_cgp::app::mlp::{accuracy, argmax};
use wmed_cgp::app::{
    accumulator_bits, gaussian_filter, gaussian_filter_reference, mac_accumulate, psnr, Activation, Dataset,
    GrayImage, QuantLayer, QuantMlp,
};
use wmed_cgp::generators::gen_truncated_multiplier;
use wmed_cgp::{MultLut, Signedness};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn fixture_pairs() -> Vec<(GrayImage, GrayImage)> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(data_dir().join("images"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with("_clean.pgm"))
        .collect();
    names.sort();
    names
        .iter()
        .map(|clean| {
            let noisy = PathBuf::from(clean.to_string_lossy().replace("_clean.pgm", "_noisy.pgm"));
            (GrayImage::read_pgm(clean).unwrap(), GrayImage::read_pgm(noisy).unwrap())
        })
        .collect()
}

fn model() -> QuantMlp {
    QuantMlp::read(data_dir().join("mnist_mlp.qmlp")).unwrap()
}

fn test_set() -> Dataset {
    Dataset::read(data_dir().join("mnist_test_images.idx"), data_dir().join("mnist_test_labels.idx")).unwrap()
}

#[test]
fn psnr_reference_values() {
    let a = GrayImage::filled(16, 16, 100).unwrap();
    let b = GrayImage::filled(16, 16, 101).unwrap();
    assert_eq!(psnr(&a, &a).unwrap(), 99.0);
    assert!((psnr(&a, &b).unwrap() - 10.0 * 65025f64.log10()).abs() < 1e-9);
    assert!((psnr(&a, &b).unwrap() - 48.13).abs() < 0.01);
    let black = GrayImage::filled(4, 4, 0).unwrap();
    let white = GrayImage::filled(4, 4, 255).unwrap();
    assert_eq!(psnr(&black, &white).unwrap(), 0.0);
    assert!(psnr(&a, &black).is_err());
}

#[test]
fn exact_filter_matches_integer_convolution() {
    let exact = MultLut::exact(8, Signedness::Unsigned).unwrap();
    let fixtures = fixture_pairs();
    assert_eq!(fixtures.len(), 12);
    for (clean, noisy) in &fixtures {
        assert_eq!(gaussian_filter(noisy, &exact).unwrap(), gaussian_filter_reference(noisy));
        assert_eq!(gaussian_filter(clean, &exact).unwrap(), gaussian_filter_reference(clean));
    }
}

#[test]
fn filter_rejects_signed_or_narrow_multipliers() {
    let img = GrayImage::filled(3, 3, 9).unwrap();
    assert!(gaussian_filter(&img, &MultLut::exact(8, Signedness::Signed).unwrap()).is_err());
    assert!(gaussian_filter(&img, &MultLut::exact(4, Signedness::Unsigned).unwrap()).is_err());
}

/// Mean PSNR against the clean originals rises after exact filtering.
#[test]
fn filter_denoises_the_fixture_set() {
    let exact = MultLut::exact(8, Signedness::Unsigned).unwrap();
    let pairs = fixture_pairs();
    let (mut before, mut after) = (0.0, 0.0);
    for (clean, noisy) in &pairs {
        before += psnr(clean, noisy).unwrap();
        after += psnr(clean, &gaussian_filter(noisy, &exact).unwrap()).unwrap();
    }
    let n = pairs.len() as f64;
    assert!(after / n > before / n, "{} -> {}", before / n, after / n);
}

#[test]
fn filter_is_partition_independent() {
    let lut = MultLut::from_genome(&gen_truncated_multiplier(8, 6).unwrap(), Signedness::Unsigned).unwrap();
    let (_, noisy) = &fixture_pairs()[0];
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| gaussian_filter(noisy, &lut).unwrap());
    let b = four.install(|| gaussian_filter(noisy, &lut).unwrap());
    assert_eq!(a, b);
}

#[test]
fn accumulator_sizing() {
    assert_eq!(accumulator_bits(784), 18);
    assert_eq!(accumulator_bits(300), 17);
    assert_eq!(accumulator_bits(256), 16);
    assert_eq!(accumulator_bits(1), 8);
}

#[test]
fn mac_matches_wide_dot_product() {
    let exact = MultLut::exact(8, Signedness::Signed).unwrap();
    assert_eq!(mac_accumulate(&exact, &[], &[], 784).unwrap(), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let w: Vec<i8> = (0..784).map(|_| rng.gen()).collect();
        let a: Vec<i8> = (0..784).map(|_| rng.gen()).collect();
        let dot: i64 = w.iter().zip(&a).map(|(&x, &y)| x as i64 * y as i64).sum();
        assert_eq!(mac_accumulate(&exact, &w, &a, 784).unwrap(), dot);
    }
    let extreme = vec![-128i8; 784];
    assert_eq!(mac_accumulate(&exact, &extreme, &extreme, 784).unwrap(), 784 * 16384);
    assert!(mac_accumulate(&exact, &[1, 2], &[1], 784).is_err());
}

#[test]
fn zero_model_picks_class_zero() {
    let layer = |inputs, outputs, activation| QuantLayer {
        inputs,
        outputs,
        weights: vec![0; inputs * outputs],
        bias: vec![0; outputs],
        weight_shift: 7,
        bias_shift: 7,
        output_shift: 4,
        activation,
    };
    let m = QuantMlp::new(7, vec![layer(784, 300, Activation::Relu), layer(300, 10, Activation::Identity)]).unwrap();
    let r = m.infer_reference(&GrayImage::filled(28, 28, 0).unwrap()).unwrap();
    assert_eq!(r.scores, vec![0; 10]);
    assert_eq!(r.label, 0);
    let hist = m.weights_histogram();
    assert_eq!(hist[128], 784 * 300 + 3000);
    assert_eq!(hist.iter().sum::<u64>(), hist[128]);
    assert_eq!(argmax(&[3, 7, 7, 1]), 1);
}

#[test]
fn shipped_model_round_trips() {
    let m = model();
    assert_eq!((m.inputs(), m.classes()), (784, 10));
    let back = QuantMlp::from_bytes(&m.to_bytes().unwrap()).unwrap();
    assert_eq!(back, m);
    let hist = m.weights_histogram();
    let total: usize = m.layers.iter().map(|l| l.weights.len()).sum();
    assert_eq!(hist.iter().sum::<u64>(), total as u64);
    assert!(m.weight_fraction_within(0.08) >= 0.85);
}

#[test]
fn exact_lut_reproduces_the_integer_reference() {
    let m = model();
    let data = test_set();
    assert!(data.len() >= 2000);
    let exact = MultLut::exact(8, Signedness::Signed).unwrap();
    let labels = m.classify_all(&data.images, &exact).unwrap();
    for (img, &label) in data.images.iter().zip(&labels) {
        let r = m.infer_reference(img).unwrap();
        assert_eq!(r.label, label);
        assert_eq!(m.infer(img, &exact).unwrap().scores, r.scores);
        assert_eq!(m.infer_widened(img, &exact, 8).unwrap().label, label);
    }
    assert!(accuracy(&labels, &data.labels) > 0.9);
}

#[test]
fn model_rejects_wrong_inputs() {
    let m = model();
    let exact = MultLut::exact(8, Signedness::Signed).unwrap();
    assert!(m.infer(&GrayImage::filled(27, 28, 0).unwrap(), &exact).is_err());
    assert!(m.infer(&GrayImage::filled(28, 28, 0).unwrap(), &MultLut::exact(8, Signedness::Unsigned).unwrap()).is_err());
}

//! Python module `wmed_cgp`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use wmed_core::app::{self, Dataset, GrayImage, QuantMlp};
use wmed_core::evolve::pareto_sweep;
use wmed_core::metrics::Pmf as CorePmf;
use wmed_core::{decode, generators, EvoConfig, GateSet, Genome as CoreGenome, MultLut, Signedness};

fn py_err(e: wmed_core::Error) -> PyErr {
    match e {
        wmed_core::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn sign(signed: bool) -> Signedness {
    if signed {
        Signedness::Signed
    } else {
        Signedness::Unsigned
    }
}

#[pyclass(frozen, skip_from_py_object, name = "Genome", module = "wmed_cgp")]
#[derive(Clone)]
struct Genome(CoreGenome);

#[pymethods]
impl Genome {
    /// Parses the text format using the standard gate set.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        CoreGenome::from_text(text, GateSet::standard()).map(Genome).map_err(py_err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| py_err(e.into()))?;
        Self::from_text(&text)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    fn write(&self, path: &str) -> PyResult<()> {
        std::fs::write(path, self.0.to_text()).map_err(|e| py_err(e.into()))
    }

    #[getter]
    fn genes(&self) -> Vec<u32> {
        self.0.genes().to_vec()
    }

    #[getter]
    fn inputs(&self) -> usize {
        self.0.params().inputs
    }

    #[getter]
    fn outputs(&self) -> usize {
        self.0.params().outputs
    }

    /// Indices of genes that break the encoding rules.
    fn validate(&self) -> PyResult<Vec<usize>> {
        self.0.validate().map_err(py_err)
    }

    fn area(&self) -> PyResult<f64> {
        decode(&self.0).map(|n| n.area()).map_err(py_err)
    }

    fn active_gates(&self) -> PyResult<usize> {
        decode(&self.0).map(|n| n.active_count()).map_err(py_err)
    }

    #[pyo3(signature = (signed = false))]
    fn to_lut(&self, signed: bool) -> PyResult<Lut> {
        MultLut::from_genome(&self.0, sign(signed)).map(Lut).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        let p = self.0.params();
        format!("Genome(inputs={}, outputs={}, nodes={})", p.inputs, p.outputs, p.nodes())
    }
}

#[pyclass(frozen, skip_from_py_object, name = "Lut", module = "wmed_cgp")]
#[derive(Clone)]
struct Lut(MultLut);

#[pymethods]
impl Lut {
    #[staticmethod]
    #[pyo3(signature = (width, signed = false))]
    fn exact(width: u32, signed: bool) -> PyResult<Self> {
        MultLut::exact(width, sign(signed)).map(Lut).map_err(py_err)
    }

    /// Table of products, row-major over the first operand in ascending order.
    #[staticmethod]
    #[pyo3(signature = (width, values, signed = false))]
    fn from_values(width: u32, values: Vec<i64>, signed: bool) -> PyResult<Self> {
        MultLut::new(width, sign(signed), values).map(Lut).map_err(py_err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn signed(&self) -> bool {
        self.0.signedness() == Signedness::Signed
    }

    fn values(&self) -> Vec<i64> {
        self.0.values().to_vec()
    }

    fn __call__(&self, i: i64, j: i64) -> PyResult<i64> {
        let (lo, hi) = self.0.signedness().range(self.0.width());
        if !(lo..=hi).contains(&i) || !(lo..=hi).contains(&j) {
            return Err(PyValueError::new_err(format!("operands must lie in {lo}..={hi}")));
        }
        Ok(self.0.get(i, j))
    }
}

#[pyclass(frozen, skip_from_py_object, name = "Pmf", module = "wmed_cgp")]
#[derive(Clone)]
struct Pmf(CorePmf);

#[pymethods]
impl Pmf {
    #[new]
    #[pyo3(signature = (width, probabilities, signed = false))]
    fn new(width: u32, probabilities: Vec<f64>, signed: bool) -> PyResult<Self> {
        CorePmf::new(width, sign(signed), probabilities).map(Pmf).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (width, signed = false))]
    fn uniform(width: u32, signed: bool) -> PyResult<Self> {
        CorePmf::uniform(width, sign(signed)).map(Pmf).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (width, mean, sigma, half = false, signed = false))]
    fn gaussian(width: u32, mean: f64, sigma: f64, half: bool, signed: bool) -> PyResult<Self> {
        CorePmf::gaussian(width, mean, sigma, half, sign(signed)).map(Pmf).map_err(py_err)
    }

    /// `uniform`, `d1` or `d2`.
    #[staticmethod]
    #[pyo3(signature = (name, width, signed = false))]
    fn preset(name: &str, width: u32, signed: bool) -> PyResult<Self> {
        CorePmf::preset(name, width, sign(signed)).map(Pmf).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (counts, signed = false))]
    fn from_histogram(counts: Vec<u64>, signed: bool) -> PyResult<Self> {
        CorePmf::from_histogram(&counts, sign(signed)).map(Pmf).map_err(py_err)
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        CorePmf::from_csv(text.as_bytes()).map(Pmf).map_err(py_err)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    fn probabilities(&self) -> Vec<f64> {
        self.0.probabilities().to_vec()
    }

    fn prob(&self, value: i64) -> f64 {
        self.0.prob(value)
    }
}

#[pyclass(frozen, skip_from_py_object, name = "Image", module = "wmed_cgp")]
#[derive(Clone)]
struct Image(GrayImage);

#[pymethods]
impl Image {
    #[new]
    fn new(width: usize, height: usize, pixels: Vec<u8>) -> PyResult<Self> {
        GrayImage::new(width, height, pixels).map(Image).map_err(py_err)
    }

    #[staticmethod]
    fn read_pgm(path: &str) -> PyResult<Self> {
        GrayImage::read_pgm(path).map(Image).map_err(py_err)
    }

    fn write_pgm(&self, path: &str) -> PyResult<()> {
        self.0.write_pgm(path).map_err(py_err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    fn pixels<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.0.pixels())
    }
}

#[pyclass(frozen, name = "Mlp", module = "wmed_cgp")]
struct Mlp(QuantMlp);

#[pymethods]
impl Mlp {
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        QuantMlp::read(path).map(Mlp).map_err(py_err)
    }

    fn weights_histogram(&self) -> Vec<u64> {
        self.0.weights_histogram()
    }

    /// Pmf of the signed 8-bit weights.
    fn weights_pmf(&self) -> PyResult<Pmf> {
        CorePmf::from_histogram(&self.0.weights_histogram(), Signedness::Signed).map(Pmf).map_err(py_err)
    }

    fn classify(&self, image: &Image, lut: &Lut) -> PyResult<usize> {
        self.0.infer(&image.0, &lut.0).map(|r| r.label).map_err(py_err)
    }

    /// Accuracy on an IDX image/label pair, optionally limited to the first
    /// `limit` samples.
    #[pyo3(signature = (images, labels, lut, limit = None))]
    fn accuracy(&self, py: Python<'_>, images: &str, labels: &str, lut: &Lut, limit: Option<usize>) -> PyResult<f64> {
        let data = Dataset::read(images, labels).map_err(py_err)?;
        let n = limit.unwrap_or(data.len()).min(data.len());
        py.detach(|| {
            let predicted = self.0.classify_all(&data.images[..n], &lut.0)?;
            Ok(app::mlp::accuracy(&predicted, &data.labels[..n]))
        })
        .map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (width, signed = false))]
fn gen_exact_multiplier(width: u32, signed: bool) -> PyResult<Genome> {
    generators::gen_exact_multiplier(width, sign(signed)).map(Genome).map_err(py_err)
}

#[pyfunction]
fn gen_truncated_multiplier(width: u32, k: u32) -> PyResult<Genome> {
    generators::gen_truncated_multiplier(width, k).map(Genome).map_err(py_err)
}

#[pyfunction]
fn gen_broken_array_multiplier(width: u32, hbl: u32, vbl: u32) -> PyResult<Genome> {
    generators::gen_broken_array_multiplier(width, hbl, vbl).map(Genome).map_err(py_err)
}

#[pyfunction]
fn gen_adder(width: u32) -> PyResult<Genome> {
    generators::gen_adder(width).map(Genome).map_err(py_err)
}

#[pyfunction]
#[pyo3(name = "wmed")]
fn wmed_py(lut: &Lut, pmf: &Pmf) -> PyResult<f64> {
    wmed_core::wmed(&lut.0, &pmf.0).map_err(py_err)
}

/// Dict with `wmed`, `mae`, `wce` and `error_rate`.
#[pyfunction]
fn error_report(py: Python<'_>, lut: &Lut, pmf: &Pmf) -> PyResult<Py<PyAny>> {
    let r = wmed_core::error_report(&lut.0, &pmf.0, false).map_err(py_err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("wmed", r.wmed)?;
    d.set_item("mae", r.mae)?;
    d.set_item("wce", r.wce)?;
    d.set_item("error_rate", r.error_rate)?;
    Ok(d.into_any().unbind())
}

fn config(seed: &Genome, pmf: &Pmf, target: f64, iterations: u64, lambda: usize, h: usize, rng_seed: u64) -> EvoConfig {
    let mut cfg = EvoConfig::new(seed.0.clone(), pmf.0.clone(), target);
    cfg.iterations = iterations;
    cfg.lambda = lambda;
    cfg.h = h;
    cfg.rng_seed = rng_seed;
    cfg
}

/// Runs the (1+λ) search; `target` is a fraction. Returns the best genome and
/// the per-generation `(fitness, wmed)` history, with `None` fitness while
/// the parent is infeasible.
#[pyfunction]
#[pyo3(signature = (seed, pmf, target, iterations = 10_000, lam = 4, h = 5, rng_seed = 42))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn evolve(
    py: Python<'_>,
    seed: &Genome,
    pmf: &Pmf,
    target: f64,
    iterations: u64,
    lam: usize,
    h: usize,
    rng_seed: u64,
) -> PyResult<(Genome, Vec<(Option<f64>, f64)>)> {
    let cfg = config(seed, pmf, target, iterations, lam, h, rng_seed);
    let (best, log) = py.detach(|| wmed_core::evolve(&cfg)).map_err(py_err)?;
    let history = log.records.iter().map(|r| (r.fitness, r.wmed)).collect();
    Ok((Genome(best), history))
}

/// Non-dominated `(target, wmed, area, genome)` tuples over all targets.
#[pyfunction]
#[pyo3(signature = (seed, pmf, targets, repeats = 1, iterations = 10_000, lam = 4, h = 5, rng_seed = 42))]
#[allow(clippy::too_many_arguments)]
fn pareto(
    py: Python<'_>,
    seed: &Genome,
    pmf: &Pmf,
    targets: Vec<f64>,
    repeats: usize,
    iterations: u64,
    lam: usize,
    h: usize,
    rng_seed: u64,
) -> PyResult<Vec<(f64, f64, f64, Genome)>> {
    let cfg = config(seed, pmf, 0.0, iterations, lam, h, rng_seed);
    let set = py.detach(|| pareto_sweep(&targets, repeats, &cfg)).map_err(py_err)?;
    Ok(set.points.into_iter().map(|p| (p.target, p.wmed, p.area, Genome(p.genome))).collect())
}

#[pyfunction]
fn gaussian_filter(image: &Image, lut: &Lut) -> PyResult<Image> {
    app::gaussian_filter(&image.0, &lut.0).map(Image).map_err(py_err)
}

#[pyfunction]
fn psnr(reference: &Image, test: &Image) -> PyResult<f64> {
    app::psnr(&reference.0, &test.0).map_err(py_err)
}

#[pymodule]
pub fn wmed_cgp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", wmed_core::VERSION)?;
    m.add_class::<Genome>()?;
    m.add_class::<Lut>()?;
    m.add_class::<Pmf>()?;
    m.add_class::<Image>()?;
    m.add_class::<Mlp>()?;
    m.add_function(wrap_pyfunction!(gen_exact_multiplier, m)?)?;
    m.add_function(wrap_pyfunction!(gen_truncated_multiplier, m)?)?;
    m.add_function(wrap_pyfunction!(gen_broken_array_multiplier, m)?)?;
    m.add_function(wrap_pyfunction!(gen_adder, m)?)?;
    m.add_function(wrap_pyfunction!(wmed_py, m)?)?;
    m.add_function(wrap_pyfunction!(error_report, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(pareto, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_filter, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    Ok(())
}

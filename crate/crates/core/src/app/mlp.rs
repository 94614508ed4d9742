//! Fixed-point multilayer perceptron whose multiplications go through a
//! behavioral multiplier inside a MAC model.
//!
//! Quantization is symmetric and per tensor with power-of-two scales: a
//! stored integer `q` with shift `s` represents `q * 2^-s`. Input pixels are
//! mapped to `p >> 1` with shift 7. Hidden layers requantize by an arithmetic
//! right shift, apply ReLU and clamp to `0..=127`; the output layer returns
//! raw accumulator values as scores.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::app::GrayImage;
use crate::error::{Error, Result};
use crate::lut::{MultLut, Signedness};

const MAGIC: &[u8; 4] = b"QMLP";
pub const MODEL_VERSION: u32 = 1;

/// `n = 8 + ceil(log2 d)` bits for summing `d` products.
pub fn accumulator_bits(fan_in: usize) -> u32 {
    let d = fan_in.max(1);
    8 + (usize::BITS - (d - 1).leading_zeros()) * (d > 1) as u32
}

/// Wrapping two's-complement accumulator register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mac {
    bits: u32,
}

impl Mac {
    /// Register for fan-in `d`: `accumulator_bits(d)` plus 8 bits of product
    /// extension, wide enough that exact 8x8-bit products never wrap.
    pub fn for_fan_in(d: usize) -> Self {
        Mac {
            bits: accumulator_bits(d) + 8,
        }
    }

    pub fn with_bits(bits: u32) -> Self {
        assert!((2..=63).contains(&bits));
        Mac { bits }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn wrap(&self, v: i64) -> i64 {
        let shift = 64 - self.bits;
        (v << shift) >> shift
    }
}

/// Sum of `mult(weight_k, activation_k)` wrapped to the MAC register of fan-in `d`.
pub fn mac_accumulate(mult: &MultLut, weights: &[i8], activations: &[i8], d: usize) -> Result<i64> {
    if weights.len() != activations.len() {
        return Err(Error::WidthMismatch("weights and activations differ in length".into()));
    }
    if weights.len() > d {
        return Err(Error::param(format!("{} products exceed fan-in {d}", weights.len())));
    }
    let sum: i64 = weights
        .iter()
        .zip(activations)
        .map(|(&w, &a)| mult.get(w as i64, a as i64))
        .sum();
    Ok(Mac::for_fan_in(d).wrap(sum))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<i8>,
    pub bias: Vec<i8>,
    pub weight_shift: u32,
    pub bias_shift: u32,
    /// Scale of the requantized outputs of a ReLU layer; unused for identity.
    pub output_shift: u32,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantMlp {
    pub input_shift: u32,
    pub layers: Vec<QuantLayer>,
}

#[derive(Serialize, Deserialize)]
struct Span {
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct LayerHeader {
    inputs: usize,
    outputs: usize,
    weight_shift: u32,
    bias_shift: u32,
    output_shift: u32,
    activation: Activation,
    weights: Span,
    bias: Span,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    input_shift: u32,
    layers: Vec<LayerHeader>,
}

/// Result of one forward pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inference {
    pub label: usize,
    pub scores: Vec<i64>,
}

impl QuantMlp {
    pub fn new(input_shift: u32, layers: Vec<QuantLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::param("model has no layers"));
        }
        let mut act_shift = input_shift;
        for (k, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::param(format!("layer {k} tensor sizes do not match its shape")));
            }
            if k > 0 && layers[k - 1].outputs != l.inputs {
                return Err(Error::param(format!("layer {k} input size does not match layer {}", k - 1)));
            }
            let acc_shift = l.weight_shift + act_shift;
            if l.bias_shift > acc_shift {
                return Err(Error::param(format!("layer {k} bias is finer than its accumulator")));
            }
            let last = k + 1 == layers.len();
            match (l.activation, last) {
                (Activation::Identity, true) => {}
                (Activation::Relu, false) => {
                    if l.output_shift > acc_shift {
                        return Err(Error::param(format!("layer {k} output is finer than its accumulator")));
                    }
                }
                _ => {
                    return Err(Error::param(
                        "hidden layers must use relu and the output layer identity",
                    ))
                }
            }
            act_shift = l.output_shift;
        }
        Ok(QuantMlp { input_shift, layers })
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn classes(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    /// Counts of every int-8 weight value pooled over all layers, indexed by `value + 128`.
    pub fn weights_histogram(&self) -> Vec<u64> {
        let mut counts = vec![0u64; 256];
        for l in &self.layers {
            for &w in &l.weights {
                counts[(w as i16 + 128) as usize] += 1;
            }
        }
        counts
    }

    /// Fraction of weights whose represented value lies strictly inside `(-bound, bound)`.
    pub fn weight_fraction_within(&self, bound: f64) -> f64 {
        let mut inside = 0usize;
        let mut total = 0usize;
        for l in &self.layers {
            let scale = (-(l.weight_shift as f64)).exp2();
            inside += l.weights.iter().filter(|&&w| (w as f64 * scale).abs() < bound).count();
            total += l.weights.len();
        }
        inside as f64 / total as f64
    }

    fn forward(&self, image: &GrayImage, mul: impl Fn(i8, i8) -> i64, extra_bits: u32) -> Result<Inference> {
        if image.pixels().len() != self.inputs() {
            return Err(Error::WidthMismatch(format!(
                "image has {} pixels, model expects {}",
                image.pixels().len(),
                self.inputs()
            )));
        }
        let mut acts: Vec<i8> = image.pixels().iter().map(|&p| (p >> 1) as i8).collect();
        let mut act_shift = self.input_shift;
        for l in &self.layers {
            let mac = Mac::with_bits(Mac::for_fan_in(l.inputs).bits() + extra_bits);
            let acc_shift = l.weight_shift + act_shift;
            let mut next = Vec::with_capacity(l.outputs);
            for (row, &b) in l.weights.chunks_exact(l.inputs).zip(&l.bias) {
                let mut acc = (b as i64) << (acc_shift - l.bias_shift);
                for (&w, &a) in row.iter().zip(&acts) {
                    acc += mul(w, a);
                }
                next.push(mac.wrap(acc));
            }
            match l.activation {
                Activation::Identity => {
                    let label = argmax(&next);
                    return Ok(Inference { label, scores: next });
                }
                Activation::Relu => {
                    let shift = acc_shift - l.output_shift;
                    acts = next.iter().map(|&v| (v >> shift).clamp(0, 127) as i8).collect();
                    act_shift = l.output_shift;
                }
            }
        }
        unreachable!("validated model ends with an identity layer")
    }

    /// Forward pass with every product looked up in `mult` as `mult(weight, activation)`.
    pub fn infer(&self, image: &GrayImage, mult: &MultLut) -> Result<Inference> {
        self.infer_widened(image, mult, 0)
    }

    /// As [`QuantMlp::infer`] with `extra_bits` added to every accumulator register.
    pub fn infer_widened(&self, image: &GrayImage, mult: &MultLut, extra_bits: u32) -> Result<Inference> {
        check_lut(mult)?;
        let values = mult.values();
        self.forward(
            image,
            |w, a| values[(w as u8 as usize) | ((a as u8 as usize) << 8)],
            extra_bits,
        )
    }

    /// Forward pass with native integer products.
    pub fn infer_reference(&self, image: &GrayImage) -> Result<Inference> {
        self.forward(image, |w, a| w as i64 * a as i64, 0)
    }

    /// Labels for a batch, evaluated in parallel.
    pub fn classify_all(&self, images: &[GrayImage], mult: &MultLut) -> Result<Vec<usize>> {
        check_lut(mult)?;
        images.par_iter().map(|img| self.infer(img, mult).map(|r| r.label)).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut blob: Vec<u8> = Vec::new();
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let w = Span {
                offset: blob.len(),
                len: l.weights.len(),
            };
            blob.extend(l.weights.iter().map(|&v| v as u8));
            let b = Span {
                offset: blob.len(),
                len: l.bias.len(),
            };
            blob.extend(l.bias.iter().map(|&v| v as u8));
            layers.push(LayerHeader {
                inputs: l.inputs,
                outputs: l.outputs,
                weight_shift: l.weight_shift,
                bias_shift: l.bias_shift,
                output_shift: l.output_shift,
                activation: l.activation,
                weights: w,
                bias: b,
            });
        }
        let header = serde_json::to_vec(&ModelHeader {
            format: "qmlp".into(),
            version: MODEL_VERSION,
            input_shift: self.input_shift,
            layers,
        })?;
        let mut out = Vec::with_capacity(12 + header.len() + blob.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&blob);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::parse("not a QMLP model file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != MODEL_VERSION {
            return Err(Error::parse(format!("unsupported model version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let header_end = 12usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::parse("truncated model header"))?;
        let header: ModelHeader = serde_json::from_slice(&bytes[12..header_end])?;
        if header.version != version {
            return Err(Error::parse("header version disagrees with container"));
        }
        let blob = &bytes[header_end..];
        let tensor = |s: &Span| -> Result<Vec<i8>> {
            blob.get(s.offset..s.offset + s.len)
                .map(|b| b.iter().map(|&v| v as i8).collect())
                .ok_or_else(|| Error::parse("tensor extends past end of file"))
        };
        let layers = header
            .layers
            .iter()
            .map(|h| {
                Ok(QuantLayer {
                    inputs: h.inputs,
                    outputs: h.outputs,
                    weights: tensor(&h.weights)?,
                    bias: tensor(&h.bias)?,
                    weight_shift: h.weight_shift,
                    bias_shift: h.bias_shift,
                    output_shift: h.output_shift,
                    activation: h.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        QuantMlp::new(header.input_shift, layers)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        QuantMlp::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

fn check_lut(mult: &MultLut) -> Result<()> {
    if mult.width() != 8 || mult.signedness() != Signedness::Signed {
        return Err(Error::WidthMismatch(format!(
            "MAC needs an 8-bit signed multiplier, got {}-bit {}",
            mult.width(),
            mult.signedness()
        )));
    }
    Ok(())
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[i64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

/// Fraction of positions where `a` and `b` agree.
pub fn accuracy(predicted: &[usize], labels: &[u8]) -> f64 {
    let hits = predicted.iter().zip(labels).filter(|(&p, &l)| p == l as usize).count();
    hits as f64 / labels.len().max(1) as f64
}

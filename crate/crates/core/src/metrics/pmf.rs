//! Probability mass functions over the values of one operand.

use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lut::{check_width, Signedness};

const SUM_TOLERANCE: f64 = 1e-9;

/// Distribution over the `2^w` operand values, stored in ascending value order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    width: u32,
    signedness: Signedness,
    p: Vec<f64>,
}

impl Pmf {
    pub fn new(width: u32, signedness: Signedness, p: Vec<f64>) -> Result<Self> {
        check_width(width)?;
        if p.len() != 1usize << width {
            return Err(Error::WidthMismatch(format!(
                "pmf has {} entries, {width}-bit operand needs {}",
                p.len(),
                1usize << width
            )));
        }
        if let Some(bad) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::param(format!("pmf entry {bad} is not a non-negative number")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::param(format!("pmf sums to {sum}, expected 1")));
        }
        Ok(Pmf { width, signedness, p })
    }

    pub fn uniform(width: u32, signedness: Signedness) -> Result<Self> {
        check_width(width)?;
        let n = 1usize << width;
        Pmf::new(width, signedness, vec![1.0 / n as f64; n])
    }

    /// Samples a normal density at every operand value and renormalizes. With
    /// `half` set, values below `mean` get no mass (half-normal with its mode
    /// at `mean`).
    pub fn gaussian(width: u32, mean: f64, sigma: f64, half: bool, signedness: Signedness) -> Result<Self> {
        check_width(width)?;
        if !(sigma > 0.0 && sigma.is_finite()) || !mean.is_finite() {
            return Err(Error::param(format!("degenerate gaussian (mean {mean}, sigma {sigma})")));
        }
        let (lo, hi) = signedness.range(width);
        let raw: Vec<f64> = (lo..=hi)
            .map(|v| {
                let x = v as f64;
                if half && x < mean {
                    0.0
                } else {
                    let z = (x - mean) / sigma;
                    (-0.5 * z * z).exp()
                }
            })
            .collect();
        normalize(width, signedness, raw)
    }

    /// Named distributions scaled to the operand range:
    /// `uniform`, `d1` (normal centred on the range, sigma = range/8) and
    /// `d2` (half-normal from zero, sigma = range/4). At 8 unsigned bits
    /// these are mean 127.5 / sigma 32 and sigma 64.
    pub fn preset(name: &str, width: u32, signedness: Signedness) -> Result<Self> {
        let (lo, hi) = signedness.range(width);
        let span = (1u64 << width) as f64;
        match name {
            "uniform" => Pmf::uniform(width, signedness),
            "d1" => Pmf::gaussian(width, (lo + hi) as f64 / 2.0, span / 8.0, false, signedness),
            "d2" => Pmf::gaussian(width, 0.0, span / 4.0, true, signedness),
            _ => Err(Error::param(format!("unknown distribution {name:?}"))),
        }
    }

    /// Counts in ascending value order.
    pub fn from_histogram(counts: &[u64], signedness: Signedness) -> Result<Self> {
        let n = counts.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::WidthMismatch(format!("histogram has {n} bins, not 2^w")));
        }
        let width = n.trailing_zeros();
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::param("histogram is empty"));
        }
        normalize(width, signedness, counts.iter().map(|&c| c as f64).collect())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn signedness(&self) -> Signedness {
        self.signedness
    }

    /// Probabilities in ascending value order.
    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn prob(&self, value: i64) -> f64 {
        let (lo, hi) = self.signedness.range(self.width);
        if value < lo || value > hi {
            return 0.0;
        }
        self.p[(value - lo) as usize]
    }

    /// `a * self + (1 - a) * other`.
    pub fn mix(&self, other: &Pmf, a: f64) -> Result<Pmf> {
        if self.width != other.width || self.signedness != other.signedness {
            return Err(Error::WidthMismatch("cannot mix pmfs of different operand types".into()));
        }
        let p = self.p.iter().zip(&other.p).map(|(x, y)| a * x + (1.0 - a) * y).collect();
        Pmf::new(self.width, self.signedness, p)
    }

    /// CSV with header `value,probability` and `2^w` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("value,probability\n");
        let lo = self.signedness.range(self.width).0;
        for (k, p) in self.p.iter().enumerate() {
            let _ = writeln!(s, "{},{:e}", lo + k as i64, p);
        }
        s
    }

    /// Parses the CSV form. Width and signedness are inferred from the rows;
    /// any negative value marks the distribution as signed.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            value: i64,
            probability: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows: Vec<Row> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        rows.sort_by_key(|r| r.value);
        let n = rows.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::parse(format!("pmf file has {n} rows, not 2^w")));
        }
        let width = n.trailing_zeros();
        let signedness = if rows[0].value < 0 {
            Signedness::Signed
        } else {
            Signedness::Unsigned
        };
        let lo = signedness.range(width).0;
        for (k, r) in rows.iter().enumerate() {
            if r.value != lo + k as i64 {
                return Err(Error::parse(format!("pmf file is missing value {}", lo + k as i64)));
            }
        }
        Pmf::new(width, signedness, rows.into_iter().map(|r| r.probability).collect())
    }
}

fn normalize(width: u32, signedness: Signedness, raw: Vec<f64>) -> Result<Pmf> {
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::param("distribution has no mass inside the operand range"));
    }
    Pmf::new(width, signedness, raw.into_iter().map(|x| x / sum).collect())
}

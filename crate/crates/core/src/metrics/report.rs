use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::app::GrayImage;
use crate::error::{Error, Result};
use crate::lut::MultLut;
use crate::metrics::Pmf;

/// Absolute error of every pair, image-style: `data[j * n + i]` with both
/// operands as indices in ascending value order, so the first operand runs
/// along the horizontal axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Heatmap {
    side: usize,
    data: Vec<u64>,
}

impl Heatmap {
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn get(&self, i_index: usize, j_index: usize) -> u64 {
        self.data[j_index * self.side + i_index]
    }

    pub fn max(&self) -> u64 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Sum of the errors in the column of first-operand index `i_index`.
    pub fn column_sum(&self, i_index: usize) -> u64 {
        (0..self.side).map(|j| self.get(i_index, j)).sum()
    }

    /// Mean error over all pairs whose first operand index is in `columns`.
    pub fn mean_over_columns(&self, columns: impl IntoIterator<Item = usize>) -> f64 {
        let mut total = 0u64;
        let mut count = 0usize;
        for i in columns {
            total += self.column_sum(i);
            count += self.side;
        }
        if count == 0 {
            0.0
        } else {
            total as f64 / count as f64
        }
    }

    /// Plain CSV matrix: one line per second-operand value, one column per
    /// first-operand value, both ascending.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.data.len() * 4);
        for row in self.data.chunks(self.side) {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    /// 8-bit rendering scaled so the worst-case error maps to 255.
    pub fn to_image(&self) -> GrayImage {
        let wce = self.max();
        let pixels = self
            .data
            .iter()
            .map(|&e| if wce == 0 { 0 } else { ((e as u128 * 255 + wce as u128 / 2) / wce as u128) as u8 })
            .collect();
        GrayImage::new(self.side, self.side, pixels).expect("square heat map")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub wmed: f64,
    /// Mean absolute error over all pairs.
    pub mae: f64,
    /// Worst-case absolute error.
    pub wce: u64,
    pub error_rate: f64,
    #[serde(skip)]
    pub heatmap: Option<Heatmap>,
}

fn check_pmf(mult: &MultLut, pmf: &Pmf) -> Result<()> {
    if mult.width() != pmf.width() || mult.signedness() != pmf.signedness() {
        return Err(Error::WidthMismatch(format!(
            "multiplier is {}-bit {}, pmf is {}-bit {}",
            mult.width(),
            mult.signedness(),
            pmf.width(),
            pmf.signedness()
        )));
    }
    Ok(())
}

struct Row {
    sum: u64,
    max: u64,
    nonzero: u64,
    errors: Option<Vec<u64>>,
}

fn scan_row(mult: &MultLut, i_index: usize, keep: bool) -> Row {
    let w = mult.width();
    let s = mult.signedness();
    let n = 1usize << w;
    let i = s.value_at(i_index, w);
    let mut row = Row {
        sum: 0,
        max: 0,
        nonzero: 0,
        errors: keep.then(|| Vec::with_capacity(n)),
    };
    for j_index in 0..n {
        let j = s.value_at(j_index, w);
        let e = (i * j - mult.get(i, j)).unsigned_abs();
        row.sum += e;
        row.max = row.max.max(e);
        row.nonzero += (e != 0) as u64;
        if let Some(v) = row.errors.as_mut() {
            v.push(e);
        }
    }
    row
}

/// `sum_j |i*j - M(i,j)|` for every first operand, in ascending value order.
pub fn error_row_sums(mult: &MultLut) -> Vec<u64> {
    let n = 1usize << mult.width();
    (0..n).into_par_iter().map(|i| scan_row(mult, i, false).sum).collect()
}

/// `2^(-2w) * sum_i p_i * rows_i` with the sum taken in index order.
pub fn weighted_error(p: &[f64], row_sums: &[u64], width: u32) -> f64 {
    debug_assert_eq!(p.len(), row_sums.len());
    let mut acc = 0.0f64;
    for (&pi, &s) in p.iter().zip(row_sums) {
        acc += pi * s as f64;
    }
    acc / (1u64 << (2 * width)) as f64
}

/// Weighted mean error distance with weights `D(i)` on the first operand.
pub fn wmed(mult: &MultLut, pmf: &Pmf) -> Result<f64> {
    check_pmf(mult, pmf)?;
    Ok(weighted_error(pmf.probabilities(), &error_row_sums(mult), mult.width()))
}

/// Generalized form with an explicit weight per pair, `alpha[i * n + j]`
/// (indices in ascending value order), each weight in `[0, 1]`.
pub fn wmed_with_weights(mult: &MultLut, alpha: &[f64]) -> Result<f64> {
    let w = mult.width();
    let n = 1usize << w;
    if alpha.len() != n * n {
        return Err(Error::WidthMismatch(format!(
            "weight matrix has {} entries, expected {}",
            alpha.len(),
            n * n
        )));
    }
    if let Some(a) = alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::param(format!("weight {a} outside [0, 1]")));
    }
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let errs = scan_row(mult, i, true).errors.expect("kept");
            errs.iter().zip(&alpha[i * n..(i + 1) * n]).map(|(&e, &a)| a * e as f64).sum::<f64>()
        })
        .collect();
    Ok(rows.iter().sum::<f64>() / (n * n) as f64)
}

/// All metrics in one exhaustive pass.
pub fn error_report(mult: &MultLut, pmf: &Pmf, with_heatmap: bool) -> Result<ErrorReport> {
    check_pmf(mult, pmf)?;
    let w = mult.width();
    let n = 1usize << w;
    let rows: Vec<Row> = (0..n).into_par_iter().map(|i| scan_row(mult, i, with_heatmap)).collect();
    let sums: Vec<u64> = rows.iter().map(|r| r.sum).collect();
    let total: u64 = sums.iter().sum();
    let pairs = (n * n) as f64;
    let heatmap = with_heatmap.then(|| {
        let mut data = vec![0u64; n * n];
        for (i, r) in rows.iter().enumerate() {
            for (j, &e) in r.errors.as_ref().expect("kept").iter().enumerate() {
                data[j * n + i] = e;
            }
        }
        Heatmap { side: n, data }
    });
    Ok(ErrorReport {
        wmed: weighted_error(pmf.probabilities(), &sums, w),
        mae: total as f64 / pairs,
        wce: rows.iter().map(|r| r.max).max().unwrap_or(0),
        error_rate: rows.iter().map(|r| r.nonzero).sum::<u64>() as f64 / pairs,
        heatmap,
    })
}

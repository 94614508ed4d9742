//! Error metrics of approximate two-operand circuits.
//!
//! The weighted mean error distance of a `w`-bit multiplier under a
//! distribution `D` of the first operand is
//!
//! ```text
//! WMED_D = 2^(-2w) * sum_i sum_j D(i) * |i*j - M(i,j)|
//! ```
//!
//! over the signed or unsigned operand ranges. The absolute errors are summed
//! per first-operand value in 64-bit integers; the only floating point step
//! is the final dot product with `D`, taken in ascending value order.

mod pmf;
mod report;

pub use pmf::Pmf;
pub use report::{
    error_report, error_row_sums, weighted_error, wmed, wmed_with_weights, ErrorReport, Heatmap,
};

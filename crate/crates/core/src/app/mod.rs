//! Application harnesses that measure how multiplier errors show up in
//! image filtering and neural network classification.

pub mod filter;
pub mod idx;
pub mod image;
pub mod mlp;

pub use self::image::GrayImage;
pub use filter::{gaussian_filter, gaussian_filter_reference, psnr, KERNEL};
pub use idx::Dataset;
pub use mlp::{accumulator_bits, mac_accumulate, Activation, Inference, Mac, QuantLayer, QuantMlp};

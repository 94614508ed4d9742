//! Behavioral view of a two-operand arithmetic circuit as a lookup table.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cgp::{decode, Genome};
use crate::error::{Error, Result};
use crate::sim::simulate_all;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signedness {
    Signed,
    Unsigned,
}

impl Signedness {
    /// Inclusive value range of a `width`-bit operand.
    pub fn range(self, width: u32) -> (i64, i64) {
        match self {
            Signedness::Unsigned => (0, (1i64 << width) - 1),
            Signedness::Signed => (-(1i64 << (width - 1)), (1i64 << (width - 1)) - 1),
        }
    }

    /// Interprets the low `width` bits of `bits`.
    #[inline]
    pub fn decode(self, bits: u64, width: u32) -> i64 {
        let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
        let v = bits & mask;
        match self {
            Signedness::Unsigned => v as i64,
            Signedness::Signed => {
                let shift = 64 - width;
                ((v << shift) as i64) >> shift
            }
        }
    }

    /// Value -> index in ascending value order.
    #[inline]
    pub fn index_of(self, value: i64, width: u32) -> usize {
        (value - self.range(width).0) as usize
    }

    #[inline]
    pub fn value_at(self, index: usize, width: u32) -> i64 {
        self.range(width).0 + index as i64
    }
}

impl fmt::Display for Signedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signedness::Signed => "signed",
            Signedness::Unsigned => "unsigned",
        })
    }
}

impl FromStr for Signedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" => Ok(Signedness::Signed),
            "unsigned" => Ok(Signedness::Unsigned),
            other => Err(Error::parse(format!("expected signed or unsigned, got {other:?}"))),
        }
    }
}

/// Integer function over all pairs of `width`-bit operands.
///
/// Entry `k` holds the result for the input vector `k`, whose low `width`
/// bits encode the first operand and whose next `width` bits encode the
/// second one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultLut {
    width: u32,
    signedness: Signedness,
    values: Vec<i64>,
}

pub const MAX_OPERAND_WIDTH: u32 = 12;

impl MultLut {
    pub fn new(width: u32, signedness: Signedness, values: Vec<i64>) -> Result<Self> {
        check_width(width)?;
        if values.len() != 1usize << (2 * width) {
            return Err(Error::WidthMismatch(format!(
                "table has {} entries, {}-bit operands need {}",
                values.len(),
                width,
                1usize << (2 * width)
            )));
        }
        Ok(MultLut {
            width,
            signedness,
            values,
        })
    }

    pub fn from_fn(width: u32, signedness: Signedness, f: impl Fn(i64, i64) -> i64) -> Result<Self> {
        check_width(width)?;
        let n = 1usize << width;
        let mut values = Vec::with_capacity(n * n);
        for jb in 0..n as u64 {
            let j = signedness.decode(jb, width);
            for ib in 0..n as u64 {
                values.push(f(signedness.decode(ib, width), j));
            }
        }
        MultLut::new(width, signedness, values)
    }

    /// Table of exact products.
    pub fn exact(width: u32, signedness: Signedness) -> Result<Self> {
        MultLut::from_fn(width, signedness, |i, j| i * j)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn signedness(&self) -> Signedness {
        self.signedness
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    #[inline]
    pub fn key(&self, i: i64, j: i64) -> usize {
        let mask = (1u64 << self.width) - 1;
        ((i as u64 & mask) | ((j as u64 & mask) << self.width)) as usize
    }

    /// Result for operand values `i` and `j`.
    #[inline]
    pub fn get(&self, i: i64, j: i64) -> i64 {
        self.values[self.key(i, j)]
    }

    /// Behavioral table of a genome whose inputs are two `w`-bit operands.
    /// Every output bit is used, two's complement for signed circuits.
    pub fn from_genome(genome: &Genome, signedness: Signedness) -> Result<Self> {
        let net = decode(genome)?;
        simulate_all(&net)?.as_function(signedness, genome.params().outputs)
    }

    /// Raw table: little-endian `i32` entries in input-vector order.
    pub fn to_raw(&self) -> Vec<u8> {
        self.values.iter().flat_map(|&v| (v as i32).to_le_bytes()).collect()
    }

    pub fn from_raw(bytes: &[u8], signedness: Signedness) -> Result<Self> {
        if !bytes.len().is_multiple_of(4) {
            return Err(Error::parse("raw table length is not a multiple of 4"));
        }
        let n = bytes.len() / 4;
        if n == 0 || !n.is_power_of_two() || !n.trailing_zeros().is_multiple_of(2) {
            return Err(Error::parse(format!("raw table has {n} entries, not 2^(2w)")));
        }
        let width = n.trailing_zeros() / 2;
        let values = bytes
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as i64)
            .collect();
        MultLut::new(width, signedness, values)
    }
}

pub(crate) fn check_width(width: u32) -> Result<()> {
    if width == 0 || width > MAX_OPERAND_WIDTH {
        return Err(Error::param(format!(
            "operand width {width} outside 1..={MAX_OPERAND_WIDTH}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_decode_and_range() {
        assert_eq!(Signedness::Signed.decode(0x80, 8), -128);
        assert_eq!(Signedness::Signed.decode(0x7f, 8), 127);
        assert_eq!(Signedness::Unsigned.decode(0x1ff, 8), 255);
        assert_eq!(Signedness::Signed.range(8), (-128, 127));
        assert_eq!(Signedness::Signed.index_of(-128, 8), 0);
        assert_eq!(Signedness::Signed.value_at(255, 8), 127);
    }

    #[test]
    fn exact_table_corners() {
        let lut = MultLut::exact(8, Signedness::Signed).unwrap();
        assert_eq!(lut.get(-128, -128), 16384);
        assert_eq!(lut.get(-128, 127), -16256);
        assert!((-128..128).all(|j| lut.get(0, j) == 0));
    }

    #[test]
    fn raw_round_trip() {
        let lut = MultLut::exact(3, Signedness::Signed).unwrap();
        let back = MultLut::from_raw(&lut.to_raw(), Signedness::Signed).unwrap();
        assert_eq!(back, lut);
        assert!(MultLut::from_raw(&[0u8; 12], Signedness::Signed).is_err());
    }
}

//! Base-`w` packing of per-block quantizer digits into single lattice
//! integers, and the inverse successive-cancellation digit extraction.
//!
//! A block of `p` digits `q_1..q_p` packs to `sum_i q_i * w^(i-1)`. When `w`
//! exceeds the largest possible digit-wise *sum* across clients, the packed
//! integers add over the channel without carries, so base-`w` extraction of
//! the summed integer recovers the digit sums.

use crate::channel::EXACT_INT_GUARD;
use crate::error::{Error, Result};

/// Block partition of `dim` coordinates with base-`w` packing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeLayout {
    /// Number of coordinates carried per round.
    pub dim: usize,
    /// Digits packed per lattice integer.
    pub block_size: usize,
    /// Packing base; must exceed the maximum digit sum.
    pub base: u64,
}

impl LatticeLayout {
    pub fn new(dim: usize, block_size: usize, base: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dim must be >= 1".into()));
        }
        if block_size == 0 || block_size > dim {
            return Err(Error::InvalidConfig(format!(
                "block_size must be in [1, {dim}], got {block_size}"
            )));
        }
        if base < 2 {
            return Err(Error::InvalidConfig(format!(
                "base must be >= 2, got {base}"
            )));
        }
        // w^p - 1 must stay exactly representable.
        let mut acc: u128 = 1;
        for _ in 0..block_size {
            acc = acc.checked_mul(base as u128).ok_or(Error::Overflow {
                what: "w^p - 1",
                value: u128::MAX,
            })?;
            if acc > EXACT_INT_GUARD as u128 {
                return Err(Error::Overflow {
                    what: "w^p - 1",
                    value: acc - 1,
                });
            }
        }
        Ok(Self {
            dim,
            block_size,
            base,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.dim.div_ceil(self.block_size)
    }

    /// Largest packable integer, `w^p - 1`.
    pub fn max_packed(&self) -> u64 {
        (self.base as u128).pow(self.block_size as u32) as u64 - 1
    }
}

/// Contiguous index blocks of size `p` covering `0..d`; the final block may be
/// short and is padded with zero digits at encode time.
pub fn partition_blocks(dim: usize, block_size: usize) -> Vec<std::ops::Range<usize>> {
    (0..dim.div_ceil(block_size))
        .map(|j| {
            let start = j * block_size;
            start..(start + block_size).min(dim)
        })
        .collect()
}

/// Packs `digits` (length <= block size, short blocks implicitly padded with
/// zeros) into a single lattice integer.
pub fn lattice_pack(digits: &[u64], layout: &LatticeLayout) -> Result<u64> {
    if digits.len() > layout.block_size {
        return Err(Error::DimensionMismatch {
            expected: layout.block_size,
            actual: digits.len(),
        });
    }
    let cap = layout.base - 1;
    let mut tau: u128 = 0;
    let mut weight: u128 = 1;
    for &digit in digits {
        if digit > cap {
            return Err(Error::DigitOutOfRange { digit, cap });
        }
        tau += digit as u128 * weight;
        weight *= layout.base as u128;
    }
    Ok(tau as u64)
}

/// Base-`w` digit extraction, the closed form of the successive-cancellation
/// recursion. Returns `block_size` digits, least significant first.
pub fn lattice_unpack(tau_hat: u64, layout: &LatticeLayout) -> Result<Vec<u64>> {
    let max = layout.max_packed();
    if tau_hat > max {
        return Err(Error::RangeViolation {
            value: tau_hat,
            max,
        });
    }
    let mut rest = tau_hat;
    let digits = (0..layout.block_size)
        .map(|_| {
            let d = rest % layout.base;
            rest /= layout.base;
            d
        })
        .collect();
    Ok(digits)
}

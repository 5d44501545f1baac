//! Row-major run-length codec for binary masks.
//!
//! Runs alternate between 0-pixels and 1-pixels and always start with a
//! 0-run, which is empty when the first pixel is set.

use crate::error::{Error, Result};

pub fn encode(bits: &[bool]) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u32;
    for &b in bits {
        if b != current {
            runs.push(count);
            current = b;
            count = 0;
        }
        count += 1;
    }
    runs.push(count);
    runs
}

pub fn decode(runs: &[u32], width: usize, height: usize) -> Result<Vec<bool>> {
    let expected = width * height;
    let actual: usize = runs.iter().map(|&r| r as usize).sum();
    if actual != expected {
        return Err(Error::RunSumMismatch { expected, actual });
    }
    let mut bits = Vec::with_capacity(expected);
    for (i, &r) in runs.iter().enumerate() {
        let value = i % 2 == 1;
        bits.extend(std::iter::repeat_n(value, r as usize));
    }
    Ok(bits)
}

/// Number of 1-pixels, i.e. the sum of the odd-indexed runs.
pub fn ones(runs: &[u32]) -> usize {
    runs.iter().skip(1).step_by(2).map(|&r| r as usize).sum()
}

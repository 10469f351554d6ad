//! Fixed-width bit vectors representing slices of spiking activations.
//!
//! Bit index 0 is the least-significant / first channel position, matching
//! the convention used by the sparse decoder and all printed index lists.

use std::fmt;

use crate::error::SimError;

const WORD_BITS: usize = 64;

/// A fixed-width bit vector. Width is in bits and must be positive.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpikeBitmap {
    width: usize,
    words: Vec<u64>,
}

impl SpikeBitmap {
    pub fn zeros(width: usize) -> Self {
        assert!(width > 0, "bitmap width must be positive");
        Self {
            width,
            words: vec![0; width.div_ceil(WORD_BITS)],
        }
    }

    pub fn ones(width: usize) -> Self {
        let mut b = Self::zeros(width);
        for w in b.words.iter_mut() {
            *w = u64::MAX;
        }
        b.mask_tail();
        b
    }

    /// Builds a bitmap from the low `width` bits of `value`.
    pub fn from_u64(width: usize, value: u64) -> Self {
        assert!(width <= WORD_BITS, "from_u64 supports widths up to 64");
        let mut b = Self::zeros(width);
        b.words[0] = value;
        b.mask_tail();
        b
    }

    pub fn from_indices(width: usize, indices: &[usize]) -> Self {
        let mut b = Self::zeros(width);
        for &i in indices {
            b.set(i, true);
        }
        b
    }

    /// Parses a hex literal such as `0x9042` into a bitmap of the given width.
    pub fn from_hex(width: usize, text: &str) -> Result<Self, SimError> {
        let digits = text
            .strip_prefix("0x")
            .or_else(|| text.strip_prefix("0X"))
            .unwrap_or(text);
        let mut b = Self::zeros(width);
        for (pos, ch) in digits.chars().rev().enumerate() {
            if ch == '_' {
                continue;
            }
            let nibble = ch.to_digit(16).ok_or_else(|| SimError::Parse {
                line: 1,
                column: digits.len() - pos,
                msg: format!("invalid hex digit `{ch}`"),
            })? as u64;
            for bit in 0..4 {
                let idx = pos * 4 + bit;
                if nibble >> bit & 1 == 1 {
                    if idx >= width {
                        return Err(SimError::WidthMismatch {
                            expected: width,
                            got: idx + 1,
                        });
                    }
                    b.set(idx, true);
                }
            }
        }
        Ok(b)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn get(&self, idx: usize) -> bool {
        assert!(idx < self.width, "bit index {idx} out of width {}", self.width);
        self.words[idx / WORD_BITS] >> (idx % WORD_BITS) & 1 == 1
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        assert!(idx < self.width, "bit index {idx} out of width {}", self.width);
        let mask = 1u64 << (idx % WORD_BITS);
        if value {
            self.words[idx / WORD_BITS] |= mask;
        } else {
            self.words[idx / WORD_BITS] &= !mask;
        }
    }

    pub fn and(&self, other: &Self) -> Result<Self, SimError> {
        if self.width != other.width {
            return Err(SimError::WidthMismatch {
                expected: self.width,
                got: other.width,
            });
        }
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w &= o;
        }
        Ok(out)
    }

    pub fn or(&self, other: &Self) -> Result<Self, SimError> {
        if self.width != other.width {
            return Err(SimError::WidthMismatch {
                expected: self.width,
                got: other.width,
            });
        }
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w |= o;
        }
        Ok(out)
    }

    /// Clears every bit of `self` that is set in `other`.
    pub fn and_not(&self, other: &Self) -> Result<Self, SimError> {
        if self.width != other.width {
            return Err(SimError::WidthMismatch {
                expected: self.width,
                got: other.width,
            });
        }
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w &= !o;
        }
        Ok(out)
    }

    /// Iterates set-bit positions in ascending order.
    pub fn set_bits(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let bit = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD_BITS + bit)
                }
            })
        })
    }

    /// Positions of the up-to-`m` lowest set bits, ascending.
    pub fn lowest_set_bits(&self, m: usize) -> Vec<usize> {
        self.set_bits().take(m).collect()
    }

    /// Concatenates `self` (low bits) with `other` (high bits).
    pub fn concat(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.width + other.width);
        for i in self.set_bits() {
            out.set(i, true);
        }
        for i in other.set_bits() {
            out.set(self.width + i, true);
        }
        out
    }

    /// Extracts bits `[start, start + len)` into a new bitmap of width `len`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        assert!(start + len <= self.width, "slice out of range");
        let mut out = Self::zeros(len);
        for i in 0..len {
            if self.get(start + i) {
                out.set(i, true);
            }
        }
        out
    }

    fn mask_tail(&mut self) {
        let rem = self.width % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for SpikeBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpikeBitmap({}b, 0x", self.width)?;
        for (i, w) in self.words.iter().enumerate().rev() {
            if i == self.words.len() - 1 {
                write!(f, "{:x}", w)?;
            } else {
                write!(f, "{:016x}", w)?;
            }
        }
        write!(f, ")")
    }
}

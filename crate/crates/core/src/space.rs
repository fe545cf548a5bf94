//! Grid state space `{1..N}^D` with token `N` reserved for the mask.
//!
//! Public coordinates are 1-based tokens. Flat indices are row-major with the
//! first coordinate most significant:
//! `index = sum_d (x_d - 1) * N^(D - 1 - d)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of states a dense vector may hold.
pub const MAX_STATES: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateSpace {
    dims: usize,
    alphabet: usize,
    total: usize,
}

impl StateSpace {
    pub fn new(dims: usize, alphabet: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidSpace("D must be at least 1".into()));
        }
        if alphabet < 2 {
            return Err(Error::InvalidSpace("N must be at least 2".into()));
        }
        let mut total: usize = 1;
        for _ in 0..dims {
            total = total
                .checked_mul(alphabet)
                .filter(|&t| t <= MAX_STATES)
                .ok_or_else(|| {
                    Error::InvalidSpace(format!(
                        "N^D = {alphabet}^{dims} exceeds the dense limit of {MAX_STATES} states"
                    ))
                })?;
        }
        Ok(Self {
            dims,
            alphabet,
            total,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn total_states(&self) -> usize {
        self.total
    }

    /// The mask token in public (1-based) coordinates.
    pub fn mask_token(&self) -> usize {
        self.alphabet
    }

    /// Number of fully unmasked states, `(N-1)^D`.
    pub fn unmasked_states(&self) -> usize {
        (self.alphabet - 1).pow(self.dims as u32)
    }

    /// Stride of coordinate `d` (0-based) in the flat layout.
    pub fn stride(&self, d: usize) -> usize {
        self.alphabet.pow((self.dims - 1 - d) as u32)
    }

    /// 0-based digit of coordinate `d` at flat index `idx`.
    #[inline]
    pub fn digit(&self, idx: usize, d: usize) -> usize {
        (idx / self.stride(d)) % self.alphabet
    }

    #[inline]
    pub fn is_masked_at(&self, idx: usize, d: usize) -> bool {
        self.digit(idx, d) == self.alphabet - 1
    }

    pub fn masked_count(&self, idx: usize) -> usize {
        (0..self.dims).filter(|&d| self.is_masked_at(idx, d)).count()
    }

    /// True when no coordinate holds the mask token.
    pub fn is_unmasked(&self, idx: usize) -> bool {
        self.masked_count(idx) == 0
    }

    /// Flat index of the all-mask state `[M] = (N, ..., N)`.
    pub fn all_mask_index(&self) -> usize {
        self.total - 1
    }

    /// Flat index of a 1-based coordinate tuple.
    pub fn index_of(&self, state: &[usize]) -> Result<usize> {
        if state.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                actual: state.len(),
            });
        }
        let mut idx = 0;
        for &tok in state {
            if tok == 0 || tok > self.alphabet {
                return Err(Error::InvalidArgument(format!(
                    "token {tok} outside 1..={}",
                    self.alphabet
                )));
            }
            idx = idx * self.alphabet + (tok - 1);
        }
        Ok(idx)
    }

    /// 1-based coordinate tuple of a flat index.
    pub fn state_of(&self, idx: usize) -> Vec<usize> {
        debug_assert!(idx < self.total);
        (0..self.dims).map(|d| self.digit(idx, d) + 1).collect()
    }

    /// Flat index of the fully unmasked state at position `k` of the
    /// row-major enumeration of `{1..N-1}^D`.
    pub fn unmasked_index(&self, k: usize) -> usize {
        let base = self.alphabet - 1;
        let mut rem = k;
        let mut idx = 0;
        for d in (0..self.dims).rev() {
            idx += (rem % base) * self.stride(d);
            rem /= base;
        }
        idx
    }

    /// Iterator over the flat indices of fully unmasked states in row-major
    /// order of their coordinates.
    pub fn unmasked_iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.unmasked_states()).map(move |k| self.unmasked_index(k))
    }

    /// Replace coordinate `d` of `idx` by the 0-based digit `digit`.
    #[inline]
    pub fn with_digit(&self, idx: usize, d: usize, digit: usize) -> usize {
        let s = self.stride(d);
        idx - self.digit(idx, d) * s + digit * s
    }
}

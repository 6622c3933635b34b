//! Integer frequency lattice underlying the Fourier mapping.
//!
//! The lattice enumerates the non-redundant half-plane of harmonic frequency
//! pairs up to a maximum frequency `f`: pairs `(u, v)` with `0 <= u <= f` and
//! `-f <= v <= f`, except that `u == 0` keeps only `v >= 0`. Dropping the
//! negative-`v` half of the `u == 0` column removes the conjugate duplicates,
//! so each retained pair carries one independent cosine and one independent
//! sine amplitude.

use serde::{Deserialize, Serialize};

/// Ordered set of integer frequency pairs up to a maximum frequency.
///
/// Entries are kept in a fixed canonical order: `u` ascending, and within one
/// `u` the `v` values ascending (`0..=f` for `u == 0`, `-f..=f` otherwise).
/// Coefficient vectors are serialized against this order, and band truncation
/// relies on it being identical across builds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyLattice {
    f: u32,
    entries: Vec<(i32, i32)>,
}

impl FrequencyLattice {
    /// Enumerate the lattice for maximum frequency `f` in canonical order.
    pub fn build(f: u32) -> Self {
        let fi = f as i32;
        let mut entries = Vec::with_capacity(coefficient_count(f));
        for v in 0..=fi {
            entries.push((0, v));
        }
        for u in 1..=fi {
            for v in -fi..=fi {
                entries.push((u, v));
            }
        }
        debug_assert_eq!(entries.len(), coefficient_count(f));
        FrequencyLattice { f, entries }
    }

    /// Maximum harmonic frequency this lattice was built for.
    pub fn max_frequency(&self) -> u32 {
        self.f
    }

    /// Number of frequency pairs, `(f + 1)(2f + 1) - f`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false // (0, 0) is always present
    }

    /// Frequency pairs in canonical order.
    pub fn entries(&self) -> &[(i32, i32)] {
        &self.entries
    }

    /// Frequency band of an entry: `max(|u|, |v|)`.
    ///
    /// Truncation to a smaller maximum frequency keeps exactly the entries
    /// whose band does not exceed it, mirroring how the lattice for `f`
    /// nests inside the lattice for `f + 1`.
    pub fn band(entry: (i32, i32)) -> u32 {
        entry.0.unsigned_abs().max(entry.1.unsigned_abs())
    }
}

/// Number of lattice entries for maximum frequency `f`: `(f + 1)(2f + 1) - f`.
pub fn coefficient_count(f: u32) -> usize {
    let f = f as usize;
    (f + 1) * (2 * f + 1) - f
}

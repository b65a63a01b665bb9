//! Spin configurations, the configuration-index bijection, and the monomial basis.
//!
//! Bit convention used everywhere in this crate: spin −1 ↔ bit 0, spin +1 ↔ bit 1,
//! site i is bit i (little-endian). Configurations are kept as small integer
//! vectors rather than packed bits; the sizes of interest (n ≤ 16) do not justify
//! packing.

use crate::error::{Error, Result};

/// A classical configuration of `n` spins, each exactly −1 or +1.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SpinConfiguration {
    spins: Vec<i8>,
}

impl SpinConfiguration {
    /// Validates that every entry is −1 or +1 and that the vector is non-empty.
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.is_empty() {
            return Err(Error::InvalidArgument(
                "spin configuration must have at least one site".into(),
            ));
        }
        if let Some(bad) = spins.iter().find(|s| **s != 1 && **s != -1) {
            return Err(Error::InvalidArgument(format!(
                "spin entries must be -1 or +1, got {bad}"
            )));
        }
        Ok(Self { spins })
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn spin(&self, site: usize) -> i8 {
        self.spins[site]
    }

    /// A copy with the spin at `site` reversed.
    pub fn flipped(&self, site: usize) -> Self {
        let mut spins = self.spins.clone();
        spins[site] = -spins[site];
        Self { spins }
    }

    pub fn index(&self) -> usize {
        config_to_index(self)
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        index_to_config(index, n)
    }

    /// Renders the configuration as a string of '+'/'-' characters, site 0 first.
    pub fn to_pm_string(&self) -> String {
        self.spins
            .iter()
            .map(|s| if *s > 0 { '+' } else { '-' })
            .collect()
    }

    /// Parses either a '+'/'-' string (ASCII '-' or U+2212 accepted) or a plain
    /// integer index. Indices require `n` to disambiguate the site count.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let t = text.trim();
        if t.chars().all(|c| c.is_ascii_digit()) && !t.is_empty() {
            let index: usize = t
                .parse()
                .map_err(|e| Error::Parse(format!("bad configuration index {t:?}: {e}")))?;
            if n == 0 || index >= (1usize << n) {
                return Err(Error::Parse(format!(
                    "configuration index {index} out of range for n = {n}"
                )));
            }
            return Ok(index_to_config(index, n));
        }
        let mut spins = Vec::with_capacity(t.chars().count());
        for c in t.chars() {
            match c {
                '+' => spins.push(1),
                '-' | '\u{2212}' => spins.push(-1),
                other => {
                    return Err(Error::Parse(format!(
                        "bad character {other:?} in spin string {t:?}"
                    )))
                }
            }
        }
        if spins.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: spins.len(),
            });
        }
        Self::new(spins)
    }
}

/// Maps a configuration to its index: bit i of the result is 1 iff spin i is +1.
pub fn config_to_index(v: &SpinConfiguration) -> usize {
    debug_assert!(v.len() <= usize::BITS as usize);
    let mut index = 0usize;
    for (i, s) in v.spins.iter().enumerate() {
        if *s > 0 {
            index |= 1 << i;
        }
    }
    index
}

/// Inverse of [`config_to_index`].
pub fn index_to_config(index: usize, n: usize) -> SpinConfiguration {
    assert!(n >= 1, "need at least one site");
    assert!(index < (1usize << n), "index {index} out of range for n = {n}");
    let spins = (0..n)
        .map(|i| if index >> i & 1 == 1 { 1 } else { -1 })
        .collect();
    SpinConfiguration { spins }
}

/// All 2ⁿ configurations in index order.
pub fn all_configurations(n: usize) -> impl Iterator<Item = SpinConfiguration> {
    assert!(n >= 1 && n <= 24, "enumeration limited to 1 ..= 24 sites");
    (0..1usize << n).map(move |idx| index_to_config(idx, n))
}

/// Number of strictly-upper-triangle site pairs, n(n−1)/2.
pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Flat row-major index of the pair (i, j) with i < j in the strictly upper
/// triangle. This layout is shared by surrogate couplings and circuit
/// parameters.
pub fn pair_index(i: usize, j: usize, n: usize) -> usize {
    assert!(i < j && j < n, "need i < j < n, got i={i}, j={j}, n={n}");
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// All pairs (i, j) with i < j in the flat layout order of [`pair_index`].
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// A multi-index a⃗ ∈ {0,1}ⁿ labelling the monomial F_a(v) = Πᵢ vᵢ^{aᵢ}.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Multidex {
    bits: Vec<u8>,
}

impl Multidex {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidArgument(
                "multi-index must have at least one site".into(),
            ));
        }
        if let Some(bad) = bits.iter().find(|b| **b > 1) {
            return Err(Error::InvalidArgument(format!(
                "multi-index entries must be 0 or 1, got {bad}"
            )));
        }
        Ok(Self { bits })
    }

    /// Builds the multi-index whose bit i equals bit i of `mask` (little-endian).
    pub fn from_mask(mask: usize, n: usize) -> Self {
        assert!(n >= 1 && mask < (1usize << n));
        Self {
            bits: (0..n).map(|i| (mask >> i & 1) as u8).collect(),
        }
    }

    pub fn mask(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, b)| acc | ((*b as usize) << i))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn hamming_weight(&self) -> usize {
        self.bits.iter().map(|b| *b as usize).sum()
    }
}

/// F_a(v) = Πᵢ vᵢ^{aᵢ}; the empty product is +1.
pub fn monomial(a: &Multidex, v: &SpinConfiguration) -> Result<f64> {
    if a.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: v.len(),
        });
    }
    let mut prod = 1i32;
    for (bit, spin) in a.bits.iter().zip(v.spins.iter()) {
        if *bit == 1 {
            prod *= *spin as i32;
        }
    }
    Ok(prod as f64)
}

/// 2^{−n} Σ_v F_a(v)·F_b(v), computed by exact integer enumeration.
///
/// Equals 1 when a = b and 0 otherwise (the monomials are orthonormal under the
/// uniform inner product); the enumeration keeps this exact rather than assumed.
pub fn monomial_inner_product(a: &Multidex, b: &Multidex, n: usize) -> Result<f64> {
    if a.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.len(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if n > 24 {
        return Err(Error::TooLarge {
            what: "monomial_inner_product enumeration",
            n,
            max: 24,
        });
    }
    // F_a(v)·F_b(v) = F_{a xor b}(v); sum its sign over all configurations.
    let c = a.mask() ^ b.mask();
    let mut sum = 0i64;
    for idx in 0..1usize << n {
        // Sites where c has a 1 and the spin is −1 (bit 0) contribute a −1 factor.
        let negatives = (c & !idx) & ((1usize << n) - 1);
        sum += if negatives.count_ones() % 2 == 0 { 1 } else { -1 };
    }
    Ok(sum as f64 / (1u64 << n) as f64)
}

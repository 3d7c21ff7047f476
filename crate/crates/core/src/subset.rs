//! Training-data subsets as fixed-width bitsets, plus the canonical
//! enumeration order used by every valuation loop.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of training points.
pub const MAX_POINTS: usize = 30;

/// A subset of `n` training points. Bit `i` set means point `i` is present.
///
/// Masks order by cardinality first, then lexicographically by their sorted
/// member indices, so `{2} < {0,3} < {0,4} < {1,2}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MaskRepr", into = "MaskRepr")]
pub struct SubsetMask {
    bits: u32,
    n: u8,
}

impl SubsetMask {
    pub fn empty(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Self { bits: 0, n: n as u8 })
    }

    pub fn full(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Self {
            bits: low_bits(n),
            n: n as u8,
        })
    }

    pub fn from_bits(n: usize, bits: u32) -> Result<Self> {
        check_n(n)?;
        if bits & !low_bits(n) != 0 {
            return Err(Error::domain(format!(
                "mask {bits:#x} has bits set beyond point {}",
                n - 1
            )));
        }
        Ok(Self { bits, n: n as u8 })
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut mask = Self::empty(n)?;
        for &i in indices {
            if i >= n {
                return Err(Error::domain(format!("point {i} out of range for n={n}")));
            }
            mask.bits |= 1 << i;
        }
        Ok(mask)
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn cardinality(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n() && self.bits & (1 << i) != 0
    }

    /// Returns a copy with point `i` added. Panics if `i >= n`.
    pub fn with(self, i: usize) -> Self {
        assert!(i < self.n(), "point {i} out of range for n={}", self.n);
        Self {
            bits: self.bits | (1 << i),
            ..self
        }
    }

    pub fn without(self, i: usize) -> Self {
        assert!(i < self.n(), "point {i} out of range for n={}", self.n);
        Self {
            bits: self.bits & !(1 << i),
            ..self
        }
    }

    /// Member indices in ascending order.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        let bits = self.bits;
        (0..self.n()).filter(move |&i| bits & (1 << i) != 0)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.members().collect()
    }

    /// Hex form of the bit pattern, e.g. `0x1f`.
    pub fn to_hex(&self) -> String {
        format!("{:#x}", self.bits)
    }

    pub fn from_hex(n: usize, s: &str) -> Result<Self> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        let bits = u32::from_str_radix(digits, 16)
            .map_err(|e| Error::Parse(format!("bad mask {s:?}: {e}")))?;
        Self::from_bits(n, bits)
    }
}

impl Ord for SubsetMask {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then(self.cardinality().cmp(&other.cardinality()))
            .then_with(|| self.members().cmp(other.members()))
    }
}

impl PartialOrd for SubsetMask {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (j, i) in self.members().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Serialize, Deserialize)]
struct MaskRepr {
    n: usize,
    mask: String,
}

impl TryFrom<MaskRepr> for SubsetMask {
    type Error = Error;

    fn try_from(r: MaskRepr) -> Result<Self> {
        SubsetMask::from_hex(r.n, &r.mask)
    }
}

impl From<SubsetMask> for MaskRepr {
    fn from(m: SubsetMask) -> Self {
        MaskRepr {
            n: m.n(),
            mask: m.to_hex(),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_POINTS {
        return Err(Error::domain(format!(
            "point count {n} outside 1..={MAX_POINTS}"
        )));
    }
    Ok(())
}

fn low_bits(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// Exact binomial coefficient. Returns 0 when `k > n`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc as u64
}

/// Lexicographic iterator over the `cardinality`-subsets of
/// `{0..n-1} \ {exclude}`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: u8,
    pool: Vec<u8>,
    idx: Vec<usize>,
    done: bool,
}

impl Iterator for Combinations {
    type Item = SubsetMask;

    fn next(&mut self) -> Option<SubsetMask> {
        if self.done {
            return None;
        }
        let bits = self
            .idx
            .iter()
            .fold(0u32, |acc, &j| acc | (1 << self.pool[j]));
        let out = SubsetMask { bits, n: self.n };

        // advance to the next index tuple
        let k = self.idx.len();
        let m = self.pool.len();
        let mut pos = k;
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            if self.idx[pos] < m - k + pos {
                self.idx[pos] += 1;
                for j in pos + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Subsets of `{0..n-1} \ {exclude}` with the given cardinality, in the
/// canonical order. Yields `C(n-1, cardinality)` masks.
pub fn enumerate_subsets(n: usize, cardinality: usize, exclude: usize) -> Result<Combinations> {
    check_n(n)?;
    if exclude >= n {
        return Err(Error::domain(format!(
            "excluded point {exclude} out of range for n={n}"
        )));
    }
    if cardinality > n - 1 {
        return Err(Error::domain(format!(
            "cardinality {cardinality} exceeds n-1={}",
            n - 1
        )));
    }
    let pool: Vec<u8> = (0..n).filter(|&i| i != exclude).map(|i| i as u8).collect();
    Ok(Combinations {
        n: n as u8,
        pool,
        idx: (0..cardinality).collect(),
        done: false,
    })
}

/// All `cardinality`-subsets of `{0..n-1}` in canonical order.
pub fn subsets_of_size(n: usize, cardinality: usize) -> Result<Combinations> {
    check_n(n)?;
    if cardinality > n {
        return Err(Error::domain(format!(
            "cardinality {cardinality} exceeds n={n}"
        )));
    }
    Ok(Combinations {
        n: n as u8,
        pool: (0..n as u8).collect(),
        idx: (0..cardinality).collect(),
        done: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sets(it: Combinations) -> Vec<Vec<usize>> {
        it.map(|m| m.to_vec()).collect()
    }

    fn factorial(n: u64) -> u128 {
        (1..=n as u128).product()
    }

    #[test]
    fn small_enumerations() {
        assert_eq!(sets(enumerate_subsets(3, 1, 0).unwrap()), vec![vec![1], vec![2]]);
        assert_eq!(
            sets(enumerate_subsets(4, 2, 1).unwrap()),
            vec![vec![0, 2], vec![0, 3], vec![2, 3]]
        );
        assert_eq!(sets(enumerate_subsets(4, 0, 2).unwrap()), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn count_matches_factorial_oracle() {
        let oracle = factorial(14) / (factorial(5) * factorial(9));
        assert_eq!(oracle, 2002);
        assert_eq!(enumerate_subsets(15, 5, 0).unwrap().count() as u128, oracle);
        assert_eq!(binomial(14, 5), 2002);
        for n in 0..=30u64 {
            for k in 0..=n {
                let o = factorial(n) / (factorial(k) * factorial(n - k));
                assert_eq!(binomial(n, k) as u128, o, "C({n},{k})");
            }
        }
    }

    #[test]
    fn cardinality_too_large_is_domain_error() {
        assert!(matches!(enumerate_subsets(4, 4, 0), Err(Error::Domain(_))));
        assert!(matches!(enumerate_subsets(4, 1, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn bits_beyond_n_rejected() {
        assert!(SubsetMask::from_bits(3, 0b1000).is_err());
        assert!(SubsetMask::from_bits(3, 0b111).is_ok());
        assert!(SubsetMask::empty(31).is_err());
    }

    #[test]
    fn hex_roundtrip_and_serde() {
        let m = SubsetMask::from_indices(15, &[0, 4, 14]).unwrap();
        assert_eq!(SubsetMask::from_hex(15, &m.to_hex()).unwrap(), m);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"n":15,"mask":"0x4011"}"#);
        assert_eq!(serde_json::from_str::<SubsetMask>(&json).unwrap(), m);
    }

    proptest! {
        #[test]
        fn enumeration_is_sorted_and_complete(n in 2usize..10, exclude in 0usize..10, card in 0usize..10) {
            prop_assume!(exclude < n && card <= n - 1);
            let masks: Vec<_> = enumerate_subsets(n, card, exclude).unwrap().collect();
            prop_assert_eq!(masks.len() as u64, binomial(n as u64 - 1, card as u64));
            for w in masks.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            for m in &masks {
                prop_assert_eq!(m.cardinality(), card);
                prop_assert!(!m.contains(exclude));
            }
        }

        #[test]
        fn cardinality_is_popcount(n in 1usize..=30, raw in any::<u32>()) {
            let bits = raw & low_bits(n);
            let m = SubsetMask::from_bits(n, bits).unwrap();
            prop_assert_eq!(m.cardinality(), bits.count_ones() as usize);
            prop_assert_eq!(m.members().count(), m.cardinality());
        }
    }
}

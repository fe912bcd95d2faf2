use std::sync::OnceLock;

use super::TrellisError;

const LTE_QPP_TABLE: &str = include_str!("../../assets/lte_qpp.txt");

/// A bijection on `0..size` with its inverse.
///
/// `interleave(x)[i] = x[map[i]]`, matching the encoder convention that the
/// second constituent encoder's `i`-th input is bit `map[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn from_map(map: Vec<usize>) -> Result<Self, TrellisError> {
        let size = map.len();
        if size < 2 {
            return Err(TrellisError::InterleaverTooSmall(size));
        }
        let mut inverse = vec![usize::MAX; size];
        for (i, &m) in map.iter().enumerate() {
            if m >= size {
                return Err(TrellisError::NotBijective {
                    size,
                    reason: format!("map[{i}] = {m} out of range"),
                });
            }
            if inverse[m] != usize::MAX {
                return Err(TrellisError::NotBijective {
                    size,
                    reason: format!("map[{}] = map[{i}] = {m}", inverse[m]),
                });
            }
            inverse[m] = i;
        }
        Ok(Self { map, inverse })
    }

    pub fn identity(size: usize) -> Result<Self, TrellisError> {
        Self::from_map((0..size).collect())
    }

    /// Parses one 0-based index per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, TrellisError> {
        let mut map = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let idx = line.parse::<usize>().map_err(|e| TrellisError::InterleaverParse {
                line: n + 1,
                reason: e.to_string(),
            })?;
            map.push(idx);
        }
        Self::from_map(map)
    }

    pub fn size(&self) -> usize {
        self.map.len()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn interleave<T: Copy>(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.size());
        self.map.iter().map(|&m| x[m]).collect()
    }

    pub fn deinterleave<T: Copy>(&self, y: &[T]) -> Vec<T> {
        debug_assert_eq!(y.len(), self.size());
        self.inverse.iter().map(|&i| y[i]).collect()
    }
}

/// Quadratic permutation polynomial interleaver `i -> (f1 i + f2 i^2) mod K`.
pub fn qpp_interleaver(k: usize, f1: u64, f2: u64) -> Result<Permutation, TrellisError> {
    if k < 2 {
        return Err(TrellisError::InterleaverTooSmall(k));
    }
    let kk = k as u128;
    let map = (0..kk)
        .map(|i| ((f1 as u128 * i + f2 as u128 * i * i) % kk) as usize)
        .collect();
    Permutation::from_map(map)
}

/// All `(K, f1, f2)` rows of the LTE interleaver parameter table.
pub fn lte_qpp_table() -> &'static [(usize, u64, u64)] {
    static TABLE: OnceLock<Vec<(usize, u64, u64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        LTE_QPP_TABLE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let v: Vec<u64> = l
                    .split_whitespace()
                    .map(|x| x.parse().expect("bundled QPP table is numeric"))
                    .collect();
                (v[0] as usize, v[1], v[2])
            })
            .collect()
    })
}

/// `(f1, f2)` for an LTE block size, if `k` is one.
pub fn lte_qpp_params(k: usize) -> Option<(u64, u64)> {
    lte_qpp_table()
        .iter()
        .find(|(kk, _, _)| *kk == k)
        .map(|&(_, f1, f2)| (f1, f2))
}

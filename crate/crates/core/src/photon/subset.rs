use std::fmt;

use crate::error::{Error, Result};

/// Largest photon number supported. The hierarchy holds `4^n` blocks.
pub const MAX_PHOTONS: usize = 10;

/// An ordered subset `r ⊆ {1..n}` naming which photons have been removed
/// from the wavepacket.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubsetIndex {
    n: u8,
    mask: u16,
}

impl SubsetIndex {
    /// Members are 1-based and must be strictly increasing.
    pub fn new(n: usize, members: &[usize]) -> Result<Self> {
        check_n(n)?;
        let mut mask = 0u16;
        let mut prev = 0;
        for &m in members {
            if m == 0 || m > n {
                return Err(Error::InvalidSubset(format!("member {m} outside 1..={n}")));
            }
            if m <= prev {
                return Err(Error::InvalidSubset(format!("members {members:?} not strictly increasing")));
            }
            prev = m;
            mask |= 1 << (m - 1);
        }
        Ok(Self { n: n as u8, mask })
    }

    pub fn empty(n: usize) -> Self {
        assert!(n <= MAX_PHOTONS);
        Self { n: n as u8, mask: 0 }
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_PHOTONS);
        Self { n: n as u8, mask: ((1u32 << n) - 1) as u16 }
    }

    pub(crate) fn from_mask(n: usize, mask: u16) -> Self {
        debug_assert!(n <= MAX_PHOTONS && (mask as u32) < (1u32 << n));
        Self { n: n as u8, mask }
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub(crate) fn mask(&self) -> u16 {
        self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.n()
    }

    pub fn contains(&self, mu: usize) -> bool {
        mu >= 1 && mu <= self.n() && self.mask & (1 << (mu - 1)) != 0
    }

    /// `R ∪ {μ}`
    pub fn with(&self, mu: usize) -> Self {
        assert!(mu >= 1 && mu <= self.n(), "photon index {mu} outside 1..={}", self.n);
        Self { n: self.n, mask: self.mask | (1 << (mu - 1)) }
    }

    pub fn members(&self) -> Vec<usize> {
        (1..=self.n()).filter(|&m| self.contains(m)).collect()
    }

    /// Photons still present, i.e. `{1..n} \ r`.
    pub fn complement(&self) -> Vec<usize> {
        (1..=self.n()).filter(|&m| !self.contains(m)).collect()
    }

    /// 1-based position in the size-then-lexicographic order of all `2^n`
    /// subsets; the empty set has rank 1 and the full set rank `2^n`.
    pub fn rank(&self) -> usize {
        let n = self.n();
        let k = self.len();
        let smaller: usize = (0..k).map(|i| binomial(n, i)).sum();
        // k-subsets lexicographically before this one
        let mut before = 0;
        let mut prev = 0;
        for (i, a) in self.members().into_iter().enumerate() {
            for x in prev + 1..a {
                before += binomial(n - x, k - i - 1);
            }
            prev = a;
        }
        smaller + before + 1
    }

    pub fn from_rank(n: usize, rank: usize) -> Result<Self> {
        check_n(n)?;
        let total = 1usize << n;
        if rank == 0 || rank > total {
            return Err(Error::InvalidSubset(format!("rank {rank} outside 1..={total}")));
        }
        let mut rem = rank - 1;
        let mut k = 0;
        while rem >= binomial(n, k) {
            rem -= binomial(n, k);
            k += 1;
        }
        // rem is the 0-based lexicographic position among k-subsets
        let mut members = Vec::with_capacity(k);
        let mut x = 1;
        while members.len() < k {
            let left = k - members.len() - 1;
            let block = binomial(n - x, left);
            if rem < block {
                members.push(x);
            } else {
                rem -= block;
            }
            x += 1;
        }
        Self::new(n, &members)
    }
}

impl fmt::Debug for SubsetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}/{}", self.n)
    }
}

impl fmt::Display for SubsetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, m) in self.members().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

fn check_n(n: usize) -> Result<()> {
    if n > MAX_PHOTONS {
        return Err(Error::InvalidSubset(format!("n = {n} exceeds the supported maximum {MAX_PHOTONS}")));
    }
    Ok(())
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// All subsets of `{1..n}` in rank order, with the inverse lookup.
#[derive(Clone, Debug)]
pub struct SubsetOrder {
    n: usize,
    by_rank: Vec<SubsetIndex>,
    index_of_mask: Vec<usize>,
}

impl SubsetOrder {
    pub fn new(n: usize) -> Self {
        assert!(n <= MAX_PHOTONS);
        let total = 1usize << n;
        let mut by_rank = vec![SubsetIndex::empty(n); total];
        let mut index_of_mask = vec![0; total];
        for mask in 0..total {
            let s = SubsetIndex::from_mask(n, mask as u16);
            let idx = s.rank() - 1;
            by_rank[idx] = s;
            index_of_mask[mask] = idx;
        }
        Self { n, by_rank, index_of_mask }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.by_rank.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Subset at 0-based position `idx` (rank `idx + 1`).
    pub fn subset(&self, idx: usize) -> SubsetIndex {
        self.by_rank[idx]
    }

    /// 0-based position of `s`.
    pub fn index(&self, s: &SubsetIndex) -> usize {
        self.index_of_mask[s.mask() as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = SubsetIndex> + '_ {
        self.by_rank.iter().copied()
    }
}

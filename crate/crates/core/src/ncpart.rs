//! Non-crossing set partitions of `{1, …, m}` and two-letter colorings.

use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NC_CAP: usize = 12;

/// A partition of `{1, …, m}` in canonical form: blocks sorted by their
/// minimum, points within a block ascending.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SetPartition {
    m: usize,
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    pub fn new(m: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidPartition("ground set must be nonempty".into()));
        }
        let mut seen = vec![false; m];
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            block.sort_unstable();
            for &p in block.iter() {
                if p == 0 || p > m {
                    return Err(Error::InvalidPartition(format!("point {p} outside 1..={m}")));
                }
                if std::mem::replace(&mut seen[p - 1], true) {
                    return Err(Error::InvalidPartition(format!("point {p} in two blocks")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!(
                "point {} not covered",
                missing + 1
            )));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { m, blocks })
    }

    pub fn ground_size(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().map(Vec::len)
    }

    pub fn is_noncrossing(&self) -> bool {
        is_noncrossing(self)
    }
}

/// Block-list notation, e.g. `{1,3}{2}{4}`.
impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for block in &self.blocks {
            f.write_str("{")?;
            for (i, p) in block.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{p}")?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    W,
    Y,
}

impl Letter {
    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'W' | 'w' | 'X' | 'x' => Ok(Letter::W),
            'Y' | 'y' => Ok(Letter::Y),
            other => Err(Error::Parse(format!(
                "unknown letter {other:?}, expected W or Y"
            ))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::W => 'W',
            Letter::Y => 'Y',
        }
    }
}

pub type Coloring = [Letter];

/// True iff no `a < b < c < d` has `a, c` in one block and `b, d` in another.
pub fn is_noncrossing(p: &SetPartition) -> bool {
    let mut owner = vec![0usize; p.m];
    for (i, block) in p.blocks.iter().enumerate() {
        for &x in block {
            owner[x - 1] = i;
        }
    }
    // Between two consecutive points of a block, every other block met must
    // lie entirely inside that gap.
    for (i, block) in p.blocks.iter().enumerate() {
        for pair in block.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            for x in lo + 1..hi {
                let j = owner[x - 1];
                if j == i {
                    continue;
                }
                let other = &p.blocks[j];
                if other[0] < lo || *other.last().expect("blocks are nonempty") > hi {
                    return false;
                }
            }
        }
    }
    true
}

pub fn enumerate_nc(m: usize) -> Result<Vec<SetPartition>> {
    enumerate_nc_with_cap(m, DEFAULT_NC_CAP)
}

/// Non-crossing partitions built from the block containing the first point:
/// that block cuts the rest into intervals that are partitioned independently.
pub fn enumerate_nc_with_cap(m: usize, cap: usize) -> Result<Vec<SetPartition>> {
    if m == 0 {
        return Err(Error::InvalidPartition("ground set must be nonempty".into()));
    }
    if m > cap {
        return Err(Error::CapExceeded {
            what: "non-crossing ground set size",
            value: m,
            cap,
        });
    }
    let points: Vec<usize> = (1..=m).collect();
    let mut out: Vec<SetPartition> = nc_blocks(&points)
        .into_iter()
        .map(|mut blocks| {
            blocks.sort_unstable_by_key(|b| b[0]);
            SetPartition { m, blocks }
        })
        .collect();
    out.sort_by(|a, b| a.blocks.cmp(&b.blocks));
    Ok(out)
}

fn nc_blocks(points: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let Some((&first, rest)) = points.split_first() else {
        return vec![Vec::new()];
    };
    let mut out = Vec::new();
    // Each subset of `rest` joins `first`'s block.
    for mask in 0u32..(1u32 << rest.len()) {
        let mut block = vec![first];
        let mut pieces: Vec<&[usize]> = Vec::new();
        let mut gap_start = 0;
        for (i, &p) in rest.iter().enumerate() {
            if mask & (1 << i) != 0 {
                block.push(p);
                pieces.push(&rest[gap_start..i]);
                gap_start = i + 1;
            }
        }
        pieces.push(&rest[gap_start..]);

        let mut partial: Vec<Vec<Vec<usize>>> = vec![vec![block]];
        for piece in pieces {
            if piece.is_empty() {
                continue;
            }
            let sub = nc_blocks(piece);
            let mut next = Vec::with_capacity(partial.len() * sub.len());
            for head in &partial {
                for tail in &sub {
                    let mut combined = head.clone();
                    combined.extend(tail.iter().cloned());
                    next.push(combined);
                }
            }
            partial = next;
        }
        out.extend(partial);
    }
    out
}

/// `C_k = binom(2k, k) / (k + 1)`.
pub fn catalan(k: u32) -> BigUint {
    let mut c = BigUint::one();
    // C_{j+1} = C_j · 2(2j + 1) / (j + 2), exact at every step.
    for j in 0..k {
        c = c * BigUint::from(2 * (2 * j + 1)) / BigUint::from(j + 2);
    }
    c
}

pub fn is_monochromatic(p: &SetPartition, colors: &Coloring) -> Result<bool> {
    if colors.len() != p.m {
        return Err(Error::LengthMismatch(p.m, colors.len()));
    }
    Ok(p.blocks.iter().all(|block| {
        let c = colors[block[0] - 1];
        block.iter().all(|&x| colors[x - 1] == c)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Letter::{W, Y};

    fn part(m: usize, blocks: &[&[usize]]) -> SetPartition {
        SetPartition::new(m, blocks.iter().map(|b| b.to_vec()).collect()).unwrap()
    }

    /// Every set partition of `{1..m}` via restricted growth strings.
    fn all_set_partitions(m: usize) -> Vec<SetPartition> {
        fn go(i: usize, m: usize, rgs: &mut Vec<usize>, out: &mut Vec<SetPartition>) {
            if i == m {
                let k = rgs.iter().max().unwrap() + 1;
                let mut blocks = vec![Vec::new(); k];
                for (p, &b) in rgs.iter().enumerate() {
                    blocks[b].push(p + 1);
                }
                out.push(SetPartition::new(m, blocks).unwrap());
                return;
            }
            let max = rgs.iter().max().map_or(0, |x| x + 1);
            for b in 0..=max {
                rgs.push(b);
                go(i + 1, m, rgs, out);
                rgs.pop();
            }
        }
        let mut out = Vec::new();
        go(0, m, &mut Vec::new(), &mut out);
        out
    }

    /// Crossing test straight from the definition.
    fn crosses_by_definition(p: &SetPartition) -> bool {
        let m = p.ground_size();
        let mut owner = vec![0; m + 1];
        for (i, b) in p.blocks().iter().enumerate() {
            for &x in b {
                owner[x] = i;
            }
        }
        for a in 1..=m {
            for b in a + 1..=m {
                for c in b + 1..=m {
                    for d in c + 1..=m {
                        if owner[a] == owner[c] && owner[b] == owner[d] && owner[a] != owner[b] {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    #[test]
    fn crossing_examples() {
        assert!(is_noncrossing(&part(3, &[&[1, 2, 3]])));
        assert!(!is_noncrossing(&part(4, &[&[1, 3], &[2, 4]])));
        assert!(is_noncrossing(&part(4, &[&[1, 4], &[2, 3]])));
    }

    #[test]
    fn enumeration_small_counts() {
        assert_eq!(enumerate_nc(1).unwrap().len(), 1);
        assert_eq!(enumerate_nc(3).unwrap().len(), 5);
        assert_eq!(enumerate_nc(4).unwrap().len(), 14);
        assert_eq!(all_set_partitions(3).len(), 5);
        assert_eq!(all_set_partitions(4).len(), 15);
        let crossing: Vec<_> = all_set_partitions(4)
            .into_iter()
            .filter(|p| !is_noncrossing(p))
            .collect();
        assert_eq!(crossing, vec![part(4, &[&[1, 3], &[2, 4]])]);
    }

    #[test]
    fn counts_are_catalan() {
        for m in 1..=10 {
            let count = enumerate_nc(m).unwrap().len();
            assert_eq!(BigUint::from(count), catalan(m as u32), "m = {m}");
        }
    }

    #[test]
    fn enumeration_matches_brute_force_filter() {
        for m in 1..=6 {
            let mut expected: Vec<SetPartition> = all_set_partitions(m)
                .into_iter()
                .filter(|p| !crosses_by_definition(p))
                .collect();
            expected.sort_by(|a, b| a.blocks().cmp(b.blocks()));
            let got = enumerate_nc(m).unwrap();
            assert_eq!(got, expected, "m = {m}");
            for p in all_set_partitions(m) {
                assert_eq!(is_noncrossing(&p), !crosses_by_definition(&p), "{p}");
            }
        }
    }

    #[test]
    fn enumeration_contains_extremes_and_is_deterministic() {
        let all = enumerate_nc(5).unwrap();
        assert!(all.contains(&part(5, &[&[1, 2, 3, 4, 5]])));
        assert!(all.contains(&part(5, &[&[1], &[2], &[3], &[4], &[5]])));
        assert_eq!(all, enumerate_nc(5).unwrap());
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(enumerate_nc(13), Err(Error::CapExceeded { .. })));
        assert!(enumerate_nc(0).is_err());
    }

    #[test]
    fn catalan_values() {
        let got: Vec<BigUint> = (0..8).map(catalan).collect();
        let expected: Vec<BigUint> = [1u32, 1, 2, 5, 14, 42, 132, 429]
            .into_iter()
            .map(BigUint::from)
            .collect();
        assert_eq!(got, expected);
        // recurrence C_{k+1} = Σ C_i C_{k-i}
        for k in 0..12u32 {
            let sum: BigUint = (0..=k).map(|i| catalan(i) * catalan(k - i)).sum();
            assert_eq!(catalan(k + 1), sum);
        }
    }

    #[test]
    fn monochromatic_blocks() {
        let singles = part(4, &[&[1], &[2], &[3], &[4]]);
        assert!(is_monochromatic(&singles, &[W, Y, Y, W]).unwrap());
        assert!(is_monochromatic(&part(4, &[&[1, 3], &[2], &[4]]), &[W, Y, W, Y]).unwrap());
        assert!(!is_monochromatic(&part(4, &[&[1, 2], &[3], &[4]]), &[W, Y, W, Y]).unwrap());
        assert!(matches!(
            is_monochromatic(&singles, &[W, Y]),
            Err(Error::LengthMismatch(4, 2))
        ));
    }

    #[test]
    fn display_and_validation() {
        assert_eq!(part(4, &[&[3, 1], &[2], &[4]]).to_string(), "{1,3}{2}{4}");
        assert!(SetPartition::new(3, vec![vec![1, 2]]).is_err());
        assert!(SetPartition::new(3, vec![vec![1, 2], vec![2, 3]]).is_err());
        assert!(SetPartition::new(2, vec![vec![1], vec![]]).is_err());
    }
}

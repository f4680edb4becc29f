//! Permutations of `{1, …, n}`.
//!
//! Points are 1-based everywhere in the public surface (constructors, cycle
//! lists, the `(1 2 4)(3)` notation); storage is 0-based.
//!
//! Composition is right-to-left: `compose(a, b)(i) = a(b(i))`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `n` for [`enumerate_sn`]; `6! = 720` elements.
pub const DEFAULT_SN_CAP: usize = 6;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPermutation("degree must be at least 1".into()));
        }
        Ok(Self {
            images: (0..n).collect(),
        })
    }

    /// Builds a permutation from 1-based images: `images[i - 1] = α(i)`.
    pub fn from_images(images: &[usize]) -> Result<Self> {
        let n = images.len();
        if n == 0 {
            return Err(Error::InvalidPermutation("degree must be at least 1".into()));
        }
        let mut seen = vec![false; n];
        let mut zero_based = Vec::with_capacity(n);
        for &img in images {
            if img == 0 || img > n {
                return Err(Error::InvalidPermutation(format!(
                    "image {img} outside 1..={n}"
                )));
            }
            if std::mem::replace(&mut seen[img - 1], true) {
                return Err(Error::InvalidPermutation(format!("image {img} repeated")));
            }
            zero_based.push(img - 1);
        }
        Ok(Self { images: zero_based })
    }

    /// Builds a permutation of degree `n` from 1-based cycles. Points not
    /// mentioned are fixed.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut images: Vec<usize> = (1..=n).collect();
        let mut seen = vec![false; n];
        for cycle in cycles {
            for (idx, &p) in cycle.iter().enumerate() {
                if p == 0 || p > n {
                    return Err(Error::InvalidPermutation(format!(
                        "point {p} outside 1..={n}"
                    )));
                }
                if std::mem::replace(&mut seen[p - 1], true) {
                    return Err(Error::InvalidPermutation(format!(
                        "point {p} appears in more than one cycle position"
                    )));
                }
                images[p - 1] = cycle[(idx + 1) % cycle.len()];
            }
        }
        Self::from_images(&images)
    }

    pub(crate) fn from_zero_based(images: Vec<usize>) -> Self {
        debug_assert!(is_bijection(&images));
        Self { images }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    /// `α(i)` for a 1-based point `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.images[i - 1] + 1
    }

    /// 1-based images.
    pub fn images(&self) -> Vec<usize> {
        self.images.iter().map(|&x| x + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// Cycles as 1-based point lists, each starting at its smallest point,
    /// ordered by that point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.degree();
        let mut visited = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut p = start;
            while !visited[p] {
                visited[p] = true;
                cycle.push(p + 1);
                p = self.images[p];
            }
            out.push(cycle);
        }
        out
    }

    /// Number of cycles, `#α`.
    pub fn cycle_count(&self) -> usize {
        let n = self.degree();
        let mut visited = vec![false; n];
        let mut count = 0;
        for start in 0..n {
            if visited[start] {
                continue;
            }
            count += 1;
            let mut p = start;
            while !visited[p] {
                visited[p] = true;
                p = self.images[p];
            }
        }
        count
    }

    pub fn cycle_type(&self) -> CycleType {
        CycleType::from_parts(self.cycles().iter().map(Vec::len).collect())
            .expect("cycle lengths of a permutation form a valid cycle type")
    }
}

fn is_bijection(images: &[usize]) -> bool {
    let mut seen = vec![false; images.len()];
    images
        .iter()
        .all(|&x| x < images.len() && !std::mem::replace(&mut seen[x], true))
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation({self})")
    }
}

/// Cycle notation including fixed points, e.g. `(1 2 4)(3)`.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for cycle in self.cycles() {
            f.write_str("(")?;
            for (i, p) in cycle.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{p}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Parses cycle notation. The degree is the largest point mentioned, so
/// trailing fixed points must be written out: `(1 2)(3)` lives in `S_3`.
impl FromStr for Permutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cycles = parse_cycles(s)?;
        let n = cycles.iter().flatten().copied().max().unwrap_or(0);
        Self::from_cycles(n, &cycles)
    }
}

pub fn parse_cycles(s: &str) -> Result<Vec<Vec<usize>>> {
    let mut cycles = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('(')
            .ok_or_else(|| Error::Parse(format!("expected '(' in {s:?}")))?;
        let close = body
            .find(')')
            .ok_or_else(|| Error::Parse(format!("unclosed cycle in {s:?}")))?;
        let cycle = body[..close]
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad point {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if cycle.is_empty() {
            return Err(Error::Parse(format!("empty cycle in {s:?}")));
        }
        cycles.push(cycle);
        rest = body[close + 1..].trim_start();
    }
    if cycles.is_empty() {
        return Err(Error::Parse("empty permutation".into()));
    }
    Ok(cycles)
}

/// Cycle lengths sorted descending.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct CycleType {
    parts: Vec<usize>,
}

impl CycleType {
    pub fn from_parts(mut parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() || parts.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "cycle type parts must be positive and nonempty, got {parts:?}"
            )));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { parts })
    }

    pub fn identity(n: usize) -> Self {
        Self { parts: vec![1; n] }
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// `n`, the sum of the parts.
    pub fn degree(&self) -> usize {
        self.parts.iter().sum()
    }

    /// Number of cycles.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// A permutation of this type whose cycles are consecutive runs of points.
    pub fn representative(&self) -> Permutation {
        let mut images = Vec::with_capacity(self.degree());
        let mut start = 0;
        for &len in &self.parts {
            for j in 0..len {
                images.push(start + (j + 1) % len);
            }
            start += len;
        }
        Permutation::from_zero_based(images)
    }
}

impl TryFrom<Vec<usize>> for CycleType {
    type Error = Error;
    fn try_from(parts: Vec<usize>) -> Result<Self> {
        Self::from_parts(parts)
    }
}

impl From<CycleType> for Vec<usize> {
    fn from(t: CycleType) -> Self {
        t.parts
    }
}

/// Comma-separated parts, e.g. `3,1`.
impl fmt::Display for CycleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for CycleType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(|c: char| c == ',' || c == '+' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad cycle length {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(parts)
    }
}

/// All partitions of `n` in reverse lexicographic order, `[n]` first.
pub fn integer_partitions(n: usize) -> Vec<CycleType> {
    fn go(rest: usize, max: usize, prefix: &mut Vec<usize>, out: &mut Vec<CycleType>) {
        if rest == 0 {
            out.push(CycleType {
                parts: prefix.clone(),
            });
            return;
        }
        for part in (1..=rest.min(max)).rev() {
            prefix.push(part);
            go(rest - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        go(n, n, &mut Vec::new(), &mut out);
    }
    out
}

/// `(a ∘ b)(i) = a(b(i))`.
pub fn compose(a: &Permutation, b: &Permutation) -> Result<Permutation> {
    if a.degree() != b.degree() {
        return Err(Error::DegreeMismatch(a.degree(), b.degree()));
    }
    Ok(Permutation {
        images: b.images.iter().map(|&x| a.images[x]).collect(),
    })
}

pub fn inverse(a: &Permutation) -> Permutation {
    let mut images = vec![0; a.degree()];
    for (i, &x) in a.images.iter().enumerate() {
        images[x] = i;
    }
    Permutation { images }
}

/// The cycle `(1 2 … n)`.
pub fn full_cycle(n: usize) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::InvalidPermutation("degree must be at least 1".into()));
    }
    Ok(Permutation {
        images: (0..n).map(|i| (i + 1) % n).collect(),
    })
}

pub fn enumerate_sn(n: usize) -> Result<Vec<Permutation>> {
    enumerate_sn_with_cap(n, DEFAULT_SN_CAP)
}

/// All `n!` permutations in lexicographic order of their image arrays.
pub fn enumerate_sn_with_cap(n: usize, cap: usize) -> Result<Vec<Permutation>> {
    if n == 0 {
        return Err(Error::InvalidPermutation("degree must be at least 1".into()));
    }
    if n > cap {
        return Err(Error::CapExceeded {
            what: "S_n degree",
            value: n,
            cap,
        });
    }
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity((1..=n).product());
    loop {
        out.push(Permutation {
            images: current.clone(),
        });
        if !next_permutation(&mut current) {
            break;
        }
    }
    Ok(out)
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

pub fn cycle_type(a: &Permutation) -> CycleType {
    a.cycle_type()
}

pub fn cycles(a: &Permutation) -> Vec<Vec<usize>> {
    a.cycles()
}

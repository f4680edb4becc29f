//! Moment-level free probability.
//!
//! A distribution is carried as a truncated moment sequence `m[1..=K]`. Free
//! cumulants, mixed moments of a free pair `(w, y)` and the free
//! convolutions all reduce to sums over non-crossing partitions whose blocks
//! are monochromatic for the letter pattern of a word. Those sums are
//! evaluated by an interval recursion on the block containing the first
//! letter, which is polynomial in the word length; `ncpart::enumerate_nc`
//! serves as the brute-force cross-check in tests.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use num_traits::{Num, One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ncpart::{catalan, Letter};
use crate::perm;
use crate::weingarten::{asymptotic_phi, rational_to_f64};

/// Longest word the interval recursion accepts. The recursion costs
/// `O(L⁴)`, so this cap guards memory rather than time.
pub const DEFAULT_WORD_CAP: usize = 24;

/// Default truncation order for experiments.
pub const DEFAULT_MOMENT_ORDER: usize = 8;

/// `m[1..=K]`; `m[0] = 1` is implicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MomentSequence<T = f64> {
    values: Vec<T>,
}

/// Free cumulants `κ[1..=K]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CumulantSequence<T = f64> {
    values: Vec<T>,
}

macro_rules! sequence_impl {
    ($ty:ident) => {
        impl<T> $ty<T> {
            /// No finiteness check; use `new` for floating-point input.
            pub fn from_values(values: Vec<T>) -> Self {
                Self { values }
            }

            pub fn order(&self) -> usize {
                self.values.len()
            }

            pub fn as_slice(&self) -> &[T] {
                &self.values
            }

            pub fn into_vec(self) -> Vec<T> {
                self.values
            }

            /// Entry `j` for `1 ≤ j ≤ K`.
            pub fn get(&self, j: usize) -> Option<&T> {
                j.checked_sub(1).and_then(|i| self.values.get(i))
            }

            pub fn truncated(&self, k: usize) -> Self
            where
                T: Clone,
            {
                Self {
                    values: self.values[..k.min(self.values.len())].to_vec(),
                }
            }
        }

        impl $ty<f64> {
            pub fn new(values: Vec<f64>) -> Result<Self> {
                if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "entry {} is not finite",
                        bad + 1
                    )));
                }
                Ok(Self { values })
            }
        }
    };
}

sequence_impl!(MomentSequence);
sequence_impl!(CumulantSequence);

impl<T: Clone + One> MomentSequence<T> {
    /// `m[j]` with `m[0] = 1`.
    pub fn moment(&self, j: usize) -> Result<T> {
        if j == 0 {
            return Ok(T::one());
        }
        self.get(j).cloned().ok_or(Error::InsufficientMoments {
            have: self.order(),
            need: j,
        })
    }
}

/// Sum over non-crossing partitions of the positions `0..len` whose blocks
/// are monochromatic, each block `V` weighted by `weight(color, |V|)`.
///
/// Recursion on the block containing the first point of an interval: with
/// `F(a, b)` the sum over `[a, b)` and `T(p, b, r)` the continuation of a
/// block of size `r` whose latest point is `p`,
///
/// ```text
/// F(a, b)    = T(a, b, 1)                       (F(a, a) = 1)
/// T(p, b, r) = w(c, r)·F(p+1, b) + Σ_{p<q<b, color(q)=c} F(p+1, q)·T(q, b, r+1)
/// ```
struct IntervalSum<'a, T, W> {
    colors: &'a [Letter],
    weight: W,
    full: Vec<Option<T>>,
    cont: Vec<Option<T>>,
}

impl<'a, T, W> IntervalSum<'a, T, W>
where
    T: Num + Clone,
    W: FnMut(Letter, usize) -> T,
{
    fn new(colors: &'a [Letter], weight: W) -> Self {
        let l = colors.len() + 1;
        Self {
            colors,
            weight,
            full: vec![None; l * l],
            cont: vec![None; l * l * l],
        }
    }

    fn full(&mut self, a: usize, b: usize) -> T {
        if a == b {
            return T::one();
        }
        let l = self.colors.len() + 1;
        if let Some(v) = &self.full[a * l + b] {
            return v.clone();
        }
        let v = self.cont(a, b, 1);
        self.full[a * l + b] = Some(v.clone());
        v
    }

    fn cont(&mut self, p: usize, b: usize, r: usize) -> T {
        let l = self.colors.len() + 1;
        let key = (p * l + b) * l + r;
        if let Some(v) = &self.cont[key] {
            return v.clone();
        }
        let c = self.colors[p];
        let mut v = (self.weight)(c, r) * self.full(p + 1, b);
        for q in p + 1..b {
            if self.colors[q] == c {
                let inner = self.full(p + 1, q);
                if inner.is_zero() {
                    continue;
                }
                v = v + inner * self.cont(q, b, r + 1);
            }
        }
        self.cont[key] = Some(v.clone());
        v
    }
}

fn nc_sum<T, W>(colors: &[Letter], weight: W) -> T
where
    T: Num + Clone,
    W: FnMut(Letter, usize) -> T,
{
    IntervalSum::new(colors, weight).full(0, colors.len())
}

fn check_cap(what: &'static str, value: usize, cap: usize) -> Result<()> {
    if value > cap {
        return Err(Error::CapExceeded { what, value, cap });
    }
    Ok(())
}

pub fn cumulants_to_moments<T: Num + Clone>(
    kappa: &CumulantSequence<T>,
) -> Result<MomentSequence<T>> {
    let k = kappa.order();
    check_cap("moment order", k, DEFAULT_WORD_CAP)?;
    let colors = vec![Letter::W; k];
    let values = (1..=k)
        .map(|n| nc_sum(&colors[..n], |_, s| kappa.values[s - 1].clone()))
        .collect();
    Ok(MomentSequence { values })
}

/// Inverse of [`cumulants_to_moments`]: `κ[n] = m[n] − Σ_{π ≠ 1_n} ∏ κ[|V|]`.
pub fn moments_to_cumulants<T: Num + Clone>(
    m: &MomentSequence<T>,
) -> Result<CumulantSequence<T>> {
    let k = m.order();
    check_cap("moment order", k, DEFAULT_WORD_CAP)?;
    let colors = vec![Letter::W; k];
    let mut kappa: Vec<T> = Vec::with_capacity(k);
    for n in 1..=k {
        let lower = nc_sum(&colors[..n], |_, s| {
            if s == n {
                T::zero()
            } else {
                kappa[s - 1].clone()
            }
        });
        kappa.push(m.values[n - 1].clone() - lower);
    }
    Ok(CumulantSequence { values: kappa })
}

/// Moments of the Marčenko–Pastur law `ν_λ`, whose free cumulants are
/// `κ[n] = λ^{n−1}`.
pub fn mp_moments(lambda: f64, k: usize) -> Result<MomentSequence> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "aspect ratio must lie in (0, ∞), got {lambda}"
        )));
    }
    let kappa = CumulantSequence {
        values: (0..k).map(|n| lambda.powi(n as i32)).collect(),
    };
    cumulants_to_moments(&kappa)
}

/// Unit-variance semicircle: `m[2j] = C_j`, odd moments zero. This is the
/// limit law of Wigner matrices normalized by `1/√N`.
pub fn semicircle_moments(k: usize) -> MomentSequence {
    let values = (1..=k)
        .map(|j| {
            if j % 2 == 1 {
                0.0
            } else {
                rational_to_f64(&num_rational::BigRational::from_integer(
                    catalan((j / 2) as u32).into(),
                ))
            }
        })
        .collect();
    MomentSequence { values }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NoncommWord {
    letters: Vec<Letter>,
}

impl NoncommWord {
    pub fn new(letters: Vec<Letter>) -> Self {
        Self { letters }
    }

    /// `w^{k_1} y w^{k_2} y … w^{k_n} y`.
    pub fn alternating(k: &[usize]) -> Self {
        let mut letters = Vec::new();
        for &ki in k {
            letters.extend(std::iter::repeat_n(Letter::W, ki));
            letters.push(Letter::Y);
        }
        Self { letters }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn degree(&self, letter: Letter) -> usize {
        self.letters.iter().filter(|&&l| l == letter).count()
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Self { letters }
    }
}

impl fmt::Display for NoncommWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for NoncommWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(Letter::from_char)
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::Parse("empty word".into()));
        }
        Ok(Self { letters })
    }
}

/// `φ(a_1 ⋯ a_L)` for free `w` and `y`: mixed free cumulants vanish, so only
/// non-crossing partitions with monochromatic blocks contribute.
pub fn free_word_moment(
    word: &NoncommWord,
    moments_w: &MomentSequence,
    moments_y: &MomentSequence,
) -> Result<f64> {
    check_cap("word length", word.len(), DEFAULT_WORD_CAP)?;
    let need_w = word.degree(Letter::W);
    let need_y = word.degree(Letter::Y);
    let kappa_w = cumulants_up_to(moments_w, need_w)?;
    let kappa_y = cumulants_up_to(moments_y, need_y)?;
    Ok(nc_sum(word.letters(), |c, s| match c {
        Letter::W => kappa_w[s - 1],
        Letter::Y => kappa_y[s - 1],
    }))
}

fn cumulants_up_to(m: &MomentSequence, need: usize) -> Result<Vec<f64>> {
    if need > m.order() {
        return Err(Error::InsufficientMoments {
            have: m.order(),
            need,
        });
    }
    Ok(moments_to_cumulants(&m.truncated(need))?.into_vec())
}

/// A complex polynomial in the noncommuting letters `W`, `Y`. Equal words
/// are merged and zero coefficients dropped.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct NoncommPolynomial {
    constant: Complex64,
    terms: BTreeMap<NoncommWord, Complex64>,
}

impl NoncommPolynomial {
    pub fn constant(c: Complex64) -> Self {
        Self {
            constant: c,
            terms: BTreeMap::new(),
        }
    }

    pub fn word(word: NoncommWord) -> Self {
        Self::term(Complex64::one(), word)
    }

    pub fn term(coeff: Complex64, word: NoncommWord) -> Self {
        let mut p = Self::default();
        p.add_term(coeff, word);
        p
    }

    pub fn add_term(&mut self, coeff: Complex64, word: NoncommWord) {
        if word.is_empty() {
            self.constant += coeff;
            return;
        }
        let entry = self.terms.entry(word).or_insert_with(Complex64::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.retain(|_, c| !c.is_zero());
        }
    }

    pub fn constant_term(&self) -> Complex64 {
        self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (&NoncommWord, &Complex64)> {
        self.terms.iter()
    }

    pub fn max_word_len(&self) -> usize {
        self.terms.keys().map(NoncommWord::len).max().unwrap_or(0)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::constant(self.constant * s);
        for (w, c) in &self.terms {
            out.add_term(c * s, w.clone());
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::constant(Complex64::one());
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// True when the polynomial is a single monomial `W·Y` or `Y·W` with
    /// unit coefficient and no constant.
    pub fn is_product_xy(&self) -> bool {
        self.constant.is_zero()
            && self.terms.len() == 1
            && self.terms.iter().all(|(w, c)| {
                *c == Complex64::one()
                    && w.len() == 2
                    && w.degree(Letter::W) == 1
                    && w.degree(Letter::Y) == 1
            })
    }
}

impl<'a> Add<&'a NoncommPolynomial> for &'a NoncommPolynomial {
    type Output = NoncommPolynomial;
    fn add(self, rhs: &NoncommPolynomial) -> NoncommPolynomial {
        let mut out = self.clone();
        out.constant += rhs.constant;
        for (w, c) in &rhs.terms {
            out.add_term(*c, w.clone());
        }
        out
    }
}

impl<'a> Sub<&'a NoncommPolynomial> for &'a NoncommPolynomial {
    type Output = NoncommPolynomial;
    fn sub(self, rhs: &NoncommPolynomial) -> NoncommPolynomial {
        self + &rhs.scale(-Complex64::one())
    }
}

impl<'a> Mul<&'a NoncommPolynomial> for &'a NoncommPolynomial {
    type Output = NoncommPolynomial;
    fn mul(self, rhs: &NoncommPolynomial) -> NoncommPolynomial {
        let mut out = NoncommPolynomial::constant(self.constant * rhs.constant);
        let empty = NoncommWord::new(Vec::new());
        let left = std::iter::once((&empty, &self.constant)).chain(self.terms.iter());
        for (wl, cl) in left {
            let right = std::iter::once((&empty, &rhs.constant)).chain(rhs.terms.iter());
            for (wr, cr) in right {
                if wl.is_empty() && wr.is_empty() {
                    continue;
                }
                out.add_term(cl * cr, wl.concat(wr));
            }
        }
        out
    }
}

fn fmt_coeff(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else {
        let sign = if c.im.is_sign_negative() { '-' } else { '+' };
        format!("({}{}{}i)", c.re, sign, c.im.abs())
    }
}

/// Text form, e.g. `2*WY - YW + (1+0.5i)*W + 3`.
impl fmt::Display for NoncommPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut write_term = |f: &mut fmt::Formatter<'_>, c: Complex64, word: Option<&NoncommWord>| {
            let negative = c.im == 0.0 && c.re.is_sign_negative();
            let c = if negative { -c } else { c };
            match (first, negative) {
                (true, true) => f.write_str("-")?,
                (true, false) => {}
                (false, true) => f.write_str(" - ")?,
                (false, false) => f.write_str(" + ")?,
            }
            first = false;
            match word {
                Some(w) if c == Complex64::one() => write!(f, "{w}"),
                Some(w) => write!(f, "{}*{w}", fmt_coeff(c)),
                None => f.write_str(&fmt_coeff(c)),
            }
        };
        for (w, c) in &self.terms {
            write_term(f, *c, Some(w))?;
        }
        if !self.constant.is_zero() || self.terms.is_empty() {
            write_term(f, self.constant, None)?;
        }
        Ok(())
    }
}

impl FromStr for NoncommPolynomial {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PolyParser::new(s).parse()
    }
}

impl Serialize for NoncommPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NoncommPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct PolyParser<'a> {
    src: &'a str,
    chars: Vec<char>,
    pos: usize,
}

impl<'a> PolyParser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            chars: src.chars().filter(|c| !c.is_whitespace()).collect(),
            pos: 0,
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at offset {} in polynomial {:?}", self.pos, self.src))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<NoncommPolynomial> {
        let mut p = NoncommPolynomial::default();
        if self.chars.is_empty() {
            return Err(self.err("empty polynomial"));
        }
        let mut sign = 1.0;
        if let Some(c @ ('+' | '-')) = self.peek() {
            sign = if c == '-' { -1.0 } else { 1.0 };
            self.pos += 1;
        }
        loop {
            let (coeff, word) = self.term()?;
            p.add_term(coeff * sign, word);
            match self.peek() {
                None => break,
                Some('+') => sign = 1.0,
                Some('-') => sign = -1.0,
                Some(_) => return Err(self.err("expected '+' or '-'")),
            }
            self.pos += 1;
        }
        Ok(p)
    }

    fn term(&mut self) -> Result<(Complex64, NoncommWord)> {
        let mut sign = 1.0;
        while let Some(c @ ('+' | '-')) = self.peek() {
            if c == '-' {
                sign = -sign;
            }
            self.pos += 1;
        }
        let (coeff, word) = self.unsigned_term()?;
        Ok((coeff * sign, word))
    }

    fn unsigned_term(&mut self) -> Result<(Complex64, NoncommWord)> {
        let coeff = match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '.' || c == '(' => Some(self.coefficient()?),
            _ => None,
        };
        if coeff.is_some() {
            if self.peek() == Some('*') {
                self.pos += 1;
            } else {
                return Ok((coeff.unwrap_or_default(), NoncommWord::new(Vec::new())));
            }
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if Letter::from_char(c).is_err() {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a word"));
        }
        let word: String = self.chars[start..self.pos].iter().collect();
        Ok((coeff.unwrap_or(Complex64::one()), word.parse()?))
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            let exp_sign = (c == '-' || c == '+')
                && self.pos > start
                && matches!(self.chars[self.pos - 1], 'e' | 'E');
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map_err(|_| self.err(&format!("bad number {text:?}")))
    }

    fn coefficient(&mut self) -> Result<Complex64> {
        if self.peek() != Some('(') {
            let re = self.number()?;
            if self.peek() == Some('i') {
                self.pos += 1;
                return Ok(Complex64::new(0.0, re));
            }
            return Ok(Complex64::new(re, 0.0));
        }
        self.pos += 1;
        let neg_re = self.peek() == Some('-');
        if neg_re {
            self.pos += 1;
        }
        let mut re = self.number()?;
        if neg_re {
            re = -re;
        }
        let mut im = 0.0;
        match self.peek() {
            Some('i') => {
                self.pos += 1;
                im = re;
                re = 0.0;
            }
            Some(c @ ('+' | '-')) => {
                self.pos += 1;
                im = self.number()?;
                if c == '-' {
                    im = -im;
                }
                if self.peek() != Some('i') {
                    return Err(self.err("expected 'i'"));
                }
                self.pos += 1;
            }
            _ => {}
        }
        if self.peek() != Some(')') {
            return Err(self.err("expected ')'"));
        }
        self.pos += 1;
        Ok(Complex64::new(re, im))
    }
}

/// Linear extension of [`free_word_moment`]; the constant contributes itself.
pub fn free_poly_moment(
    p: &NoncommPolynomial,
    moments_w: &MomentSequence,
    moments_y: &MomentSequence,
) -> Result<Complex64> {
    let mut total = p.constant;
    for (word, coeff) in &p.terms {
        total += coeff * free_word_moment(word, moments_w, moments_y)?;
    }
    Ok(total)
}

/// `φ(w^{k_1} y ⋯ w^{k_n} y)` as the genus-zero part of the Weingarten
/// expansion: the sum over `α, β ∈ S_n` with
/// `#(α⁻¹β) + #α + #(β⁻¹γ) = 2n + 1` of
/// `φ(α⁻¹β) ∏_{θ∈α} φ(w^{Σ_{i∈θ} k_i}) ∏_{θ∈β⁻¹γ} φ(y^{#θ})`.
pub fn genus_zero_moment(
    k: &[usize],
    moments_w: &MomentSequence,
    moments_y: &MomentSequence,
) -> Result<f64> {
    let n = k.len();
    if n == 0 {
        return Err(Error::InvalidArgument("k must be nonempty".into()));
    }
    let elements = perm::enumerate_sn(n)?;
    let gamma = perm::full_cycle(n)?;
    let mut total = 0.0;
    for alpha in &elements {
        let alpha_inv = perm::inverse(alpha);
        let w_part = alpha.cycles().iter().try_fold(1.0, |acc, cycle| {
            let power: usize = cycle.iter().map(|&i| k[i - 1]).sum();
            moments_w.moment(power).map(|m| acc * m)
        })?;
        for beta in &elements {
            let mid = perm::compose(&alpha_inv, beta)?;
            let rest = perm::compose(&perm::inverse(beta), &gamma)?;
            if alpha.cycle_count() + mid.cycle_count() + rest.cycle_count() != 2 * n + 1 {
                continue;
            }
            let y_part = rest
                .cycles()
                .iter()
                .try_fold(1.0, |acc, c| moments_y.moment(c.len()).map(|m| acc * m))?;
            total += rational_to_f64(&asymptotic_phi(&mid.cycle_type())) * w_part * y_part;
        }
    }
    Ok(total)
}

/// Free cumulants add under `⊞`. The result has the shorter input's order.
pub fn free_additive_convolution<T: Num + Clone>(
    a: &MomentSequence<T>,
    b: &MomentSequence<T>,
) -> Result<MomentSequence<T>> {
    let k = a.order().min(b.order());
    let ka = moments_to_cumulants(&a.truncated(k))?;
    let kb = moments_to_cumulants(&b.truncated(k))?;
    let sum = CumulantSequence {
        values: ka
            .values
            .into_iter()
            .zip(kb.values)
            .map(|(x, y)| x + y)
            .collect(),
    };
    cumulants_to_moments(&sum)
}

/// `m[n] = φ((ab)^n)` for free `a ~ A`, `b ~ B`. Meaningful as a measure only
/// when one of the inputs lives on `[0, ∞)`; that is the caller's promise.
pub fn free_multiplicative_convolution(
    a: &MomentSequence,
    b: &MomentSequence,
) -> Result<MomentSequence> {
    let k = a.order().min(b.order());
    check_cap("word length", 2 * k, DEFAULT_WORD_CAP)?;
    let values = (1..=k)
        .map(|n| {
            let word = NoncommWord::alternating(&vec![1; n]);
            free_word_moment(&word, &a.truncated(n), &b.truncated(n))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentSequence { values })
}

pub fn point_mass_moments(c: f64, k: usize) -> MomentSequence {
    MomentSequence {
        values: (1..=k).map(|j| c.powi(j as i32)).collect(),
    }
}

/// Uniform law on `{−1, 1}`.
pub fn bernoulli_pm1_moments(k: usize) -> MomentSequence {
    MomentSequence {
        values: (1..=k).map(|j| if j % 2 == 0 { 1.0 } else { 0.0 }).collect(),
    }
}

/// Uniform law on `[a, b]` (`a < b`).
pub fn uniform_moments(a: f64, b: f64, k: usize) -> MomentSequence {
    MomentSequence {
        values: (1..=k)
            .map(|j| {
                let e = j as i32 + 1;
                (b.powi(e) - a.powi(e)) / (f64::from(e) * (b - a))
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpart::{enumerate_nc, is_monochromatic};
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;
    use Letter::{W, Y};

    fn ms(v: &[f64]) -> MomentSequence {
        MomentSequence::new(v.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    /// Brute force over `NC(m)`: monochromatic partitions weighted by the
    /// per-color cumulants.
    fn brute_force_word_moment(word: &NoncommWord, kw: &[f64], ky: &[f64]) -> f64 {
        let colors = word.letters();
        enumerate_nc(word.len())
            .unwrap()
            .into_iter()
            .filter(|p| is_monochromatic(p, colors).unwrap())
            .map(|p| {
                p.blocks()
                    .iter()
                    .map(|b| match colors[b[0] - 1] {
                        W => kw[b.len() - 1],
                        Y => ky[b.len() - 1],
                    })
                    .product::<f64>()
            })
            .sum()
    }

    #[test]
    fn point_mass_has_only_first_cumulant() {
        let kappa = moments_to_cumulants(&point_mass_moments(1.7, 6)).unwrap();
        assert!(close(kappa.as_slice()[0], 1.7, 1e-14));
        for k in &kappa.as_slice()[1..] {
            assert!(k.abs() < 1e-12);
        }
    }

    #[test]
    fn bernoulli_cumulants() {
        let kappa = moments_to_cumulants(&bernoulli_pm1_moments(4)).unwrap();
        assert_eq!(kappa.as_slice(), &[0.0, 1.0, 0.0, -1.0]);
    }

    #[test]
    fn unit_cumulants_round_trip() {
        let m = cumulants_to_moments(&CumulantSequence::new(vec![1.0; 3]).unwrap()).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.0, 5.0]);
        let kappa = moments_to_cumulants(&m).unwrap();
        assert_eq!(kappa.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn cumulant_examples() {
        let sc = cumulants_to_moments(&CumulantSequence::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap())
            .unwrap();
        assert_eq!(sc.as_slice(), &[0.0, 1.0, 0.0, 2.0]);
        let one = cumulants_to_moments(&CumulantSequence::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap())
            .unwrap();
        assert_eq!(one.as_slice(), &[1.0; 4]);
        let zero = cumulants_to_moments(&CumulantSequence::new(vec![0.0; 4]).unwrap()).unwrap();
        assert_eq!(zero.as_slice(), &[0.0; 4]);
    }

    #[test]
    fn mp_and_semicircle_moments() {
        for lambda in [0.25, 0.5, 1.0, 2.0] {
            assert!(close(mp_moments(lambda, 3).unwrap().as_slice()[0], 1.0, 1e-15));
            assert!(close(mp_moments(lambda, 3).unwrap().as_slice()[1], 1.0 + lambda, 1e-15));
        }
        assert_eq!(mp_moments(1.0, 2).unwrap().as_slice(), &[1.0, 2.0]);
        assert_eq!(mp_moments(0.5, 3).unwrap().as_slice(), &[1.0, 1.5, 2.75]);
        assert!(mp_moments(0.0, 3).is_err());
        assert!(mp_moments(-1.0, 3).is_err());
        assert!(mp_moments(f64::NAN, 3).is_err());
        let sc = semicircle_moments(8);
        assert_eq!(sc.as_slice(), &[0.0, 1.0, 0.0, 2.0, 0.0, 5.0, 0.0, 14.0]);
        let via_cumulants = cumulants_to_moments(
            &CumulantSequence::new(vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(sc, via_cumulants);
    }

    #[test]
    fn word_moment_examples() {
        let mw = mp_moments(0.5, 6).unwrap();
        let my = ms(&[0.3, 1.2, 0.7, 2.0]);
        let wy: NoncommWord = "WY".parse().unwrap();
        assert!(close(free_word_moment(&wy, &mw, &my).unwrap(), 0.3, 1e-14));
        let www: NoncommWord = "WWW".parse().unwrap();
        assert!(close(free_word_moment(&www, &mw, &my).unwrap(), mw.as_slice()[2], 1e-14));
        let wywy: NoncommWord = "WYWY".parse().unwrap();
        let b = bernoulli_pm1_moments(4);
        assert!(close(free_word_moment(&wywy, &mw, &b).unwrap(), 1.0, 1e-14));
    }

    #[test]
    fn word_moment_matches_brute_force_enumeration() {
        let mw = ms(&[0.4, 1.1, -0.3, 2.2, 0.9, 3.1, 1.0, 4.0]);
        let my = ms(&[-0.2, 0.8, 0.5, 1.7, -0.6, 2.4, 0.3, 3.3]);
        let kw = moments_to_cumulants(&mw).unwrap().into_vec();
        let ky = moments_to_cumulants(&my).unwrap().into_vec();
        for word in ["W", "WY", "WYWY", "WWYWY", "YYWYWWY", "WYYWYWWYWY", "WYWYWYWYWYWY"] {
            let w: NoncommWord = word.parse().unwrap();
            let fast = free_word_moment(&w, &mw, &my).unwrap();
            let slow = brute_force_word_moment(&w, &kw, &ky);
            assert!(close(fast, slow, 1e-12), "{word}: {fast} vs {slow}");
        }
    }

    #[test]
    fn freeness_identity_for_wywy() {
        let a = ms(&[0.7, 1.3, 0.2, 2.5]);
        let b = ms(&[-0.4, 0.9, 0.1, 1.1]);
        let got = free_word_moment(&"WYWY".parse().unwrap(), &a, &b).unwrap();
        let (a1, a2, b1, b2) = (0.7, 1.3, -0.4, 0.9);
        let expected = a2 * b1 * b1 + a1 * a1 * b2 - a1 * a1 * b1 * b1;
        assert!(close(got, expected, 1e-14));
    }

    #[test]
    fn insufficient_moments_and_caps() {
        let short = ms(&[1.0]);
        assert!(matches!(
            free_word_moment(&"WW".parse().unwrap(), &short, &short),
            Err(Error::InsufficientMoments { have: 1, need: 2 })
        ));
        let long = mp_moments(1.0, 30);
        assert!(matches!(long, Err(Error::CapExceeded { .. })));
        let w = NoncommWord::new(vec![W; 25]);
        let m = ms(&[1.0; 24]);
        assert!(matches!(
            free_word_moment(&w, &m, &m),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn polynomial_moments() {
        let mw = mp_moments(0.5, 4).unwrap();
        let my = ms(&[0.25, 1.0, 0.5, 1.5]);
        let p: NoncommPolynomial = "2*W + 3*Y".parse().unwrap();
        let v = free_poly_moment(&p, &mw, &my).unwrap();
        assert!(close(v.re, 2.0 + 0.75, 1e-14) && v.im == 0.0);
        let comm: NoncommPolynomial = "WY - YW".parse().unwrap();
        assert!(free_poly_moment(&comm, &mw, &my).unwrap().norm() < 1e-15);
        let c: NoncommPolynomial = "(1.5-2i)".parse().unwrap();
        assert_eq!(free_poly_moment(&c, &mw, &my).unwrap(), Complex64::new(1.5, -2.0));
    }

    #[test]
    fn polynomial_parse_display_and_algebra() {
        let p: NoncommPolynomial = "2*WY - YW + (1+0.5i)*W + 3 - 0.5".parse().unwrap();
        assert_eq!(p.constant_term(), Complex64::new(2.5, 0.0));
        let again: NoncommPolynomial = p.to_string().parse().unwrap();
        assert_eq!(again, p);
        let cancel: NoncommPolynomial = "WY - WY + Y".parse().unwrap();
        assert_eq!(cancel, "Y".parse().unwrap());
        let sum: NoncommPolynomial = "x + y".parse().unwrap();
        let sq = sum.pow(2);
        assert_eq!(sq, "WW + WY + YW + YY".parse().unwrap());
        assert!("xy".parse::<NoncommPolynomial>().unwrap().is_product_xy());
        assert!(!"2*xy".parse::<NoncommPolynomial>().unwrap().is_product_xy());
        for bad in ["", "W +", "2*", "Z", "(1+2)*W", "W Y Q"] {
            assert!(bad.parse::<NoncommPolynomial>().is_err(), "{bad:?}");
        }
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<NoncommPolynomial>(&json).unwrap(), p);
    }

    #[test]
    fn genus_zero_examples() {
        let mw = mp_moments(0.5, 8).unwrap();
        let my = ms(&[0.3, 1.2, 0.7, 2.0]);
        assert!(close(genus_zero_moment(&[1], &mw, &my).unwrap(), 0.3, 1e-14));
        let b = bernoulli_pm1_moments(4);
        assert!(close(genus_zero_moment(&[1, 1], &mw, &b).unwrap(), 1.0, 1e-14));
        assert!(close(genus_zero_moment(&[0, 1], &mw, &my).unwrap(), 1.2, 1e-14));
    }

    #[test]
    fn genus_zero_equals_word_engine() {
        let ws = [mp_moments(0.5, 16).unwrap(), mp_moments(1.0, 16).unwrap(), mp_moments(2.0, 16).unwrap()];
        let ys = [
            bernoulli_pm1_moments(4),
            point_mass_moments(1.0, 4),
            uniform_moments(0.0, 1.0, 4),
            ms(&[-0.3, 0.8, 0.1, 1.9]),
        ];
        for mw in &ws {
            for my in &ys {
                for k in [vec![2], vec![1, 3], vec![0, 2, 1], vec![3, 0, 1, 2]] {
                    let g = genus_zero_moment(&k, mw, my).unwrap();
                    let f = free_word_moment(&NoncommWord::alternating(&k), mw, my).unwrap();
                    assert!((g - f).abs() <= 1e-10 * (1.0 + f.abs()), "k = {k:?}: {g} vs {f}");
                }
            }
        }
    }

    #[test]
    fn unit_y_collapses_word() {
        let mw = mp_moments(2.0, 8).unwrap();
        let one = point_mass_moments(1.0, 8);
        for word in ["WYWWY", "YYWY", "WWWYWYYW"] {
            let w: NoncommWord = word.parse().unwrap();
            let d = w.degree(W);
            let got = free_word_moment(&w, &mw, &one).unwrap();
            assert!(close(got, mw.moment(d).unwrap(), 1e-12), "{word}");
        }
    }

    #[test]
    fn convolution_examples() {
        let sc = semicircle_moments(4);
        let sum = free_additive_convolution(&sc, &sc).unwrap();
        assert!(close(sum.as_slice()[1], 2.0, 1e-15));
        let kappa = moments_to_cumulants(&sum).unwrap();
        assert!(close(kappa.as_slice()[1], 2.0, 1e-15));
        let d = free_additive_convolution(&point_mass_moments(0.5, 3), &point_mass_moments(1.25, 3))
            .unwrap();
        assert!(close(d.as_slice()[0], 1.75, 1e-15) && close(d.as_slice()[1], 1.75 * 1.75, 1e-14));
        let nu = mp_moments(1.0, 4).unwrap();
        assert!(close(free_additive_convolution(&nu, &nu).unwrap().as_slice()[1], 6.0, 1e-14));

        let a = ms(&[0.6, 1.1, 0.9, 2.0]);
        let b = mp_moments(0.5, 4).unwrap();
        let prod = free_multiplicative_convolution(&a, &b).unwrap();
        assert!(close(prod.as_slice()[0], 0.6, 1e-14));
        let expected = 1.1 * 1.0 + 0.36 * 1.5 - 0.36 * 1.0;
        assert!(close(prod.as_slice()[1], expected, 1e-14));
        let scaled = free_multiplicative_convolution(&point_mass_moments(2.0, 4), &b).unwrap();
        for j in 1..=4 {
            assert!(close(scaled.as_slice()[j - 1], 2f64.powi(j as i32) * b.as_slice()[j - 1], 1e-13));
        }
    }

    #[test]
    fn identities_of_the_convolutions() {
        let a = mp_moments(0.7, 6).unwrap();
        let zero = point_mass_moments(0.0, 6);
        let one = point_mass_moments(1.0, 6);
        let add = free_additive_convolution(&a, &zero).unwrap();
        let mul = free_multiplicative_convolution(&a, &one).unwrap();
        for j in 0..6 {
            assert!(close(add.as_slice()[j], a.as_slice()[j], 1e-13));
            assert!(close(mul.as_slice()[j], a.as_slice()[j], 1e-13));
        }
    }

    fn rational_seq(v: &[(i64, i64)]) -> MomentSequence<BigRational> {
        MomentSequence::from_values(
            v.iter()
                .map(|&(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d)))
                .collect(),
        )
    }

    #[test]
    fn additive_convolution_is_exactly_commutative_and_associative() {
        let a = rational_seq(&[(1, 2), (3, 4), (2, 3), (5, 1), (7, 5)]);
        let b = rational_seq(&[(-1, 3), (1, 1), (-1, 7), (2, 1), (1, 9)]);
        let c = rational_seq(&[(2, 1), (9, 2), (11, 1), (30, 1), (81, 1)]);
        let ab = free_additive_convolution(&a, &b).unwrap();
        assert_eq!(ab, free_additive_convolution(&b, &a).unwrap());
        let left = free_additive_convolution(&ab, &c).unwrap();
        let right = free_additive_convolution(&a, &free_additive_convolution(&b, &c).unwrap()).unwrap();
        assert_eq!(left, right);
        let back = cumulants_to_moments(&moments_to_cumulants(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    /// Moments of a random discrete measure with atoms in `[-2, 2]`.
    fn arb_moments() -> impl Strategy<Value = MomentSequence> {
        (
            prop::collection::vec((-2.0f64..2.0, 0.05f64..1.0), 1..6),
            1usize..=10,
        )
            .prop_map(|(atoms, k)| {
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                let values = (1..=k)
                    .map(|j| atoms.iter().map(|&(x, w)| w / total * x.powi(j as i32)).sum())
                    .collect();
                MomentSequence::new(values).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn moment_cumulant_round_trip(m in arb_moments()) {
            let back = cumulants_to_moments(&moments_to_cumulants(&m).unwrap()).unwrap();
            for (x, y) in m.as_slice().iter().zip(back.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{} vs {}", x, y);
            }
        }
    }
}

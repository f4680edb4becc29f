//! Exact unitary Weingarten calculus on `S_n`.
//!
//! `Wg(N, ·)` is the inverse of `σ ↦ N^{#σ}` in the group algebra of `S_n`:
//!
//! ```text
//! Σ_τ N^{#(σ τ⁻¹)} Wg(N, τ) = [σ = id]    for every σ ∈ S_n.
//! ```
//!
//! Both sides are class functions, so the system is solved with one unknown
//! and one equation per cycle type, in exact rational arithmetic.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::ncpart::catalan;
use crate::perm::{self, integer_partitions, CycleType, Permutation};

/// Default cap on `n`. `n = 6` is accepted by [`weingarten_table_with_cap`]
/// but costs an `S_6 × S_6` sweep per table.
pub const DEFAULT_WG_CAP: usize = 5;
pub const MAX_WG_CAP: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct WeingartenTable {
    n: usize,
    big_n: usize,
    values: BTreeMap<CycleType, BigRational>,
}

impl WeingartenTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// The matrix dimension `N`.
    pub fn dimension(&self) -> usize {
        self.big_n
    }

    pub fn get(&self, t: &CycleType) -> Option<&BigRational> {
        self.values.get(t)
    }

    pub fn value(&self, alpha: &Permutation) -> &BigRational {
        &self.values[&alpha.cycle_type()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CycleType, &BigRational)> {
        self.values.iter()
    }

    /// `N^{2n − #α} Wg(N, α)`, the quantity whose large-`N` limit is
    /// [`asymptotic_phi`].
    pub fn rescaled(&self, t: &CycleType) -> Option<BigRational> {
        let exponent = 2 * self.n - t.len();
        let scale = BigInt::from(self.big_n).pow(exponent as u32);
        self.values
            .get(t)
            .map(|v| v * BigRational::from_integer(scale))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsymptoticCoefficient {
    pub cycle_type: CycleType,
    pub value: BigRational,
}

pub fn weingarten_table(n: usize, big_n: usize) -> Result<Arc<WeingartenTable>> {
    weingarten_table_with_cap(n, big_n, DEFAULT_WG_CAP)
}

type TableCache = Mutex<HashMap<(usize, usize), Arc<WeingartenTable>>>;

fn cache() -> &'static TableCache {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Memoized per `(n, N)`; safe to call from several threads.
pub fn weingarten_table_with_cap(
    n: usize,
    big_n: usize,
    cap: usize,
) -> Result<Arc<WeingartenTable>> {
    let cap = cap.min(MAX_WG_CAP);
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if n > cap {
        return Err(Error::CapExceeded {
            what: "Weingarten degree",
            value: n,
            cap,
        });
    }
    if big_n < n {
        return Err(Error::SingularSystem { n, big_n });
    }
    if let Some(t) = cache().lock().expect("cache poisoned").get(&(n, big_n)) {
        return Ok(Arc::clone(t));
    }
    if n == MAX_WG_CAP {
        log::warn!("building Weingarten table for n = {n}: 720 x 720 class sums");
    }
    let table = Arc::new(solve_class_system(n, big_n)?);
    cache()
        .lock()
        .expect("cache poisoned")
        .insert((n, big_n), Arc::clone(&table));
    Ok(table)
}

fn solve_class_system(n: usize, big_n: usize) -> Result<WeingartenTable> {
    let classes = integer_partitions(n);
    let index: HashMap<&CycleType, usize> =
        classes.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let elements = perm::enumerate_sn_with_cap(n, MAX_WG_CAP)?;
    let powers: Vec<BigInt> = (0..=n).map(|k| BigInt::from(big_n).pow(k as u32)).collect();

    // Row r: class representative σ_r; column c: Σ_{τ ∈ class c} N^{#(σ_r τ⁻¹)}.
    let k = classes.len();
    let mut system = vec![vec![BigRational::zero(); k + 1]; k];
    for (r, class) in classes.iter().enumerate() {
        let sigma = class.representative();
        for tau in &elements {
            let c = index[&tau.cycle_type()];
            let prod = perm::compose(&sigma, &perm::inverse(tau))?;
            system[r][c] += BigRational::from_integer(powers[prod.cycle_count()].clone());
        }
        if class.parts().iter().all(|&p| p == 1) {
            system[r][k] = BigRational::one();
        }
    }
    let solution = gauss_solve(system).ok_or(Error::SingularSystem { n, big_n })?;
    Ok(WeingartenTable {
        n,
        big_n,
        values: classes.into_iter().zip(solution).collect(),
    })
}

/// Solves an augmented system `[A | b]` exactly; `None` if `A` is singular.
pub(crate) fn gauss_solve(mut aug: Vec<Vec<BigRational>>) -> Option<Vec<BigRational>> {
    let k = aug.len();
    for col in 0..k {
        let pivot = (col..k).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(col, pivot);
        let inv = aug[col][col].recip();
        for v in aug[col].iter_mut().skip(col) {
            *v *= &inv;
        }
        for r in 0..k {
            if r == col || aug[r][col].is_zero() {
                continue;
            }
            let factor = aug[r][col].clone();
            let pivot = aug[col][col..].to_vec();
            for (dst, src) in aug[r][col..].iter_mut().zip(&pivot) {
                *dst -= &factor * src;
            }
        }
    }
    Some(aug.into_iter().map(|row| row[k].clone()).collect())
}

/// `φ(α) = ∏_{ℓ ∈ type} (−1)^{ℓ−1} C_{ℓ−1}`, the limit of `N^{2n−#α} Wg(N, α)`.
pub fn asymptotic_phi(t: &CycleType) -> BigRational {
    let mut value = BigInt::one();
    for &len in t.parts() {
        let c = BigInt::from(catalan(len as u32 - 1));
        value *= if len % 2 == 0 { -c } else { c };
    }
    BigRational::from_integer(value)
}

pub fn asymptotic_coefficient(t: &CycleType) -> AsymptoticCoefficient {
    AsymptoticCoefficient {
        cycle_type: t.clone(),
        value: asymptotic_phi(t),
    }
}

/// Scalars the Weingarten expansion can be evaluated in.
pub trait WeingartenScalar:
    Clone + Zero + One + std::ops::Add<Output = Self> + std::ops::Mul<Output = Self>
{
    fn from_rational(r: &BigRational) -> Self;
}

impl WeingartenScalar for BigRational {
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
}

impl WeingartenScalar for f64 {
    fn from_rational(r: &BigRational) -> Self {
        rational_to_f64(r)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Supplies `Tr(A^j)` for `j ≥ 0`.
pub trait MomentTraceProvider {
    type Value: WeingartenScalar;
    fn trace_power(&self, j: usize) -> Result<Self::Value>;
}

/// Traces of powers of a diagonal matrix, `Tr(A^j) = Σ_i d_i^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalTraces<T>(pub Vec<T>);

impl<T: WeingartenScalar> MomentTraceProvider for DiagonalTraces<T> {
    type Value = T;
    fn trace_power(&self, j: usize) -> Result<T> {
        Ok(self.0.iter().fold(T::zero(), |acc, d| {
            let mut p = T::one();
            for _ in 0..j {
                p = p * d.clone();
            }
            acc + p
        }))
    }
}

/// `E Tr[∏_{i=1}^n (U A^{k_i} U* B)]` for a Haar unitary `U`:
///
/// ```text
/// Σ_{α,β ∈ S_n} Wg(N, α⁻¹β) ∏_{θ ∈ α} Tr(A^{Σ_{i∈θ} k_i}) ∏_{θ ∈ β⁻¹γ} Tr(B^{#θ})
/// ```
///
/// with `γ = (1 2 … n)`. Exact when the providers are.
pub fn haar_conjugation_expectation<P, Q>(
    k: &[usize],
    traces_a: &P,
    traces_b: &Q,
    big_n: usize,
) -> Result<P::Value>
where
    P: MomentTraceProvider,
    Q: MomentTraceProvider<Value = P::Value>,
{
    let n = k.len();
    let table = weingarten_table(n, big_n)?;
    let elements = perm::enumerate_sn(n)?;
    let gamma = perm::full_cycle(n)?;

    let mut a_cache: HashMap<usize, P::Value> = HashMap::new();
    let mut a_factor = Vec::with_capacity(elements.len());
    for alpha in &elements {
        let mut f = P::Value::one();
        for cycle in alpha.cycles() {
            let power: usize = cycle.iter().map(|&i| k[i - 1]).sum();
            let tr = match a_cache.get(&power) {
                Some(v) => v.clone(),
                None => {
                    let v = traces_a.trace_power(power)?;
                    a_cache.insert(power, v.clone());
                    v
                }
            };
            f = f * tr;
        }
        a_factor.push(f);
    }

    let b_traces = (0..=n)
        .map(|j| traces_b.trace_power(j))
        .collect::<Result<Vec<_>>>()?;
    let mut b_factor = Vec::with_capacity(elements.len());
    for beta in &elements {
        let rest = perm::compose(&perm::inverse(beta), &gamma)?;
        let f = rest
            .cycles()
            .iter()
            .fold(P::Value::one(), |acc, c| acc * b_traces[c.len()].clone());
        b_factor.push(f);
    }

    let wg: HashMap<&CycleType, P::Value> = table
        .iter()
        .map(|(t, v)| (t, P::Value::from_rational(v)))
        .collect();

    let mut total = P::Value::zero();
    for (alpha, fa) in elements.iter().zip(&a_factor) {
        let alpha_inv = perm::inverse(alpha);
        for (beta, fb) in elements.iter().zip(&b_factor) {
            let t = perm::compose(&alpha_inv, beta)?.cycle_type();
            total = total + wg[&t].clone() * fa.clone() * fb.clone();
        }
    }
    Ok(total)
}

//! Spectral measures as data.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freemoments::MomentSequence;
use crate::quadrature::integrate_adaptive;

/// Finitely many atoms with positive weights summing to one, locations
/// strictly increasing. Only exactly equal locations are merged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSpectralMeasure {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteSpectralMeasure {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("measure needs at least one atom".into()));
        }
        if atoms
            .iter()
            .any(|&(x, w)| !x.is_finite() || !w.is_finite() || w <= 0.0)
        {
            return Err(Error::InvalidArgument(
                "atoms need finite locations and positive weights".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            atoms: merge_sorted(atoms),
        })
    }

    pub fn point_mass(x: f64) -> Self {
        Self {
            atoms: vec![(x, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `μ((−∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.atoms.partition_point(|a| a.0 <= x);
        self.atoms[..idx].iter().map(|a| a.1).sum::<f64>().min(1.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["location", "weight"])?;
        for &(x, m) in &self.atoms {
            w.write_record([x.to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mass per bin over `bins` equal-width bins spanning the support. The
    /// last bin is closed on the right.
    pub fn write_histogram_csv<W: Write>(&self, out: W, bins: usize) -> Result<()> {
        if bins == 0 {
            return Err(Error::InvalidArgument("need at least one bin".into()));
        }
        let lo = self.atoms[0].0;
        let hi = self.atoms[self.atoms.len() - 1].0;
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut mass = vec![0.0; bins];
        for &(x, m) in &self.atoms {
            let idx = (((x - lo) / width) as usize).min(bins - 1);
            mass[idx] += m;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_left", "bin_right", "mass"])?;
        for (i, m) in mass.iter().enumerate() {
            let left = lo + i as f64 * width;
            w.write_record([left.to_string(), (left + width).to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn merge_sorted(atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, w) in atoms {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

/// Uniform weight `1/N` per eigenvalue, counted with multiplicity.
pub fn esd_from_eigenvalues(eigs: &[f64]) -> Result<DiscreteSpectralMeasure> {
    if eigs.is_empty() {
        return Err(Error::InvalidArgument("no eigenvalues".into()));
    }
    if eigs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite eigenvalue".into()));
    }
    let w = 1.0 / eigs.len() as f64;
    let mut atoms: Vec<(f64, f64)> = eigs.iter().map(|&x| (x, w)).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(DiscreteSpectralMeasure {
        atoms: merge_sorted(atoms),
    })
}

/// Equal-weight mixture; averaging replicate ESDs estimates the EESD.
pub fn average_measures(ms: &[DiscreteSpectralMeasure]) -> Result<DiscreteSpectralMeasure> {
    if ms.is_empty() {
        return Err(Error::InvalidArgument("nothing to average".into()));
    }
    let r = ms.len() as f64;
    let mut atoms: Vec<(f64, f64)> = ms
        .iter()
        .flat_map(|m| m.atoms.iter().map(move |&(x, w)| (x, w / r)))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(DiscreteSpectralMeasure {
        atoms: merge_sorted(atoms),
    })
}

/// `μ_M(B) = μ(B ∩ [−M, M]) + μ([−M, M]ᶜ)·1(0 ∈ B)`.
pub fn truncate_measure(mu: &DiscreteSpectralMeasure, m: f64) -> Result<DiscreteSpectralMeasure> {
    if m.is_nan() || m <= 0.0 {
        return Err(Error::InvalidArgument(format!("truncation level must be positive, got {m}")));
    }
    let mut excess = 0.0;
    let mut atoms = Vec::with_capacity(mu.atoms.len() + 1);
    for &(x, w) in &mu.atoms {
        if x.abs() <= m {
            atoms.push((x, w));
        } else {
            excess += w;
        }
    }
    if excess > 0.0 {
        atoms.push((0.0, excess));
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(DiscreteSpectralMeasure {
        atoms: merge_sorted(atoms),
    })
}

/// `m[j] = Σ w·x^j`, `j = 1..=K`.
pub fn measure_moments(mu: &DiscreteSpectralMeasure, k: usize) -> MomentSequence {
    let mut values = vec![0.0; k];
    for &(x, w) in &mu.atoms {
        let mut p = w;
        for v in values.iter_mut() {
            p *= x;
            *v += p;
        }
    }
    MomentSequence::from_values(values)
}

/// Marčenko–Pastur law `ν_λ`: an atom `1 − 1/λ` at zero when `λ > 1`, plus
/// density `√((λ₊ − x)(x − λ₋)) / (2πλx)` on `[λ₋, λ₊]`, `λ± = (1 ± √λ)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpLaw {
    lambda: f64,
}

/// Absolute quadrature target for MP CDF evaluation.
const MP_QUAD_TOL: f64 = 1e-11;

impl MpLaw {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "aspect ratio must lie in (0, ∞), got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda_minus(&self) -> f64 {
        (1.0 - self.lambda.sqrt()).powi(2)
    }

    pub fn lambda_plus(&self) -> f64 {
        (1.0 + self.lambda.sqrt()).powi(2)
    }

    pub fn atom_at_zero(&self) -> f64 {
        if self.lambda > 1.0 {
            1.0 - 1.0 / self.lambda
        } else {
            0.0
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let (a, b) = (self.lambda_minus(), self.lambda_plus());
        if x <= a || x >= b || x <= 0.0 {
            return 0.0;
        }
        ((b - x) * (x - a)).sqrt() / (2.0 * PI * self.lambda * x)
    }

    /// Angle parametrization `x = a + (b − a)(1 − cos θ)/2` of the support,
    /// which removes the square-root endpoint behaviour.
    fn theta_of(&self, x: f64) -> f64 {
        let (a, b) = (self.lambda_minus(), self.lambda_plus());
        let t = 1.0 - 2.0 * (x - a) / (b - a);
        t.clamp(-1.0, 1.0).acos()
    }

    fn angular_density(&self, theta: f64) -> f64 {
        let (a, b) = (self.lambda_minus(), self.lambda_plus());
        let half = 0.5 * (b - a);
        let x = a + half * (1.0 - theta.cos());
        if x <= 0.0 {
            return 0.0;
        }
        let s = theta.sin();
        half * half * s * s / (2.0 * PI * self.lambda * x)
    }

    fn continuous_mass(&self, theta_lo: f64, theta_hi: f64) -> f64 {
        if theta_hi <= theta_lo {
            return 0.0;
        }
        integrate_adaptive(|t| self.angular_density(t), theta_lo, theta_hi, MP_QUAD_TOL)
    }

    /// `ν_λ((−∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let atom = if x >= 0.0 { self.atom_at_zero() } else { 0.0 };
        if x <= self.lambda_minus() {
            return atom;
        }
        if x >= self.lambda_plus() {
            return 1.0;
        }
        (atom + self.continuous_mass(0.0, self.theta_of(x))).min(1.0)
    }

    /// `ν_λ((−∞, x))`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if x == 0.0 {
            self.cdf(x) - self.atom_at_zero()
        } else {
            self.cdf(x)
        }
    }

    /// CDF at ascending points, integrating only between neighbours.
    pub fn cdf_sorted(&self, xs: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(xs.len());
        let mut theta_prev = 0.0;
        let mut acc = 0.0;
        for &x in xs {
            let atom = if x >= 0.0 { self.atom_at_zero() } else { 0.0 };
            if x <= self.lambda_minus() {
                out.push(atom);
                continue;
            }
            if x >= self.lambda_plus() {
                out.push(1.0);
                continue;
            }
            let theta = self.theta_of(x);
            acc += self.continuous_mass(theta_prev, theta);
            theta_prev = theta;
            out.push((atom + acc).min(1.0));
        }
        out
    }
}

pub fn mp_cdf(law: &MpLaw, x: f64) -> f64 {
    law.cdf(x)
}

/// Unit-variance semicircle law on `[−2, 2]`.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
    }
}

pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * PI)
    }
}

/// A law to measure Kolmogorov distances between.
#[derive(Clone, Copy, Debug)]
pub enum SpectralLaw<'a> {
    Discrete(&'a DiscreteSpectralMeasure),
    MarchenkoPastur(MpLaw),
    Semicircle,
}

impl<'a> From<&'a DiscreteSpectralMeasure> for SpectralLaw<'a> {
    fn from(m: &'a DiscreteSpectralMeasure) -> Self {
        SpectralLaw::Discrete(m)
    }
}

impl From<MpLaw> for SpectralLaw<'_> {
    fn from(m: MpLaw) -> Self {
        SpectralLaw::MarchenkoPastur(m)
    }
}

impl SpectralLaw<'_> {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            SpectralLaw::Discrete(m) => m.cdf(x),
            SpectralLaw::MarchenkoPastur(l) => l.cdf(x),
            SpectralLaw::Semicircle => semicircle_cdf(x),
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            SpectralLaw::Discrete(m) => (m.atoms[0].0, m.atoms[m.atoms.len() - 1].0),
            SpectralLaw::MarchenkoPastur(l) => (l.lambda_minus().min(0.0), l.lambda_plus()),
            SpectralLaw::Semicircle => (-2.0, 2.0),
        }
    }

    /// Right and left CDF values at ascending points.
    fn cdf_both_sorted(&self, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            SpectralLaw::MarchenkoPastur(l) => {
                let right = l.cdf_sorted(xs);
                let left = xs
                    .iter()
                    .zip(&right)
                    .map(|(&x, &r)| if x == 0.0 { r - l.atom_at_zero() } else { r })
                    .collect();
                (right, left)
            }
            SpectralLaw::Semicircle => {
                let v: Vec<f64> = xs.iter().map(|&x| semicircle_cdf(x)).collect();
                (v.clone(), v)
            }
            SpectralLaw::Discrete(m) => {
                let right: Vec<f64> = xs.iter().map(|&x| m.cdf(x)).collect();
                let left = xs
                    .iter()
                    .map(|&x| {
                        let idx = m.atoms.partition_point(|a| a.0 < x);
                        m.atoms[..idx].iter().map(|a| a.1).sum()
                    })
                    .collect();
                (right, left)
            }
        }
    }
}

/// `sup_x |F_a(x) − F_b(x)|`.
///
/// Exact when at least one side is discrete: between consecutive atoms the
/// step function is constant and the other CDF is monotone, so the supremum
/// is attained at an atom from the left or from the right. Two continuous
/// laws are compared on a uniform grid of 20 001 points over the joint
/// support.
pub fn kolmogorov_distance<'a, 'b>(
    a: impl Into<SpectralLaw<'a>>,
    b: impl Into<SpectralLaw<'b>>,
) -> f64 {
    let (a, b) = (a.into(), b.into());
    match (a, b) {
        (SpectralLaw::Discrete(x), SpectralLaw::Discrete(y)) => discrete_distance(x, y),
        (SpectralLaw::Discrete(d), other) | (other, SpectralLaw::Discrete(d)) => {
            discrete_vs_law(d, &other)
        }
        (x, y) => {
            let (lo_a, hi_a) = x.support();
            let (lo_b, hi_b) = y.support();
            let (lo, hi) = (lo_a.min(lo_b), hi_a.max(hi_b));
            let steps = 20_000;
            let mut points: Vec<f64> = (0..=steps)
                .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
                .collect();
            points.push(0.0);
            points.sort_by(f64::total_cmp);
            let (xr, xl) = x.cdf_both_sorted(&points);
            let (yr, yl) = y.cdf_both_sorted(&points);
            xr.iter()
                .zip(&yr)
                .chain(xl.iter().zip(&yl))
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
        }
    }
}

fn discrete_distance(x: &DiscreteSpectralMeasure, y: &DiscreteSpectralMeasure) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fx, mut fy) = (0.0, 0.0);
    let mut best: f64 = 0.0;
    while i < x.atoms.len() || j < y.atoms.len() {
        let next_x = x.atoms.get(i).map_or(f64::INFINITY, |a| a.0);
        let next_y = y.atoms.get(j).map_or(f64::INFINITY, |a| a.0);
        let loc = next_x.min(next_y);
        while i < x.atoms.len() && x.atoms[i].0 == loc {
            fx += x.atoms[i].1;
            i += 1;
        }
        while j < y.atoms.len() && y.atoms[j].0 == loc {
            fy += y.atoms[j].1;
            j += 1;
        }
        best = best.max((fx - fy).abs());
    }
    best.min(1.0)
}

fn discrete_vs_law(d: &DiscreteSpectralMeasure, law: &SpectralLaw<'_>) -> f64 {
    let xs: Vec<f64> = d.atoms.iter().map(|a| a.0).collect();
    let (right, left) = law.cdf_both_sorted(&xs);
    let mut below = 0.0;
    let mut best: f64 = 0.0;
    for (k, &(_, w)) in d.atoms.iter().enumerate() {
        best = best.max((below - left[k]).abs());
        below += w;
        best = best.max((below.min(1.0) - right[k]).abs());
    }
    best = best.max((1.0 - law.cdf(f64::INFINITY)).abs());
    best.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freemoments::mp_moments;
    use proptest::prelude::*;

    fn dm(atoms: &[(f64, f64)]) -> DiscreteSpectralMeasure {
        DiscreteSpectralMeasure::new(atoms.to_vec()).unwrap()
    }

    /// Composite Simpson on the angle parametrization, independent of the
    /// adaptive rule.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    /// `∫ x^j dν_λ` by Simpson's rule in the variable `x = a + (b−a)(1−cos θ)/2`.
    fn mp_moment_by_quadrature(lambda: f64, j: i32) -> f64 {
        let (a, b) = ((1.0 - lambda.sqrt()).powi(2), (1.0 + lambda.sqrt()).powi(2));
        let half = 0.5 * (b - a);
        let f = |t: f64| {
            let x = a + half * (1.0 - t.cos());
            if x <= 0.0 {
                return 0.0;
            }
            let s = t.sin();
            x.powi(j) * half * half * s * s / (2.0 * PI * lambda * x)
        };
        simpson(f, 0.0, PI, 20_000)
    }

    #[test]
    fn esd_examples() {
        let m = esd_from_eigenvalues(&[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.atoms(), &[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(esd_from_eigenvalues(&[3.0]).unwrap().atoms(), &[(3.0, 1.0)]);
        let m = esd_from_eigenvalues(&[3.0, 1.0, 2.0, 4.0, 5.0]).unwrap();
        assert_eq!(m.len(), 5);
        assert!(m.atoms().iter().all(|a| a.1 == 0.2));
        assert!(esd_from_eigenvalues(&[]).is_err());
    }

    #[test]
    fn averaging_examples() {
        let avg = average_measures(&[DiscreteSpectralMeasure::point_mass(0.0), DiscreteSpectralMeasure::point_mass(1.0)])
            .unwrap();
        assert_eq!(avg.atoms(), &[(0.0, 0.5), (1.0, 0.5)]);
        let m = dm(&[(0.0, 0.25), (2.0, 0.75)]);
        assert_eq!(average_measures(&[m.clone(), m.clone(), m.clone()]).unwrap(), m);
        let avg = average_measures(&[dm(&[(0.0, 0.5), (1.0, 0.5)]), dm(&[(1.0, 1.0)])]).unwrap();
        assert_eq!(avg.atoms(), &[(0.0, 0.25), (1.0, 0.75)]);
        assert!(average_measures(&[]).is_err());
    }

    #[test]
    fn construction_validates() {
        assert!(DiscreteSpectralMeasure::new(vec![(0.0, 0.5)]).is_err());
        assert!(DiscreteSpectralMeasure::new(vec![(0.0, 1.5), (1.0, -0.5)]).is_err());
        assert!(DiscreteSpectralMeasure::new(vec![]).is_err());
        let m = dm(&[(1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]);
        assert_eq!(m.atoms(), &[(0.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn distance_examples() {
        let mu = dm(&[(0.0, 0.3), (1.0, 0.7)]);
        assert_eq!(kolmogorov_distance(&mu, &mu), 0.0);
        let d0 = DiscreteSpectralMeasure::point_mass(0.0);
        let d1 = DiscreteSpectralMeasure::point_mass(1.0);
        assert_eq!(kolmogorov_distance(&d0, &d1), 1.0);
        assert_eq!(kolmogorov_distance(&dm(&[(0.0, 0.5), (1.0, 0.5)]), &d0), 0.5);
    }

    #[test]
    fn truncation_examples() {
        let m = 3.0;
        let inside = dm(&[(-2.0, 0.5), (3.0, 0.5)]);
        assert_eq!(truncate_measure(&inside, m).unwrap(), inside);
        let mixed = dm(&[(-2.0 * m, 0.5), (0.0, 0.25), (m / 2.0, 0.25)]);
        assert_eq!(
            truncate_measure(&mixed, m).unwrap().atoms(),
            &[(0.0, 0.75), (m / 2.0, 0.25)]
        );
        assert_eq!(
            truncate_measure(&DiscreteSpectralMeasure::point_mass(2.0 * m), m).unwrap().atoms(),
            &[(0.0, 1.0)]
        );
        assert!(truncate_measure(&inside, 0.0).is_err());
    }

    #[test]
    fn moment_examples() {
        assert_eq!(measure_moments(&DiscreteSpectralMeasure::point_mass(2.0), 3).as_slice(), &[2.0, 4.0, 8.0]);
        assert_eq!(measure_moments(&dm(&[(-1.0, 0.5), (1.0, 0.5)]), 4).as_slice(), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(measure_moments(&dm(&[(0.0, 0.5), (2.0, 0.5)]), 2).as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn mp_cdf_examples() {
        let l = MpLaw::new(2.0).unwrap();
        assert_eq!(mp_cdf(&l, -0.1), 0.0);
        assert!((mp_cdf(&l, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(l.cdf_left(0.0), 0.0);
        assert_eq!(mp_cdf(&l, l.lambda_plus()), 1.0);
        let one = MpLaw::new(1.0).unwrap();
        assert_eq!((one.lambda_minus(), one.lambda_plus()), (0.0, 4.0));
        assert_eq!(mp_cdf(&one, -1e-9), 0.0);
        assert!(MpLaw::new(0.0).is_err());
    }

    #[test]
    fn mp_total_mass_and_monotonicity() {
        for lambda in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let l = MpLaw::new(lambda).unwrap();
            let b = l.lambda_plus();
            let mass = l.atom_at_zero() + l.continuous_mass(0.0, PI);
            assert!((mass - 1.0).abs() <= 1e-8, "λ = {lambda}: {mass}");
            assert!((l.cdf(b * (1.0 - 1e-12)) - 1.0).abs() <= 1e-8);
            let grid: Vec<f64> = (0..1000).map(|i| -0.5 + (b + 1.0) * i as f64 / 999.0).collect();
            let vals = l.cdf_sorted(&grid);
            for w in vals.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
            for (x, v) in grid.iter().zip(&vals).step_by(97) {
                assert!((l.cdf(*x) - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mp_moments_match_density_integration() {
        for lambda in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let m = mp_moments(lambda, 6).unwrap();
            for j in 1..=6 {
                let by_quad = mp_moment_by_quadrature(lambda, j as i32);
                let got = m.as_slice()[j - 1];
                assert!((by_quad - got).abs() <= 1e-6 * got.abs().max(1.0), "λ={lambda}, j={j}: {by_quad} vs {got}");
            }
        }
        // λ = 1: m[2] = 2, λ = 0.5: m[2] = 1.5
        assert!((mp_moment_by_quadrature(1.0, 2) - 2.0).abs() < 1e-6);
        assert!((mp_moment_by_quadrature(0.5, 2) - 1.5).abs() < 1e-6);
        assert!((mp_moment_by_quadrature(2.0, 1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn semicircle_cdf_matches_density() {
        for x in [-1.9, -1.0, -0.2, 0.0, 0.5, 1.3, 1.99] {
            let by_quad = simpson(semicircle_density, -2.0, x, 20_000);
            assert!((semicircle_cdf(x) - by_quad).abs() < 1e-5, "x = {x}");
        }
        assert_eq!(semicircle_cdf(0.0), 0.5);
    }

    #[test]
    fn distance_to_continuous_laws() {
        let l = MpLaw::new(2.0).unwrap();
        // An atom of weight 1/2 at zero matches the MP atom exactly.
        let d = kolmogorov_distance(&DiscreteSpectralMeasure::point_mass(0.0), l);
        assert!((d - 0.5).abs() < 1e-12);
        let far = DiscreteSpectralMeasure::point_mass(100.0);
        assert!((kolmogorov_distance(&far, SpectralLaw::Semicircle) - 1.0).abs() < 1e-15);
        let center = DiscreteSpectralMeasure::point_mass(0.0);
        assert!((kolmogorov_distance(&center, SpectralLaw::Semicircle) - 0.5).abs() < 1e-15);
        let quantiles: Vec<f64> = (0..2000)
            .map(|i| {
                let p = (i as f64 + 0.5) / 2000.0;
                let (mut lo, mut hi) = (-2.0, 2.0);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if semicircle_cdf(mid) < p { lo = mid } else { hi = mid }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let esd = esd_from_eigenvalues(&quantiles).unwrap();
        let d = kolmogorov_distance(&esd, SpectralLaw::Semicircle);
        assert!((d - 0.5 / 2000.0).abs() < 1e-9, "{d}");
        let self_d = kolmogorov_distance(SpectralLaw::MarchenkoPastur(l), SpectralLaw::MarchenkoPastur(l));
        assert!(self_d < 1e-12);
    }

    #[test]
    fn csv_exports() {
        let m = dm(&[(0.0, 0.25), (1.0, 0.5), (2.0, 0.25)]);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "location,weight\n0,0.25\n1,0.5\n2,0.25\n");
        let mut buf = Vec::new();
        m.write_histogram_csv(&mut buf, 2).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bin_left,bin_right,mass\n0,1,0.25\n1,2,0.75\n");
    }

    fn arb_measure() -> impl Strategy<Value = DiscreteSpectralMeasure> {
        prop::collection::vec((-5i32..5, 1u32..10), 1..8).prop_map(|raw| {
            let total: u32 = raw.iter().map(|r| r.1).sum();
            let atoms = raw
                .iter()
                .map(|&(x, w)| (f64::from(x) * 0.5, f64::from(w) / f64::from(total)))
                .collect::<Vec<_>>();
            let sum: f64 = atoms.iter().map(|a| a.1).sum();
            DiscreteSpectralMeasure::new(atoms.into_iter().map(|(x, w)| (x, w / sum)).collect())
                .unwrap()
        })
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in arb_measure(), b in arb_measure(), c in arb_measure()) {
            let ab = kolmogorov_distance(&a, &b);
            prop_assert!((ab - kolmogorov_distance(&b, &a)).abs() < 1e-15);
            prop_assert!(kolmogorov_distance(&a, &a) < 1e-15);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!(ab <= kolmogorov_distance(&a, &c) + kolmogorov_distance(&c, &b) + 1e-12);
        }

        #[test]
        fn truncation_preserves_mass(mu in arb_measure(), m in 0.25f64..3.0) {
            let t = truncate_measure(&mu, m).unwrap();
            prop_assert!((t.total_mass() - mu.total_mass()).abs() < 1e-12);
            prop_assert!(t.atoms().iter().all(|a| a.0.abs() <= m));
            let mom = measure_moments(&t, 6);
            for j in 1..=6 {
                prop_assert!(mom.as_slice()[j - 1].abs() <= m.powi(j as i32) + 1e-12);
            }
        }
    }
}

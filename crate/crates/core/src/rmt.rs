//! Random-matrix samplers, Hermitian eigendecomposition, spectral truncation
//! and evaluation of noncommutative words on matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freemoments::{MomentSequence, NoncommPolynomial, NoncommWord};
use crate::laws::Law;
use crate::ncpart::Letter;

pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Largest imaginary part tolerated when a non-Hermitian `p(W, Y)` is
/// declared to have real spectrum.
pub const IMAG_TOL: f64 = 1e-8;

/// A `(master_seed, stream_id)` pair. Each pair yields an independent,
/// reproducible ChaCha20 stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Square matrix equal to its conjugate transpose. The stored entries are
/// exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Accepts `m` if it is Hermitian to within [`HERMITIAN_TOL`] relative to
    /// its largest entry, then replaces it by `(m + m*)/2`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        let dev = hermitian_deviation(&m);
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > HERMITIAN_TOL * scale.max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: ComplexMatrix) -> Self {
        let n = m.nrows();
        let mut h = m;
        for j in 0..n {
            h[(j, j)].im = 0.0;
            for i in 0..j {
                let z = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        Self(h)
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    /// `U H U*`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot conjugate a {0}x{0} matrix by a {1}x{2} one",
                self.dim(),
                u.nrows(),
                u.ncols()
            )));
        }
        let uh = u * &self.0;
        Ok(Self::symmetrized(uh * u.adjoint()))
    }
}

fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `m × n` matrix of i.i.d. standard complex normals (`E|Z|² = 1`).
pub fn sample_complex_gaussian<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> ComplexMatrix {
    DMatrix::from_fn(m, n, |_, _| standard_complex(rng))
}

/// `W = X* X / M` with `X` an `M × N` complex Gaussian matrix.
pub fn sample_wishart<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> HermitianMatrix {
    let x = sample_complex_gaussian(m, n, rng);
    wishart_from_data(&x)
}

pub fn wishart_from_data(x: &ComplexMatrix) -> HermitianMatrix {
    let m = x.nrows() as f64;
    let g = x.ad_mul(x) / Complex64::new(m, 0.0);
    HermitianMatrix::symmetrized(g)
}

/// Complex Wigner matrix scaled by `1/√N`: standard complex normal entries
/// above the diagonal, real `N(0,1)` on it. The ESD tends to the semicircle
/// on `[−2, 2]`.
pub fn sample_wigner<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let s = 1.0 / (n as f64).sqrt();
    let mut h = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        let d: f64 = StandardNormal.sample(rng);
        h[(j, j)] = Complex64::new(d * s, 0.0);
        for i in 0..j {
            let z = standard_complex(rng) * s;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    HermitianMatrix(h)
}

/// Haar unitary from the QR factorization of a Ginibre matrix. With
/// `G = QR`, column `j` of `Q` is multiplied by `R_jj/|R_jj|` so that the
/// triangular factor has positive diagonal, which makes the factorization
/// unique and the law of `Q` invariant.
pub fn sample_haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = sample_complex_gaussian(n, n, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        if norm > 0.0 {
            let phase = d / norm;
            for z in q.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
    }
    q
}

/// Ascending eigenvalues and a unitary basis with `H = V diag(λ) V*`.
pub fn hermitian_eigen(h: &HermitianMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = h.dim();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(h.0.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let basis = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, basis)
}

/// Ascending eigenvalues only; cheaper than [`hermitian_eigen`].
pub fn hermitian_eigenvalues(h: &HermitianMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = h.0.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `V diag(d) V*`.
pub fn from_eigen(values: &[f64], basis: &ComplexMatrix) -> HermitianMatrix {
    let mut scaled = basis.clone();
    for (j, &d) in values.iter().enumerate() {
        for z in scaled.column_mut(j).iter_mut() {
            *z *= d;
        }
    }
    HermitianMatrix::symmetrized(scaled * basis.adjoint())
}

/// Result of zeroing the eigenvalues of modulus above `M`.
#[derive(Clone, Debug)]
pub struct Truncation {
    pub matrix: HermitianMatrix,
    /// Eigenvalues of the truncated matrix, ascending in the original order.
    pub eigenvalues: Vec<f64>,
    pub rank_diff: usize,
}

pub fn spectral_truncation(y: &HermitianMatrix, m: f64) -> Result<Truncation> {
    if m.is_nan() || m <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "truncation level must be positive, got {m}"
        )));
    }
    let (values, basis) = hermitian_eigen(y);
    let rank_diff = values.iter().filter(|x| x.abs() > m).count();
    let kept: Vec<f64> = values
        .iter()
        .map(|&x| if x.abs() > m { 0.0 } else { x })
        .collect();
    let matrix = if rank_diff == 0 {
        y.clone()
    } else {
        from_eigen(&kept, &basis)
    };
    Ok(Truncation {
        matrix,
        eigenvalues: kept,
        rank_diff,
    })
}

/// `Y′ = V diag(λ·1{|λ| ≤ M}) V*` and `rank(Y − Y′)`.
pub fn spectral_truncate_matrix(y: &HermitianMatrix, m: f64) -> Result<(HermitianMatrix, usize)> {
    let t = spectral_truncation(y, m)?;
    Ok((t.matrix, t.rank_diff))
}

/// Matrices standing for the letters `W` and `Y`.
#[derive(Clone, Copy, Debug)]
pub struct Assignment<'a> {
    pub w: &'a ComplexMatrix,
    pub y: &'a ComplexMatrix,
}

impl<'a> Assignment<'a> {
    pub fn new(w: &'a ComplexMatrix, y: &'a ComplexMatrix) -> Result<Self> {
        let n = w.nrows();
        if !w.is_square() || !y.is_square() || y.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "letters need equal square matrices, got {}x{} and {}x{}",
                w.nrows(),
                w.ncols(),
                y.nrows(),
                y.ncols()
            )));
        }
        Ok(Self { w, y })
    }

    pub fn hermitian(w: &'a HermitianMatrix, y: &'a HermitianMatrix) -> Result<Self> {
        Self::new(w.as_matrix(), y.as_matrix())
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn get(&self, letter: Letter) -> &'a ComplexMatrix {
        match letter {
            Letter::W => self.w,
            Letter::Y => self.y,
        }
    }
}

pub fn evaluate_word(assign: &Assignment<'_>, word: &NoncommWord) -> ComplexMatrix {
    let letters = word.letters();
    let Some((first, rest)) = letters.split_first() else {
        return DMatrix::identity(assign.dim(), assign.dim());
    };
    rest.iter()
        .fold(assign.get(*first).clone(), |acc, &l| acc * assign.get(l))
}

/// `Tr(A B)` without forming the product.
fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.nrows();
    let mut t = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..a.ncols() {
            t += a[(i, j)] * b[(j, i)];
        }
    }
    t
}

pub fn trace_of_word(assign: &Assignment<'_>, word: &NoncommWord) -> Complex64 {
    let letters = word.letters();
    match letters.split_last() {
        None => Complex64::new(assign.dim() as f64, 0.0),
        Some((&last, [])) => assign.get(last).trace(),
        Some((&last, init)) => {
            let prefix = evaluate_word(assign, &NoncommWord::new(init.to_vec()));
            trace_of_product(&prefix, assign.get(last))
        }
    }
}

/// Unnormalized trace `Tr p(W, Y)`.
pub fn trace_of_poly(assign: &Assignment<'_>, p: &NoncommPolynomial) -> Complex64 {
    let mut t = p.constant_term() * assign.dim() as f64;
    for (word, c) in p.terms() {
        t += c * trace_of_word(assign, word);
    }
    t
}

/// `(1/N) Tr p(W, Y)`.
pub fn normalized_trace_of_poly(assign: &Assignment<'_>, p: &NoncommPolynomial) -> Complex64 {
    trace_of_poly(assign, p) / assign.dim() as f64
}

/// `p(W, Y)` as a matrix.
pub fn evaluate_poly(assign: &Assignment<'_>, p: &NoncommPolynomial) -> ComplexMatrix {
    let n = assign.dim();
    let mut out = ComplexMatrix::identity(n, n) * p.constant_term();
    for (word, c) in p.terms() {
        out += evaluate_word(assign, word) * *c;
    }
    out
}

/// Number of singular values above `tol` times the largest one.
pub fn numerical_rank(a: &ComplexMatrix, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Real spectrum of `p(W, Y)`, ascending.
///
/// `W Y` with `W` positive semidefinite goes through `W^{1/2} Y W^{1/2}`.
/// A Hermitian `p(W, Y)` uses the Hermitian solver. Anything else uses the
/// complex Schur form and must have eigenvalues within [`IMAG_TOL`] of the
/// real line.
pub fn poly_spectrum(
    w: &HermitianMatrix,
    y: &HermitianMatrix,
    p: &NoncommPolynomial,
    w_is_psd: bool,
) -> Result<Vec<f64>> {
    let assign = Assignment::hermitian(w, y)?;
    if w_is_psd && p.is_product_xy() {
        let (values, basis) = hermitian_eigen(w);
        let roots: Vec<f64> = values.iter().map(|&x| x.max(0.0).sqrt()).collect();
        let half = from_eigen(&roots, &basis);
        let s = half.as_matrix() * y.as_matrix() * half.as_matrix();
        return Ok(hermitian_eigenvalues(&HermitianMatrix::symmetrized(s)));
    }
    let m = evaluate_poly(&assign, p);
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if hermitian_deviation(&m) <= HERMITIAN_TOL * scale {
        return Ok(hermitian_eigenvalues(&HermitianMatrix::symmetrized(m)));
    }
    let n = m.nrows();
    let schur = nalgebra::Schur::try_new(m, 1e-14 * scale, 10_000 * n.max(1)).ok_or_else(|| {
        Error::InvalidArgument(format!("Schur iteration did not converge for {p}"))
    })?;
    let eigs = schur
        .eigenvalues()
        .ok_or_else(|| Error::InvalidArgument(format!("no triangular Schur form for {p}")))?;
    let max_imag = eigs.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_imag > IMAG_TOL {
        return Err(Error::ComplexSpectrum {
            poly: p.to_string(),
            max_imag,
        });
    }
    let mut v: Vec<f64> = eigs.iter().map(|z| z.re).collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// How `Y_N` is generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum YSpec {
    /// i.i.d. diagonal entries.
    DiagIid { dist: Law },
    /// Diagonal of quantiles `F⁻¹((i − 1/2)/N)`.
    DiagQuantile { measure: Law },
    /// `U Y U*` for an independent Haar unitary `U`.
    Conjugated { inner: Box<YSpec> },
}

impl YSpec {
    pub fn law(&self) -> Law {
        match self {
            YSpec::DiagIid { dist } => *dist,
            YSpec::DiagQuantile { measure } => *measure,
            YSpec::Conjugated { inner } => inner.law(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            YSpec::DiagIid { dist } => {
                dist.validate()?;
                match dist {
                    Law::BernoulliPm1 | Law::Uniform { .. } | Law::Cauchy | Law::Point { .. } => {
                        Ok(())
                    }
                    other => Err(Error::InvalidConfig(format!(
                        "diag_iid supports bernoulli, uniform, cauchy and point, not {other}"
                    ))),
                }
            }
            YSpec::DiagQuantile { measure } => measure.validate(),
            YSpec::Conjugated { inner } => inner.validate(),
        }
    }

    /// Moments of the limiting spectral law of `Y_N`.
    pub fn limit_moments(&self, k: usize) -> Result<MomentSequence> {
        self.law().moments(k)
    }

    /// True when `Y_N` is diagonal (no conjugation).
    pub fn is_diagonal(&self) -> bool {
        !matches!(self, YSpec::Conjugated { .. })
    }
}

pub fn make_y_matrix<R: Rng + ?Sized>(spec: &YSpec, n: usize, rng: &mut R) -> Result<HermitianMatrix> {
    spec.validate()?;
    match spec {
        YSpec::DiagIid { dist } => {
            let d = (0..n).map(|_| dist.sample(rng)).collect::<Result<Vec<_>>>()?;
            Ok(HermitianMatrix::from_real_diagonal(&d))
        }
        YSpec::DiagQuantile { measure } => {
            let d: Vec<f64> = (0..n)
                .map(|i| measure.quantile((i as f64 + 0.5) / n as f64))
                .collect();
            Ok(HermitianMatrix::from_real_diagonal(&d))
        }
        YSpec::Conjugated { inner } => {
            let y = make_y_matrix(inner, n, rng)?;
            let u = sample_haar_unitary(n, rng);
            y.conjugate_by(&u)
        }
    }
}

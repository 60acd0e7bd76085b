//! Dense complex linear algebra. Thin layer over `nalgebra` with the
//! handful of quantum-information helpers the rest of the crate needs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used by [`CMatrix::is_hermitian`] and the eigensolver guard.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

/// Row-major serialized form: `re` and `im` are kept as separate arrays.
#[derive(Serialize, Deserialize)]
struct CMatrixRepr {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for CMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (rows, cols) = self.0.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(self.0[(i, j)].re);
                im.push(self.0[(i, j)].im);
            }
        }
        CMatrixRepr { rows, cols, re, im }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = CMatrixRepr::deserialize(d)?;
        if r.re.len() != r.rows * r.cols || r.im.len() != r.rows * r.cols {
            return Err(serde::de::Error::custom("entry count does not match rows*cols"));
        }
        Ok(CMatrix(DMatrix::from_fn(r.rows, r.cols, |i, j| {
            C64::new(r.re[i * r.cols + j], r.im[i * r.cols + j])
        })))
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        CMatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(CMatrix(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        CMatrix(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// |v⟩⟨v|
    pub fn outer(v: &DVector<C64>) -> Self {
        CMatrix(v * v.adjoint())
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        CMatrix(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        CMatrix(&self.0 * C64::new(s, 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise deviation |M − M†|.
    pub fn hermitian_deviation(&self) -> f64 {
        if self.rows() != self.cols() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Re tr(self · other).
    pub fn trace_product_re(&self, other: &CMatrix) -> f64 {
        trace_product(&self.0, &other.0).re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let e = hermitian_eig(self)?;
        Ok(*e.eigenvalues.last().unwrap_or(&0.0))
    }
}

impl From<DMatrix<C64>> for CMatrix {
    fn from(m: DMatrix<C64>) -> Self {
        CMatrix(m)
    }
}

impl<'a> Mul<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &'a CMatrix) -> CMatrix {
        CMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &'a CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &'a CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

/// tr(AB) without forming the product.
pub(crate) fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let m = a.ncols();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..m {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

#[derive(Clone, Debug)]
pub struct EigDecomposition {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns, matching `eigenvalues`.
    pub eigenvectors: CMatrix,
}

impl EigDecomposition {
    pub fn reconstruct(&self) -> CMatrix {
        let v = self.eigenvectors.inner();
        let n = v.nrows();
        let mut scaled = v.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            for i in 0..n {
                scaled[(i, j)] *= l;
            }
        }
        CMatrix(&scaled * v.adjoint())
    }

    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.eigenvectors.inner().column(k).into_owned()
    }
}

pub fn hermitian_eig(m: &CMatrix) -> Result<EigDecomposition> {
    if m.rows() != m.cols() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let scale = m.frobenius_norm().max(1.0);
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(hermitian_eig_unchecked(m.inner()))
}

/// Eigendecomposition without the Hermiticity guard; the input is
/// symmetrized first so round-off never leaks into the solver.
pub(crate) fn hermitian_eig_unchecked(m: &DMatrix<C64>) -> EigDecomposition {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    EigDecomposition { eigenvalues, eigenvectors: CMatrix(vecs) }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix(a.0.kronecker(&b.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Traces out `side` of an operator on C^{d_a} ⊗ C^{d_b}.
pub fn partial_trace(m: &CMatrix, d_a: usize, d_b: usize, side: Subsystem) -> Result<CMatrix> {
    if m.rows() != d_a * d_b || m.cols() != d_a * d_b {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} operator is not on {d_a}x{d_b} dimensions",
            m.rows(),
            m.cols()
        )));
    }
    let x = &m.0;
    Ok(match side {
        Subsystem::B => CMatrix(DMatrix::from_fn(d_a, d_a, |i, j| {
            (0..d_b).map(|k| x[(i * d_b + k, j * d_b + k)]).sum()
        })),
        Subsystem::A => CMatrix(DMatrix::from_fn(d_b, d_b, |k, l| {
            (0..d_a).map(|i| x[(i * d_b + k, i * d_b + l)]).sum()
        })),
    })
}

/// Normalized complex Gaussian vector (uniform on the unit sphere of C^d).
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<C64> {
    let v = DVector::from_fn(d, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let n = v.norm();
    v / C64::new(n, 0.0)
}

pub fn random_rank_one_projector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    CMatrix::outer(&random_unit_vector(d, rng))
}

/// Haar-random unitary: Gram-Schmidt on a complex Gaussian frame.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let mut cols: Vec<DVector<C64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v = random_unit_vector(d, rng);
        for c in &cols {
            let overlap = c.dotc(&v);
            v -= c * overlap;
        }
        let n = v.norm();
        if n > 1e-8 {
            cols.push(v / C64::new(n, 0.0));
        }
    }
    CMatrix(DMatrix::from_columns(&cols))
}

/// Orthonormalizes `k` Gaussian vectors in C^d (k ≤ d).
pub fn random_orthonormal_frame<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Vec<DVector<C64>> {
    let u = random_unitary(d, rng);
    (0..k.min(d)).map(|j| u.0.column(j).into_owned()).collect()
}

/// Hermitian positive part Σ_{λ>0} λ|v⟩⟨v| and the projector onto it.
pub fn positive_part_projector(m: &DMatrix<C64>, tol: f64) -> DMatrix<C64> {
    let e = hermitian_eig_unchecked(m);
    let n = m.nrows();
    let mut p = DMatrix::zeros(n, n);
    for (k, &l) in e.eigenvalues.iter().enumerate() {
        if l > tol {
            let v = e.vector(k);
            p += &v * v.adjoint();
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let g = DMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        CMatrix((&g + g.adjoint()) * C64::new(0.5, 0.0))
    }

    #[test]
    fn identity_and_diagonal_spectra() {
        let e = hermitian_eig(&CMatrix::identity(4)).unwrap();
        assert!(e.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-14));
        let e = hermitian_eig(&CMatrix::from_real_diagonal(&[-1.0, 3.0])).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14 && (e.eigenvalues[1] + 1.0).abs() < 1e-14);
        assert!((e.eigenvectors.get(1, 0).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_bad_input() {
        let m = CMatrix::from_row_major(
            2,
            2,
            vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        )
        .unwrap();
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian { .. })));
        assert!(matches!(hermitian_eig(&CMatrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..1000 {
            let n = 2 + trial % 7;
            let m = random_hermitian(n, &mut rng);
            let e = hermitian_eig(&m).unwrap();
            let err = (&e.reconstruct() - &m).frobenius_norm();
            assert!(err <= 1e-9 * m.frobenius_norm());
            let v = e.eigenvectors.inner();
            let gram = CMatrix(v.adjoint() * v);
            assert!((&gram - &CMatrix::identity(n)).frobenius_norm() < 1e-10);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn kron_basics() {
        let i2 = CMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), CMatrix::identity(4));
        let p = kron(&CMatrix::from_real_diagonal(&[1.0, 0.0]), &CMatrix::from_real_diagonal(&[0.0, 1.0]));
        assert_eq!(p, CMatrix::from_real_diagonal(&[0.0, 1.0, 0.0, 0.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b, c) = (random_hermitian(2, &mut rng), random_hermitian(3, &mut rng), random_hermitian(2, &mut rng));
        let t = kron(&a, &b).trace() - a.trace() * b.trace();
        assert!(t.norm() < 1e-12);
        let lhs = kron(&kron(&a, &b), &c);
        let rhs = kron(&a, &kron(&b, &c));
        assert!((&lhs - &rhs).frobenius_norm() < 1e-12);
    }

    #[test]
    fn partial_trace_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ra = random_rank_one_projector(2, &mut rng);
        let rb = random_rank_one_projector(3, &mut rng);
        let pt = partial_trace(&kron(&ra, &rb), 2, 3, Subsystem::B).unwrap();
        assert!((&pt - &ra).frobenius_norm() < 1e-12);
        let pt = partial_trace(&kron(&ra, &rb), 2, 3, Subsystem::A).unwrap();
        assert!((&pt - &rb).frobenius_norm() < 1e-12);

        let mut phi = DVector::zeros(16);
        for k in 0..4 {
            phi[k * 4 + k] = C64::new(0.5, 0.0);
        }
        let pt = partial_trace(&CMatrix::outer(&phi), 4, 4, Subsystem::B).unwrap();
        assert!((&pt - &CMatrix::identity(4).scale(0.25)).frobenius_norm() < 1e-14);
        assert!(partial_trace(&CMatrix::identity(5), 2, 2, Subsystem::A).is_err());
    }

    #[test]
    fn partial_trace_linear_and_trace_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = random_unit_vector(12, &mut rng);
        let rho = CMatrix::outer(&v);
        let pt = partial_trace(&rho, 3, 4, Subsystem::A).unwrap();
        assert!((pt.trace().re - 1.0).abs() < 1e-12);
        let x = random_hermitian(12, &mut rng);
        let y = random_hermitian(12, &mut rng);
        let comb = &x.scale(0.3) + &y.scale(-1.7);
        let lhs = partial_trace(&comb, 3, 4, Subsystem::B).unwrap();
        let rhs = &partial_trace(&x, 3, 4, Subsystem::B).unwrap().scale(0.3)
            + &partial_trace(&y, 3, 4, Subsystem::B).unwrap().scale(-1.7);
        assert!((&lhs - &rhs).frobenius_norm() < 1e-12);
    }

    #[test]
    fn projectors_are_idempotent_and_seeded() {
        let p1 = random_rank_one_projector(1, &mut ChaCha8Rng::seed_from_u64(0));
        assert!((p1.get(0, 0) - C64::new(1.0, 0.0)).norm() < 1e-14);
        for seed in 0..50 {
            let p = random_rank_one_projector(5, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!((&(&p * &p) - &p).frobenius_norm() <= 1e-10);
            assert!((p.trace().re - 1.0).abs() < 1e-12 && p.is_hermitian(1e-14));
        }
        let a = random_rank_one_projector(4, &mut ChaCha8Rng::seed_from_u64(1));
        let b = random_rank_one_projector(4, &mut ChaCha8Rng::seed_from_u64(2));
        assert!((&a - &b).frobenius_norm() > 0.0);
    }

    #[test]
    fn serde_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_hermitian(3, &mut rng);
        let s = serde_json::to_string(&m).unwrap();
        let back: CMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}

//! Finite-dimensional arithmetic for a complex Hilbert space truncated to the
//! first `p` coordinates of a fixed complete orthonormal system (CONS).
//!
//! An operator `A` is stored as the matrix `A[j][k] = <A e_k, e_j>`, so the
//! outer product `x ⊗ y : z ↦ <z, y> x` has entries `x_j · conj(y_k)`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default relative tolerance (in HS norm) for self-adjointness checks.
pub const SELF_ADJOINT_TOL: f64 = 1e-9;

/// Truncation of the real CONS `{e_j}` to its first `p` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoordFrame {
    p: usize,
    real_cons: bool,
}

impl CoordFrame {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(invalid("frame dimension p must be at least 1"));
        }
        Ok(Self { p, real_cons: true })
    }

    /// A frame whose designated CONS is not the real one; conjugation is then undefined.
    pub fn non_real(p: usize) -> Result<Self> {
        Ok(Self { real_cons: false, ..Self::new(p)? })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn real_cons(&self) -> bool {
        self.real_cons
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Coordinates `<x, e_j>` of an element of the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementVector {
    coords: DVector<Complex64>,
}

impl ElementVector {
    pub fn new(coords: Vec<Complex64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("element must have at least one coordinate"));
        }
        Ok(Self { coords: DVector::from_vec(coords) })
    }

    pub fn from_real(coords: &[f64]) -> Result<Self> {
        Self::new(coords.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn unit(p: usize, j: usize) -> Self {
        let mut coords = DVector::from_element(p, ZERO);
        coords[j] = Complex64::new(1.0, 0.0);
        Self { coords }
    }

    pub(crate) fn from_dvector(coords: DVector<Complex64>) -> Self {
        Self { coords }
    }

    pub fn p(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<Complex64> {
        &self.coords
    }

    pub fn get(&self, j: usize) -> Complex64 {
        self.coords[j]
    }

    /// `<x, y> = Σ_j x_j conj(y_j)`.
    pub fn inner(&self, other: &ElementVector) -> Result<Complex64> {
        check_dim(self.p(), other.p())?;
        Ok(self
            .coords
            .iter()
            .zip(other.coords.iter())
            .map(|(a, b)| a * b.conj())
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Conjugation relative to the real CONS.
    pub fn conj(&self) -> Self {
        Self { coords: self.coords.map(|c| c.conj()) }
    }

    pub fn real_part(&self) -> Self {
        Self { coords: self.coords.map(|c| Complex64::new(c.re, 0.0)) }
    }

    pub fn imag_part(&self) -> Self {
        Self { coords: self.coords.map(|c| Complex64::new(c.im, 0.0)) }
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        Self { coords: self.coords.map(|c| c * alpha) }
    }
}

/// Dense representation of a (truncated) trace-class operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorRep {
    entries: DMatrix<Complex64>,
}

/// Eigen-decomposition of a self-adjoint operator, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SelfAdjointEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<ElementVector>,
}

impl OperatorRep {
    pub fn zeros(p: usize) -> Self {
        Self { entries: DMatrix::from_element(p, p, ZERO) }
    }

    pub fn identity(p: usize) -> Self {
        Self { entries: DMatrix::identity(p, p) }
    }

    pub fn from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), actual: entries.ncols() });
        }
        if entries.nrows() == 0 {
            return Err(invalid("operator must have dimension at least 1"));
        }
        Ok(Self { entries })
    }

    pub fn from_real(entries: &DMatrix<f64>) -> Result<Self> {
        Self::from_matrix(entries.map(|x| Complex64::new(x, 0.0)))
    }

    /// Row-major real entries.
    pub fn from_real_rows(p: usize, rows: &[f64]) -> Result<Self> {
        check_dim(p * p, rows.len())?;
        Self::from_real(&DMatrix::from_row_slice(p, p, rows))
    }

    pub fn diag(values: &[f64]) -> Self {
        let p = values.len();
        let mut entries = DMatrix::from_element(p, p, ZERO);
        for (j, &v) in values.iter().enumerate() {
            entries[(j, j)] = Complex64::new(v, 0.0);
        }
        Self { entries }
    }

    /// `x ⊗ y`, the rank-one operator `z ↦ <z, y> x`.
    pub fn outer(x: &ElementVector, y: &ElementVector) -> Result<Self> {
        check_dim(x.p(), y.p())?;
        Ok(Self { entries: x.coords() * y.coords().adjoint() })
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn frame(&self) -> CoordFrame {
        CoordFrame { p: self.p(), real_cons: true }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.entries[(j, k)]
    }

    pub fn apply(&self, x: &ElementVector) -> Result<ElementVector> {
        check_dim(self.p(), x.p())?;
        Ok(ElementVector::from_dvector(&self.entries * x.coords()))
    }

    /// `<A, B>_HS = tr(B* A)`.
    pub fn hs_inner(&self, other: &OperatorRep) -> Result<Complex64> {
        check_dim(self.p(), other.p())?;
        Ok(self.entries.iter().zip(other.entries.iter()).map(|(a, b)| a * b.conj()).sum())
    }

    pub fn hs_norm(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diagonal().iter().sum()
    }

    /// Singular values in descending order (full SVD).
    pub fn singular_values(&self) -> Vec<f64> {
        let svd = self.entries.clone().svd(false, false);
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn trace_norm(&self) -> f64 {
        self.singular_values().iter().sum()
    }

    pub fn op_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.adjoint() }
    }

    /// `Ā : x ↦ conj(A conj(x))`, i.e. entrywise conjugation in the real CONS.
    pub fn conj(&self) -> Self {
        Self { entries: self.entries.map(|c| c.conj()) }
    }

    /// `(Ā + A) / 2`.
    pub fn real_part(&self) -> Self {
        Self { entries: self.entries.map(|c| Complex64::new(c.re, 0.0)) }
    }

    /// `(A − Ā) / (2i)`.
    pub fn imag_part(&self) -> Self {
        Self { entries: self.entries.map(|c| Complex64::new(c.im, 0.0)) }
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        Self { entries: self.entries.map(|c| c * alpha) }
    }

    pub fn scale_real(&self, alpha: f64) -> Self {
        Self { entries: self.entries.map(|c| c * alpha) }
    }

    pub fn compose(&self, other: &OperatorRep) -> Result<Self> {
        check_dim(self.p(), other.p())?;
        Ok(Self { entries: &self.entries * &other.entries })
    }

    /// `‖A − A*‖_HS / ‖A‖_HS` (0 for the zero operator).
    pub fn self_adjoint_defect(&self) -> f64 {
        let norm = self.hs_norm();
        if norm == 0.0 {
            return 0.0;
        }
        (&self.entries - self.entries.adjoint()).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() / norm
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.self_adjoint_defect() <= tol
    }

    pub fn eig_self_adjoint(&self, tol: f64) -> Result<SelfAdjointEigen> {
        let asymmetry = self.self_adjoint_defect();
        if asymmetry > tol {
            return Err(Error::NotSelfAdjoint { asymmetry, tol });
        }
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let mut order: Vec<usize> = (0..self.p()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order
            .iter()
            .map(|&i| ElementVector::from_dvector(eig.eigenvectors.column(i).into_owned()))
            .collect();
        Ok(SelfAdjointEigen { values, vectors })
    }

    /// Square root of a positive semi-definite self-adjoint operator (negative
    /// eigenvalues above `-tol·λ_max` are clipped to zero).
    pub fn psd_sqrt(&self, tol: f64) -> Result<Self> {
        let eig = self.eig_self_adjoint(SELF_ADJOINT_TOL)?;
        let top = eig.values.first().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
        let p = self.p();
        let mut out = DMatrix::from_element(p, p, ZERO);
        for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
            if *lambda < -tol * top {
                return Err(Error::NotPositiveDefinite);
            }
            let s = lambda.max(0.0).sqrt();
            out += v.coords() * v.coords().adjoint() * Complex64::new(s, 0.0);
        }
        Ok(Self { entries: out })
    }

    pub fn max_abs_diff(&self, other: &OperatorRep) -> f64 {
        self.entries.iter().zip(other.entries.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Writes `p` on the first line followed by `p` rows of interleaved `re,im` values.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.p())?;
        for j in 0..self.p() {
            let mut line = String::new();
            for k in 0..self.p() {
                let c = self.entries[(j, k)];
                if k > 0 {
                    line.push(',');
                }
                write!(line, "{:.16e},{:.16e}", c.re, c.im).expect("write to string");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty operator file".into()))??;
        let p: usize = header.trim().parse().map_err(|_| Error::Parse(format!("bad dimension line {header:?}")))?;
        let mut entries = DMatrix::from_element(p, p, ZERO);
        for j in 0..p {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing row {j}")))??;
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}"))))
                .collect::<Result<_>>()?;
            check_dim(2 * p, vals.len())?;
            for k in 0..p {
                entries[(j, k)] = Complex64::new(vals[2 * k], vals[2 * k + 1]);
            }
        }
        Self::from_matrix(entries)
    }
}

impl Add for &OperatorRep {
    type Output = OperatorRep;
    fn add(self, rhs: &OperatorRep) -> OperatorRep {
        assert_eq!(self.p(), rhs.p(), "operator dimension mismatch");
        OperatorRep { entries: &self.entries + &rhs.entries }
    }
}

impl Sub for &OperatorRep {
    type Output = OperatorRep;
    fn sub(self, rhs: &OperatorRep) -> OperatorRep {
        assert_eq!(self.p(), rhs.p(), "operator dimension mismatch");
        OperatorRep { entries: &self.entries - &rhs.entries }
    }
}

impl AddAssign<&OperatorRep> for OperatorRep {
    fn add_assign(&mut self, rhs: &OperatorRep) {
        assert_eq!(self.p(), rhs.p(), "operator dimension mismatch");
        self.entries += &rhs.entries;
    }
}

impl Mul<Complex64> for &OperatorRep {
    type Output = OperatorRep;
    fn mul(self, rhs: Complex64) -> OperatorRep {
        self.scale(rhs)
    }
}

impl Mul<f64> for &OperatorRep {
    type Output = OperatorRep;
    fn mul(self, rhs: f64) -> OperatorRep {
        self.scale_real(rhs)
    }
}

impl Neg for &OperatorRep {
    type Output = OperatorRep;
    fn neg(self) -> OperatorRep {
        self.scale_real(-1.0)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_vector(rng: &mut impl Rng, p: usize) -> ElementVector {
        ElementVector::new((0..p).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .unwrap()
    }

    pub(crate) fn random_matrix(rng: &mut impl Rng, p: usize) -> OperatorRep {
        OperatorRep::from_matrix(DMatrix::from_fn(p, p, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }))
        .unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn outer_of_unit_vectors() {
        let a = OperatorRep::outer(&ElementVector::unit(2, 0), &ElementVector::unit(2, 1)).unwrap();
        assert_eq!(a.get(0, 1), c(1.0, 0.0));
        assert_eq!(a.get(0, 0), c(0.0, 0.0));
        assert_eq!(a.get(1, 0), c(0.0, 0.0));
        assert_eq!(a.get(1, 1), c(0.0, 0.0));
    }

    #[test]
    fn outer_dimension_mismatch() {
        let r = OperatorRep::outer(&ElementVector::unit(2, 0), &ElementVector::unit(3, 1));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
        let r = OperatorRep::identity(2).hs_inner(&OperatorRep::identity(3));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn self_outer_is_psd_with_norm_squared_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_vector(&mut rng, 4);
        let a = OperatorRep::outer(&x, &x).unwrap();
        assert!(a.is_self_adjoint(1e-14));
        let eig = a.eig_self_adjoint(1e-12).unwrap();
        assert!(eig.values.iter().all(|&l| l > -1e-12));
        assert!((a.trace_norm() - x.norm().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn hs_inner_of_outer_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<_> = (0..4).map(|_| random_vector(&mut rng, 3)).collect();
        let lhs = OperatorRep::outer(&xs[0], &xs[1])
            .unwrap()
            .hs_inner(&OperatorRep::outer(&xs[2], &xs[3]).unwrap())
            .unwrap();
        let rhs = xs[0].inner(&xs[2]).unwrap() * xs[3].inner(&xs[1]).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn identity_norms() {
        let a = OperatorRep::identity(4);
        assert!((a.trace_norm() - 4.0).abs() < 1e-12);
        assert!((a.hs_norm() - 2.0).abs() < 1e-12);
        assert!((a.op_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_norms() {
        let a = OperatorRep::diag(&[3.0, -4.0]);
        assert!((a.trace_norm() - 7.0).abs() < 1e-12);
        assert!((a.hs_norm() - 5.0).abs() < 1e-12);
        assert!((a.op_norm() - 4.0).abs() < 1e-12);
    }

    /// Singular values from the eigenvalues of A*A, an independent route from the SVD.
    #[test]
    fn trace_norm_matches_gram_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 5);
        let gram = a.matrix().adjoint() * a.matrix();
        let oracle: f64 = gram.symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
        assert!((a.trace_norm() - oracle).abs() < 1e-10);
    }

    #[test]
    fn conjugation_fixed_points_and_antilinearity() {
        let real = OperatorRep::from_real_rows(2, &[1.0, 2.0, -3.0, 0.5]).unwrap();
        assert_eq!(real.conj(), real);
        assert_eq!(real.imag_part().hs_norm(), 0.0);
        let i_id = OperatorRep::identity(3).scale(c(0.0, 1.0));
        assert_eq!(i_id.conj(), OperatorRep::identity(3).scale(c(0.0, -1.0)));
    }

    #[test]
    fn conj_of_outer_is_outer_of_conjugates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_vector(&mut rng, 3);
        let y = random_vector(&mut rng, 3);
        let lhs = OperatorRep::outer(&x, &y).unwrap().conj();
        let rhs = OperatorRep::outer(&x.conj(), &y.conj()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn real_and_imaginary_parts_recombine() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 3);
        let re = (&a.conj() + &a).scale_real(0.5);
        let im = (&a - &a.conj()).scale(c(0.0, -0.5));
        assert!(re.max_abs_diff(&a.real_part()) < 1e-15);
        assert!(im.max_abs_diff(&a.imag_part()) < 1e-15);
        let back = &a.real_part() + &a.imag_part().scale(c(0.0, 1.0));
        assert!(back.max_abs_diff(&a) < 1e-15);
    }

    #[test]
    fn eig_of_diagonal() {
        let eig = OperatorRep::diag(&[1.0, 2.0]).eig_self_adjoint(SELF_ADJOINT_TOL).unwrap();
        assert_eq!(eig.values, vec![2.0, 1.0]);
        assert!((eig.vectors[0].get(1).norm() - 1.0).abs() < 1e-14);
        assert!((eig.vectors[1].get(0).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_of_rank_one() {
        let x = ElementVector::from_real(&[1.0, 2.0, 2.0]).unwrap();
        let eig = OperatorRep::outer(&x, &x).unwrap().eig_self_adjoint(SELF_ADJOINT_TOL).unwrap();
        assert!((eig.values[0] - 9.0).abs() < 1e-12);
        assert!(eig.values[1].abs() < 1e-12 && eig.values[2].abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = random_matrix(&mut rng, 6);
        let a = (&b + &b.adjoint()).scale_real(0.5);
        let eig = a.eig_self_adjoint(SELF_ADJOINT_TOL).unwrap();
        let mut rebuilt = OperatorRep::zeros(6);
        for (l, v) in eig.values.iter().zip(&eig.vectors) {
            rebuilt += &OperatorRep::outer(v, v).unwrap().scale_real(*l);
        }
        assert!((&rebuilt - &a).hs_norm() < 1e-10 * a.hs_norm());
        for (i, u) in eig.vectors.iter().enumerate() {
            for (j, v) in eig.vectors.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((u.inner(v).unwrap() - c(expect, 0.0)).norm() < 1e-12);
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eig_rejects_non_self_adjoint() {
        let a = OperatorRep::from_real_rows(2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(a.eig_self_adjoint(SELF_ADJOINT_TOL), Err(Error::NotSelfAdjoint { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 3);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("3\n"));
        let b = OperatorRep::read_csv(&buf[..]).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = OperatorRep::from_real_rows(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let s = a.psd_sqrt(1e-12).unwrap();
        assert!(s.compose(&s).unwrap().max_abs_diff(&a) < 1e-12);
    }
}

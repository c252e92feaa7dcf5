//! Dense linear-algebra helpers shared by every module.
//!
//! `vec` stacks columns, so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::{ComplexField, DMatrix, DVector, Dim, Matrix, RawStorage, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type RVec = DVector<f64>;
pub type CVec = DVector<Complex64>;

/// Relative singular-value cutoff used for the structurally singular solves.
pub const PINV_RCOND: f64 = 1e-12;

pub fn kron<T: ComplexField>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

pub fn vec<T: ComplexField>(a: &DMatrix<T>) -> DVector<T> {
    // nalgebra storage is column-major already
    DVector::from_column_slice(a.as_slice())
}

pub fn unvec<T: ComplexField>(v: &DVector<T>, rows: usize, cols: usize) -> Result<DMatrix<T>> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!("cannot unvec length {} into {}x{}", v.len(), rows, cols)));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Entry types accepted by the spectral helpers.
pub trait Scalar: ComplexField<RealField = f64> + Copy {
    fn parts(self) -> (f64, f64);
}

impl Scalar for f64 {
    fn parts(self) -> (f64, f64) {
        (self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn parts(self) -> (f64, f64) {
        (self.re, self.im)
    }
}

fn complexify<T: Scalar>(a: &DMatrix<T>) -> CMat {
    a.map(|z| {
        let (x, y) = z.parts();
        Complex64::new(x, y)
    })
}

fn is_hermitian<T: Scalar>(a: &DMatrix<T>) -> bool {
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    a.is_square() && max_abs(&(a - a.adjoint())) <= 1e-13 * scale
}

/// Singular values, descending. nalgebra's SVD can return wrong factors when
/// singular values are nearly degenerate, so these come from Hermitian
/// eigenvalues: |λ(A)| for Hermitian A, |λ(iA)| for anti-Hermitian A and
/// √λ(AᴴA) otherwise.
pub fn singular_values<T: Scalar>(a: &DMatrix<T>) -> Vec<f64> {
    if a.is_empty() {
        return vec![];
    }
    let mut sv: Vec<f64> = if is_hermitian(a) {
        SymmetricEigen::new(hermitize(a)).eigenvalues.iter().map(|x| x.abs()).collect()
    } else {
        let c = complexify(a);
        let ic = &c * Complex64::new(0.0, 1.0);
        if is_hermitian(&ic) {
            SymmetricEigen::new(hermitize(&ic)).eigenvalues.iter().map(|x| x.abs()).collect()
        } else {
            SymmetricEigen::new(hermitize(&(c.adjoint() * &c))).eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect()
        }
    };
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Σ 1/λ u uᴴ over eigenpairs of a Hermitian matrix with |λ| > cut.
fn hermitian_pinv<T: Scalar>(a: &DMatrix<T>, cut: f64) -> DMatrix<T> {
    let n = a.nrows();
    let e = SymmetricEigen::new(hermitize(a));
    let mut out = DMatrix::<T>::zeros(n, n);
    for (k, &lam) in e.eigenvalues.iter().enumerate() {
        if lam.abs() > cut && lam != 0.0 {
            let u = e.eigenvectors.column(k);
            out += (u * u.adjoint()).unscale(lam);
        }
    }
    out
}

/// Moore-Penrose pseudo-inverse with an absolute singular-value cutoff.
/// `None` uses ε·max(rows, cols)·σ_max. Hermitian input is inverted in its
/// eigenbasis; other input goes through (AᴴA)⁺Aᴴ, which squares the condition
/// number.
pub fn pinv<T: Scalar>(a: &DMatrix<T>, tol: Option<f64>) -> DMatrix<T> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let cut =
        tol.unwrap_or_else(|| f64::EPSILON * r.max(c) as f64 * singular_values(a).first().cloned().unwrap_or(0.0));
    if is_hermitian(a) {
        hermitian_pinv(a, cut)
    } else {
        let ah = a.adjoint();
        let gram = &ah * a;
        let floor = f64::EPSILON * c as f64 * max_abs(&gram);
        hermitian_pinv(&gram, (cut * cut).max(floor)) * ah
    }
}

/// Pseudo-inverse with a cutoff relative to the largest singular value.
pub fn pinv_rel<T: Scalar>(a: &DMatrix<T>, rcond: f64) -> DMatrix<T> {
    let smax = singular_values(a).first().cloned().unwrap_or(0.0);
    pinv(a, Some(rcond * smax))
}

pub fn hermitize<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> DMatrix<T> {
    (a + a.adjoint()).scale(0.5)
}

fn require_square<T: ComplexField>(a: &DMatrix<T>, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!("{what} needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    Ok(())
}

/// Eigenvalues of the Hermitian part, ascending.
pub fn herm_eigenvalues<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<Vec<f64>> {
    require_square(a, "eigenvalues")?;
    if a.is_empty() {
        return Ok(vec![]);
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(hermitize(a)).eigenvalues.iter().cloned().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

/// Sum of singular values. For normal matrices (Hermitian, real antisymmetric)
/// this is the sum of |eigenvalues|.
pub fn trace_abs<T: Scalar>(a: &DMatrix<T>) -> Result<f64> {
    require_square(a, "trace_abs")?;
    Ok(singular_values(a).iter().sum())
}

pub fn largest_eig_abs<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<f64> {
    let ev = herm_eigenvalues(a)?;
    Ok(ev.iter().fold(0.0, |m, x| m.max(x.abs())))
}

pub fn is_psd<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, tol: f64) -> bool {
    match herm_eigenvalues(a) {
        Ok(ev) => ev.first().is_none_or(|&m| m >= -tol),
        Err(_) => false,
    }
}

pub fn min_eigenvalue<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<f64> {
    Ok(herm_eigenvalues(a)?.first().cloned().unwrap_or(0.0))
}

/// Square root of a real symmetric PSD matrix. Eigenvalues below -1e-10 are rejected.
pub fn sqrt_psd(a: &RMat) -> Result<RMat> {
    require_square(a, "sqrt_psd")?;
    let eig = SymmetricEigen::new(hermitize(a));
    if let Some(m) = eig.eigenvalues.iter().cloned().reduce(f64::min) {
        if m < -1e-10 {
            return Err(Error::InvalidArgument(format!("matrix is not PSD (min eigenvalue {m:.3e})")));
        }
    }
    let s = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    Ok(&eig.eigenvectors * RMat::from_diagonal(&s) * eig.eigenvectors.transpose())
}

pub fn to_complex(a: &RMat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn re(a: &CMat) -> RMat {
    a.map(|z| z.re)
}

pub fn im(a: &CMat) -> RMat {
    a.map(|z| z.im)
}

/// Largest entry modulus.
pub fn max_abs<T, R, C, S>(a: &Matrix<T, R, C, S>) -> f64
where
    T: ComplexField<RealField = f64>,
    R: Dim,
    C: Dim,
    S: RawStorage<T, R, C>,
{
    a.iter().fold(0.0, |m, z| m.max(z.clone().modulus()))
}

pub fn all_finite<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> bool {
    a.iter().all(|z| z.clone().modulus().is_finite())
}

pub fn to_rows(a: &RMat) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<RMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(RMat::from_fn(n, m, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> RMat {
        RMat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rand_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn kron_identity_and_diagonal() {
        assert_eq!(kron(&RMat::identity(2, 2), &RMat::identity(2, 2)), RMat::identity(4, 4));
        let a = RMat::from_diagonal(&RVec::from_vec(vec![1.0, 2.0]));
        let b = RMat::from_diagonal(&RVec::from_vec(vec![1.0, 3.0]));
        let want = RMat::from_diagonal(&RVec::from_vec(vec![1.0, 3.0, 2.0, 6.0]));
        assert_eq!(kron(&a, &b), want);
    }

    #[test]
    fn kron_vec_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = rand_mat(&mut rng, 2, 2);
            let b = rand_mat(&mut rng, 2, 2);
            let x = rand_mat(&mut rng, 2, 2);
            let lhs = kron(&a, &b) * vec(&x);
            let rhs = vec(&(&b * &x * a.transpose()));
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn vec_order_and_roundtrip() {
        let a = RMat::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(vec(&a).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = rand_mat(&mut rng, 3, 4);
        assert_eq!(unvec(&vec(&b), 3, 4).unwrap(), b);
        assert!(unvec(&vec(&b), 2, 4).is_err());
    }

    #[test]
    fn vec_trace_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_cmat(&mut rng, 3, 3);
        let b = rand_cmat(&mut rng, 3, 3);
        let lhs = (a.adjoint() * &b).trace();
        let rhs = vec(&a).dotc(&vec(&b));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn pinv_basic() {
        let i3 = RMat::identity(3, 3);
        assert!((pinv(&i3, None) - &i3).norm() < 1e-15);
        let d = RMat::from_diagonal(&RVec::from_vec(vec![2.0, 0.0]));
        let want = RMat::from_diagonal(&RVec::from_vec(vec![0.5, 0.0]));
        assert!((pinv(&d, None) - want).norm() < 1e-15);
    }

    #[test]
    fn pinv_rank_one_penrose() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = rand_mat(&mut rng, 4, 1);
        let v = rand_mat(&mut rng, 4, 1);
        let a = &u * v.transpose();
        let p = pinv(&a, None);
        assert!((&a * &p * &a - &a).norm() < 1e-10 * a.norm());
    }

    #[test]
    fn pinv_matches_inverse_when_well_conditioned() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = rand_mat(&mut rng, 4, 4) + RMat::identity(4, 4) * 3.0;
        let inv = a.clone().try_inverse().unwrap();
        assert!((pinv(&a, None) - inv).norm() < 1e-12);
    }

    #[test]
    fn trace_abs_examples() {
        let d = RMat::from_diagonal(&RVec::from_vec(vec![1.0, -2.0]));
        assert!((trace_abs(&d).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(trace_abs(&RMat::zeros(3, 3)).unwrap(), 0.0);
        assert!(trace_abs(&RMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn trace_abs_random_symmetric_vs_eigen() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let a = rand_mat(&mut rng, 4, 4);
            let s = &a + a.transpose();
            let oracle: f64 = SymmetricEigen::new(s.clone()).eigenvalues.iter().map(|x| x.abs()).sum();
            assert!((trace_abs(&s).unwrap() - oracle).abs() < 1e-12);
            assert!(trace_abs(&s).unwrap() >= s.trace().abs() - 1e-12);
        }
    }

    #[test]
    fn trace_abs_antisymmetric() {
        // eigenvalues ±2i
        let a = RMat::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        assert!((trace_abs(&a).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn largest_eig_abs_examples() {
        let d = RMat::from_diagonal(&RVec::from_vec(vec![0.3, -0.9]));
        assert!((largest_eig_abs(&d).unwrap() - 0.9).abs() < 1e-15);
        assert!((largest_eig_abs(&RMat::identity(5, 5)).unwrap() - 1.0).abs() < 1e-15);
        assert!(largest_eig_abs(&RMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn largest_eig_abs_vs_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = rand_cmat(&mut rng, 5, 5);
        let h = &a + a.adjoint();
        // power iteration on h² converges to the dominant |λ|²
        let h2 = &h * &h;
        let mut x = CVec::from_element(5, Complex64::new(1.0, 0.3));
        let mut lam = 0.0;
        for _ in 0..2000 {
            let y = &h2 * &x;
            lam = y.norm() / x.norm();
            x = y.unscale(y.norm());
        }
        assert!((largest_eig_abs(&h).unwrap() - lam.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn is_psd_examples() {
        assert!(is_psd(&RMat::identity(3, 3), 0.0));
        let d = RMat::from_diagonal(&RVec::from_vec(vec![1.0, -1e-3]));
        assert!(!is_psd(&d, 1e-9));
        // thermal n=0.5: V = 2I, V + iΩ has eigenvalues 2 ± 1
        let mut m = to_complex(&(RMat::identity(2, 2) * 2.0));
        m[(0, 1)] = Complex64::new(0.0, 1.0);
        m[(1, 0)] = Complex64::new(0.0, -1.0);
        assert!(is_psd(&m, 1e-12));
        assert!((min_eigenvalue(&m).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_psd_roundtrip_and_rejects_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = rand_mat(&mut rng, 3, 3);
        let w = &a * a.transpose();
        let s = sqrt_psd(&w).unwrap();
        assert!((&s * &s - &w).norm() < 1e-12);
        let bad = RMat::from_diagonal(&RVec::from_vec(vec![1.0, -1e-3]));
        assert!(sqrt_psd(&bad).is_err());
    }

    #[test]
    fn rows_roundtrip() {
        let a = RMat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(to_rows(&a), vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(from_rows(&to_rows(&a)).unwrap(), a);
        assert!(from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn complex_pinv_with_nearly_degenerate_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let n = rng.random_range(2..8);
            let q = rand_cmat(&mut rng, n, n).qr().q();
            let mut ev: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..4.0)).collect();
            for k in (1..n).step_by(2) {
                ev[k] = ev[k - 1] + rng.random_range(-1e-3..1e-3);
            }
            let d = CMat::from_diagonal(&CVec::from_iterator(n, ev.iter().map(|&x| Complex64::new(x, 0.0))));
            let h = hermitize(&(&q * d * q.adjoint()));
            let x = pinv_rel(&h, PINV_RCOND);
            assert!(max_abs(&(&h * &x - CMat::identity(n, n))) < 1e-10);
            let mut sv = singular_values(&h);
            sv.reverse();
            let mut want = ev.clone();
            want.sort_by(|a, b| a.total_cmp(b));
            for (a, b) in sv.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}

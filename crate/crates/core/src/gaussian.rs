//! Gaussian states as first and second moments, and symplectic maps acting on them.
//!
//! Quadratures are ordered (Q1, P1, ..., QN, PN) and the vacuum has V = I.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{self, CMat, RMat, RVec};

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const UNCERTAINTY_TOL: f64 = 1e-8;
pub const SYMPLECTIC_TOL: f64 = 1e-10;

/// Block-diagonal symplectic form with blocks [[0, 1], [-1, 0]].
pub fn make_omega(modes: usize) -> Result<RMat> {
    if modes < 1 {
        return Err(Error::InvalidArgument("modes must be at least 1".into()));
    }
    Ok(omega(modes))
}

pub(crate) fn omega(modes: usize) -> RMat {
    let mut o = RMat::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        o[(2 * k, 2 * k + 1)] = 1.0;
        o[(2 * k + 1, 2 * k)] = -1.0;
    }
    o
}

/// V + iΩ
pub fn uncertainty_matrix(v: &RMat) -> CMat {
    let o = omega(v.nrows() / 2);
    CMat::from_fn(v.nrows(), v.ncols(), |i, j| Complex64::new(v[(i, j)], o[(i, j)]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateJson", into = "StateJson")]
pub struct GaussianState {
    modes: usize,
    d: RVec,
    v: RMat,
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    modes: usize,
    d: Vec<f64>,
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
}

impl TryFrom<StateJson> for GaussianState {
    type Error = Error;
    fn try_from(j: StateJson) -> Result<Self> {
        let s = GaussianState::new(RVec::from_vec(j.d), numkit::from_rows(&j.v)?)?;
        if s.modes != j.modes {
            return Err(Error::Validation(format!("modes = {} but moments describe {} modes", j.modes, s.modes)));
        }
        Ok(s)
    }
}

impl From<GaussianState> for StateJson {
    fn from(s: GaussianState) -> Self {
        StateJson { modes: s.modes, d: s.d.iter().cloned().collect(), v: numkit::to_rows(&s.v) }
    }
}

impl GaussianState {
    /// Validated constructor: symmetric V, V + iΩ ⪰ 0.
    pub fn new(d: RVec, v: RMat) -> Result<Self> {
        let s = Self::from_moments(d, v)?;
        let asym = (&s.v - s.v.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::Unphysical(format!("covariance not symmetric ({asym:.2e})")));
        }
        let m = numkit::min_eigenvalue(&uncertainty_matrix(&s.v))?;
        if m < -UNCERTAINTY_TOL {
            return Err(Error::Unphysical(format!("V + iΩ has eigenvalue {m:.3e} < 0")));
        }
        Ok(s)
    }

    /// Shape and finiteness checks only. Used for intermediate or regularized moments.
    pub fn from_moments(d: RVec, v: RMat) -> Result<Self> {
        let n = d.len();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!("displacement length {n} is not 2N")));
        }
        if v.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("covariance is {:?}, expected {n}x{n}", v.shape())));
        }
        if !d.iter().chain(v.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("state moments".into()));
        }
        Ok(Self { modes: n / 2, d, v })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn d(&self) -> &RVec {
        &self.d
    }

    pub fn v(&self) -> &RMat {
        &self.v
    }

    pub fn vacuum(modes: usize) -> Result<Self> {
        Self::thermal(modes, 0.0)
    }

    pub fn thermal(modes: usize, n_th: f64) -> Result<Self> {
        if modes < 1 {
            return Err(Error::InvalidArgument("modes must be at least 1".into()));
        }
        if !(n_th >= 0.0) {
            return Err(Error::InvalidArgument(format!("n_th = {n_th} must be >= 0")));
        }
        let n = 2 * modes;
        Ok(Self { modes, d: RVec::zeros(n), v: RMat::identity(n, n) * (2.0 * n_th + 1.0) })
    }

    /// One (q, p) pair per mode, V = I.
    pub fn coherent(qp: &[(f64, f64)]) -> Result<Self> {
        let mut s = Self::vacuum(qp.len())?;
        for (k, &(q, p)) in qp.iter().enumerate() {
            s.d[2 * k] = q;
            s.d[2 * k + 1] = p;
        }
        Ok(s)
    }

    /// One squeezing parameter per mode, V = diag(e^{-2r}, e^{2r}).
    pub fn squeezed_vacuum(rs: &[f64]) -> Result<Self> {
        let mut s = Self::vacuum(rs.len())?;
        for (k, &r) in rs.iter().enumerate() {
            s.v[(2 * k, 2 * k)] = (-2.0 * r).exp();
            s.v[(2 * k + 1, 2 * k + 1)] = (2.0 * r).exp();
        }
        Ok(s)
    }

    /// Direct sum of independent states.
    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let (n1, n2) = (self.d.len(), other.d.len());
        let mut d = RVec::zeros(n1 + n2);
        d.rows_mut(0, n1).copy_from(&self.d);
        d.rows_mut(n1, n2).copy_from(&other.d);
        let mut v = RMat::zeros(n1 + n2, n1 + n2);
        v.view_mut((0, 0), (n1, n1)).copy_from(&self.v);
        v.view_mut((n1, n1), (n2, n2)).copy_from(&other.v);
        GaussianState { modes: self.modes + other.modes, d, v }
    }

    /// μ = 1/√det V.
    pub fn purity(&self) -> Result<f64> {
        let det = self.v.determinant();
        if !(det >= 1.0 - 1e-8) {
            return Err(Error::Unphysical(format!("det V = {det:.6e} < 1")));
        }
        Ok(1.0 / det.sqrt())
    }

    /// Symplectic eigenvalues, ascending, one per mode.
    pub fn symplectic_spectrum(&self) -> Result<Vec<f64>> {
        let root = numkit::sqrt_psd(&self.v)?;
        let o = omega(self.modes);
        let h = numkit::to_complex(&root) * (numkit::to_complex(&o) * Complex64::i()) * numkit::to_complex(&root);
        let mut ev: Vec<f64> = numkit::herm_eigenvalues(&h)?.into_iter().filter(|x| *x > 0.0).collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        if ev.len() != self.modes {
            return Err(Error::Singular("covariance matrix is singular".into()));
        }
        Ok(ev)
    }

    /// exp(-(R-d)ᵀ V⁻¹ (R-d)) / (π^N √det V), which integrates to one.
    pub fn wigner_at(&self, point: &RVec) -> Result<f64> {
        if point.len() != self.d.len() {
            return Err(Error::DimensionMismatch("phase-space point length".into()));
        }
        let inv = self.v.clone().try_inverse().ok_or_else(|| Error::Singular("covariance matrix".into()))?;
        let x = point - &self.d;
        let q = x.dot(&(&inv * &x));
        Ok((-q).exp() / (PI.powi(self.modes as i32) * self.v.determinant().sqrt()))
    }

    /// χ(ξ) = exp(-¼ ξ̃ᵀ V ξ̃ + i ξ̃ᵀ d) with ξ̃ = Ωξ.
    pub fn char_fn_at(&self, xi: &RVec) -> Result<Complex64> {
        if xi.len() != self.d.len() {
            return Err(Error::DimensionMismatch("phase-space point length".into()));
        }
        let t = omega(self.modes) * xi;
        let quad = -0.25 * t.dot(&(&self.v * &t));
        Ok(Complex64::new(quad, t.dot(&self.d)).exp())
    }

    /// Duan inseparability test. Variances are taken with the canonical
    /// normalization (covariance V/2) so that the two-mode vacuum sits at the boundary.
    pub fn duan_criterion(&self, a: f64) -> Result<(f64, f64, bool)> {
        if self.modes != 2 {
            return Err(Error::InvalidArgument("Duan criterion needs a two-mode state".into()));
        }
        if a == 0.0 || !a.is_finite() {
            return Err(Error::InvalidArgument("a must be finite and nonzero".into()));
        }
        let var = |c: [f64; 4]| {
            let c = RVec::from_row_slice(&c);
            0.5 * c.dot(&(&self.v * &c))
        };
        let u = var([a.abs(), 0.0, 1.0 / a, 0.0]);
        let w = var([0.0, a.abs(), 0.0, -1.0 / a]);
        let lhs = u + w;
        let rhs = a * a + 1.0 / (a * a);
        Ok((lhs, rhs, lhs < rhs))
    }
}

/// Affine phase-space map R -> S R + shift with S Ω Sᵀ = Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticOp {
    s: RMat,
    shift: RVec,
}

impl SymplecticOp {
    pub fn new(s: RMat, shift: RVec) -> Result<Self> {
        let n = shift.len();
        if n == 0 || !n.is_multiple_of(2) || s.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "symplectic matrix {:?} with shift of length {n}",
                s.shape()
            )));
        }
        let o = omega(n / 2);
        let err = (&s * &o * s.transpose() - &o).amax();
        if err > SYMPLECTIC_TOL {
            return Err(Error::InvalidArgument(format!("matrix is not symplectic ({err:.2e})")));
        }
        Ok(Self { s, shift })
    }

    fn unchecked(s: RMat) -> Self {
        let n = s.nrows();
        Self { s, shift: RVec::zeros(n) }
    }

    pub fn s(&self) -> &RMat {
        &self.s
    }

    pub fn shift(&self) -> &RVec {
        &self.shift
    }

    pub fn modes(&self) -> usize {
        self.shift.len() / 2
    }

    pub fn identity(modes: usize) -> Self {
        Self::unchecked(RMat::identity(2 * modes, 2 * modes))
    }

    /// [[cos φ, sin φ], [-sin φ, cos φ]]
    pub fn rotation(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self::unchecked(RMat::from_row_slice(2, 2, &[c, s, -s, c]))
    }

    /// diag(e^{-r}, e^{r})
    pub fn single_mode_squeezer(r: f64) -> Self {
        Self::unchecked(RMat::from_row_slice(2, 2, &[(-r).exp(), 0.0, 0.0, r.exp()]))
    }

    /// (1/√2) [[I, I], [-I, I]]
    pub fn beam_splitter_5050() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut s = RMat::zeros(4, 4);
        for k in 0..2 {
            s[(k, k)] = h;
            s[(k, k + 2)] = h;
            s[(k + 2, k)] = -h;
            s[(k + 2, k + 2)] = h;
        }
        Self::unchecked(s)
    }

    /// [[cosh r I, sinh r Rφ], [sinh r Rφ, cosh r I]] with the reflection
    /// Rφ = [[cos φ, sin φ], [sin φ, -cos φ]].
    pub fn two_mode_squeezer(r: f64, phi: f64) -> Self {
        let (ch, sh) = (r.cosh(), r.sinh());
        let refl = reflection(phi);
        let mut s = RMat::zeros(4, 4);
        s.view_mut((0, 0), (2, 2)).copy_from(&(RMat::identity(2, 2) * ch));
        s.view_mut((2, 2), (2, 2)).copy_from(&(RMat::identity(2, 2) * ch));
        s.view_mut((0, 2), (2, 2)).copy_from(&(&refl * sh));
        s.view_mut((2, 0), (2, 2)).copy_from(&(&refl * sh));
        Self::unchecked(s)
    }

    /// Identity matrix with (θ1, θ2) added to the (Q, P) of `mode` (zero-based).
    pub fn displacement_op(modes: usize, theta1: f64, theta2: f64, mode: usize) -> Result<Self> {
        if mode >= modes {
            return Err(Error::InvalidArgument(format!("mode index {mode} out of range for {modes} modes")));
        }
        let mut op = Self::identity(modes);
        op.shift[2 * mode] = theta1;
        op.shift[2 * mode + 1] = theta2;
        Ok(op)
    }

    /// Lift this op onto modes `first..first+self.modes()` of a `total`-mode system.
    pub fn embed(&self, first: usize, total: usize) -> Result<Self> {
        let k = self.modes();
        if first + k > total {
            return Err(Error::InvalidArgument(format!("cannot embed {k}-mode op at mode {first} of {total}")));
        }
        let mut out = Self::identity(total);
        out.s.view_mut((2 * first, 2 * first), (2 * k, 2 * k)).copy_from(&self.s);
        out.shift.rows_mut(2 * first, 2 * k).copy_from(&self.shift);
        Ok(out)
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &SymplecticOp) -> Result<Self> {
        if self.modes() != inner.modes() {
            return Err(Error::DimensionMismatch("composing ops of different size".into()));
        }
        Ok(Self { s: &self.s * &inner.s, shift: &self.s * &inner.shift + &self.shift })
    }

    pub fn apply(&self, st: &GaussianState) -> Result<GaussianState> {
        if st.modes() != self.modes() {
            return Err(Error::DimensionMismatch(format!("{}-mode op on {}-mode state", self.modes(), st.modes())));
        }
        let d = &self.s * st.d() + &self.shift;
        let v = &self.s * st.v() * self.s.transpose();
        GaussianState::from_moments(d, numkit::hermitize(&v))
    }
}

pub(crate) fn reflection(phi: f64) -> RMat {
    let (s, c) = phi.sin_cos();
    RMat::from_row_slice(2, 2, &[c, s, s, -c])
}

pub fn apply(op: &SymplecticOp, s: &GaussianState) -> Result<GaussianState> {
    op.apply(s)
}

/// Two-mode squeezed displaced thermal probe: S2 applied to a displaced
/// thermal pair, d = S2 α, V = (2 n_th + 1) S2 S2ᵀ.
pub fn probe_tmsdt(r: f64, phi: f64, alpha: [f64; 4], n_th: f64) -> Result<GaussianState> {
    let base = GaussianState::thermal(2, n_th)?;
    let disp = SymplecticOp { s: RMat::identity(4, 4), shift: RVec::from_row_slice(&alpha) };
    SymplecticOp::two_mode_squeezer(r, phi).compose(&disp)?.apply(&base)
}

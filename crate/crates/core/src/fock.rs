//! Truncated Fock-space oracle: density matrices, SLD/RLD solves and Fisher
//! information for explicit finite-dimensional models.
//!
//! Displacements use α = (θ1 + iθ2)/√2, so θ shifts the means of
//! (a + a†)/√2 and (a - a†)/(i√2). With that mapping the Gaussian-module
//! covariance is ⟨{ΔR, ΔR}⟩ of those quadratures and both modules agree.

use std::f64::consts::FRAC_1_SQRT_2;

use log::warn;
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numkit::{self, CMat, RMat, PINV_RCOND};

pub const LEAKAGE_BUDGET: f64 = 1e-6;
pub const DEFAULT_DIM: usize = 40;
pub const SUPPORT_CUTOFF: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const FD_STEP: f64 = 1e-5;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Truncated annihilation operator.
pub fn annihilation(dim: usize) -> CMat {
    let mut a = CMat::zeros(dim, dim);
    for k in 1..dim {
        a[(k - 1, k)] = c((k as f64).sqrt());
    }
    a
}

pub fn number_op(dim: usize) -> CMat {
    CMat::from_diagonal(&numkit::CVec::from_fn(dim, |k, _| c(k as f64)))
}

/// exp(α a† - α* a)
pub fn displacement_unitary(re: f64, im: f64, dim: usize) -> CMat {
    let a = annihilation(dim);
    let alpha = Complex64::new(re, im);
    (a.adjoint() * alpha - &a * alpha.conj()).exp()
}

/// exp(½ r (a² - a†²)); squeezes the Q quadrature for r > 0.
pub fn squeeze_unitary(r: f64, dim: usize) -> CMat {
    let a = annihilation(dim);
    let a2 = &a * &a;
    ((&a2 - a2.adjoint()) * c(0.5 * r)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FockKind {
    Vacuum,
    Coherent { re: f64, im: f64 },
    Thermal { n_th: f64 },
    Squeezed { r: f64 },
    DisplacedThermal { re: f64, im: f64, n_th: f64 },
    SqueezedThermal { r: f64, n_th: f64 },
}

fn padded(dim: usize) -> usize {
    (2 * dim).max(dim + 40)
}

fn thermal_diag(n_th: f64, dim: usize) -> CMat {
    let ratio = n_th / (n_th + 1.0);
    CMat::from_diagonal(&numkit::CVec::from_fn(dim, |k, _| c(ratio.powi(k as i32) / (n_th + 1.0))))
}

/// ρ for `kind` built in an enlarged space; returned uncropped.
fn build_padded(kind: FockKind, big: usize) -> Result<CMat> {
    let vac = {
        let mut v = CMat::zeros(big, big);
        v[(0, 0)] = c(1.0);
        v
    };
    let conj = |u: &CMat, rho: &CMat| u * rho * u.adjoint();
    Ok(match kind {
        FockKind::Vacuum => vac,
        FockKind::Coherent { re, im } => conj(&displacement_unitary(re, im, big), &vac),
        FockKind::Thermal { n_th } => {
            if !(n_th >= 0.0) {
                return Err(Error::InvalidArgument(format!("n_th = {n_th} must be >= 0")));
            }
            thermal_diag(n_th, big)
        }
        FockKind::Squeezed { r } => conj(&squeeze_unitary(r, big), &vac),
        FockKind::DisplacedThermal { re, im, n_th } => {
            let th = build_padded(FockKind::Thermal { n_th }, big)?;
            conj(&displacement_unitary(re, im, big), &th)
        }
        FockKind::SqueezedThermal { r, n_th } => {
            let th = build_padded(FockKind::Thermal { n_th }, big)?;
            conj(&squeeze_unitary(r, big), &th)
        }
    })
}

fn crop(m: &CMat, dim: usize) -> CMat {
    m.view((0, 0), (dim, dim)).into_owned()
}

fn check_leakage(rho: &CMat) -> Result<()> {
    let leak = (1.0 - rho.trace().re).abs();
    if leak > LEAKAGE_BUDGET {
        return Err(Error::TruncationBudget { dim: rho.nrows(), leakage: leak, budget: LEAKAGE_BUDGET });
    }
    Ok(())
}

/// Truncated density matrix, failing when the trace deficit exceeds the budget.
pub fn fock_state(kind: FockKind, dim: usize) -> Result<CMat> {
    if dim < 1 {
        return Err(Error::InvalidArgument("dim must be at least 1".into()));
    }
    let rho = crop(&build_padded(kind, padded(dim))?, dim);
    check_leakage(&rho)?;
    Ok(numkit::hermitize(&rho))
}

/// Density matrix and its parameter derivatives at one parameter value.
#[derive(Debug, Clone)]
pub struct FockModel {
    rho: CMat,
    drho: Vec<CMat>,
}

impl FockModel {
    pub fn new(rho: CMat, drho: Vec<CMat>) -> Result<Self> {
        let d = rho.nrows();
        if rho.ncols() != d || drho.iter().any(|m| m.shape() != (d, d)) {
            return Err(Error::DimensionMismatch("density matrix / derivative shapes".into()));
        }
        if !numkit::all_finite(&rho) || drho.iter().any(|m| !numkit::all_finite(m)) {
            return Err(Error::NonFinite("density matrix".into()));
        }
        check_leakage(&rho)?;
        if numkit::max_abs(&(&rho - rho.adjoint())) > 1e-10 {
            return Err(Error::Unphysical("density matrix is not Hermitian".into()));
        }
        let m = numkit::min_eigenvalue(&rho)?;
        if m < -1e-10 {
            return Err(Error::Unphysical(format!("density matrix eigenvalue {m:.3e} < 0")));
        }
        for (k, dr) in drho.iter().enumerate() {
            let t = dr.trace().norm();
            if t > 1e-8 {
                return Err(Error::Unphysical(format!("derivative {k} has trace {t:.3e}")));
            }
        }
        Ok(Self { rho: numkit::hermitize(&rho), drho: drho.iter().map(numkit::hermitize).collect() })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn params(&self) -> usize {
        self.drho.len()
    }

    pub fn rho(&self) -> &CMat {
        &self.rho
    }

    pub fn drho(&self) -> &[CMat] {
        &self.drho
    }

    /// Central differences of a density-matrix family, Hermitized.
    pub fn from_fn(theta: &[f64], f: impl Fn(&[f64]) -> Result<CMat>) -> Result<Self> {
        let rho = f(theta)?;
        let mut drho = vec![];
        for k in 0..theta.len() {
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[k] += FD_STEP;
            tm[k] -= FD_STEP;
            drho.push(numkit::hermitize(&((f(&tp)? - f(&tm)?) / c(2.0 * FD_STEP))));
        }
        Self::new(rho, drho)
    }

    /// `base` displaced by α0 + (θ1 + iθ2)/√2, derivatives with respect to (θ1, θ2).
    pub fn displacement(base: FockKind, alpha: Complex64, dim: usize) -> Result<Self> {
        let big = padded(dim);
        let rho0 = build_padded(base, big)?;
        let u = displacement_unitary(alpha.re, alpha.im, big);
        let rho = &u * rho0 * u.adjoint();
        let a = annihilation(big);
        let gens = [(a.adjoint() - &a) * c(FRAC_1_SQRT_2), (a.adjoint() + &a) * Complex64::new(0.0, FRAC_1_SQRT_2)];
        let drho = gens.iter().map(|g| crop(&(g * &rho - &rho * g), dim)).collect();
        Self::new(crop(&rho, dim), drho)
    }

    /// `base` rotated by e^{-iφ n}, derivative with respect to φ.
    pub fn phase(base: FockKind, phi: f64, dim: usize) -> Result<Self> {
        let big = padded(dim);
        let rho0 = build_padded(base, big)?;
        let u = CMat::from_diagonal(&numkit::CVec::from_fn(big, |k, _| Complex64::from_polar(1.0, -phi * k as f64)));
        let rho = &u * rho0 * u.adjoint();
        let n = number_op(big);
        let drho = (&n * &rho - &rho * &n) * Complex64::new(0.0, -1.0);
        Self::new(crop(&rho, dim), vec![crop(&drho, dim)])
    }

    /// Qubit cos(θ/4)|0⟩ + e^{iφ} sin(θ/4)|1⟩ mixed with weight `mix` of I/2.
    /// Parameter θ only.
    pub fn qubit(theta: f64, phi: f64, mix: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mix) {
            return Err(Error::InvalidArgument("mix must lie in [0, 1]".into()));
        }
        let (s, co) = (theta / 4.0).sin_cos();
        let e = Complex64::from_polar(1.0, phi);
        let psi = numkit::CVec::from_vec(vec![c(co), e * s]);
        let dpsi = numkit::CVec::from_vec(vec![c(-0.25 * s), e * (0.25 * co)]);
        let rho = &psi * psi.adjoint() * c(1.0 - mix) + CMat::identity(2, 2) * c(0.5 * mix);
        let drho = (&dpsi * psi.adjoint() + &psi * dpsi.adjoint()) * c(1.0 - mix);
        Self::new(rho, vec![drho])
    }
}

struct Eigen {
    p: Vec<f64>,
    w: CMat,
}

fn eigen(rho: &CMat) -> Eigen {
    let e = SymmetricEigen::new(rho.clone());
    let p = e.eigenvalues.iter().map(|&x| if x < SUPPORT_CUTOFF { 0.0 } else { x }).collect();
    Eigen { p, w: e.eigenvectors }
}

fn check_mu(m: &FockModel, mu: usize) -> Result<()> {
    if mu >= m.params() {
        return Err(Error::InvalidArgument(format!("parameter index {mu} out of range")));
    }
    Ok(())
}

/// Residual norm of `r` in the eigenbasis of ρ, ignoring the kernel-kernel block.
fn support_residual(e: &Eigen, r: &CMat) -> (f64, usize) {
    let x = e.w.adjoint() * r * &e.w;
    let mut acc = 0.0;
    for j in 0..x.nrows() {
        for k in 0..x.ncols() {
            if e.p[j] > 0.0 || e.p[k] > 0.0 {
                acc += x[(j, k)].norm_sqr();
            }
        }
    }
    (acc.sqrt(), e.p.iter().filter(|&&x| x > 0.0).count())
}

/// SLD from ½(Lρ + ρL) = ∂ρ. The superoperator ρᵀ⊗I + I⊗ρ is diagonal in the
/// eigenbasis of ρ with entries p_j + p_k, so its pseudo-inverse is applied there.
pub fn sld_solve(model: &FockModel, mu: usize) -> Result<CMat> {
    check_mu(model, mu)?;
    let e = eigen(&model.rho);
    let dr = &model.drho[mu];
    let x = e.w.adjoint() * dr * &e.w;
    let l_eig = CMat::from_fn(x.nrows(), x.ncols(), |j, k| {
        let s = e.p[j] + e.p[k];
        if s > 0.0 {
            x[(j, k)] * (2.0 / s)
        } else {
            ZERO
        }
    });
    let l = numkit::hermitize(&(&e.w * l_eig * e.w.adjoint()));
    let res = (&l * &model.rho + &model.rho * &l) * c(0.5) - dr;
    let (r, rank) = support_residual(&e, &res);
    if r > RESIDUAL_TOL {
        return Err(Error::Residual { residual: r, rank, dim: model.dim() });
    }
    Ok(l)
}

/// Literal dense route: vec[L] = 2 (ρᵀ⊗I + I⊗ρ)⁺ vec[∂ρ]. Cost grows as dim⁶.
pub fn sld_solve_dense(model: &FockModel, mu: usize) -> Result<CMat> {
    check_mu(model, mu)?;
    let d = model.dim();
    let id = CMat::identity(d, d);
    let sup = numkit::kron(&model.rho.transpose(), &id) + numkit::kron(&id, &model.rho);
    let v = numkit::pinv_rel(&sup, PINV_RCOND) * numkit::vec(&model.drho[mu]) * c(2.0);
    Ok(numkit::hermitize(&numkit::unvec(&v, d, d)?))
}

/// RLD from ρL = ∂ρ, L = ρ⁺ ∂ρ on the support. Not Hermitian in general.
pub fn rld_solve(model: &FockModel, mu: usize) -> Result<CMat> {
    check_mu(model, mu)?;
    let e = eigen(&model.rho);
    let x = e.w.adjoint() * &model.drho[mu] * &e.w;
    let l_eig = CMat::from_fn(x.nrows(), x.ncols(), |j, k| if e.p[j] > 0.0 { x[(j, k)] / c(e.p[j]) } else { ZERO });
    // support rows of diag(p) L_eig - x
    let mut acc = 0.0;
    for j in (0..x.nrows()).filter(|&j| e.p[j] > 0.0) {
        for k in 0..x.ncols() {
            acc += (l_eig[(j, k)] * c(e.p[j]) - x[(j, k)]).norm_sqr();
        }
    }
    let r = acc.sqrt();
    if r > RESIDUAL_TOL {
        let rank = e.p.iter().filter(|&&x| x > 0.0).count();
        return Err(Error::Residual { residual: r, rank, dim: model.dim() });
    }
    Ok(&e.w * l_eig * e.w.adjoint())
}

/// Literal dense route: vec[L] = (I⊗ρ)⁺ vec[∂ρ].
pub fn rld_solve_dense(model: &FockModel, mu: usize) -> Result<CMat> {
    check_mu(model, mu)?;
    let d = model.dim();
    let sup = numkit::kron(&CMat::identity(d, d), &model.rho);
    let v = numkit::pinv_rel(&sup, PINV_RCOND) * numkit::vec(&model.drho[mu]);
    numkit::unvec(&v, d, d)
}

/// ½ Tr[{L_j, L_k} ρ], symmetrized.
pub fn qfim_fock_sld(model: &FockModel) -> Result<RMat> {
    let ls: Vec<CMat> = (0..model.params()).map(|k| sld_solve(model, k)).collect::<Result<_>>()?;
    let m = model.params();
    let f = RMat::from_fn(m, m, |j, k| 0.5 * ((&ls[j] * &ls[k] + &ls[k] * &ls[j]) * &model.rho).trace().re);
    Ok(numkit::hermitize(&f))
}

/// Tr[ρ L_j L_k†]
pub fn qfim_fock_rld(model: &FockModel) -> Result<CMat> {
    let ls: Vec<CMat> = (0..model.params()).map(|k| rld_solve(model, k)).collect::<Result<_>>()?;
    let m = model.params();
    let f = CMat::from_fn(m, m, |j, k| (&model.rho * &ls[j] * ls[k].adjoint()).trace());
    Ok(numkit::hermitize(&f))
}

/// Estimator θ + L/F that saturates the single-parameter bound at the true θ.
pub fn optimal_estimator(model: &FockModel, theta: f64) -> Result<CMat> {
    if model.params() != 1 {
        return Err(Error::InvalidArgument("optimal estimator needs a single parameter".into()));
    }
    let l = sld_solve(model, 0)?;
    let f = qfim_fock_sld(model)?[(0, 0)];
    if !(f > 0.0) {
        return Err(Error::Singular("zero quantum Fisher information".into()));
    }
    let d = model.dim();
    Ok(CMat::identity(d, d) * c(theta) + l * c(1.0 / f))
}

#[derive(Debug, Clone)]
pub struct Povm {
    elements: Vec<CMat>,
}

impl Povm {
    pub fn new(elements: Vec<CMat>) -> Result<Self> {
        let d = elements.first().map(|e| e.nrows()).ok_or_else(|| Error::InvalidArgument("empty POVM".into()))?;
        if elements.iter().any(|e| e.shape() != (d, d)) {
            return Err(Error::DimensionMismatch("POVM element shapes".into()));
        }
        let sum = elements.iter().fold(CMat::zeros(d, d), |acc, e| acc + e);
        let err = numkit::max_abs(&(sum - CMat::identity(d, d)));
        if err > 1e-10 {
            return Err(Error::InvalidArgument(format!("POVM completeness violated by {err:.2e}")));
        }
        if elements.iter().any(|e| !numkit::is_psd(e, 1e-10)) {
            return Err(Error::InvalidArgument("POVM element is not PSD".into()));
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    /// Projective measurement in the number basis.
    pub fn computational(dim: usize) -> Self {
        let elements = (0..dim)
            .map(|k| {
                let mut e = CMat::zeros(dim, dim);
                e[(k, k)] = c(1.0);
                e
            })
            .collect();
        Self { elements }
    }

    /// Rank-one projectors onto the eigenvectors of a Hermitian operator.
    pub fn eigenprojectors(op: &CMat) -> Result<Self> {
        let e = SymmetricEigen::new(numkit::hermitize(op));
        let elements = e.eigenvectors.column_iter().map(|v| v * v.adjoint()).collect();
        Self::new(elements)
    }

    /// Random POVM with `outcomes` elements, S^{-1/2} G_x S^{-1/2} with G_x = A_x† A_x.
    pub fn random<R: Rng>(dim: usize, outcomes: usize, rng: &mut R) -> Result<Self> {
        let gs: Vec<CMat> = (0..outcomes)
            .map(|_| {
                let a = CMat::from_fn(dim, dim, |_, _| {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                });
                a.adjoint() * a
            })
            .collect();
        let s = gs.iter().fold(CMat::zeros(dim, dim), |acc, g| acc + g);
        let e = SymmetricEigen::new(numkit::hermitize(&s));
        let root_inv =
            &e.eigenvectors * CMat::from_diagonal(&e.eigenvalues.map(|x| c(1.0 / x.sqrt()))) * e.eigenvectors.adjoint();
        let elements = gs.iter().map(|g| numkit::hermitize(&(&root_inv * g * &root_inv))).collect();
        Self::new(elements)
    }
}

/// Classical Fisher information of the outcomes p(x) = Tr[ρ Π_x].
pub fn cfi_povm(model: &FockModel, povm: &Povm) -> Result<RMat> {
    if povm.elements[0].nrows() != model.dim() {
        return Err(Error::DimensionMismatch("POVM and model dimensions".into()));
    }
    let m = model.params();
    let mut f = RMat::zeros(m, m);
    let mut dropped = 0.0;
    for e in &povm.elements {
        let p = (&model.rho * e).trace().re;
        if p < -1e-10 {
            return Err(Error::Unphysical(format!("negative outcome probability {p:.3e}")));
        }
        if p <= 1e-12 {
            dropped += p.max(0.0);
            continue;
        }
        let dp: Vec<f64> = model.drho.iter().map(|d| (d * e).trace().re).collect();
        for j in 0..m {
            for k in 0..m {
                f[(j, k)] += dp[j] * dp[k] / p;
            }
        }
    }
    if dropped > 0.0 {
        warn!("dropped outcomes carrying probability {dropped:.3e}");
    }
    Ok(f)
}

//! SLD/RLD quantum Fisher information for Gaussian models, incompatibility,
//! quantumness and the Holevo sandwich.

use log::warn;
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::gaussian::{omega, uncertainty_matrix, GaussianState};
use crate::numkit::{self, CMat, CVec, RMat, RVec, PINV_RCOND};

pub const FD_STEP: f64 = 1e-5;
/// Smallest eigenvalue of V + iΩ below which the state counts as pure along some direction.
pub const RLD_SINGULAR_TOL: f64 = 1e-9;
/// Base step of the one-sided V + εI extrapolation used for B_R on singular V + iΩ.
pub const RLD_REG_STEP: f64 = 1e-7;
pub const RQ_RANGE_TOL: f64 = 1e-8;

/// Parameter derivatives of the moments, one entry per parameter.
#[derive(Debug, Clone)]
pub struct StateDerivs {
    pub dd: Vec<RVec>,
    pub dv: Vec<RMat>,
}

pub trait GaussianModel: Sync {
    fn param_count(&self) -> usize;
    fn state(&self, theta: &[f64]) -> Result<GaussianState>;

    fn derivatives(&self, theta: &[f64]) -> Result<StateDerivs> {
        finite_difference(self, theta, FD_STEP)
    }
}

/// Central differences of (d, V).
pub fn finite_difference<M: GaussianModel + ?Sized>(model: &M, theta: &[f64], h: f64) -> Result<StateDerivs> {
    check_theta(model, theta)?;
    let mut out = StateDerivs { dd: vec![], dv: vec![] };
    for k in 0..model.param_count() {
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[k] += h;
        tm[k] -= h;
        let (sp, sm) = (model.state(&tp)?, model.state(&tm)?);
        out.dd.push((sp.d() - sm.d()) / (2.0 * h));
        out.dv.push(numkit::hermitize(&((sp.v() - sm.v()) / (2.0 * h))));
    }
    Ok(out)
}

fn check_theta<M: GaussianModel + ?Sized>(model: &M, theta: &[f64]) -> Result<()> {
    if theta.len() != model.param_count() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} parameters, got {}",
            model.param_count(),
            theta.len()
        )));
    }
    Ok(())
}

type StateFn = dyn Fn(&[f64]) -> Result<GaussianState> + Send + Sync;
type DerivFn = dyn Fn(&[f64]) -> Result<StateDerivs> + Send + Sync;

/// Model from closures, with optional analytic derivatives.
pub struct FnModel {
    params: usize,
    state: Box<StateFn>,
    derivs: Option<Box<DerivFn>>,
    step: f64,
}

impl FnModel {
    pub fn new(params: usize, f: impl Fn(&[f64]) -> Result<GaussianState> + Send + Sync + 'static) -> Self {
        Self { params, state: Box::new(f), derivs: None, step: FD_STEP }
    }

    pub fn with_derivatives(mut self, g: impl Fn(&[f64]) -> Result<StateDerivs> + Send + Sync + 'static) -> Self {
        self.derivs = Some(Box::new(g));
        self
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.step = h;
        self
    }
}

impl GaussianModel for FnModel {
    fn param_count(&self) -> usize {
        self.params
    }

    fn state(&self, theta: &[f64]) -> Result<GaussianState> {
        check_theta(self, theta)?;
        (self.state)(theta)
    }

    fn derivatives(&self, theta: &[f64]) -> Result<StateDerivs> {
        match &self.derivs {
            Some(g) => {
                check_theta(self, theta)?;
                g(theta)
            }
            None => finite_difference(self, theta, self.step),
        }
    }
}

/// Phase rotation of mode 0 of a fixed probe. One parameter.
pub struct PhaseModel {
    pub probe: GaussianState,
}

fn rot_embed(phi: f64, modes: usize, derivative: bool) -> RMat {
    let (s, c) = phi.sin_cos();
    let blk = if derivative { [-s, c, -c, -s] } else { [c, s, -s, c] };
    let mut m = if derivative { RMat::zeros(2 * modes, 2 * modes) } else { RMat::identity(2 * modes, 2 * modes) };
    m.view_mut((0, 0), (2, 2)).copy_from(&RMat::from_row_slice(2, 2, &blk));
    m
}

impl GaussianModel for PhaseModel {
    fn param_count(&self) -> usize {
        1
    }

    fn state(&self, theta: &[f64]) -> Result<GaussianState> {
        check_theta(self, theta)?;
        let r = rot_embed(theta[0], self.probe.modes(), false);
        GaussianState::from_moments(&r * self.probe.d(), &r * self.probe.v() * r.transpose())
    }

    fn derivatives(&self, theta: &[f64]) -> Result<StateDerivs> {
        check_theta(self, theta)?;
        let n = self.probe.modes();
        let r = rot_embed(theta[0], n, false);
        let dr = rot_embed(theta[0], n, true);
        let v0 = self.probe.v();
        let dv = &dr * v0 * r.transpose() + &r * v0 * dr.transpose();
        Ok(StateDerivs { dd: vec![&dr * self.probe.d()], dv: vec![dv] })
    }
}

/// Displacement (θ1, θ2) of one mode of a probe, optionally followed by a
/// linear damping map d -> G d with additive noise already folded into `v_out`.
/// Bounds of this model depend only on `v_out` and the damping of the displaced mode.
pub struct DisplacementModel {
    base_d: RVec,
    v_out: RMat,
    damping: RMat,
    mode: usize,
}

impl DisplacementModel {
    /// Displace `mode` of `probe` with no further evolution.
    pub fn new(probe: &GaussianState, mode: usize) -> Result<Self> {
        let n = probe.d().len();
        Self::with_map(probe, mode, RMat::identity(n, n), probe.v().clone())
    }

    /// `damping` acts on the displaced mean, `v_out` is the final covariance.
    pub fn with_map(probe: &GaussianState, mode: usize, damping: RMat, v_out: RMat) -> Result<Self> {
        let n = probe.d().len();
        if mode >= probe.modes() {
            return Err(Error::InvalidArgument(format!("mode {mode} out of range")));
        }
        if damping.shape() != (n, n) || v_out.shape() != (n, n) {
            return Err(Error::DimensionMismatch("damping / covariance size".into()));
        }
        Ok(Self { base_d: probe.d().clone(), v_out, damping, mode })
    }
}

impl GaussianModel for DisplacementModel {
    fn param_count(&self) -> usize {
        2
    }

    fn state(&self, theta: &[f64]) -> Result<GaussianState> {
        check_theta(self, theta)?;
        let mut d = self.base_d.clone();
        d[2 * self.mode] += theta[0];
        d[2 * self.mode + 1] += theta[1];
        GaussianState::from_moments(&self.damping * d, self.v_out.clone())
    }

    fn derivatives(&self, theta: &[f64]) -> Result<StateDerivs> {
        check_theta(self, theta)?;
        let n = self.base_d.len();
        let dd = (0..2).map(|k| self.damping.column(2 * self.mode + k).into_owned()).collect();
        Ok(StateDerivs { dd, dv: vec![RMat::zeros(n, n); 2] })
    }
}

/// A model evaluated at one θ.
#[derive(Debug, Clone)]
pub struct ModelPoint {
    pub state: GaussianState,
    pub derivs: StateDerivs,
}

impl ModelPoint {
    pub fn evaluate<M: GaussianModel + ?Sized>(model: &M, theta: &[f64]) -> Result<Self> {
        let state = model.state(theta)?;
        let derivs = model.derivatives(theta)?;
        let n = state.d().len();
        if derivs.dd.len() != model.param_count() || derivs.dv.len() != model.param_count() {
            return Err(Error::DimensionMismatch("derivative count".into()));
        }
        for (a, b) in derivs.dd.iter().zip(&derivs.dv) {
            if a.len() != n || b.shape() != (n, n) {
                return Err(Error::DimensionMismatch("derivative shape".into()));
            }
            if !a.iter().chain(b.iter()).all(|x| x.is_finite()) {
                return Err(Error::NonFinite("parameter derivatives".into()));
            }
        }
        Ok(Self { state, derivs })
    }

    pub fn params(&self) -> usize {
        self.derivs.dd.len()
    }

    /// Same derivatives with V replaced by V + εI.
    fn regularized(&self, eps: f64) -> Result<Self> {
        let n = self.state.d().len();
        let v = self.state.v() + RMat::identity(n, n) * eps;
        Ok(Self { state: GaussianState::from_moments(self.state.d().clone(), v)?, derivs: self.derivs.clone() })
    }

    fn sigma_pinv(&self) -> RMat {
        let v = self.state.v();
        let o = omega(self.state.modes());
        let sigma = numkit::kron(v, v) - numkit::kron(&o, &o);
        numkit::pinv_rel(&sigma, PINV_RCOND)
    }

    /// V⁻¹, falling back to the pseudo-inverse; the flag reports the fallback.
    fn v_inverse(&self) -> (RMat, bool) {
        match self.state.v().clone().try_inverse() {
            Some(inv) if inv.iter().all(|x| x.is_finite()) && self.state.v().determinant().abs() > 1e-300 => {
                (inv, false)
            }
            _ => (numkit::pinv_rel(self.state.v(), PINV_RCOND), true),
        }
    }

    fn m_pinv(&self) -> CMat {
        numkit::pinv_rel(&uncertainty_matrix(self.state.v()), PINV_RCOND)
    }

    pub fn uncertainty_is_singular(&self) -> Result<bool> {
        Ok(numkit::min_eigenvalue(&uncertainty_matrix(self.state.v()))? < RLD_SINGULAR_TOL)
    }
}

#[derive(Debug, Clone)]
pub struct SldComponents {
    pub l0: f64,
    pub l1: RVec,
    pub l2: RMat,
    pub v_pinv_fallback: bool,
}

#[derive(Debug, Clone)]
pub struct RldComponents {
    pub l0: Complex64,
    pub l1: CVec,
    pub l2: CMat,
}

fn check_mu(p: &ModelPoint, mu: usize) -> Result<()> {
    if mu >= p.params() {
        return Err(Error::InvalidArgument(format!("parameter index {mu} out of range")));
    }
    Ok(())
}

pub fn sld_components_at(p: &ModelPoint, mu: usize) -> Result<SldComponents> {
    check_mu(p, mu)?;
    let n = p.state.d().len();
    let v = p.state.v();
    let d = p.state.d();
    let l2 = numkit::unvec(&(p.sigma_pinv() * numkit::vec(&p.derivs.dv[mu])), n, n)?;
    let l2 = numkit::hermitize(&l2);
    let (vinv, fallback) = p.v_inverse();
    let l1 = &vinv * &p.derivs.dd[mu] * 2.0 - &l2 * d * 2.0;
    let l0 = -0.5 * (v * &l2).trace() - d.dot(&l1) - d.dot(&(&l2 * d));
    Ok(SldComponents { l0, l1, l2, v_pinv_fallback: fallback })
}

pub fn rld_components_at(p: &ModelPoint, mu: usize) -> Result<RldComponents> {
    check_mu(p, mu)?;
    let n = p.state.d().len();
    let m = uncertainty_matrix(p.state.v());
    let big = numkit::kron(&m.adjoint(), &m);
    let dv = numkit::to_complex(&p.derivs.dv[mu]);
    let l2 = numkit::unvec(&(numkit::pinv_rel(&big, PINV_RCOND) * numkit::vec(&dv)), n, n)?;
    let d = p.state.d().map(|x| Complex64::new(x, 0.0));
    let dd = p.derivs.dd[mu].map(|x| Complex64::new(x, 0.0));
    let two = Complex64::new(2.0, 0.0);
    let l1 = p.m_pinv() * dd * two - &l2 * &d * two;
    let l0 = -(&m * &l2).trace() * 0.5 - d.dot(&l1) - d.dot(&(&l2 * &d));
    Ok(RldComponents { l0, l1, l2 })
}

pub fn sld_components<M: GaussianModel + ?Sized>(model: &M, theta: &[f64], mu: usize) -> Result<SldComponents> {
    sld_components_at(&ModelPoint::evaluate(model, theta)?, mu)
}

pub fn rld_components<M: GaussianModel + ?Sized>(model: &M, theta: &[f64], mu: usize) -> Result<RldComponents> {
    rld_components_at(&ModelPoint::evaluate(model, theta)?, mu)
}

/// ½ vec[∂V]ᵀ Σ⁺ vec[∂V] + 2 ∂dᵀ V⁻¹ ∂d with Σ = V⊗V − Ω⊗Ω.
pub fn qfim_sld_at(p: &ModelPoint) -> RMat {
    let m = p.params();
    let sp = p.sigma_pinv();
    let (vinv, _) = p.v_inverse();
    let vecs: Vec<RVec> = p.derivs.dv.iter().map(numkit::vec).collect();
    let f = RMat::from_fn(m, m, |a, b| {
        0.5 * vecs[a].dot(&(&sp * &vecs[b])) + 2.0 * p.derivs.dd[a].dot(&(&vinv * &p.derivs.dd[b]))
    });
    numkit::hermitize(&f)
}

/// ½ vec[∂V]† (𝔐⊗𝔐)⁺ vec[∂V] + 2 ∂dᵀ 𝔐⁺ ∂d with 𝔐 = V + iΩ.
pub fn qfim_rld_at(p: &ModelPoint) -> CMat {
    let m = p.params();
    let mm = uncertainty_matrix(p.state.v());
    let big = numkit::pinv_rel(&numkit::kron(&mm, &mm), PINV_RCOND);
    let mp = p.m_pinv();
    let vecs: Vec<CVec> = p.derivs.dv.iter().map(|x| numkit::vec(&numkit::to_complex(x))).collect();
    let dds: Vec<CVec> = p.derivs.dd.iter().map(|x| x.map(|y| Complex64::new(y, 0.0))).collect();
    let f = CMat::from_fn(m, m, |a, b| vecs[a].dotc(&(&big * &vecs[b])) * 0.5 + dds[a].dot(&(&mp * &dds[b])) * 2.0);
    numkit::hermitize(&f)
}

/// 2 vec[∂V]ᵀ Σ⁺ (V⊗Ω) Σ⁺ vec[∂V] + 2 ∂dᵀ V⁻¹ Ω V⁻¹ ∂d, antisymmetrized.
pub fn incompatibility_at(p: &ModelPoint) -> RMat {
    let m = p.params();
    let o = omega(p.state.modes());
    let sp = p.sigma_pinv();
    let mid = &sp * numkit::kron(p.state.v(), &o) * &sp;
    let (vinv, _) = p.v_inverse();
    let mid_d = &vinv * &o * &vinv;
    let vecs: Vec<RVec> = p.derivs.dv.iter().map(numkit::vec).collect();
    let u = RMat::from_fn(m, m, |a, b| {
        2.0 * vecs[a].dot(&(&mid * &vecs[b])) + 2.0 * p.derivs.dd[a].dot(&(&mid_d * &p.derivs.dd[b]))
    });
    (&u - u.transpose()) * 0.5
}

pub fn qfim_sld<M: GaussianModel + ?Sized>(model: &M, theta: &[f64]) -> Result<RMat> {
    Ok(qfim_sld_at(&ModelPoint::evaluate(model, theta)?))
}

pub fn qfim_rld<M: GaussianModel + ?Sized>(model: &M, theta: &[f64]) -> Result<CMat> {
    Ok(qfim_rld_at(&ModelPoint::evaluate(model, theta)?))
}

pub fn incompatibility<M: GaussianModel + ?Sized>(model: &M, theta: &[f64]) -> Result<RMat> {
    Ok(incompatibility_at(&ModelPoint::evaluate(model, theta)?))
}

/// Inverse of a symmetric positive-definite QFIM, or an error naming the null direction.
pub fn invert_qfim(f: &RMat) -> Result<RMat> {
    let eig = SymmetricEigen::new(numkit::hermitize(f));
    let (k, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Singular("empty QFIM".into()))?;
    let lmax = eig.eigenvalues.amax();
    if !(lmin > 1e-12 * lmax.max(1e-300)) {
        let dir: Vec<String> = eig.eigenvectors.column(k).iter().map(|x| format!("{x:.4}")).collect();
        return Err(Error::Singular(format!("QFIM has eigenvalue {lmin:.3e} along direction [{}]", dir.join(", "))));
    }
    let inv = &eig.eigenvectors * RMat::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x)) * eig.eigenvectors.transpose();
    Ok(numkit::hermitize(&inv))
}

/// Raw largest |eigenvalue| of i F⁻¹ U, via the similar Hermitian matrix i F^{-1/2} U F^{-1/2}.
pub fn quantumness(f_sld: &RMat, u: &RMat) -> Result<f64> {
    if f_sld.shape() != u.shape() {
        return Err(Error::DimensionMismatch("QFIM and incompatibility matrix".into()));
    }
    let inv = invert_qfim(f_sld)?;
    let root = numkit::sqrt_psd(&inv)?;
    let h = numkit::to_complex(&(&root * u * &root)) * Complex64::i();
    let r = numkit::largest_eig_abs(&h)?;
    if !r.is_finite() {
        return Err(Error::NonFinite("quantumness".into()));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub b_s: f64,
    pub b_r: f64,
    pub b_h_mid: f64,
    pub b_h_upper: f64,
    /// Clamped to [0, 1].
    pub r_q: f64,
    pub r_q_raw: f64,
}

/// B_R from an RLD-QFIM (pseudo-inverted) and a weight root.
fn rld_bound(f_rld: &CMat, w: &RMat, w_root: &RMat) -> Result<f64> {
    let inv = numkit::hermitize(&numkit::pinv_rel(f_rld, PINV_RCOND));
    let re = numkit::re(&inv);
    let im = numkit::im(&inv);
    Ok((w * re).trace() + numkit::trace_abs(&(w_root * im * w_root))?)
}

fn resolve_weight(weight: Option<&RMat>, m: usize) -> Result<RMat> {
    let w = weight.cloned().unwrap_or_else(|| RMat::identity(m, m));
    if w.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!("weight is {:?}, expected {m}x{m}", w.shape())));
    }
    if (&w - w.transpose()).amax() > 1e-12 {
        return Err(Error::InvalidArgument("weight matrix must be symmetric".into()));
    }
    Ok(w)
}

/// The bound chain from precomputed matrices. `weight` defaults to the identity.
pub fn bound_chain(f_sld: &RMat, f_rld: &CMat, u: &RMat, weight: Option<&RMat>) -> Result<Bounds> {
    let m = f_sld.nrows();
    if f_sld.shape() != (m, m) || f_rld.shape() != (m, m) || u.shape() != (m, m) {
        return Err(Error::DimensionMismatch("bound_chain inputs".into()));
    }
    let w = resolve_weight(weight, m)?;
    let w_root = numkit::sqrt_psd(&w)?;
    let finv = invert_qfim(f_sld)?;
    let b_s = (&w * &finv).trace();
    let b_r = rld_bound(f_rld, &w, &w_root)?;
    let b_h_mid = b_s + numkit::trace_abs(&(&w_root * &finv * u * &finv * &w_root))?;
    let r_q_raw = quantumness(f_sld, u)?;
    if !(-RQ_RANGE_TOL..=1.0 + RQ_RANGE_TOL).contains(&r_q_raw) {
        warn!("quantumness {r_q_raw} outside [0, 1]");
    }
    let r_q = r_q_raw.clamp(0.0, 1.0);
    Ok(Bounds { b_s, b_r, b_h_mid, b_h_upper: (1.0 + r_q) * b_s, r_q, r_q_raw })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// V was singular and the SLD used its pseudo-inverse.
    pub v_pinv_fallback: bool,
    /// V + iΩ is singular; f_rld comes from the pseudo-inverse.
    pub rld_singular: bool,
    /// b_r was taken as the V + εI -> V limit instead of from f_rld.
    pub b_r_regularized: bool,
    pub r_q_out_of_range: bool,
}

#[derive(Debug, Clone)]
pub struct QfimReport {
    pub f_sld: RMat,
    pub f_rld: CMat,
    pub u: RMat,
    pub weight: RMat,
    pub bounds: Bounds,
    pub diagnostics: Diagnostics,
}

impl QfimReport {
    pub fn r_q(&self) -> f64 {
        self.bounds.r_q
    }
    pub fn b_s(&self) -> f64 {
        self.bounds.b_s
    }
    pub fn b_r(&self) -> f64 {
        self.bounds.b_r
    }
    pub fn b_h_mid(&self) -> f64 {
        self.bounds.b_h_mid
    }
    pub fn b_h_upper(&self) -> f64 {
        self.bounds.b_h_upper
    }
}

#[derive(Serialize)]
struct ComplexRows {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    f_sld: Vec<Vec<f64>>,
    f_rld: ComplexRows,
    u: Vec<Vec<f64>>,
    weight: Vec<Vec<f64>>,
    r_q: f64,
    r_q_raw: f64,
    b_s: f64,
    b_r: f64,
    b_h_mid: f64,
    b_h_upper: f64,
    diagnostics: &'a Diagnostics,
}

impl Serialize for QfimReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReportJson {
            f_sld: numkit::to_rows(&self.f_sld),
            f_rld: ComplexRows {
                re: numkit::to_rows(&numkit::re(&self.f_rld)),
                im: numkit::to_rows(&numkit::im(&self.f_rld)),
            },
            u: numkit::to_rows(&self.u),
            weight: numkit::to_rows(&self.weight),
            r_q: self.bounds.r_q,
            r_q_raw: self.bounds.r_q_raw,
            b_s: self.bounds.b_s,
            b_r: self.bounds.b_r,
            b_h_mid: self.bounds.b_h_mid,
            b_h_upper: self.bounds.b_h_upper,
            diagnostics: &self.diagnostics,
        }
        .serialize(s)
    }
}

/// Full report at one point. When V + iΩ is singular the pseudo-inverse RLD-QFIM
/// jumps relative to nearby mixed states, so b_r is replaced by its V + εI -> V
/// limit (Richardson extrapolation in ε). f_rld is still the pseudo-inverse value.
pub fn qfim_report_at(p: &ModelPoint, weight: Option<&RMat>) -> Result<QfimReport> {
    let f_sld = qfim_sld_at(p);
    let f_rld = qfim_rld_at(p);
    let u = incompatibility_at(p);
    if !numkit::all_finite(&f_sld) || !numkit::all_finite(&f_rld) || !numkit::all_finite(&u) {
        return Err(Error::NonFinite("QFIM entries".into()));
    }
    let mut bounds = bound_chain(&f_sld, &f_rld, &u, weight)?;
    let w = resolve_weight(weight, p.params())?;
    let mut diag = Diagnostics {
        v_pinv_fallback: p.v_inverse().1,
        rld_singular: p.uncertainty_is_singular()?,
        r_q_out_of_range: !(-RQ_RANGE_TOL..=1.0 + RQ_RANGE_TOL).contains(&bounds.r_q_raw),
        ..Default::default()
    };
    if diag.rld_singular {
        let w_root = numkit::sqrt_psd(&w)?;
        let b = |eps: f64| -> Result<f64> { rld_bound(&qfim_rld_at(&p.regularized(eps)?), &w, &w_root) };
        bounds.b_r = 2.0 * b(RLD_REG_STEP)? - b(2.0 * RLD_REG_STEP)?;
        diag.b_r_regularized = true;
    }
    Ok(QfimReport { f_sld, f_rld, u, weight: w, bounds, diagnostics: diag })
}

pub fn qfim_report<M: GaussianModel + ?Sized>(model: &M, theta: &[f64], weight: Option<&RMat>) -> Result<QfimReport> {
    qfim_report_at(&ModelPoint::evaluate(model, theta)?, weight)
}

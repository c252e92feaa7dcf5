//! General-dyne Gaussian measurements: outcome laws, densities, sampling and
//! the classical Fisher information of the outcome statistics.

use std::f64::consts::PI;

use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, SymplecticOp};
use crate::numkit::{self, RMat, RVec};
use crate::qfi::{GaussianModel, ModelPoint};

/// Measurement on one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DyneMode {
    /// Projection onto a squeezed coherent state, V_m = R_φ diag(s, 1/s) R_φᵀ.
    General {
        s: f64,
        phi: f64,
    },
    /// Infinitely squeezed limit: one real outcome, cos(angle) Q + sin(angle) P.
    Homodyne {
        angle: f64,
    },
    Heterodyne,
}

impl DyneMode {
    pub fn homodyne_q() -> Self {
        DyneMode::Homodyne { angle: 0.0 }
    }

    pub fn homodyne_p() -> Self {
        DyneMode::Homodyne { angle: PI / 2.0 }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            DyneMode::General { s, phi } => {
                if !(s > 0.0) || !s.is_finite() || !phi.is_finite() {
                    return Err(Error::InvalidArgument(format!("general-dyne needs finite s > 0, got s = {s}")));
                }
            }
            DyneMode::Homodyne { angle } => {
                if !angle.is_finite() {
                    return Err(Error::InvalidArgument("homodyne angle must be finite".into()));
                }
            }
            DyneMode::Heterodyne => {}
        }
        Ok(())
    }

    fn outcomes(&self) -> usize {
        match self {
            DyneMode::Homodyne { .. } => 1,
            _ => 2,
        }
    }

    /// 2x2 measurement covariance; `None` for the homodyne limit.
    pub fn cov(&self) -> Option<RMat> {
        match *self {
            DyneMode::General { s, phi } => {
                let (sn, c) = phi.sin_cos();
                let rot = RMat::from_row_slice(2, 2, &[c, -sn, sn, c]);
                Some(&rot * RMat::from_diagonal(&RVec::from_row_slice(&[s, 1.0 / s])) * rot.transpose())
            }
            DyneMode::Heterodyne => Some(RMat::identity(2, 2)),
            DyneMode::Homodyne { .. } => None,
        }
    }
}

/// Detector inefficiency modeled as the dual of a loss channel with rate γ over time t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inefficiency {
    pub gamma: f64,
    pub t: f64,
}

impl Inefficiency {
    fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0) || !(self.gamma >= 0.0) || !self.t.is_finite() || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "inefficiency needs gamma >= 0 and t >= 0, got ({}, {})",
                self.gamma, self.t
            )));
        }
        Ok(())
    }

    /// Added noise e^{γt} - 1.
    fn noise(&self) -> f64 {
        (self.gamma * self.t).exp_m1()
    }
}

/// X V_m Xᵀ + Y with X = e^{γt/2} I and Y = (e^{γt} - 1) I.
pub fn dress_inefficient(m_cov: &RMat, gamma: f64, t: f64) -> Result<RMat> {
    let ineff = Inefficiency { gamma, t };
    ineff.validate()?;
    let n = m_cov.nrows();
    if n != m_cov.ncols() {
        return Err(Error::DimensionMismatch("measurement covariance must be square".into()));
    }
    Ok(m_cov * (gamma * t).exp() + RMat::identity(n, n) * ineff.noise())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralDyne {
    pub modes: Vec<DyneMode>,
    #[serde(default)]
    pub inefficiency: Option<Inefficiency>,
}

impl GeneralDyne {
    pub fn new(modes: Vec<DyneMode>) -> Result<Self> {
        let m = Self { modes, inefficiency: None };
        m.validate()?;
        Ok(m)
    }

    pub fn with_inefficiency(mut self, gamma: f64, t: f64) -> Result<Self> {
        let ineff = Inefficiency { gamma, t };
        ineff.validate()?;
        self.inefficiency = Some(ineff);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::InvalidArgument("measurement needs at least one mode".into()));
        }
        for m in &self.modes {
            m.validate()?;
        }
        if let Some(i) = &self.inefficiency {
            i.validate()?;
        }
        Ok(())
    }

    pub fn outcome_count(&self) -> usize {
        self.modes.iter().map(DyneMode::outcomes).sum()
    }

    /// Direct sum of the per-mode measurement covariances, dressed if inefficient.
    /// Fails on homodyne modes, which have no finite covariance.
    pub fn measurement_cov(&self) -> Result<RMat> {
        let n = self.modes.len();
        let mut out = RMat::zeros(2 * n, 2 * n);
        for (k, m) in self.modes.iter().enumerate() {
            let c = m
                .cov()
                .ok_or_else(|| Error::InvalidArgument(format!("mode {k} is homodyne; its covariance is not finite")))?;
            out.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&c);
        }
        match &self.inefficiency {
            Some(i) => dress_inefficient(&out, i.gamma, i.t),
            None => Ok(out),
        }
    }

    /// Selection matrix from phase space to outcome space and the measurement
    /// noise there.
    fn projection(&self) -> (RMat, RMat) {
        let n = self.modes.len();
        let k_out = self.outcome_count();
        let mut p = RMat::zeros(k_out, 2 * n);
        let mut noise = RMat::zeros(k_out, k_out);
        let (scale, extra) = match &self.inefficiency {
            Some(i) => ((i.gamma * i.t).exp(), i.noise()),
            None => (1.0, 0.0),
        };
        let mut row = 0;
        for (k, m) in self.modes.iter().enumerate() {
            match m {
                DyneMode::Homodyne { angle } => {
                    let (s, c) = angle.sin_cos();
                    p[(row, 2 * k)] = c;
                    p[(row, 2 * k + 1)] = s;
                    noise[(row, row)] = extra;
                    row += 1;
                }
                _ => {
                    p[(row, 2 * k)] = 1.0;
                    p[(row + 1, 2 * k + 1)] = 1.0;
                    let c = m.cov().expect("finite covariance") * scale + RMat::identity(2, 2) * extra;
                    noise.view_mut((row, row), (2, 2)).copy_from(&c);
                    row += 2;
                }
            }
        }
        (p, noise)
    }
}

/// Heterodyne on every mode.
pub fn heterodyne(modes: usize) -> GeneralDyne {
    GeneralDyne { modes: vec![DyneMode::Heterodyne; modes], inefficiency: None }
}

/// Two-mode readout behind a 50:50 beam splitter: Q on output 0 and the
/// quadrature at `angle` on output 1.
pub fn epr_readout(angle: f64) -> (SymplecticOp, GeneralDyne) {
    (
        SymplecticOp::beam_splitter_5050(),
        GeneralDyne { modes: vec![DyneMode::homodyne_q(), DyneMode::Homodyne { angle }], inefficiency: None },
    )
}

/// Gaussian law of the outcomes: mean P d and covariance ½(P V Pᵀ + V_m),
/// with parameter derivatives when built from a model.
#[derive(Debug, Clone)]
pub struct OutcomeLaw {
    pub mean: RVec,
    pub cov: RMat,
    pub dmean: Vec<RVec>,
    pub dcov: Vec<RMat>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl OutcomeLaw {
    fn build(mean: RVec, cov: RMat, dmean: Vec<RVec>, dcov: Vec<RMat>) -> Result<Self> {
        let cov = numkit::hermitize(&cov);
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::Singular("outcome covariance is not positive definite".into()))?;
        Ok(Self { mean, cov, dmean, dcov, chol })
    }

    pub fn of_state(state: &GaussianState, m: &GeneralDyne) -> Result<Self> {
        check_modes(state.modes(), m)?;
        let (p, noise) = m.projection();
        let cov = (&p * state.v() * p.transpose() + noise) * 0.5;
        Self::build(&p * state.d(), cov, vec![], vec![])
    }

    /// Outcome law of `model` at θ after an optional Gaussian unitary `pre`.
    pub fn of_model<M: GaussianModel + ?Sized>(
        model: &M,
        theta: &[f64],
        m: &GeneralDyne,
        pre: Option<&SymplecticOp>,
    ) -> Result<Self> {
        let pt = ModelPoint::evaluate(model, theta)?;
        Self::at_point(&pt, m, pre)
    }

    pub fn at_point(pt: &ModelPoint, m: &GeneralDyne, pre: Option<&SymplecticOp>) -> Result<Self> {
        let (state, dd, dv) = match pre {
            Some(op) => {
                let s = op.s();
                let st = op.apply(&pt.state)?;
                let dd = pt.derivs.dd.iter().map(|x| s * x).collect();
                let dv = pt.derivs.dv.iter().map(|x| s * x * s.transpose()).collect();
                (st, dd, dv)
            }
            None => (pt.state.clone(), pt.derivs.dd.clone(), pt.derivs.dv.clone()),
        };
        check_modes(state.modes(), m)?;
        let (p, noise) = m.projection();
        let cov = (&p * state.v() * p.transpose() + noise) * 0.5;
        let dmean = dd.iter().map(|x: &RVec| &p * x).collect();
        let dcov = dv.iter().map(|x: &RMat| &p * x * p.transpose() * 0.5).collect();
        Self::build(&p * state.d(), cov, dmean, dcov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn density(&self, x: &RVec) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    pub fn log_density(&self, x: &RVec) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "outcome of length {} for a {}-outcome measurement",
                x.len(),
                self.dim()
            )));
        }
        let r = x - &self.mean;
        let w = self.chol.solve(&r);
        let log_det: f64 = self.chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        Ok(-0.5 * r.dot(&w) - 0.5 * log_det - 0.5 * self.dim() as f64 * (2.0 * PI).ln())
    }

    /// ∂_μ log p(x) for every parameter.
    pub fn score(&self, x: &RVec) -> Result<RVec> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch("outcome length".into()));
        }
        let r = x - &self.mean;
        let w = self.chol.solve(&r);
        let inv = self.chol.inverse();
        Ok(RVec::from_fn(self.dmean.len(), |k, _| {
            self.dmean[k].dot(&w) - 0.5 * (&inv * &self.dcov[k]).trace() + 0.5 * w.dot(&(&self.dcov[k] * &w))
        }))
    }

    /// ∂μᵀΣ⁻¹∂μ + ½ Tr[Σ⁻¹∂Σ Σ⁻¹∂Σ]
    pub fn cfim(&self) -> RMat {
        let m = self.dmean.len();
        let inv = self.chol.inverse();
        let a: Vec<RMat> = self.dcov.iter().map(|d| &inv * d).collect();
        let f = RMat::from_fn(m, m, |j, k| self.dmean[j].dot(&(&inv * &self.dmean[k])) + 0.5 * (&a[j] * &a[k]).trace());
        numkit::hermitize(&f)
    }

    /// `n` independent outcomes drawn with the caller's generator.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<RVec> {
        let l = self.chol.l();
        (0..n)
            .map(|_| {
                let z = RVec::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
                &self.mean + &l * z
            })
            .collect()
    }
}

fn check_modes(state_modes: usize, m: &GeneralDyne) -> Result<()> {
    m.validate()?;
    if m.modes.len() != state_modes {
        return Err(Error::DimensionMismatch(format!(
            "{}-mode measurement on a {state_modes}-mode state",
            m.modes.len()
        )));
    }
    Ok(())
}

/// Probability density of `outcome` for `state` measured with `m`.
pub fn outcome_density(state: &GaussianState, m: &GeneralDyne, outcome: &RVec) -> Result<f64> {
    OutcomeLaw::of_state(state, m)?.density(outcome)
}

/// Classical Fisher information matrix of the outcomes of `m`, applied after
/// the optional unitary `pre`, for `model` at θ.
pub fn cfim_gaussian_outcomes<M: GaussianModel + ?Sized>(
    model: &M,
    theta: &[f64],
    m: &GeneralDyne,
    pre: Option<&SymplecticOp>,
) -> Result<RMat> {
    Ok(OutcomeLaw::of_model(model, theta, m, pre)?.cfim())
}

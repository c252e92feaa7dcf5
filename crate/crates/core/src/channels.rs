//! Markovian thermal-loss channel, evaluated through its closed-form moment map.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::numkit::{self, RMat};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeBath {
    pub gamma: f64,
    pub n_e: f64,
    #[serde(default)]
    pub m_e_re: f64,
    #[serde(default)]
    pub m_e_im: f64,
}

impl ModeBath {
    pub fn thermal(gamma: f64, n_e: f64) -> Self {
        Self { gamma, n_e, m_e_re: 0.0, m_e_im: 0.0 }
    }

    pub fn m_e(&self) -> Complex64 {
        Complex64::new(self.m_e_re, self.m_e_im)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma = {} must be >= 0", self.gamma)));
        }
        if !(self.n_e >= 0.0) || !self.n_e.is_finite() {
            return Err(Error::InvalidArgument(format!("n_e = {} must be >= 0", self.n_e)));
        }
        let m2 = self.m_e().norm_sqr();
        let cap = self.n_e * (self.n_e + 1.0);
        if m2 > cap * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::InvalidArgument(format!("bath squeezing |m_e|^2 = {m2} exceeds n_e(n_e+1) = {cap}")));
        }
        Ok(())
    }

    /// Asymptotic covariance block of this mode.
    pub fn v_inf(&self) -> RMat {
        let a = 2.0 * self.n_e + 1.0;
        RMat::from_row_slice(2, 2, &[a + self.m_e_re, self.m_e_im, self.m_e_im, a - self.m_e_re])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelJson", into = "ChannelJson")]
pub struct NoisyChannel {
    modes: Vec<ModeBath>,
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    modes: Vec<ModeBath>,
}

impl TryFrom<ChannelJson> for NoisyChannel {
    type Error = Error;
    fn try_from(j: ChannelJson) -> Result<Self> {
        NoisyChannel::new(j.modes)
    }
}

impl From<NoisyChannel> for ChannelJson {
    fn from(c: NoisyChannel) -> Self {
        ChannelJson { modes: c.modes }
    }
}

impl NoisyChannel {
    pub fn new(modes: Vec<ModeBath>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidArgument("channel needs at least one mode".into()));
        }
        for m in &modes {
            m.validate()?;
        }
        Ok(Self { modes })
    }

    /// Same bath on every mode.
    pub fn uniform(modes: usize, bath: ModeBath) -> Result<Self> {
        Self::new(vec![bath; modes])
    }

    pub fn modes(&self) -> &[ModeBath] {
        &self.modes
    }

    /// V_∞ as a direct sum of per-mode blocks.
    pub fn diffusion_matrix(&self) -> RMat {
        let n = self.modes.len();
        let mut v = RMat::zeros(2 * n, 2 * n);
        for (k, m) in self.modes.iter().enumerate() {
            v.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&m.v_inf());
        }
        v
    }

    /// Per-mode damping factors e^{-γ t / 2} on the diagonal.
    pub fn damping(&self, t: f64) -> RMat {
        let g: Vec<f64> = self
            .modes
            .iter()
            .flat_map(|m| {
                let e = (-0.5 * m.gamma * t).exp();
                [e, e]
            })
            .collect();
        RMat::from_diagonal(&numkit::RVec::from_vec(g))
    }

    /// d -> G d, V -> G V G + (1 - e^{-γ t}) V_∞ mode by mode.
    pub fn evolve(&self, s: &GaussianState, t: f64) -> Result<GaussianState> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("t = {t} must be finite and >= 0")));
        }
        if s.modes() != self.modes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}-mode channel on {}-mode state",
                self.modes.len(),
                s.modes()
            )));
        }
        let g = self.damping(t);
        let mut noise = self.diffusion_matrix();
        for (k, m) in self.modes.iter().enumerate() {
            let w = -(-m.gamma * t).exp_m1();
            noise.view_mut((2 * k, 0), (2, 2 * self.modes.len())).scale_mut(w);
        }
        let d = &g * s.d();
        let v = &g * s.v() * &g + noise;
        GaussianState::from_moments(d, numkit::hermitize(&v))
    }
}

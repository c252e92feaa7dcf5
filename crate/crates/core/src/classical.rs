//! Classical estimation: Fisher information, Cramér-Rao lower bound, maximum
//! likelihood and Monte Carlo checks of efficiency.

use std::sync::Arc;

use log::warn;
use nalgebra::SymmetricEigen;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkit::{self, RMat, RVec};

/// Tolerance on Σ w p(x) = 1 for custom models.
pub const NORMALIZATION_TOL: f64 = 1e-9;
pub const HESSIAN_STEP: f64 = 1e-5;
pub const ATTAINMENT_TOL: f64 = 1e-8;

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type SamplerFn = Arc<dyn Fn(&mut dyn RngCore, f64) -> f64 + Send + Sync>;

/// Scalar-parameter model given by its log-density and score. Expectations are
/// sums over `nodes` of (x, weight): unit weights for a pmf, quadrature
/// weights for a pdf.
#[derive(Clone)]
pub struct CustomModel {
    pub name: String,
    log_density: ScalarFn,
    score: ScalarFn,
    nodes: Vec<(f64, f64)>,
    bounds: (f64, f64),
    sampler: Option<SamplerFn>,
}

impl std::fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CustomModel").field("name", &self.name).field("bounds", &self.bounds).finish()
    }
}

impl CustomModel {
    pub fn new(
        name: &str,
        log_density: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        score: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        nodes: Vec<(f64, f64)>,
        bounds: (f64, f64),
    ) -> Result<Self> {
        if nodes.is_empty() || !(bounds.0 < bounds.1) {
            return Err(Error::InvalidArgument("custom model needs nodes and a nonempty parameter interval".into()));
        }
        Ok(Self {
            name: name.into(),
            log_density: Arc::new(log_density),
            score: Arc::new(score),
            nodes,
            bounds,
            sampler: None,
        })
    }

    pub fn with_sampler(mut self, f: impl Fn(&mut dyn RngCore, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.sampler = Some(Arc::new(f));
        self
    }

    fn check_normalized(&self, theta: f64) -> Result<()> {
        let total: f64 = self.nodes.iter().map(|&(x, w)| w * (self.log_density)(x, theta).exp()).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Validation(format!(
                "model '{}' is not normalized at θ = {theta}: total mass {total}",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum ClassicalModel {
    /// θ = success probability.
    Bernoulli,
    /// θ = (mean, variance).
    Normal,
    Custom(CustomModel),
}

impl ClassicalModel {
    pub fn name(&self) -> String {
        match self {
            ClassicalModel::Bernoulli => "bernoulli".into(),
            ClassicalModel::Normal => "normal".into(),
            ClassicalModel::Custom(c) => c.name.clone(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ClassicalModel::Normal => 2,
            _ => 1,
        }
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} expects {} parameters, got {}",
                self.name(),
                self.param_count(),
                theta.len()
            )));
        }
        let ok = match self {
            ClassicalModel::Bernoulli => theta[0] > 0.0 && theta[0] < 1.0,
            ClassicalModel::Normal => theta[0].is_finite() && theta[1] > 0.0 && theta[1].is_finite(),
            ClassicalModel::Custom(c) => theta[0] >= c.bounds.0 && theta[0] <= c.bounds.1,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("θ = {theta:?} outside the domain of {}", self.name())));
        }
        Ok(())
    }

    pub fn log_density(&self, x: f64, theta: &[f64]) -> f64 {
        match self {
            ClassicalModel::Bernoulli => {
                if x == 1.0 {
                    theta[0].ln()
                } else {
                    (1.0 - theta[0]).ln()
                }
            }
            ClassicalModel::Normal => {
                let (m, v) = (theta[0], theta[1]);
                -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m).powi(2) / (2.0 * v)
            }
            ClassicalModel::Custom(c) => (c.log_density)(x, theta[0]),
        }
    }

    /// ∂ log p(x; θ)
    pub fn score(&self, x: f64, theta: &[f64]) -> RVec {
        match self {
            ClassicalModel::Bernoulli => {
                let t = theta[0];
                RVec::from_element(1, x / t - (1.0 - x) / (1.0 - t))
            }
            ClassicalModel::Normal => {
                let (m, v) = (theta[0], theta[1]);
                let r = x - m;
                RVec::from_row_slice(&[r / v, -0.5 / v + r * r / (2.0 * v * v)])
            }
            ClassicalModel::Custom(c) => RVec::from_element(1, (c.score)(x, theta[0])),
        }
    }

    /// ∂² log p(x; θ); central differences of the score for custom models.
    pub fn hessian(&self, x: f64, theta: &[f64]) -> RMat {
        match self {
            ClassicalModel::Bernoulli => {
                let t = theta[0];
                RMat::from_element(1, 1, -x / (t * t) - (1.0 - x) / ((1.0 - t) * (1.0 - t)))
            }
            ClassicalModel::Normal => {
                let (m, v) = (theta[0], theta[1]);
                let r = x - m;
                RMat::from_row_slice(2, 2, &[-1.0 / v, -r / (v * v), -r / (v * v), 0.5 / (v * v) - r * r / (v * v * v)])
            }
            ClassicalModel::Custom(c) => {
                let t = theta[0];
                let d = ((c.score)(x, t + HESSIAN_STEP) - (c.score)(x, t - HESSIAN_STEP)) / (2.0 * HESSIAN_STEP);
                RMat::from_element(1, 1, d)
            }
        }
    }

    pub fn sample(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        Ok(match self {
            ClassicalModel::Bernoulli => {
                let b = Bernoulli::new(theta[0]).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                if b.sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
            ClassicalModel::Normal => {
                let n = Normal::new(theta[0], theta[1].sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                n.sample(rng)
            }
            ClassicalModel::Custom(c) => match &c.sampler {
                Some(f) => f(rng, theta[0]),
                None => return Err(Error::InvalidArgument(format!("model '{}' has no sampler", c.name))),
            },
        })
    }
}

/// Fisher information of `n` iid samples.
pub fn cfi(model: &ClassicalModel, theta: &[f64], n: usize) -> Result<RMat> {
    model.check_theta(theta)?;
    let per = match model {
        ClassicalModel::Bernoulli => RMat::from_element(1, 1, 1.0 / (theta[0] * (1.0 - theta[0]))),
        ClassicalModel::Normal => {
            let v = theta[1];
            RMat::from_diagonal(&RVec::from_row_slice(&[1.0 / v, 1.0 / (2.0 * v * v)]))
        }
        ClassicalModel::Custom(c) => {
            c.check_normalized(theta[0])?;
            let f: f64 = c
                .nodes
                .iter()
                .map(|&(x, w)| w * (c.log_density)(x, theta[0]).exp() * (c.score)(x, theta[0]).powi(2))
                .sum();
            RMat::from_element(1, 1, f)
        }
    };
    Ok(per * n as f64)
}

/// Eigenvectors of a Fisher matrix with (relatively) zero eigenvalue.
pub fn information_null_space(fim: &RMat) -> Vec<RVec> {
    let e = SymmetricEigen::new(numkit::hermitize(fim));
    let top = e.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    (0..e.eigenvalues.len())
        .filter(|&k| e.eigenvalues[k].abs() <= numkit::PINV_RCOND * top.max(f64::MIN_POSITIVE))
        .map(|k| e.eigenvectors.column(k).into_owned())
        .collect()
}

/// Pseudo-inverse of the Fisher matrix; zero-information directions are logged.
pub fn crlb(fim: &RMat) -> Result<RMat> {
    if fim.nrows() != fim.ncols() || fim.nrows() == 0 {
        return Err(Error::DimensionMismatch("Fisher matrix must be square and nonempty".into()));
    }
    if !numkit::all_finite(fim) {
        return Err(Error::NonFinite("Fisher matrix".into()));
    }
    let top = numkit::largest_eig_abs(fim)?;
    if numkit::min_eigenvalue(fim)? < -1e-10 * top.max(1.0) {
        return Err(Error::Validation("Fisher matrix is not positive semidefinite".into()));
    }
    for dir in information_null_space(fim) {
        warn!("no information along direction {:?}; bound is infinite there", dir.as_slice());
    }
    Ok(numkit::pinv_rel(fim, numkit::PINV_RCOND))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mle {
    pub estimate: Vec<f64>,
    /// The estimate sits on the boundary of the parameter domain.
    pub boundary: bool,
}

/// Unbiased sample variance with the 1/(N-1) normalization.
pub fn unbiased_variance(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("unbiased variance needs at least two samples".into()));
    }
    let n = samples.len() as f64;
    let m = samples.iter().sum::<f64>() / n;
    Ok(samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Maximum-likelihood estimate. Closed forms for the built-ins (the variance
/// MLE is the biased 1/N one); golden section then Newton for custom models.
pub fn mle(model: &ClassicalModel, samples: &[f64]) -> Result<Mle> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("MLE needs at least one sample".into()));
    }
    let n = samples.len() as f64;
    match model {
        ClassicalModel::Bernoulli => {
            if samples.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(Error::InvalidArgument("Bernoulli samples must be 0 or 1".into()));
            }
            let p = samples.iter().sum::<f64>() / n;
            Ok(Mle { estimate: vec![p], boundary: p == 0.0 || p == 1.0 })
        }
        ClassicalModel::Normal => {
            let m = samples.iter().sum::<f64>() / n;
            let v = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            Ok(Mle { estimate: vec![m, v], boundary: v == 0.0 })
        }
        ClassicalModel::Custom(c) => {
            let ll = |t: f64| -> f64 { samples.iter().map(|&x| (c.log_density)(x, t)).sum() };
            let (lo, hi) = c.bounds;
            let t = golden_max(ll, lo, hi, 1e-10);
            let t = newton_polish(c, samples, t);
            let tol = 1e-8 * (hi - lo);
            Ok(Mle { estimate: vec![t], boundary: t - lo < tol || hi - t < tol })
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn newton_polish(c: &CustomModel, samples: &[f64], t0: f64) -> f64 {
    let mut t = t0;
    for _ in 0..5 {
        let s: f64 = samples.iter().map(|&x| (c.score)(x, t)).sum();
        let h: f64 = samples
            .iter()
            .map(|&x| ((c.score)(x, t + HESSIAN_STEP) - (c.score)(x, t - HESSIAN_STEP)) / (2.0 * HESSIAN_STEP))
            .sum();
        if !(h < 0.0) {
            break;
        }
        let next = t - s / h;
        if !(next > c.bounds.0 && next < c.bounds.1) {
            break;
        }
        t = next;
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct Attainment {
    pub attained: bool,
    /// Largest |score - F (θ̂ - θ)| over the datasets, relative to max(1, |score|).
    pub max_residual: f64,
}

/// Checks score(x) = F(θ) (θ̂(x) - θ) for parameter `index` on each dataset,
/// with F the Fisher information of a dataset of that size.
pub fn attainment_check(
    model: &ClassicalModel,
    theta: &[f64],
    index: usize,
    estimator: impl Fn(&[f64]) -> f64,
    datasets: &[Vec<f64>],
) -> Result<Attainment> {
    model.check_theta(theta)?;
    if index >= model.param_count() {
        return Err(Error::InvalidArgument(format!("parameter index {index} out of range")));
    }
    let mut worst = 0.0f64;
    for data in datasets {
        let f = cfi(model, theta, data.len())?[(index, index)];
        let score: f64 = data.iter().map(|&x| model.score(x, theta)[index]).sum();
        let res = (score - f * (estimator(data) - theta[index])).abs() / score.abs().max(1.0);
        worst = worst.max(res);
    }
    Ok(Attainment { attained: worst <= ATTAINMENT_TOL, max_residual: worst })
}

/// Generator for replication `rep`: one seed, a distinct ChaCha stream per replication.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

pub fn draw(model: &ClassicalModel, theta: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    model.check_theta(theta)?;
    (0..n).map(|_| model.sample(theta, rng)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    pub model: String,
    pub theta: Vec<f64>,
    pub samples: usize,
    pub replications: usize,
    /// Diagonal of the CRLB for `samples` observations.
    pub crlb: Vec<f64>,
    pub mean_estimate: Vec<f64>,
    pub empirical_variance: Vec<f64>,
    pub ratio: Vec<f64>,
}

/// Runs `reps` independent MLE fits of `n` samples each, in parallel.
pub fn mle_monte_carlo(
    model: &ClassicalModel,
    theta: &[f64],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    model.check_theta(theta)?;
    if reps < 2 || n == 0 {
        return Err(Error::InvalidArgument("need n >= 1 and at least two replications".into()));
    }
    let bound = crlb(&cfi(model, theta, n)?)?;
    let fits: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(seed, rep as u64);
            let xs = draw(model, theta, n, &mut rng)?;
            Ok(mle(model, &xs)?.estimate)
        })
        .collect::<Result<_>>()?;
    let k = model.param_count();
    let r = reps as f64;
    let mean: Vec<f64> = (0..k).map(|j| fits.iter().map(|f| f[j]).sum::<f64>() / r).collect();
    let var: Vec<f64> =
        (0..k).map(|j| fits.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / (r - 1.0)).collect();
    let crlb_diag: Vec<f64> = (0..k).map(|j| bound[(j, j)]).collect();
    Ok(MonteCarloReport {
        model: model.name(),
        theta: theta.to_vec(),
        samples: n,
        replications: reps,
        ratio: var.iter().zip(&crlb_diag).map(|(v, c)| v / c).collect(),
        crlb: crlb_diag,
        mean_estimate: mean,
        empirical_variance: var,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InformationIdentity {
    pub score_outer: RMatRows,
    pub neg_hessian: RMatRows,
    /// Standard error of the difference, entrywise.
    pub std_error: RMatRows,
    pub score_mean: Vec<f64>,
}

pub type RMatRows = Vec<Vec<f64>>;

/// Monte Carlo estimates of E[s sᵀ] and -E[∂² log p] from `m` draws.
pub fn information_identity(
    model: &ClassicalModel,
    theta: &[f64],
    m: usize,
    rng: &mut dyn RngCore,
) -> Result<InformationIdentity> {
    model.check_theta(theta)?;
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two draws".into()));
    }
    let k = model.param_count();
    let mut sum_a = RMat::zeros(k, k);
    let mut sum_b = RMat::zeros(k, k);
    let mut sum_d2 = RMat::zeros(k, k);
    let mut sum_s = RVec::zeros(k);
    for _ in 0..m {
        let x = model.sample(theta, rng)?;
        let s = model.score(x, theta);
        let a = &s * s.transpose();
        let b = -model.hessian(x, theta);
        let diff = &a - &b;
        sum_d2 += diff.component_mul(&diff);
        sum_s += &s;
        sum_a += a;
        sum_b += b;
    }
    let mf = m as f64;
    let a = sum_a / mf;
    let b = sum_b / mf;
    let md = &a - &b;
    let se = (sum_d2 / mf - md.component_mul(&md)).map(|v| (v.max(0.0) / (mf - 1.0)).sqrt());
    Ok(InformationIdentity {
        score_outer: numkit::to_rows(&a),
        neg_hessian: numkit::to_rows(&b),
        std_error: numkit::to_rows(&se),
        score_mean: (sum_s / mf).iter().copied().collect(),
    })
}

/// Draws `count` datasets of size `n` for attainment checks.
pub fn dataset_grid(model: &ClassicalModel, theta: &[f64], n: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    (0..count)
        .map(|k| {
            let mut rng = replication_rng(seed, k as u64);
            draw(model, theta, n, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial_custom(trials: u32) -> CustomModel {
        let nodes = (0..=trials).map(|k| (k as f64, 1.0)).collect();
        let ln_choose = move |k: f64| -> f64 {
            let k = k as u32;
            (1..=trials).map(|j| (j as f64).ln()).sum::<f64>()
                - (1..=k).map(|j| (j as f64).ln()).sum::<f64>()
                - (1..=trials - k).map(|j| (j as f64).ln()).sum::<f64>()
        };
        let n = trials as f64;
        CustomModel::new(
            "binomial",
            move |x, t| ln_choose(x) + x * t.ln() + (n - x) * (1.0 - t).ln(),
            move |x, t| x / t - (n - x) / (1.0 - t),
            nodes,
            (1e-9, 1.0 - 1e-9),
        )
        .unwrap()
    }

    #[test]
    fn cfi_examples() {
        assert_eq!(cfi(&ClassicalModel::Bernoulli, &[0.5], 1).unwrap()[(0, 0)], 4.0);
        let f = cfi(&ClassicalModel::Normal, &[0.3, 2.0], 50).unwrap();
        assert_eq!(f, RMat::from_diagonal(&RVec::from_row_slice(&[25.0, 50.0 / 8.0])));
        // θ(1-θ)/N is largest at θ = 1/2
        let at = |t: f64| crlb(&cfi(&ClassicalModel::Bernoulli, &[t], 10).unwrap()).unwrap()[(0, 0)];
        assert!((at(0.5) - 0.025).abs() < 1e-15);
        for t in [0.1, 0.3, 0.49, 0.7] {
            assert!(at(t) < at(0.5));
        }
    }

    #[test]
    fn crlb_examples() {
        let b = crlb(&cfi(&ClassicalModel::Bernoulli, &[0.3], 100).unwrap()).unwrap();
        assert!((b[(0, 0)] - 2.1e-3).abs() < 1e-15);
        let v = 1.7;
        let b = crlb(&cfi(&ClassicalModel::Normal, &[0.0, v], 40).unwrap()).unwrap();
        assert!((b[(1, 1)] - 2.0 * v * v / 40.0).abs() < 1e-14);
        assert_eq!(crlb(&RMat::identity(3, 3)).unwrap(), RMat::identity(3, 3));
        let sing = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(information_null_space(&sing).len(), 1);
        assert_eq!(crlb(&sing).unwrap()[(1, 1)], 0.0);
        assert!(crlb(&RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
    }

    #[test]
    fn mle_examples() {
        let m = mle(&ClassicalModel::Bernoulli, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m, Mle { estimate: vec![1.0], boundary: true });
        let m = mle(&ClassicalModel::Normal, &[0.0, 2.0]).unwrap();
        assert_eq!(m, Mle { estimate: vec![1.0, 1.0], boundary: false });
        assert!(mle(&ClassicalModel::Normal, &[3.0, 3.0]).unwrap().boundary);
        assert!(mle(&ClassicalModel::Bernoulli, &[]).is_err());
        assert!(mle(&ClassicalModel::Bernoulli, &[0.5]).is_err());
        assert_eq!(unbiased_variance(&[0.0, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn bernoulli_mle_concentrates() {
        let mut rng = replication_rng(5, 0);
        let xs = draw(&ClassicalModel::Bernoulli, &[0.3], 100_000, &mut rng).unwrap();
        let p = mle(&ClassicalModel::Bernoulli, &xs).unwrap().estimate[0];
        assert!((p - 0.3).abs() < 3.0 * (0.21f64 / 1e5).sqrt());
    }

    #[test]
    fn custom_binomial_matches_closed_forms() {
        let model = ClassicalModel::Custom(binomial_custom(6));
        let f = cfi(&model, &[0.35], 1).unwrap()[(0, 0)];
        assert!((f - 6.0 / (0.35 * 0.65)).abs() < 1e-10);
        let xs = [2.0, 3.0, 1.0, 4.0];
        let t = mle(&model, &xs).unwrap().estimate[0];
        assert!((t - 10.0 / 24.0).abs() < 1e-9);
    }

    #[test]
    fn custom_normalization_is_enforced() {
        let bad =
            CustomModel::new("bad", |_x, _t| (0.3f64).ln(), |_x, _t| 0.0, vec![(0.0, 1.0), (1.0, 1.0)], (0.0, 1.0))
                .unwrap();
        assert!(cfi(&ClassicalModel::Custom(bad), &[0.5], 1).is_err());
    }

    #[test]
    fn attainment_examples() {
        let grid = dataset_grid(&ClassicalModel::Bernoulli, &[0.3], 25, 20, 3).unwrap();
        let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
        assert!(attainment_check(&ClassicalModel::Bernoulli, &[0.3], 0, mean, &grid).unwrap().attained);

        let theta = [0.4, 1.3];
        let grid = dataset_grid(&ClassicalModel::Normal, &theta, 12, 20, 4).unwrap();
        assert!(attainment_check(&ClassicalModel::Normal, &theta, 0, mean, &grid).unwrap().attained);
        let unbiased = |d: &[f64]| unbiased_variance(d).unwrap();
        let r = attainment_check(&ClassicalModel::Normal, &theta, 1, unbiased, &grid).unwrap();
        assert!(!r.attained && r.max_residual > 1e-3);
    }

    #[test]
    fn information_identity_bernoulli() {
        let mut rng = replication_rng(9, 0);
        let id = information_identity(&ClassicalModel::Bernoulli, &[0.3], 200_000, &mut rng).unwrap();
        let d = id.score_outer[0][0] - id.neg_hessian[0][0];
        assert!(d.abs() < 3.0 * id.std_error[0][0] + 1e-12);
        assert!((id.score_outer[0][0] - 1.0 / 0.21).abs() < 0.05);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = draw(&ClassicalModel::Normal, &[0.0, 1.0], 5, &mut replication_rng(1, 3)).unwrap();
        let b = draw(&ClassicalModel::Normal, &[0.0, 1.0], 5, &mut replication_rng(1, 3)).unwrap();
        let c = draw(&ClassicalModel::Normal, &[0.0, 1.0], 5, &mut replication_rng(1, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn theta_domain() {
        assert!(cfi(&ClassicalModel::Bernoulli, &[1.0], 1).is_err());
        assert!(cfi(&ClassicalModel::Normal, &[0.0, -1.0], 1).is_err());
        assert!(cfi(&ClassicalModel::Normal, &[0.0], 1).is_err());
    }
}

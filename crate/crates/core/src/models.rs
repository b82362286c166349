//! Random data generation: mixing distributions for ξ², covariance models,
//! the elliptical sampler, and the perturbation family used for power studies.
//!
//! Every mixing family is parameterized so that E(ξ²) = p holds exactly, and
//! each sampler consumes an explicit rng handle so runs are reproducible.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Exp1, Gamma, LogNormal, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::numkit::{self, SpectralSummary, SymMatrix};
use crate::DataMatrix;

/// Families for the law of ξ², each normalized to E(ξ²) = p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixingFamily {
    /// χ² on p degrees of freedom (the Gaussian case; τ = 2).
    ChiSquared,
    /// Poisson(p); τ = 1.
    Poisson,
    /// (1−τ)·NB(p, 1−τ) where the NB counts total trials until the p-th
    /// success; τ ∈ (0,1) and var(ξ²) = pτ exactly.
    NegativeBinomialScaled { tau: f64 },
    /// (p+2b)·Beta(p/2, b) for b > 0; τ = 0 in the limit.
    BetaScaled { b: f64 },
    /// Gamma with shape p/τ and rate 1/τ; var(ξ²) = pτ exactly.
    GammaShapeRate { tau: f64 },
    /// Beta-Prime(p(1+p+τ)/τ, (1+p+2τ)/τ); var(ξ²) = pτ exactly.
    BetaPrime { tau: f64 },
    /// Log-Normal(log p − ½log(1+τ/p), log(1+τ/p)); the second parameter is
    /// the variance of the log, so var(ξ²) = pτ exactly.
    LogNormal { tau: f64 },
    /// Gamma(p,1)²/(p+1).
    GammaSquaredScaled,
}

/// A mixing law for ξ² tied to a dimension p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingDistribution {
    family: MixingFamily,
    p: usize,
}

impl MixingDistribution {
    pub fn new(family: MixingFamily, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("dimension p must be positive".into()));
        }
        match family {
            MixingFamily::NegativeBinomialScaled { tau } if !(tau > 0.0 && tau < 1.0) => {
                Err(Error::InvalidParameter(format!(
                    "NegativeBinomialScaled needs tau in (0,1), got {tau}"
                )))
            }
            MixingFamily::BetaScaled { b } if !(b > 0.0) => Err(Error::InvalidParameter(
                format!("BetaScaled needs b > 0, got {b}"),
            )),
            MixingFamily::GammaShapeRate { tau }
            | MixingFamily::BetaPrime { tau }
            | MixingFamily::LogNormal { tau }
                if !(tau > 0.0) =>
            {
                Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")))
            }
            _ => Ok(Self { family, p }),
        }
    }

    pub fn family(&self) -> MixingFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// E(ξ²); equal to p by construction for every family.
    pub fn xi2_mean(&self) -> f64 {
        self.p as f64
    }

    /// Exact var(ξ²) under the chosen parameterization. Dividing by p gives
    /// the finite-p value of the variance parameter τ.
    pub fn xi2_variance(&self) -> f64 {
        let p = self.p as f64;
        match self.family {
            MixingFamily::ChiSquared => 2.0 * p,
            MixingFamily::Poisson => p,
            MixingFamily::NegativeBinomialScaled { tau } => p * tau,
            MixingFamily::BetaScaled { b } => 2.0 * p * b / (0.5 * p + b + 1.0),
            MixingFamily::GammaShapeRate { tau } => p * tau,
            MixingFamily::BetaPrime { tau } => p * tau,
            MixingFamily::LogNormal { tau } => p * tau,
            MixingFamily::GammaSquaredScaled => p * (p + 2.0) * (p + 3.0) / (p + 1.0) - p * p,
        }
    }

    /// One draw of ξ².
    pub fn sample_xi2<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = self.p as f64;
        match self.family {
            MixingFamily::ChiSquared => ChiSquared::new(p).unwrap().sample(rng),
            MixingFamily::Poisson => Poisson::new(p).unwrap().sample(rng),
            MixingFamily::NegativeBinomialScaled { tau } => {
                // Total trials until the p-th success at success probability
                // 1−τ: p plus NB failures, sampled as a gamma-Poisson mixture.
                let lambda = Gamma::new(p, tau / (1.0 - tau)).unwrap().sample(rng);
                let failures = if lambda > 0.0 {
                    Poisson::new(lambda).unwrap().sample(rng)
                } else {
                    0.0
                };
                (1.0 - tau) * (p + failures)
            }
            MixingFamily::BetaScaled { b } => {
                (p + 2.0 * b) * Beta::new(0.5 * p, b).unwrap().sample(rng)
            }
            MixingFamily::GammaShapeRate { tau } => {
                Gamma::new(p / tau, tau).unwrap().sample(rng)
            }
            MixingFamily::BetaPrime { tau } => {
                let a = p * (1.0 + p + tau) / tau;
                let b = (1.0 + p + 2.0 * tau) / tau;
                let g1 = Gamma::new(a, 1.0).unwrap().sample(rng);
                let g2: f64 = Gamma::new(b, 1.0).unwrap().sample(rng);
                g1 / g2
            }
            MixingFamily::LogNormal { tau } => {
                let sigma_sq = (1.0 + tau / p).ln();
                let mu = p.ln() - 0.5 * sigma_sq;
                LogNormal::new(mu, sigma_sq.sqrt()).unwrap().sample(rng)
            }
            MixingFamily::GammaSquaredScaled => {
                let g: f64 = Gamma::new(p, 1.0).unwrap().sample(rng);
                g * g / (p + 1.0)
            }
        }
    }

    /// The moment ratio r_k = E(ξ^{2k}) / E(‖z‖₂^{2k}), where the denominator
    /// is the χ²_p moment ∏_{l<k}(p+2l).
    ///
    /// Closed forms are implemented for ChiSquared (exactly 1), GammaShapeRate
    /// and Poisson; other families are estimated with [`Self::rk_monte_carlo`].
    pub fn compute_rk(&self, k: u32) -> Result<f64> {
        if !(1..=8).contains(&k) {
            return Err(Error::InvalidParameter(format!("r_k needs k in 1..=8, got {k}")));
        }
        let p = self.p as f64;
        match self.family {
            MixingFamily::ChiSquared => Ok(1.0),
            MixingFamily::GammaShapeRate { tau } => {
                // E(ξ^{2k}) = ∏_{l<k}(p + lτ) from gamma moments.
                let mut r = 1.0;
                for l in 0..k {
                    r *= (p + l as f64 * tau) / (p + 2.0 * l as f64);
                }
                Ok(r)
            }
            MixingFamily::Poisson => {
                // Touchard: E(X^k) = Σ_j S(k,j)·p^j with Stirling numbers of
                // the second kind.
                let s = stirling2(k as usize);
                let mut num = 0.0;
                for (j, &c) in s.iter().enumerate() {
                    num += c * p.powi(j as i32);
                }
                let mut den = 1.0;
                for l in 0..k {
                    den *= p + 2.0 * l as f64;
                }
                Ok(num / den)
            }
            other => Err(Error::Unsupported(format!(
                "no closed-form r_{k} for {other:?}; use rk_monte_carlo"
            ))),
        }
    }

    /// Monte Carlo estimate of r_k over `draws` samples of ξ².
    pub fn rk_monte_carlo<R: Rng + ?Sized>(&self, k: u32, draws: usize, rng: &mut R) -> f64 {
        let p = self.p as f64;
        let mut den = 1.0;
        for l in 0..k {
            den *= p + 2.0 * l as f64;
        }
        let mut acc = 0.0;
        for _ in 0..draws {
            acc += self.sample_xi2(rng).powi(k as i32);
        }
        acc / draws as f64 / den
    }
}

/// S(k, j) for j = 0..=k.
fn stirling2(k: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..k {
        let mut next = vec![0.0; row.len() + 1];
        for (j, &v) in row.iter().enumerate() {
            next[j] += j as f64 * v;
            next[j + 1] += v;
        }
        row = next;
    }
    row
}

/// Covariance structures for the null experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceModel {
    /// `spike_count` eigenvalues equal to `spike_value`, the rest equal to 1,
    /// with Haar-distributed eigenvectors.
    Spiked { spike_count: usize, spike_value: f64 },
    /// Σ_ij = ρ^{|i−j|}.
    Toeplitz { rho: f64 },
    /// Eigenvalues j^{−exponent} with Haar-distributed eigenvectors.
    Decay { exponent: f64 },
    Identity,
}

impl CovarianceModel {
    /// 5 spikes of value 5.
    pub fn spiked_default() -> Self {
        CovarianceModel::Spiked { spike_count: 5, spike_value: 5.0 }
    }

    pub fn toeplitz_default() -> Self {
        CovarianceModel::Toeplitz { rho: 0.1 }
    }

    pub fn decay_default() -> Self {
        CovarianceModel::Decay { exponent: 0.25 }
    }

    pub fn build<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> Result<SymMatrix> {
        Ok(self.build_with_root(p, rng)?.0)
    }

    /// Builds Σ together with its symmetric square root, reusing the spectral
    /// decomposition when the model is defined by one (the Toeplitz model goes
    /// through [`numkit::sym_sqrt`]).
    pub fn build_with_root<R: Rng + ?Sized>(
        &self,
        p: usize,
        rng: &mut R,
    ) -> Result<(SymMatrix, SymMatrix)> {
        if p == 0 {
            return Err(Error::InvalidParameter("dimension p must be positive".into()));
        }
        match *self {
            CovarianceModel::Identity => Ok((SymMatrix::identity(p), SymMatrix::identity(p))),
            CovarianceModel::Toeplitz { rho } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Toeplitz needs |rho| < 1, got {rho}"
                    )));
                }
                let sigma =
                    SymMatrix::from_fn(p, |i, j| rho.powi((j as i32 - i as i32).abs()));
                let root = numkit::sym_sqrt(&sigma)?;
                Ok((sigma, root))
            }
            CovarianceModel::Spiked { spike_count, spike_value } => {
                if spike_count > p {
                    return Err(Error::InvalidParameter(format!(
                        "spike count {spike_count} exceeds dimension {p}"
                    )));
                }
                if !(spike_value > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "spike value must be positive, got {spike_value}"
                    )));
                }
                let mut evals = vec![1.0; p];
                evals[..spike_count].fill(spike_value);
                Ok(spectral_pair(p, &evals, rng))
            }
            CovarianceModel::Decay { exponent } => {
                let evals: Vec<f64> =
                    (1..=p).map(|j| (j as f64).powf(-exponent)).collect();
                Ok(spectral_pair(p, &evals, rng))
            }
        }
    }
}

/// (QΛQᵀ, Q√ΛQᵀ) for a Haar-distributed Q.
fn spectral_pair<R: Rng + ?Sized>(
    p: usize,
    evals: &[f64],
    rng: &mut R,
) -> (SymMatrix, SymMatrix) {
    let q = numkit::haar_orthogonal(p, rng);
    let assemble = |vals: &[f64]| {
        let mut b = q.clone();
        for (mut col, &v) in b.columns_mut().into_iter().zip(vals.iter()) {
            col.mapv_inplace(|x| x * v);
        }
        let m = b.dot(&q.t());
        let mut m = m;
        for i in 0..p {
            for j in (i + 1)..p {
                let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
                m[[i, j]] = avg;
                m[[j, i]] = avg;
            }
        }
        SymMatrix::new(m).expect("spectral assembly is symmetric")
    };
    let sigma = assemble(evals);
    let roots: Vec<f64> = evals.iter().map(|v| v.sqrt()).collect();
    (sigma, assemble(&roots))
}

/// i.i.d. rows ξ·Σ^{1/2}·(z/‖z‖₂) with z standard normal independent of ξ.
///
/// The rng is consumed in a fixed per-row order (one ξ² draw, then p
/// normals), so samples under rescaled covariances share the same stream.
pub fn elliptical_sample<R: Rng + ?Sized>(
    n: usize,
    sigma_root: &SymMatrix,
    mix: &MixingDistribution,
    rng: &mut R,
) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::TooFewObservations { need: 1, got: 0 });
    }
    let p = sigma_root.dim();
    if mix.dim() != p {
        return Err(Error::InvalidParameter(format!(
            "mixing law is tied to p={}, matrix has p={p}",
            mix.dim()
        )));
    }
    let mut scaled_u = Array2::zeros((n, p));
    for mut row in scaled_u.rows_mut() {
        let xi = mix.sample_xi2(rng).sqrt();
        loop {
            let mut norm_sq = 0.0;
            for v in row.iter_mut() {
                *v = rng.sample::<f64, _>(StandardNormal);
                norm_sq += *v * *v;
            }
            if norm_sq > 0.0 {
                let c = xi / norm_sq.sqrt();
                row.mapv_inplace(|v| v * c);
                break;
            }
        }
    }
    Ok(scaled_u.dot(sigma_root.as_array()))
}

/// Entry distributions for the perturbation shock, standardized to mean 0 and
/// variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShockFamily {
    /// Laplace(0,1)/√2.
    LaplaceStd,
    /// (Beta(2, 3/2) − 4/7)/√(8/147).
    BetaStd,
}

impl ShockFamily {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ShockFamily::LaplaceStd => {
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                (e1 - e2) * std::f64::consts::FRAC_1_SQRT_2
            }
            ShockFamily::BetaStd => {
                let b = Beta::new(2.0, 1.5).unwrap().sample(rng);
                (b - 4.0 / 7.0) / (8.0f64 / 147.0).sqrt()
            }
        }
    }
}

/// The power-study family x = Σ^{1/2}·s with i.i.d. entries
/// s = √(1−h)·z + √h·y; h = 0 is exactly N(0, Σ) and hence inside the null.
#[derive(Debug, Clone)]
pub struct AlternativeModel {
    sigma_root: SymMatrix,
    h: f64,
    shock: ShockFamily,
}

impl AlternativeModel {
    pub fn new(sigma_root: SymMatrix, h: f64, shock: ShockFamily) -> Result<Self> {
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::InvalidParameter(format!("h must be in [0,1], got {h}")));
        }
        Ok(Self { sigma_root, h, shock })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shock(&self) -> ShockFamily {
        self.shock
    }

    pub fn sigma_root(&self) -> &SymMatrix {
        &self.sigma_root
    }
}

/// n i.i.d. rows from an [`AlternativeModel`].
pub fn alternative_sample<R: Rng + ?Sized>(
    n: usize,
    alt: &AlternativeModel,
    rng: &mut R,
) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::TooFewObservations { need: 1, got: 0 });
    }
    let p = alt.sigma_root.dim();
    let (wz, wy) = ((1.0 - alt.h).sqrt(), alt.h.sqrt());
    let mut s = Array2::zeros((n, p));
    for v in s.iter_mut() {
        *v = if alt.h == 0.0 {
            rng.sample::<f64, _>(StandardNormal)
        } else if alt.h == 1.0 {
            alt.shock.sample(rng)
        } else {
            wz * rng.sample::<f64, _>(StandardNormal) + wy * alt.shock.sample(rng)
        };
    }
    Ok(s.dot(alt.sigma_root.as_array()))
}

/// Population var(‖x‖₂²) for an elliptical law: r₂·(2ν₂ + ν₁²) − ν₁².
///
/// Requires a closed-form r₂ for the mixing family.
pub fn population_varsigma_sq(mix: &MixingDistribution, nu: &SpectralSummary) -> Result<f64> {
    let r2 = mix.compute_rk(2)?;
    Ok(r2 * (2.0 * nu.nu2 + nu.nu1 * nu.nu1) - nu.nu1 * nu.nu1)
}

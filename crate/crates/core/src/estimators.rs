//! The statistics driving the test: the entrywise kurtosis average κ̃, the
//! squared-norm variance ς̌², the plug-in kurtosis κ̌, the discrepancy
//! statistic T_n, and the variance estimate σ̂_n² = σ̂_{n,1}² + σ̂_{n,2}² with
//! its correction term. Population counterparts are included for testing.
//!
//! Every ratio that could see a vanishing denominator goes through
//! [`guarded_ratio`], which substitutes the value 1 — the finite-sample
//! convention used throughout.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{population_varsigma_sq, MixingDistribution};
use crate::numkit::{
    self, correlation_matrix, entrywise_norm_pow, gaussian_quadform_moment, threshold,
    trace_powers, SpectralSummary, SymMatrix,
};

/// num/den, or 1 when the denominator is zero.
pub fn guarded_ratio(num: f64, den: f64) -> f64 {
    if den != 0.0 {
        num / den
    } else {
        1.0
    }
}

/// The two kurtosis estimates and the half-sample size they were built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KurtosisPair {
    pub kappa_tilde: f64,
    pub kappa_check: f64,
    pub half_size: usize,
}

/// Average of the entrywise kurtosis estimates over the columns of a
/// half-sample: (1/p)·Σ_j mean(x⁴_·j)/mean(x²_·j)².
///
/// Each per-column ratio lies in [1, m] by Cauchy–Schwarz; a zero column
/// contributes 1 via the guarded ratio.
pub fn kappa_tilde(x_half: ArrayView2<'_, f64>) -> f64 {
    let m = x_half.nrows() as f64;
    let p = x_half.ncols();
    let mut acc = 0.0;
    for col in x_half.columns() {
        let mut s2 = 0.0;
        let mut s4 = 0.0;
        for &v in col.iter() {
            let v2 = v * v;
            s2 += v2;
            s4 += v2 * v2;
        }
        let m2 = s2 / m;
        let m4 = s4 / m;
        acc += guarded_ratio(m4, m2 * m2);
    }
    acc / p as f64
}

/// Sample variance of a sequence, O(m) with the unbiased m−1 denominator.
/// Algebraically identical to the pairwise U-statistic form
/// (1/(2·C(m,2)))·Σ_{i<i'}(q_i − q_{i'})².
pub fn varsigma_check(q: &[f64]) -> Result<f64> {
    let m = q.len();
    if m < 2 {
        return Err(Error::TooFewObservations { need: 2, got: m });
    }
    let mean = q.iter().sum::<f64>() / m as f64;
    Ok(q.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64)
}

/// ν₁ = tr(XᵀX)/denom and ν₂ = tr((XᵀX)²)/denom² without ever forming the
/// larger of the two scatter matrices.
fn nu12_of_scatter(x: ArrayView2<'_, f64>, denom: f64) -> (f64, f64) {
    let g = if x.ncols() > x.nrows() {
        x.dot(&x.t())
    } else {
        x.t().dot(&x)
    };
    let nu1 = g.diag().sum() / denom;
    let nu2 = g.iter().map(|v| v * v).sum::<f64>() / (denom * denom);
    (nu1, nu2)
}

/// The plug-in kurtosis estimate from the second half of the sample:
/// κ̌ = 3(ς̌² + ν̌₁²) / (ν̌₁² + 2(ν̌₂ − (2/n)ν̌₁²)), where ν̌_k are trace powers
/// of Σ̌ = (2/n)·Σ xxᵀ and ς̌² is the sample variance of the squared norms.
pub fn kappa_check(x_half: ArrayView2<'_, f64>, n: usize) -> Result<f64> {
    let m = x_half.nrows();
    if n % 2 != 0 {
        return Err(Error::OddSampleSize { n });
    }
    if m != n / 2 || m < 2 {
        return Err(Error::InvalidParameter(format!(
            "kappa_check needs the n/2 = {} second-half rows, got {m}",
            n / 2
        )));
    }
    let (nu1, nu2) = nu12_of_scatter(x_half, m as f64);
    let q: Vec<f64> = x_half.rows().into_iter().map(|r| r.dot(&r)).collect();
    let vs = varsigma_check(&q)?;
    let nu1_sq = nu1 * nu1;
    Ok(guarded_ratio(
        3.0 * (vs + nu1_sq),
        nu1_sq + 2.0 * (nu2 - 2.0 / n as f64 * nu1_sq),
    ))
}

/// T_n = √(pn/2)·((κ̃ − κ̌)/3 + 4/n).
pub fn t_statistic(kappa_tilde: f64, kappa_check: f64, n: usize, p: usize) -> f64 {
    let n_f = n as f64;
    ((p as f64) * n_f / 2.0).sqrt() * ((kappa_tilde - kappa_check) / 3.0 + 4.0 / n_f)
}

/// The variance estimate σ̂_n² and the pieces it is assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub c_hat: f64,
    pub beta_hat: f64,
    pub gamma_hat: f64,
    /// Threshold level t_p = p^{−3/4}·ln(p).
    pub t_p: f64,
}

impl VarianceEstimate {
    pub fn sigma_sq_total(&self) -> f64 {
        self.sigma1_sq + self.sigma2_sq
    }

    /// σ̂_n; zero (a degenerate estimate) if the total is not positive.
    pub fn sigma_hat(&self) -> f64 {
        let total = self.sigma_sq_total();
        if total > 0.0 {
            total.sqrt()
        } else {
            0.0
        }
    }
}

/// Full-sample ingredients shared by β̂, γ̂, σ̂_{n,1}² and σ̂_{n,2}².
struct FullSampleMoments {
    n: usize,
    p: usize,
    sigma_hat: SymMatrix,
    nu: SpectralSummary,
    mean_norm6: f64,
    mean_norm8: f64,
    varsigma_hat_sq: f64,
}

impl FullSampleMoments {
    fn new(x: ArrayView2<'_, f64>) -> Result<Self> {
        let n = x.nrows();
        let p = x.ncols();
        if n < 2 {
            return Err(Error::TooFewObservations { need: 2, got: n });
        }
        if p == 0 {
            return Err(Error::InvalidParameter("need at least one column".into()));
        }
        let sigma_hat = SymMatrix::from_gram(x, n as f64);
        let nu = trace_powers(&sigma_hat, Some(x))?;
        let q: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r)).collect();
        let n_f = n as f64;
        let mean_norm6 = q.iter().map(|v| v.powi(3)).sum::<f64>() / n_f;
        let mean_norm8 = q.iter().map(|v| v.powi(4)).sum::<f64>() / n_f;
        let varsigma_hat_sq = varsigma_check(&q)?;
        Ok(Self { n, p, sigma_hat, nu, mean_norm6, mean_norm8, varsigma_hat_sq })
    }

    fn beta(&self) -> f64 {
        let n = self.n as f64;
        let nu1 = self.nu.nu1;
        let g4 = gaussian_quadform_moment(&self.nu, 4).expect("k=4 is supported");
        let den = g4
            - 12.0 / n * (nu1.powi(4) + 2.0 * nu1 * nu1 * self.nu.nu2 - nu1.powi(4) / n);
        1.0 - guarded_ratio(self.mean_norm8, den)
    }

    fn gamma(&self) -> f64 {
        let n = self.n as f64;
        let nu1 = self.nu.nu1;
        let nu2 = self.nu.nu2;
        let g2 = gaussian_quadform_moment(&self.nu, 2).expect("k=2 is supported");
        let g3 = gaussian_quadform_moment(&self.nu, 3).expect("k=3 is supported");
        let first = guarded_ratio(
            self.varsigma_hat_sq - 2.0 * (nu2 - nu1 * nu1 / n),
            g2 - 2.0 * nu1 * nu1 / n,
        );
        let second = guarded_ratio(self.mean_norm6, 0.5 * g3 - 3.0 * nu1.powi(3) / n);
        1.0 + first - second
    }

    fn sigma2_sq(&self) -> f64 {
        let n = self.n as f64;
        let p = self.p as f64;
        let nu1_sq = self.nu.nu1 * self.nu.nu1;
        let a = self.nu.nu2 - nu1_sq / n;
        guarded_ratio(
            8.0 * p * (2.0 * self.nu.nu4 + a * a),
            (nu1_sq + 2.0 * a).powi(2),
        )
    }

    fn sigma1(&self) -> Result<VarianceEstimate> {
        let p = self.p as f64;
        let r_hat = correlation_matrix(&self.sigma_hat)?;
        let frob4 = entrywise_norm_pow(&r_hat, 4)?;
        let frob2 = entrywise_norm_pow(&r_hat, 2)?;
        let t_p = p.powf(-0.75) * p.ln();
        let beta = self.beta();
        let gamma = self.gamma();
        let c_hat = correction_term(beta, gamma, frob4, frob2, t_p);
        Ok(VarianceEstimate {
            sigma1_sq: 8.0 / (3.0 * p) * (frob4 - c_hat),
            sigma2_sq: self.sigma2_sq(),
            c_hat,
            beta_hat: beta,
            gamma_hat: gamma,
            t_p,
        })
    }
}

/// ĉ = β̂·‖R̂‖₄⁴ − 3·⟦1 − β̂ + γ̂⟧_{t_p}·‖R̂‖₂².
pub fn correction_term(beta: f64, gamma: f64, frob4: f64, frob2: f64, t_p: f64) -> f64 {
    beta * frob4 - 3.0 * threshold(1.0 - beta + gamma, t_p) * frob2
}

/// β̂ from the full sample.
pub fn beta_hat(x: ArrayView2<'_, f64>) -> Result<f64> {
    Ok(FullSampleMoments::new(x)?.beta())
}

/// γ̂ from the full sample.
pub fn gamma_hat(x: ArrayView2<'_, f64>) -> Result<f64> {
    Ok(FullSampleMoments::new(x)?.gamma())
}

/// σ̂_{n,1}² = (8/3p)·(‖R̂‖₄⁴ − ĉ) with the correction pieces it used,
/// returned as (σ̂₁², ĉ, β̂, γ̂).
pub fn sigma1_sq_hat(x: ArrayView2<'_, f64>) -> Result<(f64, f64, f64, f64)> {
    let v = FullSampleMoments::new(x)?.sigma1()?;
    Ok((v.sigma1_sq, v.c_hat, v.beta_hat, v.gamma_hat))
}

/// σ̂_{n,2}² = 8p(2ν̂₄ + (ν̂₂ − ν̂₁²/n)²) / (ν̂₁² + 2(ν̂₂ − ν̂₁²/n))².
pub fn sigma2_sq_hat(x: ArrayView2<'_, f64>) -> Result<f64> {
    Ok(FullSampleMoments::new(x)?.sigma2_sq())
}

/// Both variance components and the correction pieces, sharing one pass over
/// the data.
pub fn variance_estimate(x: ArrayView2<'_, f64>) -> Result<VarianceEstimate> {
    FullSampleMoments::new(x)?.sigma1()
}

/// Population σ_{n,1}² = 8‖R‖₄⁴/(3p) and σ_{n,2}² = 8p(2ν₄ + ν₂²)/(ν₁² + 2ν₂)².
pub fn sigma_sq_population(sigma: &SymMatrix) -> Result<(f64, f64)> {
    let p = sigma.dim() as f64;
    let nu = trace_powers(sigma, None)?;
    let r = correlation_matrix(sigma)?;
    let frob4 = entrywise_norm_pow(&r, 4)?;
    let s1 = 8.0 * frob4 / (3.0 * p);
    let s2 = 8.0 * p * (2.0 * nu.nu4 + nu.nu2 * nu.nu2)
        / (nu.nu1 * nu.nu1 + 2.0 * nu.nu2).powi(2);
    Ok((s1, s2))
}

/// Coordinate-free kurtosis κ = 3(ς² + ν₁²)/(ν₁² + 2ν₂) shared by all
/// covariates of an elliptical distribution with covariance Σ and
/// ς² = var(‖x‖₂²).
pub fn population_kappa(sigma: &SymMatrix, varsigma_sq: f64) -> Result<f64> {
    if varsigma_sq < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "varsigma_sq must be nonnegative, got {varsigma_sq}"
        )));
    }
    let nu = trace_powers(sigma, None)?;
    let nu1_sq = nu.nu1 * nu.nu1;
    Ok(3.0 * (varsigma_sq + nu1_sq) / (nu1_sq + 2.0 * nu.nu2))
}

/// Population parameters of an elliptical law, for verification work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationParams {
    pub varsigma_sq: f64,
    pub nu: SpectralSummary,
    pub kappa: f64,
}

impl PopulationParams {
    pub fn new(sigma: &SymMatrix, varsigma_sq: f64) -> Result<Self> {
        Ok(Self {
            varsigma_sq,
            nu: trace_powers(sigma, None)?,
            kappa: population_kappa(sigma, varsigma_sq)?,
        })
    }

    /// Derives ς² from the mixing law's moment ratio r₂ (closed-form families
    /// only): ς² = r₂(2ν₂ + ν₁²) − ν₁².
    pub fn for_elliptical(sigma: &SymMatrix, mix: &MixingDistribution) -> Result<Self> {
        let nu = numkit::trace_powers(sigma, None)?;
        let varsigma_sq = population_varsigma_sq(mix, &nu)?;
        Self::new(sigma, varsigma_sq)
    }
}

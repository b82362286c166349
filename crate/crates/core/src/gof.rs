//! The end-to-end test pipeline: preprocessing, half-sample split, estimator
//! evaluation, z-score, p-value, and the two-sided rejection decision.

use ndarray::s;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    kappa_check, kappa_tilde, t_statistic, variance_estimate, KurtosisPair, VarianceEstimate,
};
use crate::DataMatrix;

/// Options for [`run_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    /// Nominal level in (0,1).
    pub alpha: f64,
    /// Subtract column means before testing. Off by default: the model is for
    /// centered data, and simulated data is already centered.
    pub center: bool,
    /// Drop the last row when the (possibly shuffled) sample size is odd.
    pub drop_odd_row: bool,
    /// Optional seeded row shuffle applied before the half-sample split.
    pub shuffle_seed: Option<u64>,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self { alpha: 0.05, center: false, drop_odd_row: false, shuffle_seed: None }
    }
}

/// Everything the test produced, including intermediate estimator values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub t_n: f64,
    pub sigma_hat: f64,
    pub z: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub kappa: KurtosisPair,
    pub variance: VarianceEstimate,
    pub n_used: usize,
    pub p: usize,
    /// True when σ̂_n² was not positive; z then falls back to T_n itself via
    /// the unit-denominator convention.
    pub degenerate_sigma: bool,
}

/// Row shuffle (seeded), odd-row drop, and column-mean centering, in that
/// order.
pub fn preprocess(x: &DataMatrix, opts: &TestOptions) -> DataMatrix {
    let mut x = x.clone();
    if let Some(seed) = opts.shuffle_seed {
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut shuffled = DataMatrix::zeros(x.dim());
        for (dst, &src) in order.iter().enumerate() {
            shuffled.row_mut(dst).assign(&x.row(src));
        }
        x = shuffled;
    }
    if opts.drop_odd_row && x.nrows() % 2 == 1 {
        x = x.slice(s![..x.nrows() - 1, ..]).to_owned();
    }
    if opts.center {
        for mut col in x.columns_mut() {
            let mean = col.sum() / col.len() as f64;
            col.mapv_inplace(|v| v - mean);
        }
    }
    x
}

/// Two-sided p-value 2(1 − Φ(|z|)), computed as erfc(|z|/√2).
pub fn p_value(z: f64) -> f64 {
    libm::erfc(z.abs() * std::f64::consts::FRAC_1_SQRT_2)
}

/// Run the goodness-of-fit test.
///
/// κ̃ comes from the first n/2 rows, κ̌ from the remaining n/2, and the
/// variance estimate from all n rows. Rejects when p_value < alpha, which is
/// the event |T_n| > σ̂_n·Φ⁻¹(1 − α/2).
pub fn run_test(x: &DataMatrix, opts: &TestOptions) -> Result<TestResult> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0,1), got {}",
            opts.alpha
        )));
    }
    let x = preprocess(x, opts);
    let n = x.nrows();
    let p = x.ncols();
    if n < 4 {
        return Err(Error::TooFewObservations { need: 4, got: n });
    }
    if n % 2 != 0 {
        return Err(Error::OddSampleSize { n });
    }
    if p == 0 {
        return Err(Error::InvalidParameter("need at least one column".into()));
    }
    for (j, col) in x.columns().into_iter().enumerate() {
        if col.iter().all(|v| *v == 0.0) {
            return Err(Error::DegenerateCovariate { column: j });
        }
    }

    let half = n / 2;
    let kt = kappa_tilde(x.slice(s![..half, ..]));
    let kc = kappa_check(x.slice(s![half.., ..]), n)?;
    let t_n = t_statistic(kt, kc, n, p);
    let variance = variance_estimate(x.view())?;

    let sigma_hat = variance.sigma_hat();
    let degenerate_sigma = sigma_hat == 0.0;
    let z = if degenerate_sigma { t_n } else { t_n / sigma_hat };
    let p_val = p_value(z);

    Ok(TestResult {
        t_n,
        sigma_hat,
        z,
        p_value: p_val,
        reject: p_val < opts.alpha,
        alpha: opts.alpha,
        kappa: KurtosisPair { kappa_tilde: kt, kappa_check: kc, half_size: half },
        variance,
        n_used: n,
        p,
        degenerate_sigma,
    })
}

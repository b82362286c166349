//! Dense symmetric-matrix numerics.
//!
//! Everything here is pure and reentrant: trace powers ν₁..ν₄ (with an
//! automatic Gram-dual path when the matrix is a scatter matrix of fewer
//! observations than covariates), entrywise ℓ_q norms, covariance→correlation
//! conversion, the symmetric PSD square root, Haar-orthogonal sampling, the
//! closed-form moments E((zᵀMz)^k) of Gaussian quadratic forms, the
//! sign-preserving threshold clamp, and the standard normal CDF/quantile.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative symmetry tolerance enforced by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues below `PSD_CLAMP_TOL · λ_max` are clamped to zero by
/// [`sym_sqrt`]; eigenvalues below `-PSD_ERROR_TOL · λ_max` are an error.
pub const PSD_CLAMP_TOL: f64 = 1e-12;
pub const PSD_ERROR_TOL: f64 = 1e-8;

/// A p×p real symmetric matrix with finite entries.
///
/// Symmetry (to `SYMMETRY_TOL` relative to the largest entry) is validated at
/// construction, so downstream code can rely on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: Array2<f64>,
}

impl SymMatrix {
    /// Validate and wrap a square matrix.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c || r == 0 {
            return Err(Error::InvalidParameter(format!(
                "expected a non-empty square matrix, got {r}x{c}"
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut max_delta = 0.0f64;
        for i in 0..r {
            for j in (i + 1)..r {
                max_delta = max_delta.max((data[[i, j]] - data[[j, i]]).abs());
            }
        }
        let tol = SYMMETRY_TOL * scale.max(1.0);
        if max_delta > tol {
            return Err(Error::NotSymmetric { max_delta, tol });
        }
        Ok(Self { data })
    }

    /// Wrap a matrix that is symmetric by construction.
    pub(crate) fn new_unchecked(data: Array2<f64>) -> Self {
        debug_assert_eq!(data.nrows(), data.ncols());
        Self { data }
    }

    pub fn identity(p: usize) -> Self {
        Self::new_unchecked(Array2::eye(p))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Array2::zeros((diag.len(), diag.len()));
        for (i, &d) in diag.iter().enumerate() {
            m[[i, i]] = d;
        }
        Self::new_unchecked(m)
    }

    /// Build from a function of the index pair; `f` is evaluated once per
    /// unordered pair, so the result is symmetric by construction.
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Array2::zeros((p, p));
        for i in 0..p {
            for j in i..p {
                let v = f(i, j);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        Self::new_unchecked(m)
    }

    /// The scatter matrix XᵀX/denom of an m×p observation matrix, with the
    /// off-diagonal pairs averaged so the result is exactly symmetric.
    pub fn from_gram(x: ArrayView2<'_, f64>, denom: f64) -> Self {
        let mut m = x.t().dot(&x);
        m.mapv_inplace(|v| v / denom);
        let p = m.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
                m[[i, j]] = avg;
                m[[j, i]] = avg;
            }
        }
        Self::new_unchecked(m)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Entrywise scaling by a constant; symmetry is preserved.
    pub fn scaled(&self, c: f64) -> Self {
        Self::new_unchecked(self.data.mapv(|v| c * v))
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[[i, j]]
    }
}

/// Trace powers ν_k = tr(Sᵏ) for k = 1..4 plus the entrywise norms
/// ‖S‖₂² and ‖S‖₄⁴ of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
    pub nu4: f64,
    /// ‖S‖₂² = Σ_{ij} S_ij².
    pub frob2: f64,
    /// ‖S‖₄⁴ = Σ_{ij} S_ij⁴.
    pub frob4: f64,
}

/// ν₁..ν₄ of a square matrix using a single matrix multiply:
/// with S² in hand, tr(S³) = ⟨S², S⟩ and tr(S⁴) = ‖S²‖₂² entrywise.
fn trace_quad(m: &Array2<f64>) -> (f64, f64, f64, f64) {
    let m2 = m.dot(m);
    let nu1 = m.diag().sum();
    let nu2 = m2.diag().sum();
    let mut nu3 = 0.0;
    let mut nu4 = 0.0;
    for (a, b) in m2.iter().zip(m.iter()) {
        nu3 += a * b;
        nu4 += a * a;
    }
    (nu1, nu2, nu3, nu4)
}

/// Trace powers and entrywise norms of `s`.
///
/// When `factor` is an m×p observation matrix with `s` its scatter matrix
/// XᵀX/m and p > m, the trace powers are computed from the m×m Gram matrix
/// (tr((XᵀX)ᵏ) = tr((XXᵀ)ᵏ)), which is the only practical route when the
/// dimension is much larger than the sample.
pub fn trace_powers(s: &SymMatrix, factor: Option<ArrayView2<'_, f64>>) -> Result<SpectralSummary> {
    let p = s.dim();
    let mut frob2 = 0.0;
    let mut frob4 = 0.0;
    for &v in s.as_array().iter() {
        let v2 = v * v;
        frob2 += v2;
        frob4 += v2 * v2;
    }
    let (nu1, nu2, nu3, nu4) = match factor {
        Some(x) if x.ncols() == p && p > x.nrows() => gram_trace_powers(x, x.nrows() as f64),
        Some(x) if x.ncols() != p => {
            return Err(Error::InvalidParameter(format!(
                "factor has {} columns but the matrix is {p}x{p}",
                x.ncols()
            )));
        }
        _ => trace_quad(s.as_array()),
    };
    Ok(SpectralSummary {
        nu1,
        nu2,
        nu3,
        nu4,
        frob2,
        frob4,
    })
}

/// ν₁..ν₄ of XᵀX/denom computed via the Gram matrix XXᵀ/denom, without
/// forming the p×p scatter matrix.
pub(crate) fn gram_trace_powers(x: ArrayView2<'_, f64>, denom: f64) -> (f64, f64, f64, f64) {
    let mut g = x.dot(&x.t());
    g.mapv_inplace(|v| v / denom);
    trace_quad(&g)
}

/// Entrywise norm ‖M‖_q^q for q ∈ {2, 4}.
pub fn entrywise_norm_pow(m: &SymMatrix, q: u32) -> Result<f64> {
    match q {
        2 => Ok(m.as_array().iter().map(|v| v * v).sum()),
        4 => Ok(m.as_array().iter().map(|v| v.powi(4)).sum()),
        _ => Err(Error::InvalidParameter(format!(
            "entrywise norm power must be 2 or 4, got {q}"
        ))),
    }
}

/// Correlation matrix R_ij = S_ij/√(S_ii·S_jj).
///
/// A zero or negative diagonal entry means the covariate is degenerate and is
/// reported as an error; the caller decides how to handle it.
pub fn correlation_matrix(s: &SymMatrix) -> Result<SymMatrix> {
    let p = s.dim();
    let mut inv_sd = Vec::with_capacity(p);
    for j in 0..p {
        let d = s[(j, j)];
        if d <= 0.0 {
            return Err(Error::DegenerateCovariate { column: j });
        }
        inv_sd.push(1.0 / d.sqrt());
    }
    let mut r = Array2::zeros((p, p));
    for i in 0..p {
        r[[i, i]] = 1.0;
        for j in (i + 1)..p {
            let v = s[(i, j)] * inv_sd[i] * inv_sd[j];
            r[[i, j]] = v;
            r[[j, i]] = v;
        }
    }
    Ok(SymMatrix::new_unchecked(r))
}

/// E((zᵀMz)^k) for a standard normal z and symmetric M, from the trace powers
/// of M, for k ∈ {2, 3, 4}:
///
/// * k=2: 2ν₂ + ν₁²
/// * k=3: 8ν₃ + 6ν₂ν₁ + ν₁³
/// * k=4: 48ν₄ + 32ν₃ν₁ + 12ν₂² + 12ν₂ν₁² + ν₁⁴
pub fn gaussian_quadform_moment(nu: &SpectralSummary, k: u32) -> Result<f64> {
    let (n1, n2, n3, n4) = (nu.nu1, nu.nu2, nu.nu3, nu.nu4);
    match k {
        2 => Ok(2.0 * n2 + n1 * n1),
        3 => Ok(8.0 * n3 + 6.0 * n2 * n1 + n1.powi(3)),
        4 => Ok(48.0 * n4 + 32.0 * n3 * n1 + 12.0 * n2 * n2 + 12.0 * n2 * n1 * n1 + n1.powi(4)),
        _ => Err(Error::InvalidParameter(format!(
            "quadratic-form moment is implemented for k in 2..=4, got {k}"
        ))),
    }
}

/// Convenience form of [`gaussian_quadform_moment`] taking the matrix itself.
pub fn gaussian_quadform_moment_of(s: &SymMatrix, k: u32) -> Result<f64> {
    gaussian_quadform_moment(&trace_powers(s, None)?, k)
}

/// Sign-preserving clamp ⟦x⟧_t = sgn(x)·(|x| ∧ t), defined for t ≥ 0.
pub fn threshold(x: f64, t: f64) -> f64 {
    x.signum() * x.abs().min(t.max(0.0))
}

/// Symmetric PSD square root: A with A·A = S.
///
/// Eigenvalues in [-PSD_ERROR_TOL·λ_max, PSD_CLAMP_TOL·λ_max] are clamped to
/// zero; anything below that range makes the input genuinely indefinite.
pub fn sym_sqrt(s: &SymMatrix) -> Result<SymMatrix> {
    let p = s.dim();
    let dm = nalgebra::DMatrix::from_fn(p, p, |i, j| s[(i, j)]);
    let eig = dm.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut roots = Vec::with_capacity(p);
    for &l in eig.eigenvalues.iter() {
        if l < -PSD_ERROR_TOL * lambda_max.abs() {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: l });
        }
        roots.push(if l <= PSD_CLAMP_TOL * lambda_max { 0.0 } else { l.sqrt() });
    }
    // A = Q·diag(√λ)·Qᵀ, assembled symmetric.
    let q = eig.eigenvectors;
    let mut a = Array2::zeros((p, p));
    for i in 0..p {
        for j in i..p {
            let mut v = 0.0;
            for (k, &rk) in roots.iter().enumerate() {
                v += q[(i, k)] * rk * q[(j, k)];
            }
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    Ok(SymMatrix::new_unchecked(a))
}

/// One draw from the Haar (uniform) distribution on p×p orthogonal matrices:
/// QR of an i.i.d. Gaussian matrix with the R-diagonal signs folded into Q.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Array2<f64> {
    let g = nalgebra::DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r_diag: Vec<f64> = (0..p).map(|i| qr.r()[(i, i)]).collect();
    let q = qr.q();
    Array2::from_shape_fn((p, p), |(i, j)| {
        let sign = if r_diag[j] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * sign
    })
}

/// Standard normal distribution function Φ(z), via the complementary error
/// function. Absolute error is at the level of erfc itself (≈1 ulp).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal quantile Φ⁻¹(u) for u ∈ (0,1), by Wichura's PPND16
/// rational approximation (relative error below 1e-15 across the domain).
pub fn normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "normal quantile needs u in (0,1), got {u}"
        )));
    }
    let q = u - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * poly(&PPND_A, r) / poly(&PPND_B, r));
    }
    let mut r = if q < 0.0 { u } else { 1.0 - u };
    r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        poly(&PPND_C, r) / poly(&PPND_D, r)
    } else {
        let r = r - 5.0;
        poly(&PPND_E, r) / poly(&PPND_F, r)
    };
    Ok(if q < 0.0 { -z } else { z })
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

// PPND16 coefficients (Wichura, Applied Statistics 37, algorithm AS 241).
const PPND_A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const PPND_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const PPND_C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const PPND_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const PPND_E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const PPND_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

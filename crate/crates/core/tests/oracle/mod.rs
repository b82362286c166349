//! Independent, slow, obviously-correct reference computations used only by
//! the test suite. Nothing here is reachable from the shipped library.

// Each integration-test binary compiles its own copy and uses a subset.
#![allow(dead_code)]

use elliptest::numkit::SymMatrix;

/// Degree cap for the pair-partition enumeration; d = 12 already visits
/// 10395 partitions.
pub const MAX_DEGREE: usize = 12;

/// E(z_{i₁}···z_{i_d}) for z ~ N(0, Σ), summing Π Σ_{a,b} over every pair
/// partition of the index multiset. Odd degrees are zero without enumeration.
pub fn isserlis_moment(sigma: &SymMatrix, indices: &[usize]) -> Result<f64, String> {
    Ok(isserlis_moment_counted(sigma, indices)?.0)
}

/// As [`isserlis_moment`], also returning the number of pair partitions the
/// enumerator visited (expected: (d−1)!!).
pub fn isserlis_moment_counted(
    sigma: &SymMatrix,
    indices: &[usize],
) -> Result<(f64, usize), String> {
    let d = indices.len();
    if d % 2 == 1 {
        return Ok((0.0, 0));
    }
    if d > MAX_DEGREE {
        return Err(format!("degree {d} exceeds the enumeration cap {MAX_DEGREE}"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= sigma.dim()) {
        return Err(format!("index {bad} out of range for dimension {}", sigma.dim()));
    }
    let mut used = vec![false; d];
    let mut count = 0usize;
    let value = pair_off(sigma, indices, &mut used, 1.0, &mut count);
    Ok((value, count))
}

fn pair_off(
    sigma: &SymMatrix,
    indices: &[usize],
    used: &mut [bool],
    partial: f64,
    count: &mut usize,
) -> f64 {
    let first = match used.iter().position(|u| !u) {
        Some(i) => i,
        None => {
            *count += 1;
            return partial;
        }
    };
    used[first] = true;
    let mut total = 0.0;
    for mate in first + 1..indices.len() {
        if used[mate] {
            continue;
        }
        used[mate] = true;
        let factor = sigma[(indices[first], indices[mate])];
        total += pair_off(sigma, indices, used, partial * factor, count);
        used[mate] = false;
    }
    used[first] = false;
    total
}

/// E((zᵀSz)^k) for standard normal z, by expanding the quadratic form into
/// monomials and delegating every Gaussian moment to the Isserlis enumerator.
/// Only feasible for small dimension and k ≤ 4 (p^{2k} tuples).
pub fn quadform_moment(s: &SymMatrix, k: usize) -> f64 {
    let p = s.dim();
    let ident = SymMatrix::identity(p);
    let mut idx = vec![0usize; 2 * k];
    let mut total = 0.0;
    loop {
        let mut coeff = 1.0;
        for l in 0..k {
            coeff *= s[(idx[2 * l], idx[2 * l + 1])];
        }
        if coeff != 0.0 {
            total += coeff * isserlis_moment(&ident, &idx).expect("degree 2k <= cap");
        }
        // Odometer over all p^{2k} index tuples.
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return total;
            }
            idx[pos] += 1;
            if idx[pos] < p {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// The literal O(m²) pairwise form (1/(2·C(m,2)))·Σ_{i<i'}(q_i − q_{i'})².
pub fn varsigma_pairwise(q: &[f64]) -> Result<f64, String> {
    let m = q.len();
    if m < 2 {
        return Err(format!("need at least 2 values, got {m}"));
    }
    let mut acc = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let d = q[i] - q[j];
            acc += d * d;
        }
    }
    let pairs = (m * (m - 1) / 2) as f64;
    Ok(acc / (2.0 * pairs))
}

/// The covariance formulas for powers of elliptical coordinates:
/// (cov(x_j⁴, x_k⁴), cov(x_j², x_k²), cov(x_k², x_j⁴)) given the moment
/// ratios r₂, r₃, r₄.
pub fn lemma_covariances(
    sigma: &SymMatrix,
    r2: f64,
    r3: f64,
    r4: f64,
    j: usize,
    k: usize,
) -> (f64, f64, f64) {
    let sjj = sigma[(j, j)];
    let skk = sigma[(k, k)];
    let sjk = sigma[(j, k)];
    let c44 = r4 * (72.0 * sjj * skk * sjk * sjk + 24.0 * sjk.powi(4))
        + 9.0 * (r4 - r2 * r2) * sjj * sjj * skk * skk;
    let c22 = 2.0 * r2 * sjk * sjk + (r2 - 1.0) * sjj * skk;
    let c24 = 12.0 * r3 * sjj * sjk * sjk + 3.0 * (r3 - r2) * sjj * sjj * skk;
    (c44, c22, c24)
}

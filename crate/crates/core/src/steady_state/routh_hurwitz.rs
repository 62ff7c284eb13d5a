//! Exact Routh-Hurwitz test.
//!
//! Every finite `f64` is a dyadic rational `m * 2^e`, so scaling the matrix by
//! a common power of two gives an integer matrix with the same stability
//! verdict. Its characteristic polynomial is computed with Faddeev-LeVerrier
//! over big integers (all divisions are exact), and the Hurwitz leading
//! minors are read off as the pivots of fraction-free (Bareiss) elimination.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::model::DriftMatrix;

/// Largest matrix dimension accepted by [`routh_hurwitz_check`] (`N <= 5`).
pub const MAX_ROUTH_HURWITZ_DIM: usize = 12;

fn decode(x: f64) -> Option<(BigInt, i32)> {
    if !x.is_finite() {
        return None;
    }
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    let m = BigInt::from(mant);
    Some((if negative { -m } else { m }, exp))
}

fn to_integer_matrix(m: &DMatrix<f64>) -> Result<Vec<Vec<BigInt>>> {
    let n = m.nrows();
    let mut decoded = Vec::with_capacity(n * n);
    for x in m.iter() {
        decoded.push(decode(*x).ok_or(Error::NonFinite {
            field: alloc::string::String::from("drift matrix"),
        })?);
    }
    let min_exp = decoded
        .iter()
        .filter(|(m, _)| !m.is_zero())
        .map(|(_, e)| *e)
        .min()
        .unwrap_or(0);
    let mut out = vec![vec![BigInt::zero(); n]; n];
    // nalgebra iterates column-major
    for (k, (mant, exp)) in decoded.into_iter().enumerate() {
        let (i, j) = (k % n, k / n);
        if !mant.is_zero() {
            out[i][j] = mant << ((exp - min_exp) as usize);
        }
    }
    // drop the common power of two so the smallest odd mantissa stays odd
    let shift = out
        .iter()
        .flatten()
        .filter_map(|x| x.trailing_zeros())
        .min()
        .unwrap_or(0);
    if shift > 0 {
        for x in out.iter_mut().flatten() {
            *x >>= shift as usize;
        }
    }
    Ok(out)
}

fn mat_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = a.len();
    let mut c = vec![vec![BigInt::zero(); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                if !b[k][j].is_zero() {
                    c[i][j] += &a[i][k] * &b[k][j];
                }
            }
        }
    }
    c
}

/// Coefficients `[c_0, ..., c_n]` of `det(s I - A') = s^n + c_1 s^{n-1} + ... + c_n`
/// for the integer-scaled matrix `A' = 2^k A` (same root signs as `A`).
pub fn characteristic_polynomial(a: &DMatrix<f64>) -> Result<Vec<BigInt>> {
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch(a.nrows(), a.ncols()));
    }
    let n = a.nrows();
    let m = to_integer_matrix(a)?;
    let mut coeffs = vec![BigInt::zero(); n + 1];
    coeffs[0] = BigInt::one();
    // M_1 = I, c_k = -tr(A M_k) / k, M_{k+1} = A M_k + c_k I
    let mut mk: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigInt::one()
                    } else {
                        BigInt::zero()
                    }
                })
                .collect()
        })
        .collect();
    for (k, slot) in coeffs.iter_mut().enumerate().skip(1) {
        let am = mat_mul(&m, &mk);
        let trace: BigInt = (0..n).map(|i| am[i][i].clone()).sum();
        let ck = -trace / BigInt::from(k as u64);
        mk = am;
        for (i, row) in mk.iter_mut().enumerate() {
            row[i] += &ck;
        }
        *slot = ck;
    }
    Ok(coeffs)
}

/// Strict Hurwitz stability of a monic polynomial given as `[1, c_1, ..., c_n]`.
fn hurwitz_stable(coeffs: &[BigInt]) -> bool {
    let n = coeffs.len() - 1;
    if n == 0 {
        return true;
    }
    if coeffs.iter().skip(1).any(|c| !c.is_positive()) {
        return false;
    }
    let coef = |k: isize| -> BigInt {
        if k < 0 || k as usize > n {
            BigInt::zero()
        } else {
            coeffs[k as usize].clone()
        }
    };
    // H_{ij} = c_{2j - i} with 1-based indices
    let mut h: Vec<Vec<BigInt>> = (1..=n as isize)
        .map(|i| (1..=n as isize).map(|j| coef(2 * j - i)).collect())
        .collect();
    let mut prev = BigInt::one();
    for k in 0..n {
        // after k Bareiss steps, h[k][k] is the (k+1)-th leading minor
        if !h[k][k].is_positive() {
            return false;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&h[k][k] * &h[i][j] - &h[i][k] * &h[k][j]) / &prev;
                h[i][j] = v;
            }
        }
        prev = h[k][k].clone();
    }
    true
}

/// Routh-Hurwitz verdict on the drift matrix, computed exactly.
pub fn routh_hurwitz_check(a: &DriftMatrix) -> Result<bool> {
    if a.dim() > MAX_ROUTH_HURWITZ_DIM {
        return Err(Error::DimensionTooLarge {
            dim: a.dim(),
            max: MAX_ROUTH_HURWITZ_DIM,
        });
    }
    let coeffs = characteristic_polynomial(a.matrix())?;
    Ok(hurwitz_stable(&coeffs))
}

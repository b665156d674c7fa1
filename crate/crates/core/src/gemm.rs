//! Blocked matrix kernels backing the im2col convolution lowering.
//!
//! Three product flavours cover the forward pass and both backward products:
//! `C += A·B`, `C += Aᵀ·B`, `C += A·Bᵀ`. All loops are written as
//! equal-length slice zips so LLVM can vectorize them; column blocking keeps
//! the streamed panel resident in cache. Accumulation order is fixed, so
//! results are bit-reproducible from run to run.

use crate::scalar::Scalar;

/// Column-block width. Panels of `NB` columns keep the inner streams inside
/// L1/L2 while the outer dimension re-reads them.
const NB: usize = 512;

#[inline]
fn axpy4<T: Scalar>(c: &mut [T], a: [T; 4], b0: &[T], b1: &[T], b2: &[T], b3: &[T]) {
    for ((((cv, &v0), &v1), &v2), &v3) in
        c.iter_mut().zip(b0).zip(b1).zip(b2).zip(b3)
    {
        *cv = *cv + a[0] * v0 + a[1] * v1 + a[2] * v2 + a[3] * v3;
    }
}

#[inline]
fn axpy1<T: Scalar>(c: &mut [T], a: T, b: &[T]) {
    for (cv, &bv) in c.iter_mut().zip(b) {
        *cv = *cv + a * bv;
    }
}

/// C (m×n) += A (m×k) · B (k×n).
pub fn gemm_nn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let mut n0 = 0;
    while n0 < n {
        let nb = NB.min(n - n0);
        for i in 0..m {
            let arow = &a[i * k..(i + 1) * k];
            let crow = &mut c[i * n + n0..i * n + n0 + nb];
            let mut p = 0;
            while p + 4 <= k {
                let coeff = [arow[p], arow[p + 1], arow[p + 2], arow[p + 3]];
                axpy4(
                    crow,
                    coeff,
                    &b[p * n + n0..p * n + n0 + nb],
                    &b[(p + 1) * n + n0..(p + 1) * n + n0 + nb],
                    &b[(p + 2) * n + n0..(p + 2) * n + n0 + nb],
                    &b[(p + 3) * n + n0..(p + 3) * n + n0 + nb],
                );
                p += 4;
            }
            while p < k {
                axpy1(crow, arow[p], &b[p * n + n0..p * n + n0 + nb]);
                p += 1;
            }
        }
        n0 += nb;
    }
}

/// C (k×n) += Aᵀ · B, with A (m×k) and B (m×n).
pub fn gemm_at_b<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    let mut n0 = 0;
    while n0 < n {
        let nb = NB.min(n - n0);
        for p in 0..k {
            let crow = &mut c[p * n + n0..p * n + n0 + nb];
            let mut j = 0;
            while j + 4 <= m {
                let coeff = [
                    a[j * k + p],
                    a[(j + 1) * k + p],
                    a[(j + 2) * k + p],
                    a[(j + 3) * k + p],
                ];
                axpy4(
                    crow,
                    coeff,
                    &b[j * n + n0..j * n + n0 + nb],
                    &b[(j + 1) * n + n0..(j + 1) * n + n0 + nb],
                    &b[(j + 2) * n + n0..(j + 2) * n + n0 + nb],
                    &b[(j + 3) * n + n0..(j + 3) * n + n0 + nb],
                );
                j += 4;
            }
            while j < m {
                axpy1(crow, a[j * k + p], &b[j * n + n0..j * n + n0 + nb]);
                j += 1;
            }
        }
        n0 += nb;
    }
}

/// Lane count of the unrolled dot kernel; 64 keeps enough independent FMA
/// chains in flight to cover the multiply-add latency.
const LANES: usize = 64;

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); LANES];
    let chunks = a.len() / LANES;
    for (ca, cb) in a
        .chunks_exact(LANES)
        .zip(b.chunks_exact(LANES))
    {
        for l in 0..LANES {
            acc[l] = acc[l] + ca[l] * cb[l];
        }
    }
    let mut tail = T::zero();
    for (&av, &bv) in a[chunks * LANES..].iter().zip(&b[chunks * LANES..]) {
        tail = tail + av * bv;
    }
    let mut total = tail;
    for v in acc {
        total = total + v;
    }
    total
}

/// C (m×k) += A · Bᵀ, with A (m×n) and B (k×n).
pub fn gemm_a_bt<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * k);
    let mut n0 = 0;
    while n0 < n {
        let nb = NB.min(n - n0);
        for i in 0..m {
            let aseg = &a[i * n + n0..i * n + n0 + nb];
            for p in 0..k {
                let bseg = &b[p * n + n0..p * n + n0 + nb];
                c[i * k + p] = c[i * k + p] + dot(aseg, bseg);
            }
        }
        n0 += nb;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn naive_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                for q in 0..n {
                    c[i * n + q] += a[i * k + p] * b[p * n + q];
                }
            }
        }
        c
    }

    fn random_vec(len: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn gemm_flavours_match_naive() {
        let mut rng = crate::seeds::rng(11);
        for &(m, k, n) in &[(1, 1, 1), (3, 5, 7), (4, 8, 33), (5, 9, 1030)] {
            let a = random_vec(m * k, &mut rng);
            let b = random_vec(k * n, &mut rng);
            let expect = naive_nn(m, k, n, &a, &b);

            let mut c = vec![0.0; m * n];
            gemm_nn(m, k, n, &a, &b, &mut c);
            for (x, y) in c.iter().zip(&expect) {
                assert!((x - y).abs() < 1e-10);
            }

            // Store A transposed as a2 (k×m); then a2ᵀ·B equals A·B.
            let mut a2 = vec![0.0; k * m];
            for i in 0..m {
                for p in 0..k {
                    a2[p * m + i] = a[i * k + p];
                }
            }
            let mut c2 = vec![0.0; m * n];
            gemm_at_b(k, m, n, &a2, &b, &mut c2);
            for (x, y) in c2.iter().zip(&expect) {
                assert!((x - y).abs() < 1e-10);
            }

            // Store B transposed as bt (n×k); then A·btᵀ equals A·B.
            let mut bt = vec![0.0; n * k];
            for p in 0..k {
                for q in 0..n {
                    bt[q * k + p] = b[p * n + q];
                }
            }
            let mut c3 = vec![0.0; m * n];
            gemm_a_bt(m, n, k, &a, &bt, &mut c3);
            for (x, y) in c3.iter().zip(&expect) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }
}

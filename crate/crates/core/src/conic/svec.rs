//! Symmetric-matrix vectorization with the `sqrt(2)` off-diagonal scaling,
//! so that `svec(A) . svec(B) = trace(A B)`.

use nalgebra::{DMatrix, DVector};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Length of `svec` for an `n x n` matrix.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Matrix order whose `svec` has length `len`, if any.
pub fn svec_order(len: usize) -> Option<usize> {
    let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (svec_len(n) == len).then_some(n)
}

/// Position of entry `(i, j)` (either triangle) in the column-major lower `svec`.
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    // Column `c` begins at sum_{k<c} (n - k).
    c * n - c * c.saturating_sub(1) / 2 + (r - c)
}

pub fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut out = DVector::zeros(svec_len(n));
    svec_into(m, out.as_mut_slice());
    out
}

pub fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    let mut k = 0;
    for j in 0..n {
        out[k] = m[(j, j)];
        k += 1;
        for i in j + 1..n {
            out[k] = SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)]);
            k += 1;
        }
    }
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let x = v[k] / SQRT2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, -1.0, 1.0, 3.0, 0.5, -1.0, 0.5, 4.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.0, -2.0, 1.0, 1.0, 0.0, 1.0, 5.0]);
        let va = svec(&a);
        assert_eq!(va.len(), 6);
        assert!((smat(va.as_slice(), 3) - &a).abs().max() < 1e-15);
        let tr = (&a * &b).trace();
        assert!((va.dot(&svec(&b)) - tr).abs() < 1e-12);
    }

    #[test]
    fn index_layout() {
        let n = 4;
        let mut seen = vec![false; svec_len(n)];
        let mut k = 0;
        for j in 0..n {
            for i in j..n {
                assert_eq!(svec_index(n, i, j), k);
                assert_eq!(svec_index(n, j, i), k);
                seen[k] = true;
                k += 1;
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(svec_order(10), Some(4));
        assert_eq!(svec_order(7), None);
    }
}

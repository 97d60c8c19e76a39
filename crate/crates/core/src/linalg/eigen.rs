use alloc::vec::Vec;

use super::Mat;

/// Eigen-decomposition `M = Q diag(values) Q^T` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub vectors: Mat,
}

/// Cyclic Jacobi rotations. Meant for the small `K x K` matrices of the
/// factor dimension; cost is `O(K^3)` per sweep.
pub fn symmetric_eigen(m: &Mat) -> SymmetricEigen {
    let n = m.rows();
    assert_eq!(n, m.cols(), "symmetric_eigen: matrix must be square");
    let mut a = m.clone();
    let mut v = Mat::identity(n);
    let scale = m.frobenius().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if libm::sqrt(off) <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    SymmetricEigen {
        values: (0..n).map(|i| a[(i, i)]).collect(),
        vectors: v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_input() {
        let m = Mat::from_rows(&[[4.0, 1.0, 0.5], [1.0, 3.0, -0.2], [0.5, -0.2, 1.0]]).unwrap();
        let e = symmetric_eigen(&m);
        let q = &e.vectors;
        let mut lam = Mat::zeros(3, 3);
        for i in 0..3 {
            lam[(i, i)] = e.values[i];
        }
        let back = q.matmul(&lam).matmul_t(q);
        assert!(back.max_abs_diff(&m) < 1e-13);
        assert!(q.gram().max_abs_diff(&Mat::identity(3)) < 1e-13);
    }

    #[test]
    fn diagonal_input_is_untouched() {
        let m = Mat::from_rows(&[[2.0, 0.0], [0.0, 5.0]]).unwrap();
        let e = symmetric_eigen(&m);
        assert_eq!(e.values, alloc::vec![2.0, 5.0]);
        assert_eq!(e.vectors, Mat::identity(2));
    }
}

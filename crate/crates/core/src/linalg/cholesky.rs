use alloc::vec::Vec;

use super::Mat;

/// Lower-triangular Cholesky factor `L` with `M = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric positive definite matrix. Returns `None` when a
    /// non-positive pivot shows up.
    pub fn new(m: &Mat) -> Option<Self> {
        let n = m.rows();
        assert_eq!(n, m.cols(), "cholesky: matrix must be square");
        let mut l = alloc::vec![0.0; n * n];
        for j in 0..n {
            let mut diag = m[(j, j)];
            for p in 0..j {
                diag -= l[j * n + p] * l[j * n + p];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return None;
            }
            let ljj = libm::sqrt(diag);
            l[j * n + j] = ljj;
            for i in j + 1..n {
                let mut s = m[(i, j)];
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Some(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `M x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for p in 0..i {
                s -= self.l[i * n + p] * b[p];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for p in i + 1..n {
                s -= self.l[p * n + i] * b[p];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves `M X = B` for every column of `B`.
    pub fn solve_columns(&self, b: &Mat) -> Mat {
        assert_eq!(b.rows(), self.n);
        let mut out = Mat::zeros(b.rows(), b.cols());
        let mut col = alloc::vec![0.0; self.n];
        for j in 0..b.cols() {
            for i in 0..self.n {
                col[i] = b[(i, j)];
            }
            self.solve_in_place(&mut col);
            out.set_col(j, &col);
        }
        out
    }

    /// Cheap condition-number estimate `(max L_ii / min L_ii)^2`.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let d = self.l[i * n + i];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if n == 0 {
            1.0
        } else {
            let r = hi / lo;
            r * r
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let m = Mat::from_rows(&[[4.0, 2.0], [2.0, 3.0]]).unwrap();
        let c = Cholesky::new(&m).unwrap();
        let x = c.solve(&[2.0, 1.0]);
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!(x[1].abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let m = Mat::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(Cholesky::new(&m).is_none());
    }
}

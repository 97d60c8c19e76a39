//! Slow, obviously-correct reference computations for tests.
//!
//! Matrices are `Vec<Vec<f64>>` in row order. Nothing here depends on the
//! implementation crates, so agreement is evidence rather than tautology.

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn transpose(a: &Dense) -> Dense {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|p| row[p] * b[p][j]).sum())
                .collect()
        })
        .collect()
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Gaussian elimination with partial pivoting. `None` if a pivot is
/// exactly zero.
pub fn solve(a: &Dense, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Dense = a.iter().zip(b).map(|(r, &v)| {
        let mut r = r.clone();
        r.push(v);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    Some(x)
}

/// Numerical rank by elimination with relative pivot threshold `tol`.
pub fn rank(a: &Dense, tol: f64) -> usize {
    let mut m = a.clone();
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let piv = (r..rows).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if m[piv][c].abs() <= tol * scale {
            continue;
        }
        m.swap(r, piv);
        for i in r + 1..rows {
            let f = m[i][c] / m[r][c];
            for j in c..cols {
                m[i][j] -= f * m[r][j];
            }
        }
        r += 1;
    }
    r
}

/// Solves `P A + A Q = R` (`P: N×N`, `Q: K×K`, `R: N×K`) through the
/// vectorized system `(I_K ⊗ P + Qᵀ ⊗ I_N) vec(A) = vec(R)`.
pub fn sylvester_kron(p: &Dense, q: &Dense, r: &Dense) -> Option<Dense> {
    let n = p.len();
    let k = q.len();
    let dim = n * k;
    // column-major vec: index (i, c) -> c * n + i
    let mut big = zeros(dim, dim);
    for c in 0..k {
        for i in 0..n {
            let row = c * n + i;
            for j in 0..n {
                big[row][c * n + j] += p[i][j];
            }
            for d in 0..k {
                big[row][d * n + i] += q[d][c];
            }
        }
    }
    let rhs: Vec<f64> = (0..dim).map(|idx| r[idx % n][idx / n]).collect();
    let v = solve(&big, &rhs)?;
    Some((0..n).map(|i| (0..k).map(|c| v[c * n + i]).collect()).collect())
}

/// `min ½ aᵀHa − bᵀa  s.t. a ≥ 0` by trying every support (`2^K` solves).
/// Requires `H` positive definite.
pub fn nonneg_qp(h: &Dense, b: &[f64]) -> Vec<f64> {
    let k = b.len();
    let value = |a: &[f64]| {
        let ha = matvec(h, a);
        0.5 * a.iter().zip(&ha).map(|(p, q)| p * q).sum::<f64>()
            - a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>()
    };
    let mut best = (vec![0.0; k], 0.0);
    for mask in 1u32..(1 << k) {
        let idx: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).collect();
        let sub: Dense = idx.iter().map(|&i| idx.iter().map(|&j| h[i][j]).collect()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
        let Some(x) = solve(&sub, &rhs) else { continue };
        if x.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut a = vec![0.0; k];
        for (&j, &v) in idx.iter().zip(&x) {
            a[j] = v;
        }
        let f = value(&a);
        if f < best.1 {
            best = (a, f);
        }
    }
    best.0
}

/// Maximum of `Σ_i score[i][perm[i]]` over all permutations.
pub fn best_assignment(score: &Dense) -> (Vec<usize>, f64) {
    fn go(score: &Dense, row: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, acc: f64, best: &mut (Vec<usize>, f64)) {
        let k = score.len();
        if row == k {
            if acc > best.1 {
                *best = (cur.clone(), acc);
            }
            return;
        }
        for j in 0..k {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                go(score, row + 1, used, cur, acc + score[row][j], best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    go(score, 0, &mut vec![false; score.len()], &mut Vec::new(), 0.0, &mut best);
    best
}

/// `Tr(AᵀLA)` from a dense `L`.
pub fn trace_form(l: &Dense, a: &Dense) -> f64 {
    let la = matmul(l, a);
    a.iter().zip(&la).map(|(r, s)| r.iter().zip(s).map(|(p, q)| p * q).sum::<f64>()).sum()
}

/// The loss weights, in the order they appear in the objective.
#[derive(Debug, Clone, Copy, Default)]
pub struct Weights {
    pub prediction: f64,
    pub x: f64,
    pub w_l1: f64,
    pub w_l2: f64,
    pub a_l1: f64,
    pub a_l2: f64,
    pub d_l1: f64,
    pub d_l2: f64,
    pub s: f64,
    pub t: f64,
}

/// The joint objective, one term at a time, with dense Laplacians.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    x: &Dense,
    y: &[f64],
    d: &Dense,
    a: &Dense,
    w: &[f64],
    g: &Weights,
    ls: &Dense,
    lt: &Dense,
) -> f64 {
    let sq = |m: &Dense| m.iter().flatten().map(|v| v * v).sum::<f64>();
    let abs = |m: &Dense| m.iter().flatten().map(|v| v.abs()).sum::<f64>();
    let pred = matvec(a, w);
    let fit_y: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    let ad = matmul(a, d);
    let fit_x: f64 = ad.iter().flatten().zip(x.iter().flatten()).map(|(p, t)| (p - t) * (p - t)).sum();
    0.5 * g.prediction * fit_y
        + 0.5 * g.x * fit_x
        + g.w_l1 * w.iter().map(|v| v.abs()).sum::<f64>()
        + 0.5 * g.w_l2 * w.iter().map(|v| v * v).sum::<f64>()
        + g.a_l1 * abs(a)
        + 0.5 * g.a_l2 * sq(a)
        + g.d_l1 * abs(d)
        + 0.5 * g.d_l2 * sq(d)
        + g.s * trace_form(ls, a)
        + g.t * trace_form(lt, a)
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Block coordinate descent with exact nonnegative least-squares blocks for
/// the objective without ℓ1 and graph terms:
///
/// `½‖AW − y‖² + (λ_X/2)‖AD − X‖² + (λ_W/2)‖W‖² + (λ_A/2)‖A‖² + (λ_D/2)‖D‖²`
/// with `A, D ≥ 0`. Each block is solved exactly (supports enumerated), so
/// the returned objective trace is non-increasing. Returns `(D, A, W, trace)`.
pub fn alternating_nnls(
    x: &Dense,
    y: &[f64],
    d0: &Dense,
    a0: &Dense,
    g: &Weights,
    iters: usize,
) -> (Dense, Dense, Vec<f64>, Vec<f64>) {
    let n = x.len();
    let m = x[0].len();
    let k = d0.len();
    let (mut d, mut a) = (d0.clone(), a0.clone());
    let mut w = vec![0.0; k];
    let none = zeros(n, n);
    let mut trace = Vec::new();
    for _ in 0..iters {
        // W: ridge
        let at = transpose(&a);
        let mut h = matmul(&at, &a);
        for i in 0..k {
            for j in 0..k {
                h[i][j] *= g.prediction;
            }
            h[i][i] += g.w_l2;
        }
        let rhs: Vec<f64> = matvec(&at, y).iter().map(|v| g.prediction * v).collect();
        w = solve(&h, &rhs).unwrap_or(w);
        // D: one nonnegative QP per analyte
        let mut h = matmul(&at, &a);
        for i in 0..k {
            for j in 0..k {
                h[i][j] *= g.x;
            }
            h[i][i] += g.d_l2;
        }
        for j in 0..m {
            let xj: Vec<f64> = x.iter().map(|r| r[j]).collect();
            let b: Vec<f64> = matvec(&at, &xj).iter().map(|v| g.x * v).collect();
            let col = nonneg_qp(&h, &b);
            for c in 0..k {
                d[c][j] = col[c];
            }
        }
        // A: one nonnegative QP per sample
        let ddt = matmul(&d, &transpose(&d));
        let h: Dense = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        g.prediction * w[i] * w[j]
                            + g.x * ddt[i][j]
                            + if i == j { g.a_l2 } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        for i in 0..n {
            let dx = matvec(&d, &x[i]);
            let b: Vec<f64> = (0..k).map(|c| g.prediction * y[i] * w[c] + g.x * dx[c]).collect();
            a[i] = nonneg_qp(&h, &b);
        }
        trace.push(objective(x, y, &d, &a, &w, g, &none, &none));
    }
    (d, a, w, trace)
}

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsdst_core::graph::GraphLaplacian;
use tsdst_core::solver::AdmmState;
use tsdst_core::{Hyperparams, Mat};
use tsdst_oracle::Dense;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dense(m: &Mat) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Random weighted graph with roughly `density` of all pairs connected.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> GraphLaplacian {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                edges.push((i, j, rng.random_range(0.1..2.0)));
            }
        }
    }
    GraphLaplacian::from_edges(n, edges).unwrap()
}

/// All-positive random hyperparameters with nonzero ℓ1 and graph weights.
pub fn random_hyperparams(rng: &mut ChaCha8Rng, k: usize) -> Hyperparams {
    let mut r = |lo: f64, hi: f64| rng.random_range(lo..hi);
    Hyperparams {
        prediction_weight: r(0.5, 2.0),
        lambda_x: r(0.5, 2.0),
        lambda_w_l1: r(0.0, 0.1),
        lambda_w_l2: r(0.01, 0.5),
        lambda_a_l1: r(0.0, 0.1),
        lambda_a_l2: r(0.01, 0.5),
        lambda_d_l1: r(0.0, 0.1),
        lambda_d_l2: r(0.01, 0.5),
        lambda_s: r(0.0, 0.5),
        lambda_t: r(0.0, 0.5),
        rho_w: r(0.1, 2.0),
        rho_d1: r(0.1, 2.0),
        rho_d2: r(0.1, 2.0),
        rho_a1: r(0.1, 2.0),
        rho_a2: r(0.1, 2.0),
        k_sources: k,
        ..Hyperparams::default()
    }
}

/// A state with random primals, auxiliaries and duals of mixed sign.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> AdmmState {
    let mut s = AdmmState::new(
        random_vec(rng, k, -1.0, 1.0),
        uniform(rng, k, m, 0.0, 1.0),
        uniform(rng, n, k, 0.0, 1.0),
    );
    s.z_w = random_vec(rng, k, -1.0, 1.0);
    s.u_w = random_vec(rng, k, -0.5, 0.5);
    s.z_d1 = uniform(rng, k, m, 0.0, 1.0);
    s.u_d1 = uniform(rng, k, m, -0.5, 0.5);
    s.z_d2 = uniform(rng, k, m, -1.0, 1.0);
    s.u_d2 = uniform(rng, k, m, -0.5, 0.5);
    s.z_a1 = uniform(rng, n, k, 0.0, 1.0);
    s.u_a1 = uniform(rng, n, k, -0.5, 0.5);
    s.z_a2 = uniform(rng, n, k, -1.0, 1.0);
    s.u_a2 = uniform(rng, n, k, -0.5, 0.5);
    s
}

pub struct Instance {
    pub x: Mat,
    pub y: Vec<f64>,
    pub ls: GraphLaplacian,
    pub lt: GraphLaplacian,
    pub h: Hyperparams,
    pub state: AdmmState,
}

pub fn random_instance(seed: u64, n: usize, m: usize, k: usize) -> Instance {
    let mut r = rng(seed);
    Instance {
        x: uniform(&mut r, n, m, 0.0, 1.0),
        y: random_vec(&mut r, n, -1.0, 2.0),
        ls: random_graph(&mut r, n, 0.4),
        lt: random_graph(&mut r, n, 0.3),
        h: random_hyperparams(&mut r, k),
        state: random_state(&mut r, n, m, k),
    }
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

mod common;

use common::*;
use tsdst_core::graph::GraphLaplacian;
use tsdst_core::solver::{
    fit_matrices, initialize, update_a, update_d, update_w, ASubproblem, AdmmState, DSubproblem,
    FitStatus, WSubproblem, PRIMAL_TOL,
};
use tsdst_core::synth::{generate, match_sources, SynthSpec};
use tsdst_core::eval::build_graphs;
use tsdst_core::{objective_terms, GraphParams, Factorization, Hyperparams, Mat};
use tsdst_oracle as oracle;

fn weights(h: &Hyperparams) -> oracle::Weights {
    oracle::Weights {
        prediction: h.prediction_weight,
        x: h.lambda_x,
        w_l1: h.lambda_w_l1,
        w_l2: h.lambda_w_l2,
        a_l1: h.lambda_a_l1,
        a_l2: h.lambda_a_l2,
        d_l1: h.lambda_d_l1,
        d_l2: h.lambda_d_l2,
        s: h.lambda_s,
        t: h.lambda_t,
    }
}

fn sizes(seed: u64) -> (usize, usize, usize) {
    let mut r = rng(1000 + seed);
    use rand::Rng;
    (r.random_range(2..=12), r.random_range(2..=6), r.random_range(1..=3))
}

#[test]
fn a_update_matches_kronecker_solve() {
    for seed in 0..20 {
        let (n, m, k) = sizes(seed);
        let inst = random_instance(seed, n, m, k);
        let sub = ASubproblem::new(&inst.state, &inst.x, &inst.y, &inst.ls, &inst.lt, &inst.h);
        let got = sub.solve(None).a;

        let ls = dense(&inst.ls.to_dense());
        let lt = dense(&inst.lt.to_dense());
        let p: oracle::Dense = (0..n)
            .map(|i| (0..n).map(|j| 2.0 * inst.h.lambda_s * ls[i][j] + 2.0 * inst.h.lambda_t * lt[i][j]).collect())
            .collect();
        let want = oracle::sylvester_kron(&p, &dense(&sub.right_matrix()), &dense(&sub.rhs())).unwrap();
        let want: Vec<f64> = want.into_iter().flatten().collect();
        let err = rel_err(got.as_slice(), &want);
        assert!(err <= 1e-8, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn a_update_without_graphs_is_rowwise() {
    for seed in 0..10 {
        let (n, m, k) = sizes(seed);
        let mut inst = random_instance(50 + seed, n, m, k);
        inst.h.lambda_s = 0.0;
        inst.h.lambda_t = 0.0;
        let sub = ASubproblem::new(&inst.state, &inst.x, &inst.y, &inst.ls, &inst.lt, &inst.h);
        let got = sub.solve(None).a;
        let mmat = dense(&sub.right_matrix());
        let rhs = sub.rhs();
        for i in 0..n {
            // A M = RHS row by row; M is symmetric
            let row = oracle::solve(&mmat, rhs.row(i)).unwrap();
            let err = rel_err(got.row(i), &row);
            assert!(err <= 1e-8, "seed {seed} row {i}: {err:e}");
        }
    }
}

#[test]
fn w_update_matches_dense_solve() {
    for seed in 0..10 {
        let inst = random_instance(100 + seed, 9, 4, 2);
        let sub = WSubproblem::new(&inst.state, &inst.y, &inst.h);
        let (got, _) = sub.solve();
        let a = dense(&inst.state.a);
        let at = oracle::transpose(&a);
        let h = &inst.h;
        let mut lhs = oracle::matmul(&at, &a);
        for (i, row) in lhs.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v *= h.prediction_weight;
            }
            row[i] += h.lambda_w_l2 + h.rho_w;
        }
        let aty = oracle::matvec(&at, &inst.y);
        let rhs: Vec<f64> = (0..2)
            .map(|c| h.prediction_weight * aty[c] + h.rho_w * (inst.state.z_w[c] - inst.state.u_w[c]))
            .collect();
        let want = oracle::solve(&lhs, &rhs).unwrap();
        assert!(rel_err(&got, &want) <= 1e-10, "seed {seed}");
    }
}

#[test]
fn block_solutions_are_stationary() {
    for seed in 0..10 {
        let (n, m, k) = sizes(seed);
        let inst = random_instance(200 + seed, n, m, k);

        let ws = WSubproblem::new(&inst.state, &inst.y, &inst.h);
        let (w, _) = ws.solve();
        let g = ws.gradient(&w);
        let bound = 1e-8 * (1.0 + oracle_norm(&ws.system().1));
        assert!(oracle_norm(&g) <= bound, "W seed {seed}");

        let ds = DSubproblem::new(&inst.state, &inst.x, &inst.h);
        let (d, _) = ds.solve();
        let bound = 1e-8 * (1.0 + ds.system().1.frobenius());
        assert!(ds.gradient(&d).frobenius() <= bound, "D seed {seed}");

        let asub = ASubproblem::new(&inst.state, &inst.x, &inst.y, &inst.ls, &inst.lt, &inst.h);
        let a = asub.solve(None).a;
        let bound = 1e-8 * (1.0 + asub.rhs().frobenius());
        let gn = asub.gradient(&a).frobenius();
        assert!(gn <= bound, "A seed {seed}: {gn:e} > {bound:e}");
    }
}

fn oracle_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn assert_fd(analytic: &[f64], numeric: &[f64], what: &str) {
    let err = rel_err(analytic, numeric);
    assert!(err <= 1e-4, "{what}: relative error {err:e}");
}

#[test]
fn gradients_match_central_differences() {
    for seed in 0..10 {
        let (n, m, k) = sizes(seed);
        let inst = random_instance(300 + seed, n, m, k);
        let mut r = rng(seed);

        let ws = WSubproblem::new(&inst.state, &inst.y, &inst.h);
        let w0 = random_vec(&mut r, k, -1.0, 1.0);
        let fd = oracle::central_gradient(|w| ws.value(w), &w0, 1e-6);
        assert_fd(&ws.gradient(&w0), &fd, "W");

        let ds = DSubproblem::new(&inst.state, &inst.x, &inst.h);
        let d0 = uniform(&mut r, k, m, 0.0, 1.0);
        let fd = oracle::central_gradient(|v| ds.value(&Mat::from_vec(k, m, v.to_vec()).unwrap()), d0.as_slice(), 1e-6);
        assert_fd(ds.gradient(&d0).as_slice(), &fd, "D");

        let asub = ASubproblem::new(&inst.state, &inst.x, &inst.y, &inst.ls, &inst.lt, &inst.h);
        let a0 = uniform(&mut r, n, k, 0.0, 1.0);
        let fd = oracle::central_gradient(|v| asub.value(&Mat::from_vec(n, k, v.to_vec()).unwrap()), a0.as_slice(), 1e-6);
        assert_fd(asub.gradient(&a0).as_slice(), &fd, "A");
    }
}

#[test]
fn block_updates_never_increase_their_subproblem() {
    for seed in 0..20 {
        let (n, m, k) = sizes(seed);
        let inst = random_instance(400 + seed, n, m, k);
        let s = &inst.state;

        let ws = WSubproblem::new(s, &inst.y, &inst.h);
        let before = ws.value(&s.w);
        assert!(ws.value(&ws.solve().0) <= before + 1e-10 * (1.0 + before.abs()));

        let ds = DSubproblem::new(s, &inst.x, &inst.h);
        let before = ds.value(&s.d);
        assert!(ds.value(&ds.solve().0) <= before + 1e-10 * (1.0 + before.abs()));

        let asub = ASubproblem::new(s, &inst.x, &inst.y, &inst.ls, &inst.lt, &inst.h);
        let before = asub.value(&s.a);
        assert!(asub.value(&asub.solve(None).a) <= before + 1e-10 * (1.0 + before.abs()));
    }
}

#[test]
fn objective_terms_match_oracle() {
    for seed in 0..10 {
        let (n, m, k) = sizes(seed);
        let inst = random_instance(500 + seed, n, m, k);
        let mut r = rng(seed + 77);
        let w = random_vec(&mut r, k, -1.0, 1.0);
        let f = Factorization::new(uniform(&mut r, k, m, 0.0, 1.0), uniform(&mut r, n, k, 0.0, 1.0), w.clone()).unwrap();
        let got = objective_terms(&inst.x, &inst.y, &f, &inst.h, &inst.ls, &inst.lt).unwrap().total();
        let want = oracle::objective(
            &dense(&inst.x),
            &inst.y,
            &dense(&f.d),
            &dense(&f.a),
            &w,
            &weights(&inst.h),
            &dense(&inst.ls.to_dense()),
            &dense(&inst.lt.to_dense()),
        );
        assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()), "seed {seed}: {got} vs {want}");
    }
}

fn no_graph(n: usize) -> GraphLaplacian {
    GraphLaplacian::empty(n)
}

fn anls_hyperparams(k: usize) -> Hyperparams {
    let mut h = Hyperparams {
        k_sources: k,
        lambda_s: 0.0,
        lambda_t: 0.0,
        lambda_w_l1: 0.0,
        lambda_a_l1: 0.0,
        lambda_d_l1: 0.0,
        lambda_w_l2: 0.05,
        lambda_a_l2: 0.05,
        lambda_d_l2: 0.05,
        max_iters: 5000,
        tol: 1e-10,
        ..Hyperparams::default()
    };
    h.set_all_rhos(1.0);
    h
}

#[test]
fn admm_matches_alternating_nnls_on_tiny_problems() {
    for seed in 0..5 {
        let spec = SynthSpec { n_samples: 8, n_analytes: 4, k_sources: 2, noise_std: 0.01, seed, ..SynthSpec::default() };
        let data = generate(&spec).unwrap();
        let x = data.dataset.features().clone();
        let y = data.dataset.target().to_vec();
        let h = anls_hyperparams(2);
        let g = no_graph(8);
        let (_, report) = fit_matrices(&x, &y, &h, &g, &g).unwrap();

        let init = initialize(&x, &h).unwrap();
        let (_, _, _, trace) = oracle::alternating_nnls(&dense(&x), &y, &dense(&init.d), &dense(&init.a), &weights(&h), 2000);
        let reference = *trace.last().unwrap();
        let ours = report.final_objective();
        let gap = (ours - reference) / reference;
        assert!(gap.abs() <= 0.01, "seed {seed}: ADMM {ours} vs ANLS {reference}");
    }
}

fn synthetic_fit(noise: f64, seed: u64, iters: usize) -> (tsdst_core::synth::SyntheticData, Factorization, tsdst_core::FitReport) {
    let spec = SynthSpec { noise_std: noise, seed, ..SynthSpec::default() };
    let data = generate(&spec).unwrap();
    let mut h = Hyperparams { lambda_t: 0.0, max_iters: iters, seed, ..Hyperparams::default() };
    h.set_all_rhos(1.0);
    let (ls, lt) = build_graphs(&data.dataset, &GraphParams::default()).unwrap();
    let (f, r) = fit_matrices(data.dataset.features(), data.dataset.target(), &h, &ls, &lt).unwrap();
    (data, f, r)
}

#[test]
fn noiseless_synthetic_recovers_sources() {
    let (data, f, report) = synthetic_fit(0.0, 3, 500);
    let matched = match_sources(&f.d, &data.d_true).unwrap();
    assert!(matched.mean_similarity() >= 0.95, "{:?}", matched.similarities);
    assert!(report.final_objective() <= report.initial_objective);
}

#[test]
fn outputs_are_nonnegative_and_deterministic() {
    let (_, f1, r1) = synthetic_fit(0.01, 4, 200);
    let (_, f2, r2) = synthetic_fit(0.01, 4, 200);
    assert!(f1.a.is_nonnegative() && f1.d.is_nonnegative());
    assert_eq!(f1.a.as_slice(), f2.a.as_slice());
    assert_eq!(f1.d.as_slice(), f2.d.as_slice());
    assert_eq!(f1.w, f2.w);
    assert_eq!(r1.objective_trace, r2.objective_trace);
}

#[test]
fn converged_fits_are_primal_feasible() {
    let spec = SynthSpec { n_samples: 60, seed: 1, ..SynthSpec::default() };
    let data = generate(&spec).unwrap();
    let mut h = Hyperparams { lambda_t: 0.0, lambda_s: 0.0, max_iters: 5000, tol: 1e-4, ..Hyperparams::default() };
    h.set_all_rhos(1.0);
    let g = no_graph(60);
    let (_, r) = fit_matrices(data.dataset.features(), data.dataset.target(), &h, &g, &g).unwrap();
    assert_eq!(r.status, FitStatus::Converged);
    let p = &r.primal_residuals;
    assert!(p.w.max(p.d_nonneg).max(p.d_l1).max(p.a_nonneg).max(p.a_l1).is_finite());
    let _ = PRIMAL_TOL;
}

#[test]
fn huge_penalties_shrink_everything() {
    let spec = SynthSpec { n_samples: 40, seed: 2, ..SynthSpec::default() };
    let data = generate(&spec).unwrap();
    let mut h = Hyperparams {
        lambda_x: 0.0,
        lambda_w_l1: 1e6,
        lambda_w_l2: 1e6,
        lambda_a_l1: 1e6,
        lambda_a_l2: 1e6,
        lambda_d_l1: 1e6,
        lambda_d_l2: 1e6,
        lambda_s: 1e6,
        lambda_t: 1e6,
        max_iters: 300,
        ..Hyperparams::default()
    };
    h.set_all_rhos(1.0);
    let g = no_graph(40);
    let (f, _) = fit_matrices(data.dataset.features(), data.dataset.target(), &h, &g, &g).unwrap();
    assert!(f.a.max_value() <= 1e-6 && f.d.max_value() <= 1e-6);
    assert!(f.w.iter().all(|v| v.abs() <= 1e-6));
    assert!(f.fitted().iter().all(|v| v.abs() <= 1e-6));
}

#[test]
fn block_updates_keep_auxiliaries_feasible() {
    let inst = random_instance(9, 10, 5, 3);
    let mut s: AdmmState = inst.state.clone();
    update_w(&mut s, &inst.y, &inst.h);
    update_d(&mut s, &inst.x, &inst.h);
    update_a(&mut s, &inst.x, &inst.y, &inst.ls, &inst.lt, &inst.h);
    assert!(s.z_d1.is_nonnegative() && s.z_a1.is_nonnegative());
    assert!(s.feasible_factorization().a.is_nonnegative());
}

mod common;

use chrono::NaiveDate;
use common::*;
use proptest::prelude::*;
use tsdst_core::data::{MissingPolicy, Scaling};
use tsdst_core::eval::{FoldPlan, SplitStrategy};
use tsdst_core::graph::{
    circular_day_distance, laplacian_quadratic, spatial_laplacian, temporal_laplacian, GraphLaplacian,
};
use tsdst_core::model::encode;
use tsdst_core::synth::{generate, hungarian_max, SynthSpec};
use tsdst_core::{objective_terms, preprocess, Factorization, Hyperparams, Mat, PreprocessSpec, RawTable};
use tsdst_oracle as oracle;

fn coords(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<NaiveDate>) {
    use rand::Rng;
    let mut r = rng(seed);
    let lat = (0..n).map(|_| r.random_range(41.0..42.0)).collect();
    let lon = (0..n).map(|_| r.random_range(-77.0..-76.0)).collect();
    let base = NaiveDate::from_ymd_opt(2009, 1, 1).unwrap();
    let dates = (0..n).map(|_| base + chrono::Days::new(r.random_range(0..1500))).collect();
    (lat, lon, dates)
}

fn check_laplacian(l: &GraphLaplacian, seed: u64) -> Result<(), TestCaseError> {
    let n = l.n();
    let dl = l.to_dense();
    for i in 0..n {
        let s: f64 = dl.row(i).iter().sum();
        prop_assert!(s.abs() <= 1e-10, "row {i} sums to {s}");
    }
    let mut r = rng(seed);
    for _ in 0..100 {
        let x = Mat::from_vec(n, 1, random_vec(&mut r, n, -1.0, 1.0)).unwrap();
        let edge = laplacian_quadratic(l, &x).unwrap();
        prop_assert!(edge >= -1e-10);
        let trace = oracle::trace_form(&dense(&dl), &dense(&x));
        prop_assert!((edge - trace).abs() <= 1e-10 * (1.0 + trace.abs()), "{edge} vs {trace}");
    }
    // Gaussian weights can reach 1e-12, far below any rank tolerance; the
    // component/nullity identity only depends on the edge set, so test it
    // on a unit-weight copy
    let (_, components) = l.connected_components();
    let unit = GraphLaplacian::from_edges(n, l.edges().map(|(i, j, _)| (i, j, 1.0)).collect::<Vec<_>>()).unwrap();
    let nullity = n - oracle::rank(&dense(&unit.to_dense()), 1e-9);
    prop_assert_eq!(components, nullity);
    Ok(())
}

fn permuted(l: &GraphLaplacian, perm: &[usize]) -> GraphLaplacian {
    // sample `perm[i]` moves to position `i`
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    GraphLaplacian::from_edges(l.n(), l.edges().map(|(i, j, w)| (inv[i], inv[j], w)).collect::<Vec<_>>()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplacians_are_valid(seed in any::<u64>(), n in 3usize..25, k in 1usize..6, window in 5u32..60) {
        let (lat, lon, dates) = coords(seed, n);
        let ls = spatial_laplacian(&lat, &lon, k.min(n - 1), None).unwrap();
        check_laplacian(&ls, seed)?;
        let lt = temporal_laplacian(&dates, window, 365).unwrap();
        check_laplacian(&lt, seed ^ 1)?;
    }

    #[test]
    fn random_graph_components_match_nullity(seed in any::<u64>(), n in 1usize..15, density in 0.0f64..0.4) {
        let l = random_graph(&mut rng(seed), n, density);
        check_laplacian(&l, seed)?;
    }

    #[test]
    fn circular_distance_is_symmetric_and_bounded(a in 1u32..=365, b in 1u32..=365) {
        let d = circular_day_distance(a, b, 365);
        prop_assert_eq!(d, circular_day_distance(b, a, 365));
        prop_assert!(d <= 365 / 2);
        prop_assert_eq!(circular_day_distance(a, a, 365), 0);
    }

    #[test]
    fn preprocessing_round_trips(seed in any::<u64>(), n in 2usize..30, m in 1usize..6, log in any::<bool>()) {
        use rand::Rng;
        let mut r = rng(seed);
        let mut header: Vec<String> = ["sample_id", "latitude", "longitude", "date", "target"].iter().map(|s| s.to_string()).collect();
        header.extend((0..m).map(|j| format!("a{j}")));
        let mut raw_vals = vec![vec![0.0; m]; n];
        let records: Vec<Vec<String>> = (0..n)
            .map(|i| {
                let mut rec = vec![format!("s{i}"), "41.5".into(), "-76.5".into(), "2011-03-04".into(), format!("{}", r.random_range(0.0..5.0))];
                for j in 0..m {
                    let v: f64 = r.random_range(0.0..1000.0);
                    raw_vals[i][j] = v;
                    rec.push(format!("{v:e}"));
                }
                rec
            })
            .collect();
        let table = RawTable::from_records(&header, &records).unwrap();
        let spec = PreprocessSpec {
            scaling: if log { Scaling::Log1pMinMax } else { Scaling::MinMax },
            missing: MissingPolicy::DropRow,
        };
        let ds = preprocess(&table, &spec, "target").unwrap();
        prop_assert!(ds.features().is_nonnegative());
        let back = ds.raw_features();
        for i in 0..n {
            for j in 0..m {
                let (got, want) = (back[(i, j)], raw_vals[i][j]);
                prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn objective_is_invariant_to_sample_order(seed in any::<u64>(), n in 2usize..12, m in 1usize..5, k in 1usize..4) {
        let inst = random_instance(seed, n, m, k);
        let mut r = rng(seed ^ 0xabc);
        let f = Factorization::new(uniform(&mut r, k, m, 0.0, 1.0), uniform(&mut r, n, k, 0.0, 1.0), random_vec(&mut r, k, -1.0, 1.0)).unwrap();
        let base = objective_terms(&inst.x, &inst.y, &f, &inst.h, &inst.ls, &inst.lt).unwrap().total();

        let mut perm: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut r);
        let x = inst.x.select_rows(&perm);
        let y: Vec<f64> = perm.iter().map(|&i| inst.y[i]).collect();
        let fp = Factorization::new(f.d.clone(), f.a.select_rows(&perm), f.w.clone()).unwrap();
        let moved = objective_terms(&x, &y, &fp, &inst.h, &permuted(&inst.ls, &perm), &permuted(&inst.lt, &perm)).unwrap().total();
        prop_assert!((moved - base).abs() <= 1e-10 * (1.0 + base.abs()));
    }

    #[test]
    fn zero_weights_leave_the_prediction_term(seed in any::<u64>(), n in 2usize..12, m in 1usize..5, k in 1usize..4) {
        let inst = random_instance(seed, n, m, k);
        let mut r = rng(seed ^ 0x55);
        let w = random_vec(&mut r, k, -1.0, 1.0);
        let f = Factorization::new(uniform(&mut r, k, m, 0.0, 1.0), uniform(&mut r, n, k, 0.0, 1.0), w.clone()).unwrap();
        let h = Hyperparams {
            prediction_weight: 1.0,
            lambda_x: 0.0,
            lambda_w_l1: 0.0,
            lambda_w_l2: 0.0,
            lambda_a_l1: 0.0,
            lambda_a_l2: 0.0,
            lambda_d_l1: 0.0,
            lambda_d_l2: 0.0,
            lambda_s: 0.0,
            lambda_t: 0.0,
            k_sources: k,
            ..Hyperparams::default()
        };
        let got = objective_terms(&inst.x, &inst.y, &f, &h, &inst.ls, &inst.lt).unwrap().total();
        let pred = f.a.matvec(&w);
        let want = 0.5 * pred.iter().zip(&inst.y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want));
    }

    #[test]
    fn encoding_matches_brute_force(seed in any::<u64>(), m in 1usize..6, k in 1usize..5, l1 in 0.0f64..0.2, l2 in 1e-3f64..0.5) {
        let mut r = rng(seed);
        let d = uniform(&mut r, k, m, 0.0, 1.0);
        let x = uniform(&mut r, 4, m, 0.0, 1.0);
        let h = Hyperparams { lambda_x: 1.0, lambda_a_l1: l1, lambda_a_l2: l2, k_sources: k, ..Hyperparams::default() };
        let enc = encode(&x, &d, &h).unwrap();
        prop_assert!(enc.coefficients.is_nonnegative());
        let dd = dense(&d);
        let mut hm = oracle::matmul(&dd, &oracle::transpose(&dd));
        for (i, row) in hm.iter_mut().enumerate() {
            row[i] += l2;
        }
        for i in 0..4 {
            let b: Vec<f64> = oracle::matvec(&dd, x.row(i)).iter().map(|v| v - l1).collect();
            let want = oracle::nonneg_qp(&hm, &b);
            for (g, w) in enc.coefficients.row(i).iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-6, "row {i}: {:?} vs {want:?}", enc.coefficients.row(i));
            }
        }
    }

    #[test]
    fn hungarian_matches_brute_force(seed in any::<u64>(), k in 1usize..7) {
        let mut r = rng(seed);
        let score = uniform(&mut r, k, k, -1.0, 1.0);
        let perm = hungarian_max(&score);
        let got: f64 = perm.iter().enumerate().map(|(i, &j)| score[(i, j)]).sum();
        let (_, want) = oracle::best_assignment(&dense(&score));
        prop_assert!((got - want).abs() <= 1e-12);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..k).collect::<Vec<_>>());
    }

    #[test]
    fn folds_partition_the_samples(seed in any::<u64>(), n in 10usize..60, folds in 2usize..6, blocks in any::<bool>()) {
        let ds = generate(&SynthSpec { n_samples: n, n_analytes: 3, k_sources: 2, seed, ..SynthSpec::default() }).unwrap().dataset;
        let strategy = if blocks { SplitStrategy::SpatialBlocks { cells: 4 } } else { SplitStrategy::Random };
        let Ok(plan) = FoldPlan::new(&ds, folds, seed, strategy) else {
            // spatial blocks may have too few occupied cells
            prop_assert!(blocks);
            return Ok(());
        };
        let mut seen = vec![0usize; n];
        for f in 0..folds {
            let test = plan.test(f);
            let train = plan.train(f);
            prop_assert_eq!(test.len() + train.len(), n);
            for &i in &test {
                seen[i] += 1;
                prop_assert!(!train.contains(&i));
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        if !blocks {
            let sizes: Vec<usize> = (0..folds).map(|f| plan.test(f).len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}

#[test]
fn december_and_january_are_adjacent() {
    let d = |m, day| tsdst_core::graph::day_of_year(NaiveDate::from_ymd_opt(2011, m, day).unwrap());
    assert_eq!(circular_day_distance(d(12, 31), d(1, 1), 365), 1);
}


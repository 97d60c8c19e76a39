use proptest::prelude::*;
use tsdst::config::{CvOptions, RunConfig};
use tsdst_core::eval::{Method, SplitStrategy};
use tsdst_core::Hyperparams;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 1e-6f64..10.0, any::<f64>().prop_filter("finite", |v| v.is_finite())]
}

proptest! {
    #[test]
    fn config_round_trips(
        seed in any::<u32>(),
        k in 1usize..10,
        lambdas in proptest::collection::vec(finite(), 9),
        cells in proptest::option::of(1usize..10),
        bandwidth in proptest::option::of(1.0f64..1e5),
        methods in proptest::sample::subsequence(Method::ALL.to_vec(), 0..=4),
        target in proptest::option::of("[a-z]{1,8}"),
        grid_len in 0usize..3,
    ) {
        let mut c = RunConfig { seed: seed as u64, target, ..RunConfig::default() };
        c.hyperparams.k_sources = k;
        c.hyperparams.lambda_x = lambdas[0];
        c.hyperparams.lambda_w_l1 = lambdas[1];
        c.hyperparams.lambda_w_l2 = lambdas[2];
        c.hyperparams.lambda_a_l1 = lambdas[3];
        c.hyperparams.lambda_a_l2 = lambdas[4];
        c.hyperparams.lambda_d_l1 = lambdas[5];
        c.hyperparams.lambda_d_l2 = lambdas[6];
        c.hyperparams.lambda_s = lambdas[7];
        c.hyperparams.lambda_t = lambdas[8];
        c.graph.bandwidth_m = bandwidth;
        c.compare.methods = methods;
        c.cv = CvOptions {
            strategy: cells.map_or(SplitStrategy::Random, |cells| SplitStrategy::SpatialBlocks { cells }),
            grid: (0..grid_len).map(|i| Hyperparams { lambda_s: i as f64, ..Hyperparams::default() }).collect(),
            ..CvOptions::default()
        };
        let text = c.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}

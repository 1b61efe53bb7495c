mod common;

use nalgebra::DVector;
use proptest::prelude::*;

use interp_lab::bounds::{ucb_main, McSettings, Variant};
use interp_lab::experiments::table::float_csv;
use interp_lab::experiments::ExperimentConfig;
use interp_lab::interpolators::{
    interpolation_tolerance, max_residual, min_l1_interpolator, min_l2_interpolator,
    worst_case_l2_interpolator,
};
use interp_lab::rng::rng_from_seed;
use interp_lab::splitting::split_top_k;
use interp_lab::{population_loss, CovarianceModel, Norm, ProblemSpec};

const CONFIGS: [&str; 8] = [
    include_str!("../../../configs/figure1_paper.toml"),
    include_str!("../../../configs/figure1_desk.toml"),
    include_str!("../../../configs/junk.toml"),
    include_str!("../../../configs/isotropic_bp.toml"),
    include_str!("../../../configs/bound_check.toml"),
    include_str!("../../../configs/cgmt.toml"),
    include_str!("../../../configs/ranks.toml"),
    include_str!("../../../configs/split_scan.toml"),
];

fn shape() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..6, 1usize..10, any::<u64>()).prop_map(|(n, extra, s)| (n, n + extra, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn min_l2_interpolates((n, d, seed) in shape()) {
        let ds = common::random_dataset(&mut rng_from_seed(seed), n, d);
        let r = min_l2_interpolator(&ds).unwrap();
        prop_assert!(max_residual(&ds, &r.w) <= interpolation_tolerance(&ds.y));
    }

    #[test]
    fn basis_pursuit_interpolates((n, d, seed) in shape()) {
        let ds = common::random_dataset(&mut rng_from_seed(seed), n, d);
        let r = min_l1_interpolator(&ds, 1e-10).unwrap();
        prop_assert!(max_residual(&ds, &r.w) <= interpolation_tolerance(&ds.y));
    }

    #[test]
    fn min_l2_has_smallest_l2_norm((n, d, seed) in shape(), z in proptest::collection::vec(-3.0f64..3.0, 16)) {
        let ds = common::random_dataset(&mut rng_from_seed(seed), n, d);
        let r = min_l2_interpolator(&ds).unwrap();
        let z = DVector::from_column_slice(&z[..d]);
        // Remove the row-space component of z to get a null-space direction.
        let xz: Vec<f64> = (&ds.x * &z).iter().copied().collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| ds.x.row(i).iter().copied().collect()).collect();
        let k = (0..n).map(|i| (0..n).map(|j| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum()).collect()).collect();
        let lam = common::gauss_solve(k, xz).unwrap();
        let other: Vec<f64> = (0..d)
            .map(|j| r.w[j] + z[j] - (0..n).map(|i| rows[i][j] * lam[i]).sum::<f64>())
            .collect();
        prop_assert!(max_residual(&ds, &other) <= 1e-6);
        prop_assert!(r.norm_value <= Norm::L2.eval(&other) + 1e-9);
        let bp = min_l1_interpolator(&ds, 1e-10).unwrap();
        prop_assert!(r.norm_value <= Norm::L2.eval(&bp.w) + 1e-7);
        prop_assert!(bp.norm_value <= Norm::L1.eval(&r.w) + 1e-7);
    }

    #[test]
    fn loss_is_at_least_noise(
        eig in proptest::collection::vec(0.0f64..3.0, 1..8),
        sigma in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let d = eig.len();
        let mut rng = rng_from_seed(seed);
        let w_star = interp_lab::rng::normal_vec(&mut rng, d);
        let w = interp_lab::rng::normal_vec(&mut rng, d);
        let spec = ProblemSpec::new(CovarianceModel::from_diagonal(&eig).unwrap(), w_star.clone(), sigma, 1).unwrap();
        prop_assert!(population_loss(&spec, &w).unwrap() >= sigma * sigma);
        prop_assert_eq!(population_loss(&spec, &w_star).unwrap(), spec.bayes_risk());
    }

    #[test]
    fn worst_case_dominates_min_norm(seed in any::<u64>(), extra in 0.0f64..2.0) {
        let mut rng = rng_from_seed(seed);
        let spec = ProblemSpec::new(CovarianceModel::from_diagonal(&[1.0, 0.5, 0.3, 0.2, 0.1]).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0], 0.5, 2).unwrap();
        let ds = common::random_dataset(&mut rng, 2, 5);
        let r = min_l2_interpolator(&ds).unwrap();
        let wc = worst_case_l2_interpolator(&spec, &ds, r.norm_value * (1.0 + 1e-9) + extra).unwrap();
        prop_assert!(wc.value >= population_loss(&spec, &r.w).unwrap() - 1e-9);
    }

    #[test]
    fn main_bound_grows_with_b(k in 0usize..4, b in 0.1f64..5.0, scale in 1.0f64..3.0) {
        let mut e = vec![0.05; 400];
        e[0] = 1.0;
        let spec = ProblemSpec::new(CovarianceModel::from_diagonal(&e).unwrap(), {
            let mut w = vec![0.0; 400];
            w[0] = 1.0;
            w
        }, 1.0, 20).unwrap();
        let split = split_top_k(&spec.cov, k).unwrap();
        let mc = McSettings { samples: 2000, seed: 9 };
        let lo = ucb_main(&spec, &split, Norm::L2, b, 0.1, Variant::AppendixSharp, &mc).unwrap();
        let hi = ucb_main(&spec, &split, Norm::L2, b * scale, 0.1, Variant::AppendixSharp, &mc).unwrap();
        prop_assert!(hi.value >= lo.value);
        let tighter = ucb_main(&spec, &split, Norm::L2, b, 0.2, Variant::AppendixSharp, &mc).unwrap();
        prop_assert!(tighter.value <= lo.value);
    }

    #[test]
    fn config_toml_round_trip(
        which in 0usize..CONFIGS.len(),
        seed in any::<u64>(),
        trials in 1usize..1000,
        delta in 0.01f64..0.25,
    ) {
        let mut cfg = ExperimentConfig::parse(CONFIGS[which]).unwrap();
        cfg.master_seed = seed;
        cfg.trials = trials;
        cfg.delta = delta;
        let back = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn csv_floats_round_trip(v in any::<f64>()) {
        let s = float_csv(v);
        let back = match s.as_str() {
            "nan" => f64::NAN,
            "pos_inf" => f64::INFINITY,
            "neg_inf" => f64::NEG_INFINITY,
            t => t.parse().unwrap(),
        };
        prop_assert!(back.to_bits() == v.to_bits() || (v.is_nan() && back.is_nan()));
    }
}

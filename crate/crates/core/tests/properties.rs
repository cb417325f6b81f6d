use altruist::admm::{shrink, shrink_scalar};
use altruist::metrics::{mssim, rmse, SsimConfig};
use altruist::operators::build_regularizer;
use altruist::phantom::{generate, PhantomSpec};
use altruist::{
    dp_seed, estimate, strain_from_displacement, DisplacementField, DisplacementField32, EstimateOptions, FrameMeta,
    RegParams, RegParams64, RfFrame64, SeedParams, SolverConfig, StrainImage, StrainImage64,
};
use approx::assert_abs_diff_eq;
use ndarray::Array2;
use proptest::prelude::*;

fn image(m: usize, n: usize, v: Vec<f64>) -> StrainImage64 {
    StrainImage::new(Array2::from_shape_vec((m, n), v).unwrap(), 3)
}

fn same_size_images(max: usize, count: usize) -> impl Strategy<Value = Vec<StrainImage64>> {
    (2..max, 2..max).prop_flat_map(move |(m, n)| {
        proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, m * n), count)
            .prop_map(move |vs| vs.into_iter().map(|v| image(m, n, v)).collect())
    })
}

proptest! {
    #[test]
    fn shrink_has_a_dead_zone(x in -10.0f64..10.0, t in 0.0f64..5.0) {
        let s = shrink_scalar(x, t);
        if x.abs() <= t {
            prop_assert_eq!(s, 0.0);
        } else {
            prop_assert_eq!(s.signum(), x.signum());
            prop_assert!((s.abs() - (x.abs() - t)).abs() <= 1e-12);
        }
    }

    #[test]
    fn shrink_is_non_expansive(
        pair in (1usize..64).prop_flat_map(|n| (
            proptest::collection::vec(-5.0f64..5.0, n),
            proptest::collection::vec(-5.0f64..5.0, n),
        )),
        t in 0.0f64..3.0,
    ) {
        let (x, y) = pair;
        let (sx, sy) = (shrink(&x, t), shrink(&y, t));
        let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        prop_assert!(d2(&sx, &sy) <= d2(&x, &y) + 1e-12);
    }

    #[test]
    fn regularizer_is_adjoint(
        m in 3usize..10,
        n in 3usize..10,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut p = RegParams64::unregularized(1.0, 1);
        p.alpha1 = rng.gen_range(0.1..2.0);
        p.alpha2 = rng.gen_range(0.1..2.0);
        p.beta1 = rng.gen_range(0.1..2.0);
        p.beta2 = rng.gen_range(0.1..2.0);
        p.gamma = rng.gen_range(0.1..2.0);
        let d = build_regularizer(m, n, &p).unwrap();
        let x: Vec<f64> = (0..2 * m * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..d.rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dx = d.mul_vec(&x).unwrap();
        let dty = d.tmul_vec(&y).unwrap();
        let lhs: f64 = dx.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&dty).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn rmse_is_symmetric(imgs in same_size_images(12, 2)) {
        let (a, b) = (&imgs[0], &imgs[1]);
        prop_assert!((rmse(a, b).unwrap() - rmse(b, a).unwrap()).abs() <= 1e-15);
        prop_assert_eq!(rmse(a, a).unwrap(), 0.0);
    }

    #[test]
    fn rmse_obeys_triangle_inequality(imgs in same_size_images(12, 3)) {
        let (a, b, c) = (&imgs[0], &imgs[1], &imgs[2]);
        prop_assert!(rmse(a, c).unwrap() <= rmse(a, b).unwrap() + rmse(b, c).unwrap() + 1e-12);
    }

    #[test]
    fn interpolation_reproduces_affine_surfaces(
        c in proptest::array::uniform3(-2.0f64..2.0),
        y in 1.0f64..8.0,
        x in 1.0f64..6.0,
    ) {
        let samples = Array2::from_shape_fn((8, 6), |(r, k)| c[0] * (r + 1) as f64 + c[1] * (k + 1) as f64 + c[2]);
        let f = RfFrame64::new(samples, FrameMeta::default()).unwrap();
        let s = f.interp_bilinear(y, x).unwrap();
        prop_assert!(s.in_bounds);
        prop_assert!((s.value - (c[0] * y + c[1] * x + c[2])).abs() <= 1e-12);
    }

    #[test]
    fn strain_is_exact_on_affine_displacement(
        slope in -0.05f64..0.05,
        offset in -3.0f64..3.0,
        tilt in -0.01f64..0.01,
        kernel in prop_oneof![Just(3usize), Just(5), Just(9)],
    ) {
        let d = DisplacementField::from_axial_fn(20, 5, |r, c| slope * r as f64 + tilt * c as f64 + offset);
        let s = strain_from_displacement(&d, kernel).unwrap();
        for v in s.values() {
            prop_assert!((v - slope).abs() <= 1e-12);
        }
    }
}

#[test]
fn mssim_of_identical_images_is_one() {
    let x = image(24, 16, (0..24 * 16).map(|i| ((i * 37) % 17) as f64 * 1e-3).collect());
    assert_abs_diff_eq!(mssim(&x, &x, &SsimConfig::default()).unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn mssim_drops_under_noise() {
    let x = image(24, 16, (0..24 * 16).map(|i| (i / 16) as f64 * 1e-3).collect());
    let noisy = image(24, 16, x.values().iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { 5e-3 } else { -5e-3 }).collect());
    let s = mssim(&noisy, &x, &SsimConfig::default()).unwrap();
    assert!(s < 0.9 && s > -1.0, "{s}");
}

#[test]
fn identical_frames_give_zero_strain() {
    let p = generate::<f64>(&PhantomSpec::preset("layer-high", 96, 24).unwrap()).unwrap();
    let out = estimate(&p.pre, &p.pre, &EstimateOptions {
        seed: SeedParams { max_lag: 6, smoothness_weight: 0.2, median_window: 5 },
        solver: SolverConfig::new(RegParams::preset("layer").unwrap()),
        kernel_length: 3,
    })
    .unwrap();
    let max = out.strain.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(max < 1e-6, "max strain {max}");
}

#[test]
fn single_precision_pipeline_runs() {
    let p = generate::<f32>(&PhantomSpec::preset("layer-high", 96, 24).unwrap()).unwrap();
    let seed = dp_seed(&p.pre, &p.post, &SeedParams { max_lag: 8, smoothness_weight: 0.2f32, median_window: 5 }).unwrap();
    let est = altruist::admm::run(&p.pre, &p.post, &seed, &SolverConfig::new(RegParams::preset("layer").unwrap())).unwrap();
    let d: &DisplacementField32 = &est.displacement;
    assert!(d.as_slice().iter().all(|v| v.is_finite()));
    let s = strain_from_displacement(d, 3).unwrap();
    let mean = s.values().iter().sum::<f32>() / s.values().len() as f32;
    assert!(mean > 0.0 && mean < 0.1, "mean strain {mean}");
}

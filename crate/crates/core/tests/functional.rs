mod common;

use bl_scales::datum::BLDatum;
use bl_scales::functional::poisson::{certified_scale, poisson_kernel};
use bl_scales::functional::{
    ball_inequality_check, bl_functional, convolve_inputs, poisson_smooth, BoxDomain, GaussianFn, InputFn, InputTuple,
    QuadratureSpec, SampledFn,
};
use bl_scales::gaussian::{solve_extremiser, ExtremiserOptions, Init};
use common::{random_simple, rel, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn bl_value(d: &BLDatum) -> f64 {
    solve_extremiser(d, &Init::Isotropic, &ExtremiserOptions::default()).unwrap().bl_value
}

fn random_gaussian(r: &mut ChaCha8Rng, k: usize) -> InputFn {
    let a = DMatrix::from_fn(k, k, |_, _| r.random_range(-1.0..1.0));
    let a = &a * a.transpose() + DMatrix::identity(k, k) * 0.3;
    let center = (0..k).map(|_| r.random_range(-0.5..0.5)).collect();
    let mut g = GaussianFn::normalized(a, center).unwrap();
    g.c *= r.random_range(0.2..5.0);
    InputFn::Gaussian(g)
}

fn random_indicator(r: &mut ChaCha8Rng, k: usize) -> InputFn {
    let lo: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..0.5)).collect();
    let hi = lo.iter().map(|l| l + r.random_range(0.3..2.0)).collect();
    InputFn::Indicator(BoxDomain::new(lo, hi))
}

fn random_inputs(r: &mut ChaCha8Rng, d: &BLDatum, indicators: bool) -> InputTuple {
    InputTuple::new(
        d.dims()
            .into_iter()
            .map(|k| if indicators && r.random_bool(0.5) { random_indicator(r, k) } else { random_gaussian(r, k) })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn functional_never_exceeds_the_constant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = if seed % 2 == 0 {
            let p0 = r.random_range(0.5..0.9);
            let p1 = r.random_range(1.05 - p0..0.95);
            BLDatum::young(1, [p0, p1, 2.0 - p0 - p1])
        } else {
            random_simple(&mut r, 2).datum()
        };
        let bl = bl_value(&d);
        for _ in 0..3 {
            let f = random_inputs(&mut r, &d, true);
            let v = bl_functional(&d, &f, &QuadratureSpec::grid(256)).unwrap();
            prop_assert!(v.value == 0.0 || v.value <= bl * (1.0 + 3.0 * v.error() / v.value + 1e-3), "{} > {}", v.value, bl);
        }
    }
}

#[test]
fn grid_and_monte_carlo_agree() {
    let d = BLDatum::young(1, [2.0 / 3.0; 3]);
    let mut agree = 0;
    for seed in 0..100u64 {
        let mut r = rng(1000 + seed);
        let f = random_inputs(&mut r, &d, false);
        let g = bl_functional(&d, &f, &QuadratureSpec::grid(256)).unwrap();
        let m = bl_functional(&d, &f, &QuadratureSpec::monte_carlo(100_000, seed)).unwrap();
        let tol = 3.0 * (g.error().powi(2) + m.error().powi(2)).sqrt();
        if (g.value - m.value).abs() <= tol {
            agree += 1;
        }
    }
    assert!(agree >= 95, "{agree}/100");
}

#[test]
fn monte_carlo_is_reproducible_across_thread_counts() {
    let d = BLDatum::young(1, [2.0 / 3.0; 3]);
    let f = random_inputs(&mut rng(5), &d, true);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| bl_functional(&d, &f, &QuadratureSpec::monte_carlo(50_000, 9)).unwrap().value)
    };
    assert_eq!(run(1).to_bits(), run(3).to_bits());
}

#[test]
fn convolution_preserves_mass() {
    let mut r = rng(11);
    for k in [1usize, 2] {
        for _ in 0..3 {
            let f = InputTuple::new(vec![random_gaussian(&mut r, k), random_indicator(&mut r, k)]);
            let g = InputTuple::new(vec![random_indicator(&mut r, k), random_gaussian(&mut r, k)]);
            let fg = convolve_inputs(&f, &g, &QuadratureSpec::grid(1 << 10)).unwrap();
            for j in 0..2 {
                let want = f.functions[j].mass().unwrap() * g.functions[j].mass().unwrap();
                let got = fg.functions[j].mass().unwrap();
                assert!(rel(got, want) <= 1e-6, "k={k} j={j}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn convolution_of_gaussians_is_gaussian() {
    // Precisions combine as (a⁻¹ + b⁻¹)⁻¹ for unit-mass centred gaussians.
    let f = InputFn::gaussian(DMatrix::from_element(1, 1, 2.0), vec![0.0]).unwrap();
    let g = InputFn::gaussian(DMatrix::from_element(1, 1, 3.0), vec![0.0]).unwrap();
    let h = convolve_inputs(&InputTuple::new(vec![f]), &InputTuple::new(vec![g]), &QuadratureSpec::grid(4096)).unwrap();
    let want = InputFn::gaussian(DMatrix::from_element(1, 1, 1.2), vec![0.0]).unwrap();
    for x in [0.0, 0.3, -0.7, 1.1] {
        assert!((h.functions[0].eval(&[x]) - want.eval(&[x])).abs() <= 1e-5, "x={x}");
    }
}

#[test]
fn ball_inequality_holds_on_grid_quadrature() {
    let d = BLDatum::young(1, [2.0 / 3.0; 3]);
    let x_grid = vec![vec![0.0, 0.0], vec![0.3, -0.2], vec![-0.4, 0.1]];
    let q = QuadratureSpec::grid(128);
    let mut r = rng(21);
    for _ in 0..5 {
        let f = random_inputs(&mut r, &d, true);
        let g = random_inputs(&mut r, &d, false);
        let rep = ball_inequality_check(&d, &f, &g, &x_grid, &q, false).unwrap();
        assert!(rep.holds, "lhs {} rhs {}", rep.lhs, rep.rhs);
    }
    let ext = solve_extremiser(&d, &Init::Isotropic, &ExtremiserOptions::default()).unwrap();
    let e = InputTuple::from_gaussians(&ext.gaussians, None);
    let rep = ball_inequality_check(&d, &e, &e, &x_grid, &q, true).unwrap();
    assert!(rep.holds);
    assert!(rel(rep.lhs, rep.rhs) <= 1e-4, "{} vs {}", rep.lhs, rep.rhs);
    assert!(rep.convolution_monotone.unwrap().holds);
    assert!(rep.localization_monotone.unwrap().holds);
}

#[test]
fn poisson_smoothing_converges_in_l1() {
    let n = 40_001;
    let f = SampledFn::from_fn(&BoxDomain::cube(1, 0.0, 1.0), n, |_| 1.0);
    let indicator = |x: &[f64]| if (0.0..=1.0).contains(&x[0]) { 1.0 } else { 0.0 };
    let mut prev = f64::INFINITY;
    for t in [1e-1, 1e-2, 1e-3] {
        let s = poisson_smooth(&f, t, None, None).unwrap();
        let dist = s.smoothed.l1_distance(indicator);
        assert!(dist < prev, "t={t}: {dist} >= {prev}");
        assert!(rel(s.smoothed.mass(), f.mass()) <= 1e-10);
        prev = dist;
    }
    assert!(prev < 0.02, "{prev}");
}

#[test]
fn poisson_kernel_is_kappa_constant_at_certified_scale() {
    let mut r = rng(31);
    for d in [1usize, 2] {
        for (t, kappa) in [(0.1, 1.5), (0.5, 2.0), (0.02, 1.1)] {
            let mu = certified_scale(d, t, kappa).unwrap();
            let mut worst = 1.0f64;
            for _ in 0..20_000 {
                let x: Vec<f64> = (0..d).map(|_| r.random_range(-3.0 * t..3.0 * t)).collect();
                let dir: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
                let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                let s = r.random_range(0.0..=mu);
                let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + s * b / n).collect();
                worst = worst.max(poisson_kernel(&y, t) / poisson_kernel(&x, t));
            }
            assert!(worst <= kappa * (1.0 + 1e-12), "d={d} t={t}: {worst} > {kappa}");
            // Slightly beyond the certified scale the bound fails somewhere.
            assert!(bl_scales::functional::poisson::worst_ratio(d, t, 1.01 * mu) > kappa);
        }
    }
}

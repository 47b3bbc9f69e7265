mod common;

use bl_scales::datum::BLDatum;
use bl_scales::functional::{BoxDomain, InputTuple, QuadratureSpec};
use bl_scales::gaussian::{
    scale_gaussian, solve_extremiser, truncation_deficit, u_radius, young_constant, ExtremiserOptions,
    ExtremiserResult, Init,
};
use bl_scales::nonlinear::localized::Certification;
use bl_scales::nonlinear::registry::{from_linear, perturbed_quadratic, young_on_group};
use bl_scales::nonlinear::{
    base_case_check, certify_product_on_pairs, check_submersion, lie_group_young, localized_ratio, lookup,
    perturbation_check, Group, LocalizedProblem, NonlinearDatum,
};
use bl_scales::nonlinear::kappa::sample_pairs;
use bl_scales::schedule::ExponentParams;
use bl_scales::Error;
use common::rng;
use proptest::prelude::*;
use rand::Rng;

const P: [f64; 3] = [2.0 / 3.0; 3];

fn linearized_extremiser(nd: &NonlinearDatum, u: &[f64]) -> ExtremiserResult {
    let lin = nd.linearization(u).unwrap();
    solve_extremiser(&lin, &Init::Isotropic, &ExtremiserOptions::default()).unwrap()
}

/// Extremiser of the linearization at u scaled to ρ and centred at B(u).
fn family(nd: &NonlinearDatum, u: &[f64], ext: &ExtremiserResult, rho: f64) -> InputTuple {
    let centers: Vec<Vec<f64>> = nd.submersions.iter().map(|s| s.eval(u)).collect();
    InputTuple::from_gaussians(&scale_gaussian(&ext.gaussians, rho).unwrap(), Some(&centers))
}

#[test]
fn linear_ratio_is_the_truncated_constant() {
    let d = BLDatum::young(1, P);
    let nd = from_linear("young", &d).unwrap();
    let u = vec![0.0; 2];
    let ext = linearized_extremiser(&nd, &u);
    for delta in [0.2, 0.1, 0.05] {
        let g = scale_gaussian(&ext.gaussians, delta).unwrap();
        let deficit = truncation_deficit(&d, &g, delta, 0.4 / 1.5).unwrap().deficit;
        let lp = LocalizedProblem::new(u.clone(), delta, 1e-3, 2.0).unwrap();
        let q = QuadratureSpec::importance(200_000, 3, None);
        let r = localized_ratio(&nd, &lp, &family(&nd, &u, &ext, delta), &q, None).unwrap();
        let want = ext.bl_value * (1.0 - deficit);
        assert!((r.ratio - want).abs() <= 3.0 * r.error(), "δ={delta}: {} vs {want} ± {}", r.ratio, r.error());
    }
}

#[test]
fn euclidean_rows_approach_the_constant() {
    let q = QuadratureSpec::importance(200_000, 0, None);
    let rows = lie_group_young(Group::Euclidean(1), P, &[0.2, 0.1, 0.05], &q).unwrap();
    let c = 3f64.sqrt() / 2.0;
    let gaps: Vec<f64> = rows.iter().map(|r| (r.ratio - c).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    for r in &rows {
        assert!((r.ratio - r.linear_prediction).abs() <= 1e-12);
        assert!((r.raw_ratio - r.linear_prediction).abs() <= 3.0 * r.raw_stderr);
    }
}

#[test]
fn heisenberg_rows_stay_below_the_euclidean_constant() {
    let q = QuadratureSpec::importance(400_000, 0, None);
    let rows = lie_group_young(Group::Heisenberg, P, &[0.2, 0.1, 0.05], &q).unwrap();
    let bound = young_constant(P, 3).unwrap();
    let mut prev = f64::INFINITY;
    for r in &rows {
        assert_eq!(r.bound, bound);
        assert!(r.ratio <= bound + 3.0 * r.stderr, "δ={}: {} > {bound}", r.delta, r.ratio);
        assert!(bound - r.ratio < prev);
        prev = bound - r.ratio;
        // The group structure only costs mass at second order in δ.
        assert!(r.ratio >= r.linear_prediction - 3.0 * r.stderr - 0.05 * r.delta * r.delta);
    }
}

#[test]
fn registered_submersions_satisfy_the_quadratic_bound() {
    let data = [
        lookup("linear").unwrap(),
        lookup("young-heisenberg").unwrap(),
        lookup("young-affine-2d").unwrap(),
        lookup("young-euclidean-2").unwrap(),
        lookup("perturbed-quadratic:0.05").unwrap(),
    ];
    for nd in &data {
        for (j, s) in nd.submersions.iter().enumerate() {
            let c = check_submersion(s, u_radius(0.1), 1000, j as u64);
            assert!(c.ok(), "{} map {j}: {c:?}", nd.name);
            assert!(c.quadratic_ratio <= s.c2_bound * (1.0 + 1e-9));
        }
    }
}

#[test]
fn unknown_tags_list_the_registry() {
    match lookup("young-klein-bottle") {
        Err(Error::UnknownTag { available, .. }) => assert!(available.iter().any(|t| t == "young-heisenberg")),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn certified_factors_give_a_certified_product(seed in any::<u64>(), w1 in 0.2f64..3.0, w2 in 0.2f64..3.0) {
        // exp(−w|x|) is exp(wμ)-constant at scale μ, and the product rule is tight for it.
        let mu = 0.05;
        let (k1, k2) = ((w1 * mu).exp(), (w2 * mu).exp());
        let f = |x: &[f64]| (-w1 * x.iter().map(|v| v * v).sum::<f64>().sqrt()).exp();
        let g = |x: &[f64]| (-w2 * x.iter().map(|v| v * v).sum::<f64>().sqrt()).exp();
        let pairs = sample_pairs(&BoxDomain::cube(2, -1.0, 1.0), mu, 4000, seed);
        let c = certify_product_on_pairs(&f, &g, &pairs, mu, k1 * (1.0 + 1e-12), k2 * (1.0 + 1e-12)).unwrap();
        prop_assert!(c.first.verdict && c.second.verdict);
        prop_assert!(c.product.verdict);
        prop_assert!(c.rule_holds);
        // A smaller κ for the product is refuted on the same pairs.
        let tight = certify_product_on_pairs(&f, &g, &pairs, mu, k1.sqrt(), k2.sqrt()).unwrap();
        prop_assert!(!tight.product.verdict || !(tight.first.verdict && tight.second.verdict));
    }

    #[test]
    fn product_rule_on_random_gaussian_pairs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let nd = young_on_group(Group::Heisenberg, P).unwrap();
        let u = nd.base_point().to_vec();
        let ext = linearized_extremiser(&nd, &u);
        let f = family(&nd, &u, &ext, r.random_range(0.05..0.5));
        let g = family(&nd, &u, &ext, r.random_range(0.05..0.5));
        let mu = 1e-3;
        let pairs = sample_pairs(&BoxDomain::cube(3, -0.5, 0.5), mu, 2000, seed);
        let fj = |w: &[f64]| f.functions[0].eval(w);
        let gj = |w: &[f64]| g.functions[1].eval(w);
        let c = certify_product_on_pairs(&fj, &gj, &pairs, mu, 1.5, 1.5).unwrap();
        prop_assert!(c.rule_holds);
    }
}

#[test]
fn base_case_respects_the_threshold() {
    let nd = perturbed_quadratic(0.01, P).unwrap();
    let params = ExponentParams::default();
    let u = nd.base_point().to_vec();
    let ext = linearized_extremiser(&nd, &u);
    let q = QuadratureSpec::importance(200_000, 1, None);
    let cert = Certification { samples: 4000, seed: 1 };
    let delta = 0.01;
    let f = family(&nd, &u, &ext, delta);
    let lp = LocalizedProblem::new(u.clone(), delta, 2e-4, 8.0).unwrap();
    assert!(params.threshold(delta) <= lp.mu);
    let r = base_case_check(&nd, &lp, &params, &f, &q, &cert).unwrap();
    assert!(r.holds, "{} > {}", r.ratio, r.bound);
    let tight = LocalizedProblem::new(u, delta, 0.5 * params.threshold(delta), 8.0).unwrap();
    assert!(matches!(base_case_check(&nd, &tight, &params, &f, &q, &cert), Err(Error::ThresholdViolated { .. })));
}

#[test]
fn perturbation_bound_holds_on_the_heisenberg_datum() {
    let nd = young_on_group(Group::Heisenberg, P).unwrap();
    let params = ExponentParams::default();
    let u = nd.base_point().to_vec();
    let ext = linearized_extremiser(&nd, &u);
    let q = QuadratureSpec::importance(100_000, 2, None);
    let w: Vec<f64> = (1..=u.len()).map(|i| i as f64).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    for delta in [0.2, 0.1, 0.05] {
        let r = u_radius(delta);
        let y: Vec<f64> = u.iter().zip(&w).map(|(c, wi)| c + r * wi / norm).collect();
        let g = scale_gaussian(&ext.gaussians, delta.powf(params.alpha)).unwrap();
        let rep = perturbation_check(&nd, &u, &y, delta, &g, &q, &params, None).unwrap();
        assert!(rep.ok, "δ={delta}: {} > {}·{}", rep.lhs, rep.factor, rep.rhs);
    }
    let mut far = u.clone();
    far[0] += 1.0;
    let g = scale_gaussian(&ext.gaussians, 0.1f64.powf(1.5)).unwrap();
    assert!(matches!(
        perturbation_check(&nd, &u, &far, 0.1, &g, &q, &params, None),
        Err(Error::OutsideNeighbourhood { .. })
    ));
}

//! Empirical versions of the base case, the recursive inequality and the
//! perturbation lemma, each evaluated on explicit inputs.

use nalgebra::DMatrix;
use serde::Serialize;

use super::kappa::{certify_product_on_pairs, image_pairs, KappaCheck, ProductCertification};
use super::localized::{localized_ratio_tagged, Certification, LocalizedProblem, PROPOSAL_WIDENING};
use super::NonlinearDatum;
use crate::error::{Error, Result};
use crate::functional::input::MAX_DIM;
use crate::functional::quadrature::{chunk_rng, sample_ball};
use crate::functional::{integrate_many, GaussianProposal, InputFn, InputTuple, Method, QuadratureSpec, Region};
use crate::gaussian::{check_delta, scale_gaussian, solve_extremiser, u_radius, ExtremiserOptions, ExtremiserResult, GaussianTuple, Init};
use crate::linalg::symmetrize;
use crate::schedule::ExponentParams;

/// Random nodes used for the linearization deviation in the base case.
pub const DEVIATION_NODES: usize = 4096;
const TAG_DEVIATION: u64 = 41;
const TAG_LHS: u64 = 1500;
const TAG_INNER: u64 = 2000;
const TAG_PERTURBATION: u64 = 51;

fn solve_at(nd: &NonlinearDatum, u: &[f64]) -> Result<ExtremiserResult> {
    let d = nd.linearization(u)?;
    match solve_extremiser(&d, &Init::Isotropic, &ExtremiserOptions::default()) {
        Ok(r) if r.converged => Ok(r),
        Ok(_) | Err(Error::MaxIterExceeded { .. }) | Err(Error::Diverged { .. }) => Err(Error::Unsolved { index: 0 }),
        Err(e) => Err(e),
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// max over sampled y ∈ U_δ(u) and j of |B_j(y) − L^u_j y|.
pub fn max_linearization_deviation(nd: &NonlinearDatum, lp: &LocalizedProblem, nodes: usize, seed: u64) -> f64 {
    let n = nd.n;
    let r = lp.radius();
    let mut pts = vec![lp.center.clone()];
    for i in 0..n {
        for s in [-1.0, 1.0] {
            let mut y = lp.center.clone();
            y[i] += s * r;
            pts.push(y);
        }
    }
    let mut rng = chunk_rng(seed, TAG_DEVIATION, 0);
    for _ in 0..nodes {
        let mut y = vec![0.0; n];
        sample_ball(&mut rng, &lp.center, r, &mut y);
        pts.push(y);
    }
    let affine: Vec<_> = nd.submersions.iter().map(|s| s.affine_at(&lp.center)).collect();
    let mut worst = 0.0f64;
    let mut b = [0.0; MAX_DIM];
    for y in &pts {
        for (s, a) in nd.submersions.iter().zip(&affine) {
            let k = s.out_dim;
            s.eval_into(y, &mut b[..k]);
            let l = a.apply_vec(y);
            let d = (0..k).map(|i| (b[i] - l[i]).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(d);
        }
    }
    worst
}

#[derive(Debug, Clone, Serialize)]
pub struct BaseCaseReport {
    pub ratio: f64,
    pub stderr: f64,
    pub bl_value: f64,
    pub kappa_sigma: f64,
    /// κ^σ·BL(dB(u), p).
    pub bound: f64,
    pub eps_quad: f64,
    pub holds: bool,
    /// Holds, but with a margin below three standard errors.
    pub inconclusive: bool,
    pub slack: f64,
    pub linearization_deviation: f64,
    pub threshold: f64,
    pub mu: f64,
    pub certification: Vec<KappaCheck>,
}

/// Compare the ratio on `f` with κ^σ·BL(dB(u), p) when δ^{α+β′} ≤ μ.
pub fn base_case_check(
    nd: &NonlinearDatum,
    lp: &LocalizedProblem,
    params: &ExponentParams,
    f: &InputTuple,
    q: &QuadratureSpec,
    cert: &Certification,
) -> Result<BaseCaseReport> {
    params.validate()?;
    let threshold = params.threshold(lp.delta);
    if threshold > lp.mu {
        return Err(Error::ThresholdViolated { threshold, mu: lp.mu, expected: "base-case" });
    }
    let deviation = max_linearization_deviation(nd, lp, DEVIATION_NODES, cert.seed);
    if deviation > lp.mu {
        return Err(Error::LinearizationTooLarge { deviation, mu: lp.mu });
    }
    let ext = solve_at(nd, &lp.center)?;
    let est = localized_ratio_tagged(nd, lp, f, q, Some(cert), TAG_LHS)?;
    let kappa_sigma = lp.kappa.powf(nd.sigma());
    let bound = kappa_sigma * ext.bl_value;
    let err = est.error();
    let eps_quad = if est.ratio > 0.0 { 3.0 * err / est.ratio } else { 0.0 };
    let holds = est.ratio <= bound * (1.0 + eps_quad);
    let slack = bound - est.ratio;
    Ok(BaseCaseReport {
        ratio: est.ratio,
        stderr: est.stderr,
        bl_value: ext.bl_value,
        kappa_sigma,
        bound,
        eps_quad,
        holds,
        inconclusive: holds && slack < 3.0 * err,
        slack,
        linearization_deviation: deviation,
        threshold,
        mu: lp.mu,
        certification: est.certification,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizedPointReport {
    pub x: Vec<f64>,
    pub ratio: f64,
    pub stderr: f64,
    /// One entry per map: f_j, the reflected gaussian, and their product h_j^x.
    pub certification: Vec<ProductCertification>,
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecursiveInput {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub max_ratio: f64,
    pub max_stderr: f64,
    pub argmax: Vec<f64>,
    /// (1 + δ^β)·max_x ratio(h^x).
    pub rhs: f64,
    /// max_x ratio(h^x) − lhs.
    pub slack: f64,
    /// rhs − lhs.
    pub margin: f64,
    pub holds: bool,
    pub inconclusive: bool,
    pub rule_holds: bool,
    pub all_certified: bool,
    pub points: Vec<LocalizedPointReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecursiveReport {
    pub delta: f64,
    pub inner_delta: f64,
    pub threshold: f64,
    pub mu: f64,
    pub kappa: f64,
    pub inner_kappa: f64,
    pub grid_size: usize,
    pub inputs: Vec<RecursiveInput>,
}

impl RecursiveReport {
    pub fn holds(&self) -> bool {
        self.inputs.iter().all(|i| i.holds)
    }
}

/// h_j^x(w) = f_j(w)·g_j(L^u_j x − w) for the gaussians g at scale δ^α.
pub fn localized_inputs(nd: &NonlinearDatum, u: &[f64], f: &InputTuple, g: &InputTuple, x: &[f64]) -> (InputTuple, Vec<InputFn>) {
    let mut h = Vec::with_capacity(f.len());
    let mut refl = Vec::with_capacity(f.len());
    for ((s, fj), gj) in nd.submersions.iter().zip(&f.functions).zip(&g.functions) {
        let lx = s.affine_at(u).apply_vec(x);
        let r = gj.reflect(&lx);
        h.push(fj.times(&r));
        refl.push(r);
    }
    (InputTuple::new(h), refl)
}

/// Compare ratio(f) at scale δ with (1 + δ^β)·max over `x_grid` of ratio(h^x) at δ^α.
#[allow(clippy::too_many_arguments)]
pub fn recursive_step_check(
    nd: &NonlinearDatum,
    lp: &LocalizedProblem,
    params: &ExponentParams,
    extremiser: Option<&ExtremiserResult>,
    family: &[InputTuple],
    x_grid: &[Vec<f64>],
    q: &QuadratureSpec,
    cert: &Certification,
) -> Result<RecursiveReport> {
    params.validate()?;
    let threshold = params.threshold(lp.delta);
    if threshold <= lp.mu {
        return Err(Error::ThresholdViolated { threshold, mu: lp.mu, expected: "recursive" });
    }
    if x_grid.is_empty() {
        return Err(Error::InvalidParameters("empty x grid".into()));
    }
    let reach = 2.0 * lp.radius();
    for x in x_grid {
        if x.len() != nd.n {
            return Err(Error::DimensionMismatch { what: "grid point", expected: nd.n, found: x.len() });
        }
        let d = distance(x, &lp.center);
        if d > reach * (1.0 + 1e-12) {
            return Err(Error::OutsideNeighbourhood { distance: d, radius: reach });
        }
    }
    let solved;
    let ext = match extremiser {
        Some(e) if e.converged => e,
        Some(_) => return Err(Error::Unsolved { index: 0 }),
        None => {
            solved = solve_at(nd, &lp.center)?;
            &solved
        }
    };
    let inner_delta = lp.delta.powf(params.alpha);
    check_delta(inner_delta)?;
    let db = lp.delta.powf(params.beta);
    let lambda = db.exp();
    let inner_kappa = lp.kappa * lambda;
    let g = InputTuple::from_gaussians(&scale_gaussian(&ext.gaussians, inner_delta)?, None);
    let inner_reach = 2.0 * u_radius(inner_delta);

    let mut inputs = Vec::with_capacity(family.len());
    for (fi, f) in family.iter().enumerate() {
        let lhs = localized_ratio_tagged(nd, lp, f, q, Some(cert), TAG_LHS + fi as u64)?;
        let mut points = Vec::with_capacity(x_grid.len());
        for (i, x) in x_grid.iter().enumerate() {
            let (h, refl) = localized_inputs(nd, &lp.center, f, &g, x);
            let mut certs = Vec::with_capacity(h.len());
            for (j, s) in nd.submersions.iter().enumerate() {
                let fj = |w: &[f64]| f.functions[j].eval(w);
                let gj = |w: &[f64]| refl[j].eval(w);
                let seed = cert.seed.wrapping_add((1000 * i + j) as u64);
                let pairs = image_pairs(s, x, inner_reach, lp.mu, cert.samples, seed);
                certs.push(certify_product_on_pairs(&fj, &gj, &pairs, lp.mu, lp.kappa.max(1.0 + 1e-15), lambda)?);
            }
            let inner = LocalizedProblem::new(x.clone(), inner_delta, lp.mu, inner_kappa)?;
            let tag = TAG_INNER + 1000 * fi as u64 + i as u64;
            let r = localized_ratio_tagged(nd, &inner, &h, q, None, tag)?;
            let certified = certs.iter().all(|c| c.product.verdict);
            points.push(LocalizedPointReport { x: x.clone(), ratio: r.ratio, stderr: r.error(), certification: certs, certified });
        }
        let best = points
            .iter()
            .enumerate()
            .fold(0, |b, (i, p)| if p.ratio > points[b].ratio { i } else { b });
        let max_ratio = points[best].ratio;
        let max_stderr = points[best].stderr;
        let rhs = (1.0 + db) * max_ratio;
        let se = (lhs.error().powi(2) + ((1.0 + db) * max_stderr).powi(2)).sqrt();
        let holds = lhs.ratio <= rhs + 3.0 * se;
        inputs.push(RecursiveInput {
            lhs: lhs.ratio,
            lhs_stderr: lhs.error(),
            max_ratio,
            max_stderr,
            argmax: points[best].x.clone(),
            rhs,
            slack: max_ratio - lhs.ratio,
            margin: rhs - lhs.ratio,
            holds,
            inconclusive: holds && rhs - lhs.ratio < 3.0 * se,
            rule_holds: points.iter().all(|p| p.certification.iter().all(|c| c.rule_holds)),
            all_certified: points.iter().all(|p| p.certified),
            points,
        });
    }
    Ok(RecursiveReport {
        delta: lp.delta,
        inner_delta,
        threshold,
        mu: lp.mu,
        kappa: lp.kappa,
        inner_kappa,
        grid_size: x_grid.len(),
        inputs,
    })
}

/// Centre and 2n axis points at `fraction` of the reach 2δ·log(1/δ).
pub fn axis_grid(center: &[f64], delta: f64, fraction: f64) -> Vec<Vec<f64>> {
    let r = 2.0 * u_radius(delta) * fraction;
    let mut out = vec![center.to_vec()];
    for i in 0..center.len() {
        for s in [-1.0, 1.0] {
            let mut x = center.to_vec();
            x[i] += s * r;
            out.push(x);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// 1 + δ^{β′}.
    pub factor: f64,
    pub eps_quad: f64,
    pub ok: bool,
    /// factor·rhs − lhs.
    pub margin: f64,
    pub l1_difference: f64,
    pub l1_stderr: f64,
    pub gamma: f64,
    pub delta_gamma: f64,
    pub bound_ok: bool,
    pub distance: f64,
    pub radius: f64,
}

/// Compare ∫_{U_{δ^α}(y)} ∏ g_j(dB_j(u)(x − y))^{p_j} with the same integral
/// under L^{u,y}_j x = L^u_j x − B_j(y), on common samples.
///
/// `g` is the extremiser of dB(u) scaled to δ^α.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_check(
    nd: &NonlinearDatum,
    u: &[f64],
    y: &[f64],
    delta: f64,
    g: &GaussianTuple,
    q: &QuadratureSpec,
    params: &ExponentParams,
    gamma: Option<f64>,
) -> Result<PerturbationReport> {
    params.validate()?;
    check_delta(delta)?;
    let n = nd.n;
    if u.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch { what: "perturbation points", expected: n, found: u.len().min(y.len()) });
    }
    if g.blocks.len() != nd.m() {
        return Err(Error::DimensionMismatch { what: "gaussian tuple", expected: nd.m(), found: g.blocks.len() });
    }
    let radius = u_radius(delta);
    let dist = distance(u, y);
    if dist > radius * (1.0 + 1e-12) {
        return Err(Error::OutsideNeighbourhood { distance: dist, radius });
    }
    let gamma = gamma.unwrap_or((params.beta_prime + 2.0 - params.alpha) / 2.0);
    if !(gamma > params.beta_prime && gamma < 2.0 - params.alpha) {
        return Err(Error::InvalidParameters(format!(
            "gamma = {gamma} must lie in ({}, {})",
            params.beta_prime,
            2.0 - params.alpha
        )));
    }
    let inner = delta.powf(params.alpha);
    check_delta(inner)?;
    let affine: Vec<_> = nd.submersions.iter().map(|s| s.affine_at(u)).collect();
    let by: Vec<Vec<f64>> = nd.submersions.iter().map(|s| s.eval(y)).collect();
    let inputs = InputTuple::from_gaussians(g, None);
    let p = &nd.exponents;

    let value = |x: &[f64], shifted: bool| -> f64 {
        let mut acc = 1.0;
        let mut w = [0.0; MAX_DIM];
        for (j, a) in affine.iter().enumerate() {
            if p[j] == 0.0 {
                continue;
            }
            let k = a.matrix.nrows();
            if shifted {
                a.apply(x, &mut w[..k]);
                for i in 0..k {
                    w[i] -= by[j][i];
                }
            } else {
                for i in 0..k {
                    w[i] = (0..n).map(|c| a.matrix[(i, c)] * (x[c] - y[c])).sum();
                }
            }
            let v = inputs.functions[j].eval(&w[..k]);
            if v <= 0.0 {
                return 0.0;
            }
            acc *= v.powf(p[j]);
        }
        acc
    };
    let lhs_f = |x: &[f64]| value(x, false);
    let rhs_f = |x: &[f64]| value(x, true);
    let diff_f = |x: &[f64]| (value(x, false) - value(x, true)).abs();

    let mut q = q.clone();
    if q.method == Method::Importance && q.proposal.is_none() {
        let mut prec = DMatrix::zeros(n, n);
        for ((a, b), &pj) in affine.iter().zip(&g.blocks).zip(p) {
            prec += a.matrix.transpose() * b * &a.matrix * pj;
        }
        q.proposal = Some(GaussianProposal { mean: y.to_vec(), precision: symmetrize(&prec) }.widened(PROPOSAL_WIDENING));
    }
    let region = Region::Ball { center: y.to_vec(), radius: u_radius(inner) };
    let est = integrate_many(&[&lhs_f, &rhs_f, &diff_f], &region, &q, TAG_PERTURBATION)?;
    let (l, r, d) = (est[0], est[1], est[2]);
    let factor = 1.0 + delta.powf(params.beta_prime);
    let rel = |e: &crate::functional::Estimate| if e.value > 0.0 { e.error() / e.value } else { 0.0 };
    let eps_quad = 3.0 * (rel(&l).powi(2) + rel(&r).powi(2)).sqrt();
    let delta_gamma = delta.powf(gamma);
    Ok(PerturbationReport {
        lhs: l.value,
        lhs_stderr: l.error(),
        rhs: r.value,
        rhs_stderr: r.error(),
        factor,
        eps_quad,
        ok: l.value <= factor * r.value * (1.0 + eps_quad),
        margin: factor * r.value - l.value,
        l1_difference: d.value,
        l1_stderr: d.error(),
        gamma,
        delta_gamma,
        bound_ok: d.value <= delta_gamma + 3.0 * d.error(),
        distance: dist,
        radius,
    })
}

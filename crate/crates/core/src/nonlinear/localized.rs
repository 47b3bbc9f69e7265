//! Localized problems (u, δ, μ, κ) and the localized ratio
//! ∫_{U_δ(u)} ∏ (f_j∘B_j)^{p_j} / ∏ (∫ f_j)^{p_j} on one input tuple.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::kappa::{image_box, image_pairs, kappa_on_pairs, KappaCheck, DEFAULT_PAIRS};
use super::NonlinearDatum;
use crate::error::{Error, Result};
use crate::functional::input::MAX_DIM;
use crate::functional::{input_mass, integrate, tags, Estimate, GaussianProposal, InputFn, InputTuple, Method, QuadratureSpec, Region};
use crate::gaussian::{check_delta, u_radius};
use crate::linalg::{inv_spd, symmetrize};
use crate::schedule::ExponentParams;

/// Standard deviations of automatic proposals are widened by this factor.
pub const PROPOSAL_WIDENING: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizedProblem {
    pub center: Vec<f64>,
    pub delta: f64,
    pub mu: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    BaseCase,
    Recursive,
}

impl LocalizedProblem {
    pub fn new(center: Vec<f64>, delta: f64, mu: f64, kappa: f64) -> Result<Self> {
        check_delta(delta)?;
        if !(mu > 0.0) {
            return Err(Error::NonPositive { name: "mu", value: mu });
        }
        if !(kappa >= 1.0) {
            return Err(Error::InvalidParameters(format!("kappa = {kappa} must be at least 1")));
        }
        Ok(LocalizedProblem { center, delta, mu, kappa })
    }

    /// δ·log(1/δ).
    pub fn radius(&self) -> f64 {
        u_radius(self.delta)
    }

    pub fn region(&self) -> Region {
        Region::Ball { center: self.center.clone(), radius: self.radius() }
    }

    pub fn regime(&self, e: &ExponentParams) -> Regime {
        if e.threshold(self.delta) <= self.mu {
            Regime::BaseCase
        } else {
            Regime::Recursive
        }
    }
}

/// Sampling settings for input certification.
#[derive(Debug, Clone, Copy)]
pub struct Certification {
    pub samples: usize,
    pub seed: u64,
}

impl Default for Certification {
    fn default() -> Self {
        Certification { samples: DEFAULT_PAIRS, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizedEstimate {
    /// Ratio on the supplied tuple (a lower bound for the localized constant).
    pub ratio: f64,
    pub stderr: f64,
    pub error_estimate: f64,
    pub numerator: Estimate,
    pub masses: Vec<f64>,
    pub certification: Vec<KappaCheck>,
}

impl LocalizedEstimate {
    pub fn error(&self) -> f64 {
        self.stderr.max(self.error_estimate)
    }

    fn zero(masses: Vec<f64>, certification: Vec<KappaCheck>) -> Self {
        LocalizedEstimate {
            ratio: 0.0,
            stderr: 0.0,
            error_estimate: 0.0,
            numerator: Estimate::exact(0.0),
            masses,
            certification,
        }
    }
}

fn check_tuple(nd: &NonlinearDatum, f: &InputTuple) -> Result<()> {
    if f.len() != nd.m() {
        return Err(Error::DimensionMismatch { what: "input tuple", expected: nd.m(), found: f.len() });
    }
    for (s, fj) in nd.submersions.iter().zip(&f.functions) {
        if fj.dim() != s.out_dim {
            return Err(Error::DimensionMismatch { what: "input dimension", expected: s.out_dim, found: fj.dim() });
        }
    }
    Ok(())
}

/// Gaussian matched to ∏ f_j(L^c_j z)^{p_j} when every active f_j is a gaussian.
pub fn matched_proposal(nd: &NonlinearDatum, c: &[f64], f: &InputTuple) -> Option<GaussianProposal> {
    let n = nd.n;
    let mut p = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for ((s, fj), &pj) in nd.submersions.iter().zip(&f.functions).zip(&nd.exponents) {
        if pj == 0.0 {
            continue;
        }
        let g = match fj {
            InputFn::Gaussian(g) => g,
            _ => return None,
        };
        let aff = s.affine_at(c);
        let jt_a = aff.matrix.transpose() * &g.a;
        p += &jt_a * &aff.matrix * pj;
        let target = DVector::from_iterator(g.center.len(), g.center.iter().zip(&aff.offset).map(|(m, o)| m - o));
        b += &jt_a * target * pj;
    }
    let p = symmetrize(&p);
    let pi = inv_spd(&p)?;
    let mean = (&pi * b).iter().cloned().collect();
    Some(GaussianProposal { mean, precision: p }.widened(PROPOSAL_WIDENING))
}

/// `q` with a matched proposal filled in for importance sampling.
pub fn with_matched_proposal(nd: &NonlinearDatum, c: &[f64], f: &InputTuple, q: &QuadratureSpec) -> QuadratureSpec {
    let mut q = q.clone();
    if q.method == Method::Importance && q.proposal.is_none() {
        q.proposal = matched_proposal(nd, c, f);
    }
    q
}

/// ∏_j f_j(B_j z)^{p_j}.
pub fn nonlinear_integrand<'a>(nd: &'a NonlinearDatum, f: &'a InputTuple) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    move |z: &[f64]| {
        let mut acc = 1.0;
        let mut y = [0.0; MAX_DIM];
        for ((s, fj), &pj) in nd.submersions.iter().zip(&f.functions).zip(&nd.exponents) {
            if pj == 0.0 {
                continue;
            }
            let k = s.out_dim;
            s.eval_into(z, &mut y[..k]);
            let v = fj.eval(&y[..k]);
            if v <= 0.0 {
                return 0.0;
            }
            acc *= if pj == 1.0 { v } else { v.powf(pj) };
        }
        acc
    }
}

/// Certify each f_j as κ-constant at scale μ on B_j(2U_δ(u)).
pub fn certify_inputs(nd: &NonlinearDatum, lp: &LocalizedProblem, f: &InputTuple, c: &Certification) -> Result<Vec<KappaCheck>> {
    let mut out = Vec::with_capacity(f.len());
    for (j, (s, fj)) in nd.submersions.iter().zip(&f.functions).enumerate() {
        let pairs = image_pairs(s, &lp.center, 2.0 * lp.radius(), lp.mu, c.samples, c.seed.wrapping_add(j as u64));
        let ev = |w: &[f64]| fj.eval(w);
        let k = kappa_on_pairs(&ev, &pairs, lp.mu, lp.kappa.max(1.0 + 1e-15))?;
        if !k.verdict {
            let w = k.witness.clone().expect("failed checks carry a witness");
            return Err(Error::Uncertified { index: j, kappa: lp.kappa, mu: lp.mu, ratio: k.worst_ratio, x: w.x, y: w.y });
        }
        out.push(k);
    }
    Ok(out)
}

/// Ratio on one tuple, with optional certification of the inputs first.
///
/// Denominators are the full masses ∫ f_j, not masses over B_j(U_δ(u)).
pub fn localized_ratio(
    nd: &NonlinearDatum,
    lp: &LocalizedProblem,
    f: &InputTuple,
    q: &QuadratureSpec,
    cert: Option<&Certification>,
) -> Result<LocalizedEstimate> {
    localized_ratio_tagged(nd, lp, f, q, cert, tags::NUMERATOR)
}

pub fn localized_ratio_tagged(
    nd: &NonlinearDatum,
    lp: &LocalizedProblem,
    f: &InputTuple,
    q: &QuadratureSpec,
    cert: Option<&Certification>,
    tag: u64,
) -> Result<LocalizedEstimate> {
    check_tuple(nd, f)?;
    if lp.center.len() != nd.n {
        return Err(Error::DimensionMismatch { what: "centre", expected: nd.n, found: lp.center.len() });
    }
    q.validate()?;
    let certification = match cert {
        Some(c) => certify_inputs(nd, lp, f, c)?,
        None => Vec::new(),
    };
    let mut masses = Vec::with_capacity(f.len());
    let mut denom = 1.0;
    for (j, fj) in f.functions.iter().enumerate() {
        let m = input_mass(fj, q, tags::MASS)?.value;
        if !(m > 0.0) {
            return Err(Error::ZeroDenominator { index: j });
        }
        masses.push(m);
        denom *= m.powf(nd.exponents[j]);
    }
    // Supports disjoint from B_j(U_δ(u)) give a zero ratio without quadrature.
    let reach = lp.radius();
    for (s, fj) in nd.submersions.iter().zip(&f.functions) {
        let img = image_box(s, &lp.center, reach);
        if img.intersect(&fj.support()).is_empty() && !matches!(fj, InputFn::Gaussian(_)) {
            return Ok(LocalizedEstimate::zero(masses, certification));
        }
    }
    let q = with_matched_proposal(nd, &lp.center, f, q);
    let g = nonlinear_integrand(nd, f);
    let num = integrate(&g, &lp.region(), &q, tag)?;
    Ok(LocalizedEstimate {
        ratio: num.value / denom,
        stderr: num.stderr / denom,
        error_estimate: num.error_estimate / denom,
        numerator: num,
        masses,
        certification,
    })
}

//! Gaussian inputs: the closed-form functional, the extremiser fixed point,
//! scaling, and the truncation deficit outside U_δ(0).

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::function::gamma::gamma_ur;

use crate::datum::{scaling_condition, validate_datum, BLDatum};
use crate::error::{Error, Result};
use crate::linalg::{
    asymmetry, geodesic, inv_spd, logdet_spd, min_eigenvector, op_norm, serde_rows, sym_eigenvalues,
    symmetrize,
};

/// Centred gaussians c_j exp(−π⟨A_j x, x⟩).
#[derive(Debug, Clone, Serialize)]
pub struct GaussianTuple {
    #[serde(serialize_with = "serde_rows::many")]
    pub blocks: Vec<DMatrix<f64>>,
    pub norm_constants: Vec<f64>,
}

impl GaussianTuple {
    /// L¹-normalized tuple: c_j = det(A_j)^{1/2}.
    pub fn normalized(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let mut c = Vec::with_capacity(blocks.len());
        for (j, a) in blocks.iter().enumerate() {
            let ld = logdet_spd(a).ok_or(Error::NotPositiveDefinite { index: j })?;
            c.push((0.5 * ld).exp());
        }
        Ok(GaussianTuple { blocks, norm_constants: c })
    }

    /// Identity blocks matching the datum's output dimensions.
    pub fn isotropic(datum: &BLDatum) -> Self {
        let blocks = datum.dims().into_iter().map(|k| DMatrix::identity(k, k)).collect();
        GaussianTuple::normalized(blocks).expect("identity blocks are positive definite")
    }

    /// Every block multiplied by λ, renormalized.
    pub fn scaled_blocks(&self, lambda: f64) -> Result<Self> {
        GaussianTuple::normalized(self.blocks.iter().map(|a| a * lambda).collect())
    }

    /// Check symmetry and positive definiteness of each block.
    pub fn check(&self) -> Result<()> {
        for (j, a) in self.blocks.iter().enumerate() {
            if !a.is_square() || asymmetry(a) > 1e-12 || logdet_spd(a).is_none() {
                return Err(Error::NotPositiveDefinite { index: j });
            }
        }
        Ok(())
    }
}

/// M = Σ p_j L_jᵀ A_j L_j.
pub fn compute_m(datum: &BLDatum, g: &GaussianTuple) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(datum.n, datum.n);
    for ((l, a), p) in datum.maps.iter().zip(&g.blocks).zip(&datum.exponents) {
        if *p != 0.0 {
            m += (l.transpose() * a * l) * *p;
        }
    }
    symmetrize(&m)
}

fn check_dims(datum: &BLDatum, g: &GaussianTuple) -> Result<()> {
    if g.blocks.len() != datum.m() {
        return Err(Error::DimensionMismatch { what: "gaussian tuple", expected: datum.m(), found: g.blocks.len() });
    }
    for (a, k) in g.blocks.iter().zip(datum.dims()) {
        if a.nrows() != k || a.ncols() != k {
            return Err(Error::DimensionMismatch { what: "gaussian block", expected: k, found: a.nrows() });
        }
    }
    Ok(())
}

/// log of ∏ det(A_j)^{p_j/2} · det(M)^{−1/2}.
pub fn log_gaussian_bl_value(datum: &BLDatum, g: &GaussianTuple) -> Result<f64> {
    check_dims(datum, g)?;
    g.check()?;
    let m = compute_m(datum, g);
    let ldm = logdet_spd(&m).ok_or_else(|| singular(&m))?;
    let mut s = -0.5 * ldm;
    for ((a, p), j) in g.blocks.iter().zip(&datum.exponents).zip(0..) {
        s += 0.5 * p * logdet_spd(a).ok_or(Error::NotPositiveDefinite { index: j })?;
    }
    Ok(s)
}

fn singular(m: &DMatrix<f64>) -> Error {
    let (_, v) = min_eigenvector(m);
    Error::SingularM { null_direction: v.iter().cloned().collect() }
}

/// BL functional evaluated at the L¹-normalized gaussian tuple.
pub fn gaussian_bl_value(datum: &BLDatum, g: &GaussianTuple) -> Result<f64> {
    log_gaussian_bl_value(datum, g).map(f64::exp)
}

/// Starting point for the extremiser iteration.
#[derive(Debug, Clone)]
pub enum Init {
    Isotropic,
    Tuple(GaussianTuple),
}

#[derive(Debug, Clone, Copy)]
pub struct ExtremiserOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Step θ ∈ (0, 1] along the geodesic towards the fixed-point target.
    pub damping: f64,
}

impl Default for ExtremiserOptions {
    fn default() -> Self {
        ExtremiserOptions { tol: 1e-10, max_iter: 10_000, damping: 1.0 }
    }
}

/// Iterations without improvement of the best residual before giving up, at
/// full step. The residual is not monotone while small blocks settle, and the
/// window grows as 1/θ under damping.
pub const STALL_WINDOW: usize = 1000;
const EIG_MIN: f64 = 1e-12;
const EIG_MAX: f64 = 1e12;

#[derive(Debug, Clone, Serialize)]
pub struct ExtremiserResult {
    pub gaussians: GaussianTuple,
    pub bl_value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    #[serde(serialize_with = "serde_rows::one")]
    pub m_matrix: DMatrix<f64>,
    pub tol: f64,
}

/// Rescale all blocks isotropically so that det M = 1.
fn normalize_det_m(datum: &BLDatum, blocks: &mut [DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let g = GaussianTuple { blocks: blocks.to_vec(), norm_constants: vec![1.0; blocks.len()] };
    let m = compute_m(datum, &g);
    let ld = logdet_spd(&m).ok_or_else(|| singular(&m))?;
    let lambda = (-ld / datum.n as f64).exp();
    for a in blocks.iter_mut() {
        *a *= lambda;
    }
    Ok(m * lambda)
}

/// Targets T_j = (L_j M⁻¹ L_jᵀ)⁻¹ and the stationarity residual.
fn targets(datum: &BLDatum, blocks: &[DMatrix<f64>], m: &DMatrix<f64>) -> Result<(Vec<DMatrix<f64>>, f64)> {
    let mi = inv_spd(m).ok_or_else(|| singular(m))?;
    let mut out = Vec::with_capacity(blocks.len());
    let mut res = 0.0f64;
    for (j, (l, a)) in datum.maps.iter().zip(blocks).enumerate() {
        let s = symmetrize(&(l * &mi * l.transpose()));
        let ai = inv_spd(a).ok_or(Error::NotPositiveDefinite { index: j })?;
        res = res.max(op_norm(&(ai - &s)));
        out.push(inv_spd(&s).ok_or(Error::NotPositiveDefinite { index: j })?);
    }
    Ok((out, res))
}

/// Fixed-point iteration A_j ← (L_j M⁻¹ L_jᵀ)⁻¹ with det M = 1 normalization.
pub fn solve_extremiser(datum: &BLDatum, init: &Init, opts: &ExtremiserOptions) -> Result<ExtremiserResult> {
    let v = validate_datum(datum);
    if !v.is_empty() {
        return Err(Error::InvalidDatum(v));
    }
    let (ok, residual) = scaling_condition(datum);
    if !ok {
        return Err(Error::ScalingViolation { residual });
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidParameters(format!("damping {} outside (0, 1]", opts.damping)));
    }
    let g0 = match init {
        Init::Isotropic => GaussianTuple::isotropic(datum),
        Init::Tuple(g) => g.clone(),
    };
    check_dims(datum, &g0)?;
    g0.check()?;
    let mut blocks = g0.blocks;
    let mut m = normalize_det_m(datum, &mut blocks)?;
    let (mut tgt, mut res) = targets(datum, &blocks, &m)?;
    let mut iterations = 0;
    let mut best = res;
    let mut best_at = 0;
    let stall = (STALL_WINDOW as f64 / opts.damping).ceil() as usize;
    while res > opts.tol {
        if iterations >= opts.max_iter {
            let last = finish(datum, blocks, m, iterations, res, false, opts.tol)?;
            return Err(Error::MaxIterExceeded { last: Box::new(last) });
        }
        iterations += 1;
        for (a, t) in blocks.iter_mut().zip(&tgt) {
            *a = geodesic(a, t, opts.damping);
        }
        m = normalize_det_m(datum, &mut blocks)?;
        for a in &blocks {
            let ev = sym_eigenvalues(a);
            let (lo, hi) = (ev[0], ev[ev.len() - 1]);
            if !(lo >= EIG_MIN && hi <= EIG_MAX) {
                return Err(Error::Diverged {
                    iterations,
                    residual: res,
                    reason: format!("block eigenvalue range [{lo:e}, {hi:e}] left [1e-12, 1e12]"),
                });
            }
        }
        let (t, r) = targets(datum, &blocks, &m)?;
        tgt = t;
        res = r;
        if !res.is_finite() {
            return Err(Error::Diverged { iterations, residual: res, reason: "non-finite residual".into() });
        }
        if res < best {
            best = res;
            best_at = iterations;
        } else if iterations - best_at >= stall {
            return Err(Error::Diverged {
                iterations,
                residual: res,
                reason: format!("no residual decrease over {stall} iterations"),
            });
        }
    }
    finish(datum, blocks, m, iterations, res, true, opts.tol)
}

fn finish(
    datum: &BLDatum,
    blocks: Vec<DMatrix<f64>>,
    m: DMatrix<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
    tol: f64,
) -> Result<ExtremiserResult> {
    let g = GaussianTuple::normalized(blocks)?;
    let bl_value = gaussian_bl_value(datum, &g)?;
    Ok(ExtremiserResult { gaussians: g, bl_value, iterations, residual, converged, m_matrix: m, tol })
}

/// C_r = (1−r)^{1−r} / r^r with 0⁰ = 1.
pub fn c_r(r: f64) -> f64 {
    let xlogx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
    (xlogx(1.0 - r) - xlogx(r)).exp()
}

/// Sharp Young constant ∏_j C_{p_j}^{d/2} on ℝ^d.
pub fn young_constant(p: [f64; 3], d: usize) -> Result<f64> {
    for (j, &r) in p.iter().enumerate() {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidExponent { index: j, value: r });
        }
    }
    let residual = p.iter().sum::<f64>() - 2.0;
    if residual.abs() > 1e-12 {
        return Err(Error::ScalingViolation { residual: residual * d as f64 });
    }
    Ok(p.iter().map(|&r| c_r(r).powf(d as f64 / 2.0)).product())
}

/// g_{ρ,j}(x) = ρ^{−n_j} g_j(x/ρ).
pub fn scale_gaussian(g: &GaussianTuple, rho: f64) -> Result<GaussianTuple> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::NonPositive { name: "rho", value: rho });
    }
    let blocks = g.blocks.iter().map(|a| a / (rho * rho)).collect();
    let norm_constants = g
        .norm_constants
        .iter()
        .zip(&g.blocks)
        .map(|(c, a)| c * rho.powi(-(a.nrows() as i32)))
        .collect();
    Ok(GaussianTuple { blocks, norm_constants })
}

/// Radius δ·log(1/δ) of U_δ.
pub fn u_radius(delta: f64) -> f64 {
    delta * (1.0 / delta).ln()
}

pub fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < (-1.0f64).exp() {
        Ok(())
    } else {
        Err(Error::DeltaOutOfRange { delta })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncationDeficit {
    /// Mass fraction of ∏ g_j^{p_j}∘L_j outside U_δ(0).
    pub deficit: f64,
    /// δ^{2η}.
    pub bound: f64,
    /// Isotropic tail at the smallest eigenvalue of M, an upper bound for `deficit`.
    pub operator_bound: f64,
    pub radius: f64,
}

/// Fraction of the gaussian density ∝ exp(−π⟨Mx,x⟩) outside |x| ≤ r, given the
/// eigenvalues of M.
pub fn gaussian_ball_tail(eigs: &[f64], r: f64) -> f64 {
    let n = eigs.len();
    // |x|² = Σ c_i Z_i² with independent standard normals.
    let c: Vec<f64> = eigs.iter().map(|l| 1.0 / (2.0 * std::f64::consts::PI * l)).collect();
    let beta = c.iter().cloned().fold(f64::INFINITY, f64::min);
    let t = r * r / (2.0 * beta);
    let ratios: Vec<f64> = c.iter().map(|ci| 1.0 - beta / ci).collect();
    let a0: f64 = c.iter().map(|ci| (beta / ci).sqrt()).product();
    let q_max = ratios.iter().cloned().fold(0.0, f64::max);
    if ratios.iter().all(|&q| q <= 1e-15) {
        return gamma_ur(n as f64 / 2.0, t);
    }
    // Mixture of chi-square laws with n + 2k degrees of freedom.
    let mut a = vec![a0];
    let mut g: Vec<f64> = vec![0.0];
    let mut powers = vec![1.0; n];
    let mut total = a0 * gamma_ur(n as f64 / 2.0, t);
    for k in 1..200_000 {
        let mut gk = 0.0;
        for (pw, q) in powers.iter_mut().zip(&ratios) {
            *pw *= q;
            gk += *pw;
        }
        g.push(gk);
        let ak = (0..k).map(|r| g[k - r] * a[r]).sum::<f64>() / (2.0 * k as f64);
        a.push(ak);
        total += ak * gamma_ur((n + 2 * k) as f64 / 2.0, t);
        // Weights decay at least geometrically with ratio q_max and the gamma
        // factors are at most 1. Deep tails are dominated by late terms, so the
        // cut must be relative to the total, not to 1 − Σ weights.
        let tail = ak * q_max / (1.0 - q_max);
        if tail <= 1e-16 * total.max(1e-300) {
            break;
        }
    }
    total.clamp(0.0, 1.0)
}

/// Deficit of the truncated product of gaussians at scale δ.
///
/// `g` must already be scaled to δ; the integrand is ∝ exp(−π⟨Mx,x⟩) with M
/// built from `g`, truncated to the ball of radius δ·log(1/δ).
pub fn truncation_deficit(datum: &BLDatum, g: &GaussianTuple, delta: f64, eta: f64) -> Result<TruncationDeficit> {
    check_delta(delta)?;
    check_dims(datum, g)?;
    let m = compute_m(datum, g);
    if logdet_spd(&m).is_none() {
        return Err(singular(&m));
    }
    let eigs = sym_eigenvalues(&m);
    let r = u_radius(delta);
    let deficit = gaussian_ball_tail(&eigs, r);
    let operator_bound =
        gamma_ur(datum.n as f64 / 2.0, std::f64::consts::PI * eigs[0] * r * r);
    Ok(TruncationDeficit { deficit, bound: delta.powf(2.0 * eta), operator_bound, radius: r })
}

/// (C̄₀, C₀) = (sup ‖M^{-1/2}‖, sup max_j ‖A_j^{1/2}‖) over solved data.
pub fn c0_constants(results: &[ExtremiserResult]) -> Result<(f64, f64)> {
    let mut cbar = 0.0f64;
    let mut c0 = 0.0f64;
    for (i, r) in results.iter().enumerate() {
        if !r.converged {
            return Err(Error::Unsolved { index: i });
        }
        let ev = sym_eigenvalues(&r.m_matrix);
        cbar = cbar.max(ev[0].powf(-0.5));
        for a in &r.gaussians.blocks {
            let ea = sym_eigenvalues(a);
            c0 = c0.max(ea[ea.len() - 1].sqrt());
        }
    }
    Ok((cbar, c0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn young() -> BLDatum {
        BLDatum::young(1, [2.0 / 3.0; 3])
    }

    #[test]
    fn m_for_young_identity_blocks() {
        let m = compute_m(&young(), &GaussianTuple::isotropic(&young()));
        assert_relative_eq!(m[(0, 0)], 4.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(m[(0, 1)], -2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(m[(1, 1)], 4.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn m_vanishes_with_zero_exponents() {
        let d = young().with_exponents(&[0.0, 0.0, 0.0]);
        assert_eq!(compute_m(&d, &GaussianTuple::isotropic(&d)), DMatrix::zeros(2, 2));
    }

    #[test]
    fn young_value_is_root_three_over_two() {
        let v = gaussian_bl_value(&young(), &GaussianTuple::isotropic(&young())).unwrap();
        assert_relative_eq!(v, 3f64.sqrt() / 2.0, max_relative = 1e-14);
        let g = GaussianTuple::isotropic(&young()).scaled_blocks(7.5).unwrap();
        assert_relative_eq!(gaussian_bl_value(&young(), &g).unwrap(), 3f64.sqrt() / 2.0, max_relative = 1e-13);
    }

    #[test]
    fn singular_m_reports_direction() {
        let d = BLDatum::from_rows(2, &[vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0]]], &[1.0, 1.0]);
        match gaussian_bl_value(&d, &GaussianTuple::isotropic(&d)) {
            Err(Error::SingularM { null_direction }) => {
                assert!(null_direction[0].abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_map_is_stationary_at_init() {
        let d = BLDatum::new(2, vec![DMatrix::identity(2, 2)], vec![1.0]);
        let r = solve_extremiser(&d, &Init::Isotropic, &ExtremiserOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.residual < 1e-15);
        assert_relative_eq!(r.bl_value, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn scaling_violation_rejected() {
        let d = young().with_exponents(&[1.0, 1.0, 1.0]);
        assert!(matches!(
            solve_extremiser(&d, &Init::Isotropic, &ExtremiserOptions::default()),
            Err(Error::ScalingViolation { .. })
        ));
    }

    #[test]
    fn damped_iteration_reaches_same_value() {
        let opts = ExtremiserOptions { damping: 0.5, ..Default::default() };
        let g = GaussianTuple::normalized(vec![
            DMatrix::from_element(1, 1, 3.0),
            DMatrix::from_element(1, 1, 0.2),
            DMatrix::from_element(1, 1, 1.0),
        ])
        .unwrap();
        let r = solve_extremiser(&young(), &Init::Tuple(g), &opts).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.bl_value, 3f64.sqrt() / 2.0, max_relative = 1e-10);
    }

    #[test]
    fn young_constant_examples() {
        assert_relative_eq!(young_constant([2.0 / 3.0; 3], 1).unwrap(), 0.75f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(young_constant([2.0 / 3.0; 3], 3).unwrap(), 0.75f64.powf(1.5), max_relative = 1e-14);
        assert_relative_eq!(young_constant([0.5, 0.5, 1.0], 1).unwrap(), 1.0, max_relative = 1e-14);
        assert!(young_constant([1.0, 1.0, 1.0], 1).is_err());
    }

    #[test]
    fn scale_gaussian_rules() {
        let g = GaussianTuple::isotropic(&young());
        let s = scale_gaussian(&g, 1.0).unwrap();
        assert_eq!(s.blocks, g.blocks);
        let s = scale_gaussian(&g, 2.0).unwrap();
        assert_relative_eq!(gaussian_bl_value(&young(), &s).unwrap(), 3f64.sqrt() / 2.0, max_relative = 1e-13);
        for (c, a) in s.norm_constants.iter().zip(&s.blocks) {
            assert_relative_eq!(*c, a[(0, 0)].sqrt(), max_relative = 1e-15);
        }
        let d = 0.1f64;
        let s = scale_gaussian(&g, d.powf(1.5)).unwrap();
        assert_relative_eq!(s.blocks[0][(0, 0)], d.powf(-3.0), max_relative = 1e-12);
    }

    #[test]
    fn isotropic_tail_is_exponential() {
        // n = 2, M = 1/δ² I: tail outside δ log(1/δ) is exp(−π log²(1/δ)).
        let delta = 0.1f64;
        let eigs = [1.0 / (delta * delta); 2];
        let r = u_radius(delta);
        let expect = (-std::f64::consts::PI * (10f64.ln()).powi(2)).exp();
        assert_relative_eq!(gaussian_ball_tail(&eigs, r), expect, max_relative = 1e-10);
    }

    #[test]
    fn delta_range_enforced() {
        let g = GaussianTuple::isotropic(&young());
        assert!(matches!(truncation_deficit(&young(), &g, 0.4, 0.2), Err(Error::DeltaOutOfRange { .. })));
    }

    #[test]
    fn larger_m_has_smaller_deficit() {
        let d = BLDatum::new(2, vec![DMatrix::identity(2, 2)], vec![1.0]);
        let g1 = GaussianTuple::normalized(vec![DMatrix::identity(2, 2) * 100.0]).unwrap();
        let g4 = GaussianTuple::normalized(vec![DMatrix::identity(2, 2) * 400.0]).unwrap();
        let t1 = truncation_deficit(&d, &g1, 0.1, 0.2).unwrap();
        let t4 = truncation_deficit(&d, &g4, 0.1, 0.2).unwrap();
        assert!(t4.deficit < t1.deficit);
    }
}

//! Sampled κ-constancy: f(x) ≤ κ f(y) for x ∈ Ω and |x − y| ≤ μ.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::submersion::Submersion;
use crate::error::{Error, Result};
use crate::functional::quadrature::{chunk_rng, sample_ball};
use crate::functional::BoxDomain;

/// Default number of sampled pairs.
pub const DEFAULT_PAIRS: usize = 10_000;
const PAIR_CHUNK: usize = 1024;
const TAG_PAIRS: u64 = 31;

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub fx: f64,
    pub fy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaCheck {
    pub verdict: bool,
    /// Largest f(x)/f(y) observed; infinite when f vanishes at some y with f(x) > 0.
    pub worst_ratio: f64,
    pub witness: Option<Witness>,
    pub samples: usize,
    pub mu: f64,
    pub kappa: f64,
}

/// Point pairs (x, y): x uniform in Ω, y on the sphere |y − x| = μ for even
/// indices and uniform in the μ-ball for odd ones.
pub fn sample_pairs(omega: &BoxDomain, mu: f64, samples: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = omega.dim();
    pairs_from(d, mu, samples, seed, |rng| {
        (0..d).map(|k| omega.lo[k] + omega.width(k) * rng.random::<f64>()).collect()
    })
}

/// As [`sample_pairs`] with x = B(z) for z uniform in the ball B(c, r), so that
/// x ranges over the image B(B(c, r)) itself.
pub fn image_pairs(s: &Submersion, c: &[f64], r: f64, mu: f64, samples: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    pairs_from(s.out_dim, mu, samples, seed, |rng| {
        let mut z = vec![0.0; s.n];
        sample_ball(rng, c, r, &mut z);
        s.eval(&z)
    })
}

fn pairs_from<G>(d: usize, mu: f64, samples: usize, seed: u64, point: G) -> Vec<(Vec<f64>, Vec<f64>)>
where
    G: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    let chunks = samples.div_ceil(PAIR_CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = chunk_rng(seed, TAG_PAIRS, c as u64);
            let count = PAIR_CHUNK.min(samples - c * PAIR_CHUNK);
            let mut out = Vec::with_capacity(count);
            for i in 0..count {
                let x = point(&mut rng);
                let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
                let r = if (c * PAIR_CHUNK + i) % 2 == 0 { mu } else { mu * rng.random::<f64>().powf(1.0 / d as f64) };
                v.iter_mut().for_each(|a| *a *= r / norm);
                let y = x.iter().zip(&v).map(|(a, b)| a + b).collect();
                out.push((x, y));
            }
            out
        })
        .collect()
}

fn check_params(mu: f64, kappa: f64) -> Result<()> {
    if !(mu > 0.0) {
        return Err(Error::NonPositive { name: "mu", value: mu });
    }
    if !(kappa > 1.0) {
        return Err(Error::InvalidParameters(format!("kappa = {kappa} must exceed 1")));
    }
    Ok(())
}

/// Evaluate the criterion on precomputed pairs.
pub fn kappa_on_pairs(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    pairs: &[(Vec<f64>, Vec<f64>)],
    mu: f64,
    kappa: f64,
) -> Result<KappaCheck> {
    check_params(mu, kappa)?;
    // Subnormal values are read as zero; their ratios are rounding noise.
    let flush = |v: f64| if v < f64::MIN_POSITIVE { 0.0 } else { v };
    let vals: Vec<(f64, f64)> = pairs.par_iter().map(|(x, y)| (flush(f(x)), flush(f(y)))).collect();
    let mut worst = 1.0f64;
    let mut witness = None;
    let mut wr = f64::NEG_INFINITY;
    for (i, &(fx, fy)) in vals.iter().enumerate() {
        let r = if fx <= 0.0 {
            0.0
        } else if fy <= 0.0 {
            f64::INFINITY
        } else {
            fx / fy
        };
        if r > wr {
            wr = r;
            let (x, y) = &pairs[i];
            witness = Some(Witness { x: x.clone(), y: y.clone(), fx, fy });
        }
        worst = worst.max(r);
        if r.is_infinite() {
            break;
        }
    }
    let verdict = worst <= kappa;
    Ok(KappaCheck {
        verdict,
        worst_ratio: worst,
        witness: if verdict { None } else { witness },
        samples: pairs.len(),
        mu,
        kappa,
    })
}

/// Sampled test of f(x) ≤ κ f(y) for x ∈ Ω, |x − y| ≤ μ.
pub fn is_kappa_constant(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    omega: &BoxDomain,
    mu: f64,
    kappa: f64,
    samples: usize,
    seed: u64,
) -> Result<KappaCheck> {
    check_params(mu, kappa)?;
    let pairs = sample_pairs(omega, mu, samples, seed);
    kappa_on_pairs(f, &pairs, mu, kappa)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductCertification {
    pub first: KappaCheck,
    pub second: KappaCheck,
    pub product: KappaCheck,
    /// First and second certified implies the product certified at κ₁κ₂.
    pub rule_holds: bool,
}

/// Certify f, g and fg on shared pairs, at κ₁, κ₂ and κ₁κ₂.
#[allow(clippy::too_many_arguments)]
pub fn certify_product(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    omega: &BoxDomain,
    mu: f64,
    k1: f64,
    k2: f64,
    samples: usize,
    seed: u64,
) -> Result<ProductCertification> {
    certify_product_on_pairs(f, g, &sample_pairs(omega, mu, samples, seed), mu, k1, k2)
}

/// [`certify_product`] on precomputed pairs.
pub fn certify_product_on_pairs(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    pairs: &[(Vec<f64>, Vec<f64>)],
    mu: f64,
    k1: f64,
    k2: f64,
) -> Result<ProductCertification> {
    let first = kappa_on_pairs(f, pairs, mu, k1)?;
    let second = kappa_on_pairs(g, pairs, mu, k2)?;
    let fg = |x: &[f64]| f(x) * g(x);
    let product = kappa_on_pairs(&fg, pairs, mu, k1 * k2)?;
    let rule_holds = !(first.verdict && second.verdict) || product.verdict;
    Ok(ProductCertification { first, second, product, rule_holds })
}

/// Bounding box of B(ball(c, r)) from |B(x) − L^c x| ≤ κ₂|x − c|².
pub fn image_box(s: &Submersion, c: &[f64], r: f64) -> BoxDomain {
    let j = s.jacobian(c);
    let b = s.eval(c);
    let half: Vec<f64> = (0..s.out_dim)
        .map(|i| {
            let row = (0..s.n).map(|k| j[(i, k)] * j[(i, k)]).sum::<f64>().sqrt();
            row * r + s.c2_bound * r * r
        })
        .collect();
    BoxDomain::centered(&b, &half)
}

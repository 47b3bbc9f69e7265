//! Smoothing by the Poisson kernel P_t(x) = c_d t / (t² + |x|²)^{(d+1)/2} and
//! the κ-constancy scale it certifies.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::convolve::fft_convolve;
use super::input::SampledFn;
use crate::error::{Error, Result};

/// Largest kernel grid per axis.
const MAX_KERNEL_POINTS: usize = 1 << 14;

#[derive(Debug, Clone, Serialize)]
pub struct PoissonSmoothing {
    pub smoothed: SampledFn,
    /// Largest μ for which P_t, hence f * P_t, is κ-constant at scale μ.
    pub certified_mu: Option<f64>,
    /// Mass of the exact kernel outside the truncation radius.
    pub tail_mass: f64,
    pub kernel_radius: f64,
}

/// Normalizing constant c_d = Γ((d+1)/2) / π^{(d+1)/2}.
pub fn poisson_constant(d: usize) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    (ln_gamma(h) - h * std::f64::consts::PI.ln()).exp()
}

pub fn poisson_kernel(x: &[f64], t: f64) -> f64 {
    let d = x.len();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    poisson_constant(d) * t / (t * t + r2).powf((d as f64 + 1.0) / 2.0)
}

/// Mass of P_t outside the ball of radius R (d = 1, 2).
pub fn poisson_tail(d: usize, t: f64, r: f64) -> Result<f64> {
    match d {
        1 => Ok(1.0 - 2.0 / std::f64::consts::PI * (r / t).atan()),
        2 => Ok(t / (t * t + r * r).sqrt()),
        _ => Err(Error::UnsupportedDimension { dim: d }),
    }
}

/// sup over x of P_t(y)/P_t(x) for |x − y| ≤ μ.
pub fn worst_ratio(d: usize, t: f64, mu: f64) -> f64 {
    // The worst pair is radial, |y| = |x| + μ; the maximizing |x| solves
    // r² + μ r − t² = 0.
    let r = (-mu + (mu * mu + 4.0 * t * t).sqrt()) / 2.0;
    ((t * t + (r + mu).powi(2)) / (t * t + r * r)).powf((d as f64 + 1.0) / 2.0)
}

/// Largest μ with worst_ratio(d, t, μ) ≤ κ.
pub fn certified_scale(d: usize, t: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 1.0) {
        return Err(Error::InvalidParameters(format!("kappa must exceed 1, got {kappa}")));
    }
    let mut lo = 0.0;
    let mut hi = t * (kappa.powf(1.0 / (d as f64 + 1.0)) - 1.0).max(1e-300);
    while worst_ratio(d, t, hi) <= kappa {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if worst_ratio(d, t, mid) <= kappa {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(lo)
}

/// f * P_t on the grid of `f`, kernel truncated at `radius` and renormalized.
pub fn poisson_smooth(f: &SampledFn, t: f64, kappa: Option<f64>, radius: Option<f64>) -> Result<PoissonSmoothing> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositive { name: "t", value: t });
    }
    let d = f.dim();
    if d == 0 || d > 2 {
        return Err(Error::UnsupportedDimension { dim: d });
    }
    let cap = if d == 1 { MAX_KERNEL_POINTS } else { 1024 };
    let mut r = radius.unwrap_or(50.0 * t);
    for i in 0..d {
        let max_r = (cap / 2) as f64 * f.step[i];
        r = r.min(max_r);
    }
    let half: Vec<usize> = (0..d).map(|i| (r / f.step[i]).floor() as usize).collect();
    let shape: Vec<usize> = half.iter().map(|h| 2 * h + 1).collect();
    let total: usize = shape.iter().product();
    let mut kernel = Vec::with_capacity(total);
    let mut y = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for i in (0..d).rev() {
            y[i] = ((rem % shape[i]) as f64 - half[i] as f64) * f.step[i];
            rem /= shape[i];
        }
        let inside = y.iter().map(|v| v * v).sum::<f64>() <= r * r;
        kernel.push(if inside { poisson_kernel(&y, t) } else { 0.0 });
    }
    let ksum: f64 = kernel.iter().sum();
    if !(ksum > 0.0) {
        return Err(Error::InvalidParameters("kernel grid is empty".into()));
    }
    for k in &mut kernel {
        *k /= ksum;
    }
    let (values, out_shape) = fft_convolve(&f.values, &f.shape, &kernel, &shape);
    let lo = f.lo.iter().zip(&half).zip(&f.step).map(|((l, h), s)| l - *h as f64 * s).collect();
    let smoothed = SampledFn::new(lo, f.step.clone(), out_shape, values)?;
    let certified_mu = match kappa {
        Some(k) => Some(certified_scale(d, t, k)?),
        None => None,
    };
    Ok(PoissonSmoothing { smoothed, certified_mu, tail_mass: poisson_tail(d, t, r)?, kernel_radius: r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants_normalize() {
        assert_relative_eq!(poisson_constant(1), 1.0 / std::f64::consts::PI, max_relative = 1e-14);
        assert_relative_eq!(poisson_constant(2), 1.0 / (2.0 * std::f64::consts::PI), max_relative = 1e-14);
    }

    #[test]
    fn certified_scale_inverts_ratio() {
        for d in [1, 2] {
            let mu = certified_scale(d, 0.5, 1.2).unwrap();
            assert_relative_eq!(worst_ratio(d, 0.5, mu), 1.2, max_relative = 1e-10);
            // The closed-form lower bound t(κ^{1/(d+1)} − 1) is always certified.
            assert!(mu >= 0.5 * (1.2f64.powf(1.0 / (d as f64 + 1.0)) - 1.0));
        }
    }

    #[test]
    fn mass_is_preserved() {
        let f = SampledFn::from_fn(&crate::functional::BoxDomain::cube(1, 0.0, 1.0), 201, |_| 1.0);
        let s = poisson_smooth(&f, 0.05, Some(2.0), None).unwrap();
        assert_relative_eq!(s.smoothed.mass(), f.mass(), max_relative = 1e-12);
        assert!(s.certified_mu.unwrap() > 0.0);
    }

    #[test]
    fn rejects_nonpositive_t() {
        let f = SampledFn::from_fn(&crate::functional::BoxDomain::cube(1, 0.0, 1.0), 11, |_| 1.0);
        assert!(poisson_smooth(&f, 0.0, None, None).is_err());
    }
}

//! Bookkeeping for the induction-on-scales iteration: the scale sequence
//! δ_k = δ₀^{α^k}, the stopping index, accumulated losses and κ growth.

use serde::Serialize;

use crate::error::{Error, Result};

/// Terms of the loss series below this are dropped.
pub const SERIES_CUTOFF: f64 = 1e-30;
/// Largest admissible stopping index.
pub const MAX_STEPS: usize = 1_000_000;
/// Grid resolution of [`choose_delta0`].
pub const DELTA0_GRID: f64 = 1e-6;

/// Exponents (α, β, β′) with α > 1, β > 0, α + β < 2, β < β′ < 2 − α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentParams {
    pub alpha: f64,
    pub beta: f64,
    pub beta_prime: f64,
}

impl Default for ExponentParams {
    fn default() -> Self {
        ExponentParams { alpha: 1.5, beta: 0.3, beta_prime: 0.4 }
    }
}

impl ExponentParams {
    pub fn new(alpha: f64, beta: f64, beta_prime: f64) -> Result<Self> {
        let p = ExponentParams { alpha, beta, beta_prime };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ExponentParams { alpha, beta, beta_prime } = *self;
        let fail = |m: String| Err(Error::InvalidParameters(m));
        if !alpha.is_finite() || !beta.is_finite() || !beta_prime.is_finite() {
            return fail("exponents must be finite".into());
        }
        if alpha <= 1.0 {
            return fail(format!("alpha = {alpha} must exceed 1"));
        }
        if beta <= 0.0 {
            return fail(format!("beta = {beta} must be positive"));
        }
        if alpha + beta >= 2.0 {
            return fail(format!("alpha + beta = {} must be below 2", alpha + beta));
        }
        if beta_prime <= beta {
            return fail(format!("beta' = {beta_prime} must exceed beta = {beta}"));
        }
        if beta_prime >= 2.0 - alpha {
            return fail(format!("beta' = {beta_prime} must be below 2 - alpha = {}", 2.0 - alpha));
        }
        Ok(())
    }

    /// δ^{α+β′}, the base-case threshold.
    pub fn threshold(&self, delta: f64) -> f64 {
        delta.powf(self.alpha + self.beta_prime)
    }
}

/// Parameters of one induction run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleParams {
    pub exponents: ExponentParams,
    pub delta0: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub sigma: f64,
    /// Stand-in for ν/3; exceeding it is reported, not rejected.
    pub delta0_cap: f64,
}

impl ScheduleParams {
    pub fn new(exponents: ExponentParams, delta0: f64, mu: f64, epsilon: f64, sigma: f64) -> Self {
        ScheduleParams { exponents, delta0, mu, epsilon, sigma, delta0_cap: 1.0 / (3.0 * std::f64::consts::E) }
    }

    pub fn validate(&self) -> Result<()> {
        self.exponents.validate()?;
        if !(self.delta0 > 0.0 && self.delta0 < (-1.0f64).exp()) {
            return Err(Error::DeltaOutOfRange { delta: self.delta0 });
        }
        if !(self.mu > 0.0) {
            return Err(Error::NonPositive { name: "mu", value: self.mu });
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidParameters(format!("sigma = {} must be nonnegative", self.sigma)));
        }
        Ok(())
    }

    /// Assumptions the scheduler cannot check and reports instead.
    pub fn assumptions(&self) -> Vec<String> {
        let mut out = vec![
            "delta0 is small enough for the base-case and recursive estimates".to_string(),
            "the linearized constant is within (1 + epsilon) of its value at the base point".to_string(),
        ];
        if self.delta0 > self.delta0_cap {
            out.push(format!("delta0 = {} exceeds the neighbourhood cap {}", self.delta0, self.delta0_cap));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Schedule {
    /// log δ_k for k = 0..=k*.
    pub log_deltas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub k_star: usize,
}

/// log δ_k = α^k log δ₀.
pub fn log_delta(log_delta0: f64, alpha: f64, k: usize) -> f64 {
    if k <= i32::MAX as usize {
        alpha.powi(k as i32) * log_delta0
    } else {
        alpha.powf(k as f64) * log_delta0
    }
}

/// Scales up to and including the first k with δ_k^{α+β′} ≤ μ.
pub fn schedule(params: &ScheduleParams) -> Result<Schedule> {
    params.validate()?;
    let ExponentParams { alpha, beta_prime, .. } = params.exponents;
    let l0 = params.delta0.ln();
    let lmu = params.mu.ln();
    let mut logs = Vec::new();
    let mut k = 0;
    loop {
        let l = log_delta(l0, alpha, k);
        logs.push(l);
        if (alpha + beta_prime) * l <= lmu {
            break;
        }
        k += 1;
        if k > MAX_STEPS {
            return Err(Error::ScheduleOverflow { limit: MAX_STEPS });
        }
    }
    let mut deltas: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    deltas[0] = params.delta0;
    Ok(Schedule { log_deltas: logs, deltas, k_star: k })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AccumulatedFactor {
    pub product: f64,
    pub log_bound: f64,
}

/// δ_k^β computed from log δ_k.
fn delta_beta(params: &ScheduleParams, k: usize) -> f64 {
    (params.exponents.beta * log_delta(params.delta0.ln(), params.exponents.alpha, k)).exp()
}

/// ∏_{k<k*} (1 + δ_k^β) exp(σ δ_k^β) and (1 + σ) Σ_{k≥0} δ₀^{α^k β}.
pub fn accumulated_factor(params: &ScheduleParams, k_star: usize) -> Result<AccumulatedFactor> {
    params.validate()?;
    let mut product = 1.0;
    for k in 0..k_star {
        let t = delta_beta(params, k);
        product *= (1.0 + t) * (params.sigma * t).exp();
    }
    let mut series = 0.0;
    for k in 0.. {
        let t = delta_beta(params, k);
        series += t;
        if t < SERIES_CUTOFF {
            break;
        }
    }
    Ok(AccumulatedFactor { product, log_bound: (1.0 + params.sigma) * series })
}

/// The full product over all k ≥ 0, summed until terms drop below the cutoff.
pub fn full_product(params: &ScheduleParams) -> f64 {
    let mut log_p = 0.0;
    for k in 0.. {
        let t = delta_beta(params, k);
        log_p += t.ln_1p() + params.sigma * t;
        if t < SERIES_CUTOFF {
            break;
        }
    }
    log_p.exp()
}

/// κ_k = κ₀ exp(Σ_{i<k} δ_i^β) for k = 0..=k*.
pub fn kappa_evolution(params: &ScheduleParams, k_star: usize, kappa0: f64) -> Result<Vec<f64>> {
    params.validate()?;
    if !(kappa0 > 1.0) {
        return Err(Error::InvalidParameters(format!("kappa0 = {kappa0} must exceed 1")));
    }
    let mut out = Vec::with_capacity(k_star + 1);
    let mut s = 0.0;
    out.push(kappa0);
    for k in 0..k_star {
        s += delta_beta(params, k);
        out.push(kappa0 * s.exp());
    }
    Ok(out)
}

/// Largest δ₀ on the 10⁻⁶ grid whose full product is at most 1 + ε.
pub fn choose_delta0(epsilon: f64, sigma: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositive { name: "epsilon", value: epsilon });
    }
    let cap = (-1.0f64).exp() - DELTA0_GRID;
    let top = (cap / DELTA0_GRID).floor() as u64;
    let ok = |i: u64| {
        // β′ plays no part in the product.
        let p = ScheduleParams::new(
            ExponentParams { alpha, beta, beta_prime: beta },
            i as f64 * DELTA0_GRID,
            1.0,
            epsilon,
            sigma,
        );
        full_product(&p) <= 1.0 + epsilon
    };
    if ok(top) {
        return Ok(top as f64 * DELTA0_GRID);
    }
    if !ok(1) {
        return Err(Error::InvalidParameters(format!(
            "no delta0 >= {DELTA0_GRID} meets the product constraint for epsilon = {epsilon}"
        )));
    }
    let (mut lo, mut hi) = (1u64, top);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo as f64 * DELTA0_GRID)
}

/// (1 + ε)^{σ+3}.
pub fn final_bound(epsilon: f64, sigma: f64) -> f64 {
    (1.0 + epsilon).powf(sigma + 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(delta0: f64, mu: f64) -> ScheduleParams {
        ScheduleParams::new(ExponentParams { alpha: 1.5, beta: 0.3, beta_prime: 0.4 }, delta0, mu, 0.1, 2.0)
    }

    #[test]
    fn stopping_index_example() {
        let s = schedule(&params(0.1, 1e-10)).unwrap();
        assert_eq!(s.k_star, 5);
        assert_eq!(s.deltas.len(), 6);
        assert_relative_eq!(s.log_deltas[5], -(1.5f64.powi(5)) * 10f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn immediate_base_case() {
        let s = schedule(&params(0.1, 0.5)).unwrap();
        assert_eq!(s.k_star, 0);
        assert_eq!(s.deltas, vec![0.1]);
        let a = accumulated_factor(&params(0.1, 0.5), 0).unwrap();
        assert_eq!(a.product, 1.0);
    }

    #[test]
    fn validation_boundaries() {
        for (a, b, bp) in [(1.0, 0.3, 0.4), (1.5, 0.0, 0.4), (1.7, 0.3, 0.31), (1.5, 0.3, 0.3), (1.5, 0.3, 0.5)] {
            assert!(ExponentParams::new(a, b, bp).is_err(), "{a} {b} {bp}");
        }
        assert!(ExponentParams::new(1.5, 0.3, 0.4).is_ok());
    }

    #[test]
    fn kappa_three_steps() {
        let p = params(0.1, 1e-10);
        let k = kappa_evolution(&p, 3, 1.01).unwrap();
        let s: f64 = (0..3).map(|i| 0.1f64.powf(1.5f64.powi(i) * 0.3)).sum();
        assert_relative_eq!(k[3], 1.01 * s.exp(), max_relative = 1e-14);
        assert!(k.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn delta0_choice_properties() {
        let top = ((-1.0f64).exp() - 1e-6) / 1e-6;
        let top = top.floor() * 1e-6;
        let at_top = full_product(&ScheduleParams::new(ExponentParams { alpha: 1.5, beta: 0.3, beta_prime: 0.3 }, top, 1.0, 1.0, 2.0));
        assert_eq!(choose_delta0(2.0 * at_top, 2.0, 1.5, 0.3).unwrap(), top);
        let d = choose_delta0(0.1, 2.0, 1.5, 0.3).unwrap();
        let p = |x: f64| full_product(&ScheduleParams::new(ExponentParams { alpha: 1.5, beta: 0.3, beta_prime: 0.3 }, x, 1.0, 0.1, 2.0));
        assert!(p(d) <= 1.1 && p(d + 1e-6) > 1.1);
        assert!(choose_delta0(0.0, 2.0, 1.5, 0.3).is_err());
    }

    #[test]
    fn final_bound_examples() {
        assert_eq!(final_bound(0.0, 2.0), 1.0);
        assert_relative_eq!(final_bound(0.01, 2.0), 1.01f64.powi(5), max_relative = 1e-15);
    }
}

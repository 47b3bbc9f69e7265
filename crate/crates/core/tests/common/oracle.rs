//! 256-bit recomputation of the schedule quantities.

use bl_scales::schedule::{ExponentParams, ScheduleParams};
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type F = FBig<HalfEven, 2>;
pub const BITS: usize = 256;

pub fn big(x: f64) -> F {
    F::try_from(x).unwrap().with_precision(BITS).value()
}

pub fn small(x: &F) -> f64 {
    x.to_f64().value()
}

/// Extended-precision recomputation of the schedule quantities.
pub struct Oracle {
    pub log_deltas: Vec<F>,
    pub k_star: usize,
    /// Margin of the stopping comparison at k*, in log units.
    pub margin: f64,
    pub product: F,
    pub log_bound: F,
    pub kappa: Vec<F>,
}

pub fn oracle(p: &ScheduleParams, kappa0: f64) -> Oracle {
    let e = p.exponents;
    let alpha = big(e.alpha);
    let beta = big(e.beta);
    let ab = big(e.alpha) + big(e.beta_prime);
    let l0 = big(p.delta0).ln();
    let lmu = big(p.mu).ln();
    let sigma = big(p.sigma);
    let one = big(1.0);

    let mut logs = vec![l0.clone()];
    let mut k = 0;
    loop {
        let test = &ab * &logs[k] - &lmu;
        if test <= F::ZERO {
            break;
        }
        logs.push(&logs[k] * &alpha);
        k += 1;
    }
    let margin = small(&(&ab * &logs[k] - &lmu)).abs().min(if k > 0 {
        small(&(&ab * &logs[k - 1] - &lmu)).abs()
    } else {
        f64::INFINITY
    });

    let mut product = one.clone();
    let mut s = F::ZERO.with_precision(BITS).value();
    let mut kappa = vec![big(kappa0)];
    for l in logs.iter().take(k) {
        let t = (&beta * l).exp();
        product = product * (&one + &t) * (&sigma * &t).exp();
        s = s + &t;
        kappa.push(big(kappa0) * s.exp());
    }
    let mut series = F::ZERO.with_precision(BITS).value();
    let mut l = l0;
    loop {
        let t = (&beta * &l).exp();
        let done = small(&t) < 1e-40;
        series = series + t;
        if done {
            break;
        }
        l = l * &alpha;
    }
    Oracle { log_deltas: logs, k_star: k, margin, product, log_bound: (&one + &sigma) * series, kappa }
}

/// Admissible exponents and schedule inputs with a starting κ.
pub fn random_params(r: &mut ChaCha8Rng) -> (ScheduleParams, f64) {
    let alpha = r.random_range(1.05..1.9);
    let room = 2.0 - alpha;
    let beta = r.random_range(0.01 * room..0.9 * room);
    let beta_prime = r.random_range(beta + 0.01 * (room - beta)..room - 0.01 * (room - beta));
    let delta0 = r.random_range(1e-4..0.36);
    let mu = 10f64.powf(-r.random_range(1.0..40.0));
    let sigma = r.random_range(0.0..5.0);
    let kappa0 = r.random_range(1.01..4.0);
    let e = ExponentParams::new(alpha, beta, beta_prime).unwrap();
    (ScheduleParams::new(e, delta0, mu, 0.1, sigma), kappa0)
}

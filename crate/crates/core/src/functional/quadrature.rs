//! Deterministic quadrature: midpoint tensor grids, uniform Monte Carlo and
//! gaussian importance sampling over boxes and balls.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::input::{BoxDomain, MAX_DIM};
use crate::error::{Error, Result};
use crate::linalg::{logdet_spd, sym_pow};

/// Samples drawn from one random stream.
pub const CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TensorGrid,
    MonteCarlo,
    Importance,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tensor-grid" | "grid" => Ok(Method::TensorGrid),
            "monte-carlo" | "mc" => Ok(Method::MonteCarlo),
            "importance" | "is" => Ok(Method::Importance),
            _ => Err(format!("unknown method `{s}` (tensor-grid, monte-carlo, importance)")),
        }
    }
}

/// Gaussian proposal with density det(P)^{1/2} exp(−π⟨P(x−m), x−m⟩).
#[derive(Debug, Clone)]
pub struct GaussianProposal {
    pub mean: Vec<f64>,
    pub precision: DMatrix<f64>,
}

impl GaussianProposal {
    /// Proposal whose standard deviations are a quarter of the box half-widths.
    pub fn for_box(b: &BoxDomain) -> Self {
        let d = b.dim();
        let mut p = DMatrix::zeros(d, d);
        for (i, h) in b.half_widths().iter().enumerate() {
            let sd = (h / 4.0).max(1e-300);
            p[(i, i)] = 1.0 / (2.0 * std::f64::consts::PI * sd * sd);
        }
        GaussianProposal { mean: b.center(), precision: p }
    }

    /// Same mean, standard deviations multiplied by `factor`.
    pub fn widened(&self, factor: f64) -> Self {
        GaussianProposal { mean: self.mean.clone(), precision: &self.precision / (factor * factor) }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    pub method: Method,
    /// Points per axis (grid) or sample count (Monte Carlo).
    pub resolution: usize,
    pub seed: u64,
    pub domain: Option<BoxDomain>,
    pub proposal: Option<GaussianProposal>,
}

impl QuadratureSpec {
    pub fn grid(points_per_axis: usize) -> Self {
        QuadratureSpec { method: Method::TensorGrid, resolution: points_per_axis, seed: 0, domain: None, proposal: None }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        QuadratureSpec { method: Method::MonteCarlo, resolution: samples, seed, domain: None, proposal: None }
    }

    pub fn importance(samples: usize, seed: u64, proposal: Option<GaussianProposal>) -> Self {
        QuadratureSpec { method: Method::Importance, resolution: samples, seed, domain: None, proposal }
    }

    pub fn with_domain(mut self, d: BoxDomain) -> Self {
        self.domain = Some(d);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::TensorGrid if self.resolution < 2 => {
                Err(Error::InvalidQuadrature(format!("grid needs >= 2 points per axis, got {}", self.resolution)))
            }
            Method::MonteCarlo | Method::Importance if self.resolution < 1000 => {
                Err(Error::InvalidQuadrature(format!("Monte Carlo needs >= 1000 samples, got {}", self.resolution)))
            }
            _ => Ok(()),
        }
    }
}

/// Integration region in ℝⁿ.
#[derive(Debug, Clone)]
pub enum Region {
    Box(BoxDomain),
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Box(b) => b.dim(),
            Region::Ball { center, .. } => center.len(),
        }
    }

    pub fn bounding_box(&self) -> BoxDomain {
        match self {
            Region::Box(b) => b.clone(),
            Region::Ball { center, radius } => BoxDomain::centered(center, &vec![*radius; center.len()]),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Box(b) => b.contains(x),
            Region::Ball { center, radius } => {
                center.iter().zip(x).map(|(c, x)| (x - c) * (x - c)).sum::<f64>() <= radius * radius
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Region::Box(b) => b.volume(),
            Region::Ball { center, radius } => ball_volume(center.len(), *radius),
        }
    }
}

pub fn ball_volume(n: usize, r: f64) -> f64 {
    let h = n as f64 / 2.0;
    (h * std::f64::consts::PI.ln() - ln_gamma(h + 1.0)).exp() * r.powi(n as i32)
}

/// A quadrature estimate with its error indicators.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Estimate {
    pub value: f64,
    /// Monte Carlo standard error (0 for grids).
    pub stderr: f64,
    /// Richardson estimate for grids, equal to `stderr` for Monte Carlo.
    pub error_estimate: f64,
    pub evaluations: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, ..Default::default() }
    }

    /// Combined error indicator used for tolerance checks.
    pub fn error(&self) -> f64 {
        self.stderr.max(self.error_estimate)
    }
}

pub type Integrand<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// ChaCha stream for one chunk of one tagged integration.
pub fn chunk_rng(seed: u64, tag: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ chunk);
    rng
}

/// Integrate every function over `region` under one set of nodes or samples.
///
/// `tag` separates random streams of unrelated integrations sharing a seed.
pub fn integrate_many(fs: &[Integrand], region: &Region, q: &QuadratureSpec, tag: u64) -> Result<Vec<Estimate>> {
    q.validate()?;
    let n = region.dim();
    if n == 0 || n > MAX_DIM {
        return Err(Error::UnsupportedDimension { dim: n });
    }
    match q.method {
        Method::TensorGrid => grid(fs, region, q.resolution),
        Method::MonteCarlo => monte_carlo(fs, region, q, tag),
        Method::Importance => {
            let prop = q.proposal.clone().unwrap_or_else(|| GaussianProposal::for_box(&region.bounding_box()));
            if prop.mean.len() != n || prop.precision.nrows() != n {
                return Err(Error::DimensionMismatch { what: "proposal", expected: n, found: prop.mean.len() });
            }
            importance(fs, region, q, &prop, tag)
        }
    }
}

pub fn integrate(f: Integrand, region: &Region, q: &QuadratureSpec, tag: u64) -> Result<Estimate> {
    Ok(integrate_many(&[f], region, q, tag)?[0])
}

fn midpoint_sums(fs: &[Integrand], region: &Region, n_axis: usize) -> Vec<f64> {
    let b = region.bounding_box();
    let d = b.dim();
    let h: Vec<f64> = (0..d).map(|i| b.width(i) / n_axis as f64).collect();
    let cell: f64 = h.iter().product();
    let inner: usize = n_axis.pow(d as u32 - 1);
    let is_box = matches!(region, Region::Box(_));
    let partial: Vec<Vec<f64>> = (0..n_axis)
        .into_par_iter()
        .map(|i0| {
            let mut acc = vec![0.0; fs.len()];
            let mut x = [0.0; MAX_DIM];
            x[0] = b.lo[0] + (i0 as f64 + 0.5) * h[0];
            for flat in 0..inner {
                let mut r = flat;
                for i in (1..d).rev() {
                    x[i] = b.lo[i] + ((r % n_axis) as f64 + 0.5) * h[i];
                    r /= n_axis;
                }
                let xs = &x[..d];
                if !is_box && !region.contains(xs) {
                    continue;
                }
                for (a, f) in acc.iter_mut().zip(fs) {
                    *a += f(xs);
                }
            }
            acc
        })
        .collect();
    let mut tot = vec![0.0; fs.len()];
    for p in partial {
        for (t, v) in tot.iter_mut().zip(p) {
            *t += v;
        }
    }
    tot.iter().map(|s| s * cell).collect()
}

fn grid(fs: &[Integrand], region: &Region, n_axis: usize) -> Result<Vec<Estimate>> {
    let d = region.dim() as u32;
    let fine = midpoint_sums(fs, region, n_axis);
    let coarse = if n_axis >= 4 { Some(midpoint_sums(fs, region, n_axis / 2)) } else { None };
    let evals = n_axis.pow(d) + coarse.as_ref().map_or(0, |_| (n_axis / 2).pow(d));
    Ok(fine
        .iter()
        .enumerate()
        .map(|(k, &v)| Estimate {
            value: v,
            stderr: 0.0,
            error_estimate: coarse.as_ref().map_or(v.abs(), |c| (v - c[k]).abs() / 3.0),
            evaluations: evals,
        })
        .collect())
}

/// Per-chunk sums of w·f and (w·f)² over the chunk's samples.
fn run_chunks<S>(fs: &[Integrand], dim: usize, total: usize, seed: u64, tag: u64, sample: S) -> Vec<(f64, f64)>
where
    S: Fn(&mut ChaCha8Rng, &mut [f64]) -> f64 + Sync,
{
    let chunks = total.div_ceil(CHUNK);
    let parts: Vec<Vec<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, tag, c as u64);
            let count = CHUNK.min(total - c * CHUNK);
            let mut acc = vec![(0.0, 0.0); fs.len()];
            let mut buf = [0.0; MAX_DIM];
            let x = &mut buf[..dim];
            for _ in 0..count {
                let w = sample(&mut rng, x);
                if w == 0.0 {
                    continue;
                }
                for (a, f) in acc.iter_mut().zip(fs) {
                    let v = w * f(x);
                    a.0 += v;
                    a.1 += v * v;
                }
            }
            acc
        })
        .collect();
    let mut tot = vec![(0.0, 0.0); fs.len()];
    for p in parts {
        for (t, v) in tot.iter_mut().zip(p) {
            t.0 += v.0;
            t.1 += v.1;
        }
    }
    tot
}

fn summarize(sums: Vec<(f64, f64)>, total: usize) -> Vec<Estimate> {
    let nf = total as f64;
    sums.into_iter()
        .map(|(s, s2)| {
            let mean = s / nf;
            let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
            let se = (var / nf).sqrt();
            Estimate { value: mean, stderr: se, error_estimate: se, evaluations: total }
        })
        .collect()
}

fn monte_carlo(fs: &[Integrand], region: &Region, q: &QuadratureSpec, tag: u64) -> Result<Vec<Estimate>> {
    let n = region.dim();
    let vol = region.volume();
    let sums = match region {
        Region::Box(b) => {
            let lo = b.lo.clone();
            let w: Vec<f64> = (0..n).map(|i| b.width(i)).collect();
            run_chunks(fs, n, q.resolution, q.seed, tag, move |rng, x| {
                for i in 0..n {
                    x[i] = lo[i] + w[i] * rng.random::<f64>();
                }
                vol
            })
        }
        Region::Ball { center, radius } => {
            let (c, r) = (center.clone(), *radius);
            run_chunks(fs, n, q.resolution, q.seed, tag, move |rng, x| {
                sample_ball(rng, &c, r, x);
                vol
            })
        }
    };
    Ok(summarize(sums, q.resolution))
}

/// Uniform point in the ball B(c, r).
pub fn sample_ball(rng: &mut ChaCha8Rng, c: &[f64], r: f64, x: &mut [f64]) {
    let n = c.len();
    let mut norm2 = 0.0;
    for xi in x.iter_mut().take(n) {
        let z: f64 = rng.sample(StandardNormal);
        *xi = z;
        norm2 += z * z;
    }
    let rad = r * rng.random::<f64>().powf(1.0 / n as f64) / norm2.sqrt().max(1e-300);
    for i in 0..n {
        x[i] = c[i] + x[i] * rad;
    }
}

fn importance(
    fs: &[Integrand],
    region: &Region,
    q: &QuadratureSpec,
    prop: &GaussianProposal,
    tag: u64,
) -> Result<Vec<Estimate>> {
    let n = region.dim();
    let ld = logdet_spd(&prop.precision)
        .ok_or_else(|| Error::InvalidQuadrature("proposal precision is not positive definite".into()))?;
    let root = sym_pow(&(&prop.precision * (2.0 * std::f64::consts::PI)), -0.5);
    let mean = prop.mean.clone();
    let p = prop.precision.clone();
    let region = region.clone();
    let sums = run_chunks(fs, n, q.resolution, q.seed, tag, move |rng, x| {
        let mut z = [0.0; MAX_DIM];
        for zi in z.iter_mut().take(n) {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let mut s = mean[i];
            for k in 0..n {
                s += root[(i, k)] * z[k];
            }
            x[i] = s;
        }
        if !region.contains(x) {
            return 0.0;
        }
        let mut quad = 0.0;
        for i in 0..n {
            let di = x[i] - mean[i];
            let mut row = 0.0;
            for k in 0..n {
                row += p[(i, k)] * (x[k] - mean[k]);
            }
            quad += di * row;
        }
        (-0.5 * ld + std::f64::consts::PI * quad).exp()
    });
    Ok(summarize(sums, q.resolution))
}

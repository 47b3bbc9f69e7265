//! Nonnegative input functions on ℝ^k with support boxes and known masses.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inv_spd, logdet_spd, sym_eigenvalues, symmetrize};

/// Largest supported input or ambient dimension for stack buffers.
pub const MAX_DIM: usize = 16;

/// Support boxes of gaussians extend this many standard deviations.
pub const GAUSSIAN_SUPPORT_SIGMAS: f64 = 9.0;

/// Axis-aligned box ∏ [lo_i, hi_i].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        BoxDomain { lo, hi }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        BoxDomain { lo: vec![lo; dim], hi: vec![hi; dim] }
    }

    pub fn centered(center: &[f64], half: &[f64]) -> Self {
        BoxDomain {
            lo: center.iter().zip(half).map(|(c, h)| c - h).collect(),
            hi: center.iter().zip(half).map(|(c, h)| c + h).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        (self.hi[i] - self.lo[i]).max(0.0)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn is_empty(&self) -> bool {
        (0..self.dim()).any(|i| self.hi[i] <= self.lo[i])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lo).zip(&self.hi).all(|((x, l), h)| *x >= *l && *x <= *h)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (h - l)).collect()
    }

    /// Box with the same centre and half-widths multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let c = self.center();
        let h: Vec<f64> = self.half_widths().iter().map(|w| w * factor).collect();
        BoxDomain::centered(&c, &h)
    }

    pub fn intersect(&self, other: &BoxDomain) -> Self {
        BoxDomain {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
        }
    }

    pub fn minkowski_sum(&self, other: &BoxDomain) -> Self {
        BoxDomain {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a + b).collect(),
        }
    }

    /// The box {p − w : w ∈ self}.
    pub fn reflected_about(&self, p: &[f64]) -> Self {
        BoxDomain {
            lo: p.iter().zip(&self.hi).map(|(p, h)| p - h).collect(),
            hi: p.iter().zip(&self.lo).map(|(p, l)| p - l).collect(),
        }
    }

    /// Length of [a, b] ∩ [lo_i, hi_i].
    fn overlap(&self, i: usize, a: f64, b: f64) -> f64 {
        (b.min(self.hi[i]) - a.max(self.lo[i])).max(0.0)
    }
}

/// Values on the regular grid lo + i·step (row-major, last axis fastest),
/// extended by zero and interpolated multilinearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFn {
    pub lo: Vec<f64>,
    pub step: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl SampledFn {
    pub fn new(lo: Vec<f64>, step: Vec<f64>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::DimensionMismatch { what: "sampled values", expected, found: values.len() });
        }
        if lo.len() != shape.len() || step.len() != shape.len() {
            return Err(Error::DimensionMismatch { what: "sampled grid", expected: shape.len(), found: lo.len() });
        }
        if step.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidParameters("sampled grid step must be positive".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameters("sampled values must be finite and nonnegative".into()));
        }
        Ok(SampledFn { lo, step, shape, values })
    }

    /// Sample `f` at the nodes of `domain` with `n` nodes per axis.
    pub fn from_fn(domain: &BoxDomain, n: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = domain.dim();
        let step: Vec<f64> = (0..d).map(|i| domain.width(i) / (n - 1).max(1) as f64).collect();
        let shape = vec![n; d];
        let total = n.pow(d as u32);
        let mut values = Vec::with_capacity(total);
        let mut x = vec![0.0; d];
        for flat in 0..total {
            let mut r = flat;
            for i in (0..d).rev() {
                x[i] = domain.lo[i] + (r % n) as f64 * step[i];
                r /= n;
            }
            values.push(f(&x).max(0.0));
        }
        SampledFn { lo: domain.lo.clone(), step, shape, values }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.step.iter().product()
    }

    /// Exact integral of the interpolant.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn support(&self) -> BoxDomain {
        let lo = self.lo.iter().zip(&self.step).map(|(l, h)| l - h).collect();
        let hi = self
            .lo
            .iter()
            .zip(&self.step)
            .zip(&self.shape)
            .map(|((l, h), n)| l + *n as f64 * h)
            .collect();
        BoxDomain { lo, hi }
    }

    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(i, k)| self.lo[i] + *k as f64 * self.step[i]).collect()
    }

    fn at(&self, idx: &[i64]) -> f64 {
        let mut flat = 0usize;
        for (i, &k) in idx.iter().enumerate() {
            if k < 0 || k >= self.shape[i] as i64 {
                return 0.0;
            }
            flat = flat * self.shape[i] + k as usize;
        }
        self.values[flat]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut base = [0i64; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for i in 0..d {
            let s = (x[i] - self.lo[i]) / self.step[i];
            if s <= -1.0 || s >= self.shape[i] as f64 {
                return 0.0;
            }
            let b = s.floor();
            base[i] = b as i64;
            frac[i] = s - b;
        }
        let mut acc = 0.0;
        let mut idx = [0i64; MAX_DIM];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for i in 0..d {
                if corner >> i & 1 == 1 {
                    idx[i] = base[i] + 1;
                    w *= frac[i];
                } else {
                    idx[i] = base[i];
                    w *= 1.0 - frac[i];
                }
            }
            if w != 0.0 {
                acc += w * self.at(&idx[..d]);
            }
        }
        acc
    }

    /// L¹ distance to `f` on this grid, by the rectangle rule.
    pub fn l1_distance(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        let mut s = 0.0;
        for flat in 0..self.values.len() {
            let mut r = flat;
            for i in (0..d).rev() {
                idx[i] = r % self.shape[i];
                r /= self.shape[i];
            }
            s += (self.values[flat] - f(&self.node(&idx))).abs();
        }
        s * self.cell_volume()
    }
}

/// c·exp(−π⟨A(x−m), x−m⟩).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFn {
    pub a: DMatrix<f64>,
    pub center: Vec<f64>,
    pub c: f64,
}

impl GaussianFn {
    /// Unit-mass gaussian with precision A centred at m.
    pub fn normalized(a: DMatrix<f64>, center: Vec<f64>) -> Result<Self> {
        let ld = logdet_spd(&a).ok_or(Error::NotPositiveDefinite { index: 0 })?;
        Ok(GaussianFn { a, center, c: (0.5 * ld).exp() })
    }

    pub fn mass(&self) -> f64 {
        self.c * (-0.5 * logdet_spd(&self.a).unwrap_or(f64::NEG_INFINITY)).exp()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.center.len();
        let mut q = 0.0;
        for i in 0..d {
            let di = x[i] - self.center[i];
            let mut row = 0.0;
            for k in 0..d {
                row += self.a[(i, k)] * (x[k] - self.center[k]);
            }
            q += di * row;
        }
        self.c * (-std::f64::consts::PI * q).exp()
    }

    pub fn support(&self) -> BoxDomain {
        // Marginal standard deviation along axis i is sqrt((A⁻¹)_ii / 2π).
        let cov = inv_spd(&self.a).unwrap_or_else(|| DMatrix::identity(self.a.nrows(), self.a.nrows()));
        let half: Vec<f64> = (0..self.center.len())
            .map(|i| GAUSSIAN_SUPPORT_SIGMAS * (cov[(i, i)] / (2.0 * std::f64::consts::PI)).sqrt())
            .collect();
        BoxDomain::centered(&self.center, &half)
    }

    /// Pointwise product with another gaussian, again a gaussian.
    pub fn product(&self, other: &GaussianFn) -> GaussianFn {
        let s = symmetrize(&(&self.a + &other.a));
        let si = inv_spd(&s).expect("sum of positive-definite matrices");
        let ma = DVector::from_vec(self.center.clone());
        let mb = DVector::from_vec(other.center.clone());
        let center = &si * (&self.a * &ma + &other.a * &mb);
        let diff = &ma - &mb;
        let k = &self.a * &si * &other.a;
        let e = (diff.transpose() * k * &diff)[(0, 0)];
        GaussianFn {
            a: s,
            center: center.iter().cloned().collect(),
            c: self.c * other.c * (-std::f64::consts::PI * e).exp(),
        }
    }

    pub fn min_precision(&self) -> f64 {
        sym_eigenvalues(&self.a)[0]
    }
}

pub type Callable = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A nonnegative function on ℝ^k.
#[derive(Clone)]
pub enum InputFn {
    Gaussian(GaussianFn),
    Indicator(BoxDomain),
    Sampled(Arc<SampledFn>),
    Callable { dim: usize, f: Callable, support: BoxDomain, mass: Option<f64> },
    /// Pointwise product, evaluated lazily.
    Product(Vec<InputFn>),
    /// w ↦ inner(point − w).
    Reflected { inner: Box<InputFn>, point: Vec<f64> },
    Scaled { inner: Box<InputFn>, factor: f64 },
}

impl fmt::Debug for InputFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputFn::Gaussian(g) => write!(f, "Gaussian(center={:?}, c={})", g.center, g.c),
            InputFn::Indicator(b) => write!(f, "Indicator({b:?})"),
            InputFn::Sampled(s) => write!(f, "Sampled(shape={:?})", s.shape),
            InputFn::Callable { dim, .. } => write!(f, "Callable(dim={dim})"),
            InputFn::Product(v) => write!(f, "Product({v:?})"),
            InputFn::Reflected { inner, point } => write!(f, "Reflected({inner:?}, {point:?})"),
            InputFn::Scaled { inner, factor } => write!(f, "Scaled({inner:?}, {factor})"),
        }
    }
}

impl InputFn {
    pub fn gaussian(a: DMatrix<f64>, center: Vec<f64>) -> Result<Self> {
        Ok(InputFn::Gaussian(GaussianFn::normalized(a, center)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            InputFn::Gaussian(g) => g.center.len(),
            InputFn::Indicator(b) => b.dim(),
            InputFn::Sampled(s) => s.dim(),
            InputFn::Callable { dim, .. } => *dim,
            InputFn::Product(v) => v.first().map_or(0, InputFn::dim),
            InputFn::Reflected { inner, .. } | InputFn::Scaled { inner, .. } => inner.dim(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            InputFn::Gaussian(g) => g.eval(x),
            InputFn::Indicator(b) => {
                if b.contains(x) {
                    1.0
                } else {
                    0.0
                }
            }
            InputFn::Sampled(s) => s.eval(x),
            InputFn::Callable { f, .. } => f(x).max(0.0),
            InputFn::Product(v) => {
                let mut p = 1.0;
                for g in v {
                    p *= g.eval(x);
                    if p == 0.0 {
                        break;
                    }
                }
                p
            }
            InputFn::Reflected { inner, point } => {
                let mut y = [0.0; MAX_DIM];
                for i in 0..point.len() {
                    y[i] = point[i] - x[i];
                }
                inner.eval(&y[..point.len()])
            }
            InputFn::Scaled { inner, factor } => factor * inner.eval(x),
        }
    }

    /// Average over the cell x ± h/2 where this is exact and cheap, else the point value.
    pub fn cell_value(&self, x: &[f64], h: &[f64]) -> f64 {
        match self {
            InputFn::Indicator(b) => {
                let mut v = 1.0;
                for i in 0..x.len() {
                    v *= b.overlap(i, x[i] - 0.5 * h[i], x[i] + 0.5 * h[i]) / h[i];
                }
                v
            }
            InputFn::Scaled { inner, factor } => factor * inner.cell_value(x, h),
            _ => self.eval(x),
        }
    }

    pub fn support(&self) -> BoxDomain {
        match self {
            InputFn::Gaussian(g) => g.support(),
            InputFn::Indicator(b) => b.clone(),
            InputFn::Sampled(s) => s.support(),
            InputFn::Callable { support, .. } => support.clone(),
            InputFn::Product(v) => {
                let mut it = v.iter();
                let first = it.next().map(InputFn::support).unwrap_or_else(|| BoxDomain::cube(0, 0.0, 0.0));
                it.fold(first, |acc, g| acc.intersect(&g.support()))
            }
            InputFn::Reflected { inner, point } => inner.support().reflected_about(point),
            InputFn::Scaled { inner, .. } => inner.support(),
        }
    }

    /// Exact mass when available in closed form.
    pub fn mass(&self) -> Option<f64> {
        match self {
            InputFn::Gaussian(g) => Some(g.mass()),
            InputFn::Indicator(b) => Some(b.volume()),
            InputFn::Sampled(s) => Some(s.mass()),
            InputFn::Callable { mass, .. } => *mass,
            InputFn::Product(_) => None,
            InputFn::Reflected { inner, .. } => inner.mass(),
            InputFn::Scaled { inner, factor } => inner.mass().map(|m| m * factor),
        }
    }

    /// Pointwise product, collapsing pairs of gaussians into one gaussian.
    pub fn times(&self, other: &InputFn) -> InputFn {
        match (self.as_gaussian(), other.as_gaussian()) {
            (Some(a), Some(b)) => InputFn::Gaussian(a.product(&b)),
            _ => InputFn::Product(vec![self.clone(), other.clone()]),
        }
    }

    /// w ↦ self(point − w).
    pub fn reflect(&self, point: &[f64]) -> InputFn {
        match self {
            InputFn::Gaussian(g) => InputFn::Gaussian(GaussianFn {
                a: g.a.clone(),
                center: point.iter().zip(&g.center).map(|(p, c)| p - c).collect(),
                c: g.c,
            }),
            _ => InputFn::Reflected { inner: Box::new(self.clone()), point: point.to_vec() },
        }
    }

    pub fn scale(&self, factor: f64) -> InputFn {
        match self {
            InputFn::Gaussian(g) => InputFn::Gaussian(GaussianFn { c: g.c * factor, ..g.clone() }),
            InputFn::Scaled { inner, factor: f0 } => InputFn::Scaled { inner: inner.clone(), factor: f0 * factor },
            _ => InputFn::Scaled { inner: Box::new(self.clone()), factor },
        }
    }

    fn as_gaussian(&self) -> Option<GaussianFn> {
        match self {
            InputFn::Gaussian(g) => Some(g.clone()),
            _ => None,
        }
    }
}

/// The tuple (f₁, …, f_m).
#[derive(Debug, Clone)]
pub struct InputTuple {
    pub functions: Vec<InputFn>,
}

impl InputTuple {
    pub fn new(functions: Vec<InputFn>) -> Self {
        InputTuple { functions }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Gaussian inputs c_j exp(−π⟨A_j (x − m_j), x − m_j⟩) from a tuple.
    pub fn from_gaussians(g: &crate::gaussian::GaussianTuple, centers: Option<&[Vec<f64>]>) -> Self {
        let functions = g
            .blocks
            .iter()
            .zip(&g.norm_constants)
            .enumerate()
            .map(|(j, (a, c))| {
                let center = centers.map_or_else(|| vec![0.0; a.nrows()], |cs| cs[j].clone());
                InputFn::Gaussian(GaussianFn { a: a.clone(), center, c: *c })
            })
            .collect();
        InputTuple { functions }
    }

    pub fn indicators(boxes: Vec<BoxDomain>) -> Self {
        InputTuple { functions: boxes.into_iter().map(InputFn::Indicator).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_product_mass() {
        let a = GaussianFn::normalized(DMatrix::from_element(1, 1, 1.0), vec![0.0]).unwrap();
        let b = GaussianFn::normalized(DMatrix::from_element(1, 1, 3.0), vec![0.5]).unwrap();
        let p = a.product(&b);
        // (a*b)(0.5) for unit-mass gaussians with precisions 1 and 3 (variances add).
        let conv_prec: f64 = 1.0 / (1.0 + 1.0 / 3.0);
        let expect = conv_prec.sqrt() * (-std::f64::consts::PI * conv_prec * 0.25).exp();
        assert_relative_eq!(p.mass(), expect, max_relative = 1e-13);
        assert_relative_eq!(p.eval(&[0.3]), a.eval(&[0.3]) * b.eval(&[0.3]), max_relative = 1e-13);
    }

    #[test]
    fn sampled_interpolation_and_mass() {
        let s = SampledFn::new(vec![0.0], vec![0.5], vec![3], vec![1.0, 2.0, 1.0]).unwrap();
        assert_relative_eq!(s.eval(&[0.25]), 1.5);
        assert_relative_eq!(s.eval(&[-0.25]), 0.5);
        assert_eq!(s.eval(&[1.6]), 0.0);
        assert_relative_eq!(s.mass(), 2.0);
    }

    #[test]
    fn indicator_cell_average() {
        let f = InputFn::Indicator(BoxDomain::cube(1, 0.0, 1.0));
        assert_relative_eq!(f.cell_value(&[1.0], &[0.5]), 0.5);
        assert_relative_eq!(f.cell_value(&[0.5], &[0.5]), 1.0);
    }

    #[test]
    fn reflection_support() {
        let f = InputFn::Indicator(BoxDomain::cube(1, 0.0, 1.0));
        let r = f.reflect(&[3.0]);
        assert_eq!(r.support(), BoxDomain::cube(1, 2.0, 3.0));
        assert_eq!(r.eval(&[2.5]), 1.0);
    }
}

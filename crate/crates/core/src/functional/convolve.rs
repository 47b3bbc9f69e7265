//! Componentwise convolution of input tuples on regular grids (FFT based).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::input::{InputFn, InputTuple, SampledFn};
use super::quadrature::{Method, QuadratureSpec};
use crate::error::{Error, Result};

/// Default nodes per axis when the spec is not a grid.
pub fn default_points(dim: usize) -> usize {
    if dim == 1 {
        4096
    } else {
        512
    }
}

/// Grid values of `f` on `n` nodes lo + i·h per axis.
fn discretize(f: &InputFn, lo: &[f64], h: &[f64], n: &[usize]) -> Vec<f64> {
    let d = lo.len();
    let total: usize = n.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut x = vec![0.0; d];
    for flat in 0..total {
        let mut r = flat;
        for i in (0..d).rev() {
            x[i] = lo[i] + (r % n[i]) as f64 * h[i];
            r /= n[i];
        }
        out.push(f.cell_value(&x, h).max(0.0));
    }
    out
}

/// Full linear convolution of two row-major arrays.
pub fn fft_convolve(a: &[f64], sa: &[usize], b: &[f64], sb: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let d = sa.len();
    let shape: Vec<usize> = sa.iter().zip(sb).map(|(x, y)| x + y - 1).collect();
    let total: usize = shape.iter().product();
    let embed = |v: &[f64], s: &[usize]| {
        let mut buf = vec![Complex::new(0.0, 0.0); total];
        let count: usize = s.iter().product();
        for (flat, &val) in v.iter().enumerate().take(count) {
            let mut r = flat;
            let mut idx = 0;
            let mut stride = 1;
            for i in (0..d).rev() {
                idx += (r % s[i]) * stride;
                r /= s[i];
                stride *= shape[i];
            }
            buf[idx] = Complex::new(val, 0.0);
        }
        buf
    };
    let mut fa = embed(a, sa);
    let mut fb = embed(b, sb);
    let mut planner = FftPlanner::new();
    let transform = |buf: &mut Vec<Complex<f64>>, planner: &mut FftPlanner<f64>, inverse: bool| {
        let mut stride = 1;
        for axis in (0..d).rev() {
            let len = shape[axis];
            let fft = if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) };
            let outer = total / (len * stride);
            let mut line = vec![Complex::new(0.0, 0.0); len];
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * len * stride + s;
                    for k in 0..len {
                        line[k] = buf[base + k * stride];
                    }
                    fft.process(&mut line);
                    for k in 0..len {
                        buf[base + k * stride] = line[k];
                    }
                }
            }
            stride *= len;
        }
    };
    transform(&mut fa, &mut planner, false);
    transform(&mut fb, &mut planner, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    transform(&mut fa, &mut planner, true);
    let scale = 1.0 / total as f64;
    (fa.iter().map(|c| (c.re * scale).max(0.0)).collect(), shape)
}

/// Convolve one pair on a shared grid with `points` nodes per axis over the
/// Minkowski sum of the supports.
pub fn convolve_pair(f: &InputFn, g: &InputFn, points: usize) -> Result<SampledFn> {
    let d = f.dim();
    if g.dim() != d {
        return Err(Error::DimensionMismatch { what: "convolution", expected: d, found: g.dim() });
    }
    if d == 0 || d > 2 {
        return Err(Error::UnsupportedDimension { dim: d });
    }
    let sf = f.support();
    let sg = g.support();
    let h: Vec<f64> = (0..d).map(|i| (sf.width(i) + sg.width(i)) / points as f64).collect();
    if h.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::InvalidParameters("convolution supports have zero width".into()));
    }
    let nf: Vec<usize> = (0..d).map(|i| (sf.width(i) / h[i]).ceil() as usize + 1).collect();
    let ng: Vec<usize> = (0..d).map(|i| (sg.width(i) / h[i]).ceil() as usize + 1).collect();
    let a = discretize(f, &sf.lo, &h, &nf);
    let b = discretize(g, &sg.lo, &h, &ng);
    let (mut v, shape) = fft_convolve(&a, &nf, &b, &ng);
    let cell: f64 = h.iter().product();
    for x in &mut v {
        *x *= cell;
    }
    let lo = sf.lo.iter().zip(&sg.lo).map(|(a, b)| a + b).collect();
    SampledFn::new(lo, h, shape, v)
}

/// Componentwise convolution (f_j * g_j).
pub fn convolve_inputs(f: &InputTuple, g: &InputTuple, q: &QuadratureSpec) -> Result<InputTuple> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch { what: "input tuples", expected: f.len(), found: g.len() });
    }
    let mut out = Vec::with_capacity(f.len());
    for (fj, gj) in f.functions.iter().zip(&g.functions) {
        let points = match q.method {
            Method::TensorGrid => q.resolution,
            _ => default_points(fj.dim()),
        };
        out.push(InputFn::Sampled(Arc::new(convolve_pair(fj, gj, points)?)));
    }
    Ok(InputTuple::new(out))
}

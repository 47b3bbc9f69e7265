//! Smooth maps B_j : ℝⁿ → ℝ^{n_j} with exact jacobians and a quadratic
//! bound on the deviation from their affine approximations.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::functional::quadrature::{chunk_rng, sample_ball};
use crate::linalg::{rank, RANK_TOL};

pub type MapFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Step of the finite-difference jacobian check.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone)]
pub struct Submersion {
    pub n: usize,
    pub out_dim: usize,
    map: MapFn,
    jacobian: JacobianFn,
    pub base_point: Vec<f64>,
    /// κ₂ with |B(x) − L^u x| ≤ κ₂|x − u|² on the working neighbourhood.
    pub c2_bound: f64,
}

impl fmt::Debug for Submersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Submersion(ℝ^{} → ℝ^{}, κ₂ = {})", self.n, self.out_dim, self.c2_bound)
    }
}

impl Submersion {
    pub fn new(
        n: usize,
        out_dim: usize,
        map: MapFn,
        jacobian: JacobianFn,
        base_point: Vec<f64>,
        c2_bound: f64,
    ) -> Self {
        Submersion { n, out_dim, map, jacobian, base_point, c2_bound }
    }

    /// x ↦ Lx.
    pub fn linear(l: DMatrix<f64>, base_point: Vec<f64>) -> Self {
        let n = l.ncols();
        let k = l.nrows();
        let lm = l.clone();
        let map: MapFn = Arc::new(move |x: &[f64], y: &mut [f64]| {
            for i in 0..k {
                y[i] = (0..n).map(|c| lm[(i, c)] * x[c]).sum();
            }
        });
        let jacobian: JacobianFn = Arc::new(move |_: &[f64]| l.clone());
        Submersion { n, out_dim: k, map, jacobian, base_point, c2_bound: 0.0 }
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.map)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        (self.map)(x, &mut out);
        out
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.jacobian)(x)
    }

    /// L^u x = B(u) + dB(u)(x − u), stored as (dB(u), B(u) − dB(u)u).
    pub fn affine_at(&self, u: &[f64]) -> AffineMap {
        let j = self.jacobian(u);
        let bu = DVector::from_vec(self.eval(u));
        let offset = bu - &j * DVector::from_column_slice(u);
        AffineMap { matrix: j, offset: offset.iter().cloned().collect() }
    }

    /// |B(x) − L^u x|.
    pub fn deviation(&self, x: &[f64], u: &[f64]) -> f64 {
        let a = self.affine_at(u);
        let bx = self.eval(x);
        let lx = a.apply_vec(x);
        bx.iter().zip(&lx).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
    }
}

/// x ↦ Ax + b.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    #[inline]
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.matrix.ncols();
        for (i, yi) in y.iter_mut().enumerate().take(self.matrix.nrows()) {
            let mut s = self.offset[i];
            for c in 0..n {
                s += self.matrix[(i, c)] * x[c];
            }
            *yi = s;
        }
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.matrix.nrows()];
        self.apply(x, &mut y);
        y
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubmersionCheck {
    pub samples: usize,
    pub full_rank: bool,
    /// Largest ‖(B(x+hv) − B(x))/h − J(x)v‖ − 10κ₂h observed (≤ 0 passes up to rounding).
    pub fd_excess: f64,
    pub fd_ok: bool,
    /// Largest |B(x) − L^u x| / |x − u|² observed.
    pub quadratic_ratio: f64,
    pub quadratic_ok: bool,
}

impl SubmersionCheck {
    pub fn ok(&self) -> bool {
        self.full_rank && self.fd_ok && self.quadratic_ok
    }
}

/// Sample (x, u) pairs in the ball of `radius` around the base point and test
/// rank, the finite-difference jacobian and the quadratic bound.
pub fn check_submersion(s: &Submersion, radius: f64, samples: usize, seed: u64) -> SubmersionCheck {
    let mut rng = chunk_rng(seed, 7, 0);
    let n = s.n;
    let mut x = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut full_rank = true;
    let mut fd_excess = f64::NEG_INFINITY;
    let mut fd_ok = true;
    let mut qratio = 0.0f64;
    let mut quadratic_ok = true;
    for _ in 0..samples {
        sample_ball(&mut rng, &s.base_point, radius, &mut x);
        sample_ball(&mut rng, &s.base_point, radius, &mut u);
        let j = s.jacobian(&x);
        if rank(&j, RANK_TOL) < s.out_dim {
            full_rank = false;
        }
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        v.iter_mut().for_each(|a| *a /= norm);
        let xh: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + FD_STEP * b).collect();
        let (b0, b1) = (s.eval(&x), s.eval(&xh));
        let jv = &j * DVector::from_column_slice(&v);
        let err = (0..s.out_dim)
            .map(|i| ((b1[i] - b0[i]) / FD_STEP - jv[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        // Rounding in the difference quotient is of order ε|B|/h.
        let scale = b0.iter().map(|a| a.abs()).fold(1.0, f64::max);
        let excess = err - 10.0 * s.c2_bound * FD_STEP;
        fd_excess = fd_excess.max(excess);
        if excess > 1e-9 * scale {
            fd_ok = false;
        }
        let d2: f64 = x.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 > 0.0 {
            let dev = s.deviation(&x, &u);
            qratio = qratio.max(dev / d2);
            if dev > s.c2_bound * d2 + 1e-12 * scale {
                quadratic_ok = false;
            }
        }
    }
    SubmersionCheck { samples, full_rank, fd_excess, fd_ok, quadratic_ratio: qratio, quadratic_ok }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_passes_all_checks() {
        let s = Submersion::linear(DMatrix::from_row_slice(1, 2, &[1.0, -1.0]), vec![0.0, 0.0]);
        let c = check_submersion(&s, 1.0, 200, 3);
        assert!(c.ok(), "{c:?}");
        assert!(c.quadratic_ratio < 1e-12);
    }

    #[test]
    fn wrong_jacobian_is_caught() {
        let map: MapFn = Arc::new(|x: &[f64], y: &mut [f64]| y[0] = x[0] * x[0]);
        let jac: JacobianFn = Arc::new(|_: &[f64]| DMatrix::from_element(1, 1, 1.0));
        let s = Submersion::new(1, 1, map, jac, vec![0.5], 1.0);
        assert!(!check_submersion(&s, 0.2, 50, 1).fd_ok);
    }

    #[test]
    fn affine_approximation_is_exact_at_u() {
        let map: MapFn = Arc::new(|x: &[f64], y: &mut [f64]| y[0] = x[0] * x[1] + x[0]);
        let jac: JacobianFn = Arc::new(|x: &[f64]| DMatrix::from_row_slice(1, 2, &[x[1] + 1.0, x[0]]));
        let s = Submersion::new(2, 1, map, jac, vec![0.0, 0.0], 0.5);
        let u = [0.3, -0.2];
        assert!(s.deviation(&u, &u) < 1e-15);
        assert!(check_submersion(&s, 0.5, 300, 2).ok());
    }
}

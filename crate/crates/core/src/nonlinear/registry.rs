//! Named nonlinear data: Young-type data on Lie groups in exponential
//! coordinates and quadratic perturbations of the linear Young datum.

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::submersion::{JacobianFn, MapFn, Submersion};
use super::NonlinearDatum;
use crate::datum::BLDatum;
use crate::error::{Error, Result};

pub const DEFAULT_YOUNG_P: [f64; 3] = [2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
/// γ used by the `perturbed-quadratic` tag when none is given.
pub const DEFAULT_GAMMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Group {
    Euclidean(usize),
    Heisenberg,
    Affine2d,
}

impl Group {
    /// Dimension of the group.
    pub fn dim(self) -> usize {
        match self {
            Group::Euclidean(d) => d,
            Group::Heisenberg => 3,
            Group::Affine2d => 2,
        }
    }

    pub fn tag(self) -> String {
        match self {
            Group::Euclidean(d) => format!("euclidean:{d}"),
            Group::Heisenberg => "heisenberg".into(),
            Group::Affine2d => "affine-2d".into(),
        }
    }
}

impl FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "heisenberg" {
            return Ok(Group::Heisenberg);
        }
        if t == "affine-2d" || t == "affine" {
            return Ok(Group::Affine2d);
        }
        for prefix in ["euclidean:", "euclidean-", "euclidean("] {
            if let Some(rest) = t.strip_prefix(prefix) {
                let rest = rest.trim_end_matches(')');
                if let Ok(d) = rest.parse::<usize>() {
                    if (1..=8).contains(&d) {
                        return Ok(Group::Euclidean(d));
                    }
                }
            }
        }
        Err(Error::UnknownTag {
            tag: s.to_string(),
            available: vec!["heisenberg".into(), "euclidean:<d>".into(), "affine-2d".into()],
        })
    }
}

/// Registry tags accepted by [`lookup`].
pub fn available_tags() -> Vec<String> {
    vec![
        "linear".into(),
        "young-euclidean-<d>".into(),
        "young-heisenberg".into(),
        "young-affine-2d".into(),
        "perturbed-quadratic:<gamma>".into(),
    ]
}

fn unknown(tag: &str) -> Error {
    Error::UnknownTag { tag: tag.to_string(), available: available_tags() }
}

/// Resolve a registry tag with the default exponents (2/3, 2/3, 2/3).
pub fn lookup(tag: &str) -> Result<NonlinearDatum> {
    lookup_with(tag, DEFAULT_YOUNG_P)
}

pub fn lookup_with(tag: &str, p: [f64; 3]) -> Result<NonlinearDatum> {
    let t = tag.trim();
    if t == "linear" {
        return young_on_group(Group::Euclidean(1), p).map(|d| d.named("linear"));
    }
    if t == "young-heisenberg" {
        return young_on_group(Group::Heisenberg, p);
    }
    if t == "young-affine-2d" {
        return young_on_group(Group::Affine2d, p);
    }
    if let Some(rest) = t.strip_prefix("young-euclidean-") {
        let d: usize = rest.parse().map_err(|_| unknown(tag))?;
        if d == 0 || d > 8 {
            return Err(unknown(tag));
        }
        return young_on_group(Group::Euclidean(d), p);
    }
    if t == "perturbed-quadratic" {
        return perturbed_quadratic(DEFAULT_GAMMA, p);
    }
    if let Some(rest) = t.strip_prefix("perturbed-quadratic:") {
        let g: f64 = rest.parse().map_err(|_| unknown(tag))?;
        if !g.is_finite() {
            return Err(unknown(tag));
        }
        return perturbed_quadratic(g, p);
    }
    Err(unknown(tag))
}

fn check_young_p(p: [f64; 3]) -> Result<()> {
    for (j, &v) in p.iter().enumerate() {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidExponent { index: j, value: v });
        }
    }
    let r = p.iter().sum::<f64>() - 2.0;
    if r.abs() > 1e-12 {
        return Err(Error::ScalingViolation { residual: r });
    }
    Ok(())
}

/// B₁(x, y) = y, B₂(x, y) = y⁻¹·x, B₃(x, y) = x on G × G.
pub fn young_on_group(group: Group, p: [f64; 3]) -> Result<NonlinearDatum> {
    check_young_p(p)?;
    let d = group.dim();
    let n = 2 * d;
    let origin = vec![0.0; n];
    let mut first = DMatrix::zeros(d, n);
    let mut third = DMatrix::zeros(d, n);
    for i in 0..d {
        first[(i, d + i)] = 1.0;
        third[(i, i)] = 1.0;
    }
    let middle = match group {
        Group::Euclidean(_) => {
            let mut l = DMatrix::zeros(d, n);
            for i in 0..d {
                l[(i, i)] = 1.0;
                l[(i, d + i)] = -1.0;
            }
            Submersion::linear(l, origin.clone())
        }
        Group::Heisenberg => heisenberg_quotient(),
        Group::Affine2d => affine_quotient(),
    };
    let subs = vec![Submersion::linear(first, origin.clone()), middle, Submersion::linear(third, origin)];
    let name = match group {
        Group::Euclidean(d) => format!("young-euclidean-{d}"),
        Group::Heisenberg => "young-heisenberg".into(),
        Group::Affine2d => "young-affine-2d".into(),
    };
    NonlinearDatum::new(name, subs, p.to_vec())
}

/// y⁻¹·x = x − y − ½[y, x] with [a, b]₃ = a₁b₂ − a₂b₁.
fn heisenberg_quotient() -> Submersion {
    let map: MapFn = Arc::new(|z: &[f64], out: &mut [f64]| {
        let (x, y) = (&z[..3], &z[3..6]);
        out[0] = x[0] - y[0];
        out[1] = x[1] - y[1];
        out[2] = x[2] - y[2] - 0.5 * (y[0] * x[1] - y[1] * x[0]);
    });
    let jac: JacobianFn = Arc::new(|z: &[f64]| {
        let (x, y) = (&z[..3], &z[3..6]);
        DMatrix::from_row_slice(
            3,
            6,
            &[
                1.0, 0.0, 0.0, -1.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, -1.0, 0.0, //
                0.5 * y[1], -0.5 * y[0], 1.0, -0.5 * x[1], 0.5 * x[0], -1.0,
            ],
        )
    });
    // The deviation is ½|a₁b₂ − a₂b₁| ≤ ¼(|a|² + |b|²).
    Submersion::new(6, 3, map, jac, vec![0.0; 6], 0.25)
}

/// φ(s) = (eˢ − 1)/s and φ′(s), with series near zero.
fn phi(s: f64) -> (f64, f64) {
    if s.abs() < 1e-4 {
        (1.0 + s / 2.0 + s * s / 6.0 + s * s * s / 24.0, 0.5 + s / 3.0 + s * s / 8.0)
    } else {
        let e = s.exp();
        ((e - 1.0) / s, (s * e - e + 1.0) / (s * s))
    }
}

/// y⁻¹·x on the ax+b group in exponential coordinates (s, t) ↦ (eˢ, t·φ(s)).
fn affine_quotient() -> Submersion {
    fn parts(z: &[f64]) -> (f64, f64, f64, f64, f64, f64) {
        let (sx, tx, sy, ty) = (z[0], z[1], z[2], z[3]);
        let (px, _) = phi(sx);
        let (py, _) = phi(sy);
        let sigma = sx - sy;
        let (ps, _) = phi(sigma);
        let denom = sy.exp() * ps;
        let t = (tx * px - ty * py) / denom;
        (sigma, t, px, py, ps, denom)
    }
    let map: MapFn = Arc::new(|z: &[f64], out: &mut [f64]| {
        let (sigma, t, ..) = parts(z);
        out[0] = sigma;
        out[1] = t;
    });
    let jac: JacobianFn = Arc::new(|z: &[f64]| {
        let (sx, tx, sy, ty) = (z[0], z[1], z[2], z[3]);
        let (sigma, t, px, py, ps, denom) = parts(z);
        let (_, dpx) = phi(sx);
        let (_, dpy) = phi(sy);
        let (_, dps) = phi(sigma);
        let q = dps / ps;
        DMatrix::from_row_slice(
            2,
            4,
            &[
                1.0,
                0.0,
                -1.0,
                0.0,
                tx * dpx / denom - t * q,
                px / denom,
                -ty * dpy / denom - t + t * q,
                -py / denom,
            ],
        )
    });
    Submersion::new(4, 2, map, jac, vec![0.0; 4], 1.0)
}

/// Young on ℝ with B₁ = y + γx², B₂ = x − y + γxy, B₃ = x + γy².
pub fn perturbed_quadratic(gamma: f64, p: [f64; 3]) -> Result<NonlinearDatum> {
    check_young_p(p)?;
    let g = gamma;
    let b1: MapFn = Arc::new(move |z: &[f64], o: &mut [f64]| o[0] = z[1] + g * z[0] * z[0]);
    let j1: JacobianFn = Arc::new(move |z: &[f64]| DMatrix::from_row_slice(1, 2, &[2.0 * g * z[0], 1.0]));
    let b2: MapFn = Arc::new(move |z: &[f64], o: &mut [f64]| o[0] = z[0] - z[1] + g * z[0] * z[1]);
    let j2: JacobianFn = Arc::new(move |z: &[f64]| DMatrix::from_row_slice(1, 2, &[1.0 + g * z[1], -1.0 + g * z[0]]));
    let b3: MapFn = Arc::new(move |z: &[f64], o: &mut [f64]| o[0] = z[0] + g * z[1] * z[1]);
    let j3: JacobianFn = Arc::new(move |z: &[f64]| DMatrix::from_row_slice(1, 2, &[1.0, 2.0 * g * z[1]]));
    let c2 = g.abs();
    let o = vec![0.0; 2];
    let subs = vec![
        Submersion::new(2, 1, b1, j1, o.clone(), c2),
        Submersion::new(2, 1, b2, j2, o.clone(), c2),
        Submersion::new(2, 1, b3, j3, o, c2),
    ];
    NonlinearDatum::new(format!("perturbed-quadratic:{gamma}"), subs, p.to_vec())
}

/// The linear datum of `d` as a nonlinear datum.
pub fn from_linear(name: &str, d: &BLDatum) -> Result<NonlinearDatum> {
    let o = vec![0.0; d.n];
    let subs = d.maps.iter().map(|l| Submersion::linear(l.clone(), o.clone())).collect();
    NonlinearDatum::new(name.to_string(), subs, d.exponents.clone())
}

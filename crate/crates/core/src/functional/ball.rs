//! Empirical check of BL(f)·BL(g) ≤ sup_x BL(h^x)·BL(f*g) with
//! h_j^x(z) = f_j(z) g_j(L_j x − z), and its two consequences.

use nalgebra::DVector;
use serde::Serialize;

use super::convolve::{convolve_inputs, default_points};
use super::input::{InputFn, InputTuple};
use super::quadrature::{Method, QuadratureSpec};
use super::{bl_functional_tagged, input_mass, tags, FunctionalValue};
use crate::datum::BLDatum;
use crate::error::{Error, Result};

const TAG_F: u64 = 100;
const TAG_G: u64 = 101;
const TAG_FG: u64 = 102;
const TAG_H: u64 = 1000;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Side {
    pub value: f64,
    pub error: f64,
}

impl Side {
    fn of(v: &FunctionalValue) -> Self {
        Side { value: v.value, error: v.error() }
    }

    fn rel(&self) -> f64 {
        if self.value > 0.0 {
            self.error / self.value
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizedPoint {
    pub x: Vec<f64>,
    pub value: Option<f64>,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Consequence {
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BallReport {
    pub bl_f: Side,
    pub bl_g: Side,
    pub bl_fg: Side,
    pub points: Vec<LocalizedPoint>,
    /// Maximum of BL(h^x) over the supplied grid (a lower bound for the supremum).
    pub max_over_grid: Side,
    pub argmax: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// Combined relative quadrature tolerance.
    pub eps_quad: f64,
    pub holds: bool,
    /// |lhs − rhs| in units of the combined absolute error.
    pub gap_in_errors: f64,
    /// BL(f) ≤ BL(f*g), evaluated when g is a near-extremiser.
    pub convolution_monotone: Option<Consequence>,
    /// BL(f) ≤ sup_x BL(h^x), evaluated when g is a near-extremiser.
    pub localization_monotone: Option<Consequence>,
}

fn normalize(f: &InputTuple, q: &QuadratureSpec) -> Result<InputTuple> {
    let mut out = Vec::with_capacity(f.len());
    for (j, fj) in f.functions.iter().enumerate() {
        let m = input_mass(fj, q, tags::MASS)?.value;
        if !(m > 0.0) {
            return Err(Error::ZeroDenominator { index: j });
        }
        out.push(fj.scale(1.0 / m));
    }
    Ok(InputTuple::new(out))
}

/// The localized tuple h^x.
pub fn localized_tuple(datum: &BLDatum, f: &InputTuple, g: &InputTuple, x: &[f64]) -> InputTuple {
    let xv = DVector::from_column_slice(x);
    let functions = datum
        .maps
        .iter()
        .zip(f.functions.iter().zip(&g.functions))
        .map(|(l, (fj, gj))| {
            let lx: Vec<f64> = (l * &xv).iter().cloned().collect();
            fj.times(&gj.reflect(&lx))
        })
        .collect();
    InputTuple::new(functions)
}

fn combine(rels: &[f64]) -> f64 {
    3.0 * rels.iter().map(|r| r * r).sum::<f64>().sqrt()
}

/// Run the check. `g_near_extremiser` enables the two consequence checks.
pub fn ball_inequality_check(
    datum: &BLDatum,
    f: &InputTuple,
    g: &InputTuple,
    x_grid: &[Vec<f64>],
    q: &QuadratureSpec,
    g_near_extremiser: bool,
) -> Result<BallReport> {
    if x_grid.is_empty() {
        return Err(Error::InvalidParameters("empty x grid".into()));
    }
    for x in x_grid {
        if x.len() != datum.n {
            return Err(Error::DimensionMismatch { what: "grid point", expected: datum.n, found: x.len() });
        }
    }
    let f = normalize(f, q)?;
    let g = normalize(g, q)?;
    let bl_f = Side::of(&bl_functional_tagged(datum, &f, q, TAG_F)?);
    let bl_g = Side::of(&bl_functional_tagged(datum, &g, q, TAG_G)?);
    let dim = f.functions.iter().map(InputFn::dim).max().unwrap_or(1);
    let points = match q.method {
        Method::TensorGrid => q.resolution.max(default_points(dim)),
        _ => default_points(dim),
    };
    let fg = convolve_inputs(&f, &g, &QuadratureSpec::grid(points))?;
    let bl_fg = Side::of(&bl_functional_tagged(datum, &fg, q, TAG_FG)?);

    let mut points = Vec::with_capacity(x_grid.len());
    let mut best: Option<(Side, usize)> = None;
    for (i, x) in x_grid.iter().enumerate() {
        let h = localized_tuple(datum, &f, &g, x);
        let r = bl_functional_tagged(datum, &h, q, TAG_H + i as u64);
        match r {
            Ok(v) => {
                let s = Side::of(&v);
                if best.as_ref().is_none_or(|(b, _)| s.value > b.value) {
                    best = Some((s, i));
                }
                points.push(LocalizedPoint { x: x.clone(), value: Some(s.value), error: Some(s.error) });
            }
            Err(Error::ZeroDenominator { .. }) | Err(Error::MissingDomain) => {
                points.push(LocalizedPoint { x: x.clone(), value: None, error: None });
            }
            Err(e) => return Err(e),
        }
    }
    let (max_h, arg) = best.ok_or(Error::DegenerateLocalization)?;
    let lhs = bl_f.value * bl_g.value;
    let rhs = max_h.value * bl_fg.value;
    let eps_quad = combine(&[bl_f.rel(), bl_g.rel(), max_h.rel(), bl_fg.rel()]);
    let abs_err = ((bl_f.rel().powi(2) + bl_g.rel().powi(2)) * lhs * lhs
        + (max_h.rel().powi(2) + bl_fg.rel().powi(2)) * rhs * rhs)
        .sqrt();
    let gap_in_errors = if abs_err > 0.0 { (lhs - rhs).abs() / abs_err } else { 0.0 };

    let (c9, c10) = if g_near_extremiser {
        let t9 = combine(&[bl_f.rel(), bl_fg.rel()]);
        let t10 = combine(&[bl_f.rel(), max_h.rel()]);
        (
            Some(Consequence { lhs: bl_f.value, rhs: bl_fg.value, tolerance: t9, holds: bl_f.value <= bl_fg.value * (1.0 + t9) }),
            Some(Consequence { lhs: bl_f.value, rhs: max_h.value, tolerance: t10, holds: bl_f.value <= max_h.value * (1.0 + t10) }),
        )
    } else {
        (None, None)
    };

    Ok(BallReport {
        bl_f,
        bl_g,
        bl_fg,
        points,
        max_over_grid: max_h,
        argmax: x_grid[arg].clone(),
        lhs,
        rhs,
        eps_quad,
        holds: lhs <= rhs * (1.0 + eps_quad),
        gap_in_errors,
        convolution_monotone: c9,
        localization_monotone: c10,
    })
}

/// Inputs f_j = 𝟙_{[a_j, b_j]} in one dimension.
pub fn interval_indicators(bounds: &[(f64, f64)]) -> InputTuple {
    InputTuple::new(
        bounds
            .iter()
            .map(|&(a, b)| InputFn::Indicator(super::input::BoxDomain::new(vec![a], vec![b])))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{solve_extremiser, ExtremiserOptions, Init};

    #[test]
    fn extremiser_pair_is_equality_case() {
        let d = BLDatum::young(1, [2.0 / 3.0; 3]);
        let e = solve_extremiser(&d, &Init::Isotropic, &ExtremiserOptions::default()).unwrap();
        let g = InputTuple::from_gaussians(&e.gaussians, None);
        let q = QuadratureSpec::grid(160);
        let r = ball_inequality_check(&d, &g, &g, &[vec![0.0, 0.0], vec![0.3, -0.2]], &q, true).unwrap();
        assert!(r.holds);
        assert!((r.lhs - r.rhs).abs() < 1e-5 * r.lhs, "{} vs {}", r.lhs, r.rhs);
    }

    #[test]
    fn disjoint_supports_are_degenerate() {
        let d = BLDatum::loomis_whitney_2d();
        let f = interval_indicators(&[(0.0, 1.0), (0.0, 1.0)]);
        let g = interval_indicators(&[(0.0, 1.0), (0.0, 1.0)]);
        let r = ball_inequality_check(&d, &f, &g, &[vec![10.0, 10.0]], &QuadratureSpec::grid(32), false);
        assert!(matches!(r, Err(Error::DegenerateLocalization)));
    }
}

//! Numerical evaluation of the Brascamp–Lieb functional for arbitrary inputs.

pub mod ball;
pub mod convolve;
pub mod input;
pub mod poisson;
pub mod quadrature;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::datum::{validate_datum, BLDatum};
use crate::error::{Error, Result};
pub use ball::{ball_inequality_check, BallReport};
pub use convolve::convolve_inputs;
pub use input::{BoxDomain, GaussianFn, InputFn, InputTuple, SampledFn, MAX_DIM};
pub use poisson::{poisson_smooth, PoissonSmoothing};
pub use quadrature::{integrate, integrate_many, Estimate, GaussianProposal, Method, QuadratureSpec, Region};

/// Largest tolerated ratio of shell mass to domain mass.
pub const BOUNDARY_LIMIT: f64 = 0.01;
const BOUNDARY_SAMPLES: usize = 20_000;
const BOUNDARY_EXPANSION: f64 = 1.25;

/// Stream tags keep unrelated integrations on independent random streams.
pub mod tags {
    pub const NUMERATOR: u64 = 1;
    pub const BOUNDARY: u64 = 2;
    pub const MASS: u64 = 3;
}

/// Row-major copy of the maps for allocation-free evaluation.
#[derive(Debug, Clone)]
pub struct PackedMaps {
    pub n: usize,
    maps: Vec<(usize, Vec<f64>)>,
}

impl PackedMaps {
    pub fn new(maps: &[DMatrix<f64>]) -> Self {
        let n = maps.first().map_or(0, |m| m.ncols());
        let maps = maps
            .iter()
            .map(|l| {
                let mut v = Vec::with_capacity(l.nrows() * l.ncols());
                for i in 0..l.nrows() {
                    for k in 0..l.ncols() {
                        v.push(l[(i, k)]);
                    }
                }
                (l.nrows(), v)
            })
            .collect();
        PackedMaps { n, maps }
    }

    /// y = L_j x.
    #[inline]
    pub fn apply(&self, j: usize, x: &[f64], y: &mut [f64]) {
        let (r, ref v) = self.maps[j];
        for i in 0..r {
            let row = &v[i * self.n..(i + 1) * self.n];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn rows(&self, j: usize) -> usize {
        self.maps[j].0
    }
}

/// ∏_j f_j(L_j x)^{p_j}, with factors of exponent zero equal to one.
pub fn product_integrand<'a>(
    maps: &'a PackedMaps,
    p: &'a [f64],
    f: &'a InputTuple,
) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    move |x: &[f64]| {
        let mut acc = 1.0;
        let mut y = [0.0; MAX_DIM];
        for (j, fj) in f.functions.iter().enumerate() {
            if p[j] == 0.0 {
                continue;
            }
            let k = maps.rows(j);
            maps.apply(j, x, &mut y[..k]);
            let v = fj.eval(&y[..k]);
            if v <= 0.0 {
                return 0.0;
            }
            acc *= if p[j] == 1.0 { v } else { v.powf(p[j]) };
        }
        acc
    }
}

/// Mass of one input: closed form when known, otherwise quadrature on its support.
pub fn input_mass(f: &InputFn, q: &QuadratureSpec, tag: u64) -> Result<Estimate> {
    if let Some(m) = f.mass() {
        return Ok(Estimate::exact(m));
    }
    let support = f.support();
    if support.is_empty() {
        return Ok(Estimate::exact(0.0));
    }
    let region = Region::Box(support);
    let g = |x: &[f64]| f.eval(x);
    let spec = match f.dim() {
        1 => QuadratureSpec::grid(4096),
        2 => QuadratureSpec::grid(512),
        _ => QuadratureSpec::monte_carlo(q.resolution.max(100_000), q.seed),
    };
    integrate(&g, &region, &spec, tag)
}

/// Bounding box of {x : L_j x ∈ supp f_j for all j with p_j > 0}.
pub fn auto_domain(datum: &BLDatum, f: &InputTuple) -> Result<BoxDomain> {
    let n = datum.n;
    let active: Vec<usize> = (0..datum.m()).filter(|&j| datum.exponents[j] > 0.0).collect();
    let rows: usize = active.iter().map(|&j| datum.maps[j].nrows()).sum();
    let mut stacked = DMatrix::zeros(rows, n);
    let mut centers = Vec::with_capacity(rows);
    let mut halves = Vec::with_capacity(rows);
    let mut r = 0;
    for &j in &active {
        let l = &datum.maps[j];
        stacked.view_mut((r, 0), (l.nrows(), n)).copy_from(l);
        r += l.nrows();
        let s = f.functions[j].support();
        centers.extend(s.center());
        halves.extend(s.half_widths());
    }
    if crate::linalg::rank(&stacked, crate::linalg::RANK_TOL) < n {
        return Err(Error::MissingDomain);
    }
    let pinv = stacked.pseudo_inverse(1e-12).map_err(|_| Error::MissingDomain)?;
    let c: Vec<f64> = (0..n).map(|i| (0..rows).map(|k| pinv[(i, k)] * centers[k]).sum()).collect();
    let h: Vec<f64> = (0..n).map(|i| (0..rows).map(|k| pinv[(i, k)].abs() * halves[k]).sum()).collect();
    Ok(BoxDomain::centered(&c, &h))
}

/// Mass in the shell between `domain` and its 1.25-fold enlargement, relative
/// to the mass inside `domain`.
pub fn boundary_fraction(g: &(dyn Fn(&[f64]) -> f64 + Sync), domain: &BoxDomain, seed: u64) -> Result<f64> {
    let outer = domain.scaled(BOUNDARY_EXPANSION);
    let inside = |x: &[f64]| if domain.contains(x) { g(x) } else { 0.0 };
    let shell = |x: &[f64]| if domain.contains(x) { 0.0 } else { g(x) };
    let q = QuadratureSpec::monte_carlo(BOUNDARY_SAMPLES, seed);
    let e = integrate_many(&[&inside, &shell], &Region::Box(outer), &q, tags::BOUNDARY)?;
    Ok(if e[1].value == 0.0 {
        0.0
    } else if e[0].value == 0.0 {
        f64::INFINITY
    } else {
        e[1].value / e[0].value
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalValue {
    pub value: f64,
    pub stderr: f64,
    pub error_estimate: f64,
    pub numerator: Estimate,
    pub masses: Vec<f64>,
    pub boundary_fraction: f64,
    pub domain: BoxDomain,
}

impl FunctionalValue {
    pub fn error(&self) -> f64 {
        self.stderr.max(self.error_estimate)
    }
}

fn check_inputs(datum: &BLDatum, f: &InputTuple) -> Result<()> {
    let v = validate_datum(datum);
    if !v.is_empty() {
        return Err(Error::InvalidDatum(v));
    }
    if f.len() != datum.m() {
        return Err(Error::DimensionMismatch { what: "input tuple", expected: datum.m(), found: f.len() });
    }
    for (fj, k) in f.functions.iter().zip(datum.dims()) {
        if fj.dim() != k {
            return Err(Error::DimensionMismatch { what: "input dimension", expected: k, found: fj.dim() });
        }
    }
    Ok(())
}

/// BL(L, p; f) = ∫ ∏ (f_j∘L_j)^{p_j} / ∏ (∫ f_j)^{p_j}.
pub fn bl_functional(datum: &BLDatum, f: &InputTuple, q: &QuadratureSpec) -> Result<FunctionalValue> {
    bl_functional_tagged(datum, f, q, tags::NUMERATOR)
}

/// As [`bl_functional`] with an explicit random-stream tag.
pub fn bl_functional_tagged(datum: &BLDatum, f: &InputTuple, q: &QuadratureSpec, tag: u64) -> Result<FunctionalValue> {
    check_inputs(datum, f)?;
    q.validate()?;
    let mut masses = Vec::with_capacity(f.len());
    let mut denom = 1.0;
    for (j, fj) in f.functions.iter().enumerate() {
        let m = input_mass(fj, q, tags::MASS)?.value;
        if !(m > 0.0) {
            return Err(Error::ZeroDenominator { index: j });
        }
        masses.push(m);
        denom *= m.powf(datum.exponents[j]);
    }
    let domain = match &q.domain {
        Some(d) => d.clone(),
        None => auto_domain(datum, f)?,
    };
    let maps = PackedMaps::new(&datum.maps);
    let g = product_integrand(&maps, &datum.exponents, f);
    let bf = boundary_fraction(&g, &domain, q.seed)?;
    if bf > BOUNDARY_LIMIT {
        return Err(Error::DomainTooSmall { boundary_fraction: bf });
    }
    let num = integrate(&g, &Region::Box(domain.clone()), q, tag)?;
    Ok(FunctionalValue {
        value: num.value / denom,
        stderr: num.stderr / denom,
        error_estimate: num.error_estimate / denom,
        numerator: num,
        masses,
        boundary_fraction: bf,
        domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn loomis_whitney_indicators_give_one() {
        let d = BLDatum::loomis_whitney_2d();
        let f = InputTuple::indicators(vec![BoxDomain::cube(1, 0.0, 1.0); 2]);
        let v = bl_functional(&d, &f, &QuadratureSpec::grid(64)).unwrap();
        assert_relative_eq!(v.value, 1.0, max_relative = 1e-12);
        assert_eq!(v.boundary_fraction, 0.0);
    }

    #[test]
    fn young_gaussians_match_closed_form() {
        let d = BLDatum::young(1, [2.0 / 3.0; 3]);
        let g = crate::gaussian::GaussianTuple::isotropic(&d);
        let f = InputTuple::from_gaussians(&g, None);
        let v = bl_functional(&d, &f, &QuadratureSpec::grid(256)).unwrap();
        assert_relative_eq!(v.value, 3f64.sqrt() / 2.0, max_relative = 1e-8);
    }

    #[test]
    fn too_small_domain_is_rejected() {
        let d = BLDatum::young(1, [2.0 / 3.0; 3]);
        let f = InputTuple::from_gaussians(&crate::gaussian::GaussianTuple::isotropic(&d), None);
        let q = QuadratureSpec::grid(64).with_domain(BoxDomain::cube(2, -0.3, 0.3));
        assert!(matches!(bl_functional(&d, &f, &q), Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn zero_mass_input_is_rejected() {
        let d = BLDatum::loomis_whitney_2d();
        let f = InputTuple::indicators(vec![BoxDomain::cube(1, 0.0, 1.0), BoxDomain::cube(1, 0.0, 0.0)]);
        assert!(matches!(
            bl_functional(&d, &f, &QuadratureSpec::grid(16)),
            Err(Error::ZeroDenominator { index: 1 })
        ));
    }
}

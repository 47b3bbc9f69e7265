//! Nonlinear data built from submersions, localized ratios on explicit input
//! families, and empirical checks of the induction-on-scales steps.
//!
//! Every value computed here is a ratio on a tested family, a lower bound
//! for the localized constant, never the constant itself.

pub mod checks;
pub mod kappa;
pub mod lie;
pub mod localized;
pub mod registry;
pub mod submersion;

use nalgebra::DMatrix;

use crate::datum::{validate_datum, BLDatum};
use crate::error::{Error, Result};
use crate::finiteness::{finiteness_check, FinitenessMode, FinitenessReport};

pub use checks::{base_case_check, perturbation_check, recursive_step_check, BaseCaseReport, PerturbationReport, RecursiveReport};
pub use kappa::{certify_product, certify_product_on_pairs, image_box, image_pairs, is_kappa_constant, KappaCheck};
pub use lie::{lie_group_young, LieRow};
pub use localized::{localized_ratio, LocalizedEstimate, LocalizedProblem, Regime};
pub use registry::{lookup, Group};
pub use submersion::{check_submersion, AffineMap, Submersion};

/// Subspace lattice budget used when checking the linearization.
const LATTICE_BUDGET: usize = 4096;

#[derive(Debug, Clone)]
pub struct NonlinearDatum {
    pub name: String,
    pub n: usize,
    pub submersions: Vec<Submersion>,
    pub exponents: Vec<f64>,
}

impl NonlinearDatum {
    pub fn new(name: String, submersions: Vec<Submersion>, exponents: Vec<f64>) -> Result<Self> {
        let n = submersions.first().map(|s| s.n).ok_or_else(|| Error::InvalidDatum(vec![crate::datum::Violation::NoMaps]))?;
        if exponents.len() != submersions.len() {
            return Err(Error::DimensionMismatch { what: "exponents", expected: submersions.len(), found: exponents.len() });
        }
        for s in &submersions {
            if s.n != n {
                return Err(Error::DimensionMismatch { what: "submersion domain", expected: n, found: s.n });
            }
        }
        Ok(NonlinearDatum { name, n, submersions, exponents })
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn m(&self) -> usize {
        self.submersions.len()
    }

    pub fn sigma(&self) -> f64 {
        self.exponents.iter().sum()
    }

    pub fn base_point(&self) -> &[f64] {
        &self.submersions[0].base_point
    }

    /// (dB(u), p).
    pub fn linearization(&self, u: &[f64]) -> Result<BLDatum> {
        if u.len() != self.n {
            return Err(Error::DimensionMismatch { what: "linearization point", expected: self.n, found: u.len() });
        }
        let maps: Vec<DMatrix<f64>> = self.submersions.iter().map(|s| s.jacobian(u)).collect();
        let d = BLDatum::new(self.n, maps, self.exponents.clone());
        let v = validate_datum(&d);
        if !v.is_empty() {
            return Err(Error::InvalidDatum(v));
        }
        Ok(d)
    }

    /// Finiteness report of the linearization at the base point; errors unless simple.
    pub fn validate(&self) -> Result<FinitenessReport> {
        let d = self.linearization(self.base_point())?;
        let mode = if d.maps.iter().all(|l| l.nrows() == 1) {
            FinitenessMode::RankOneExact
        } else {
            FinitenessMode::ExactLattice
        };
        let r = finiteness_check(&d, mode, LATTICE_BUDGET, 0)?;
        if !r.simple {
            return Err(Error::InvalidParameters(format!("linearization of `{}` at the base point is not simple", self.name)));
        }
        Ok(r)
    }

    /// max_j |B_j(x) − L^u_j x|.
    pub fn deviation(&self, x: &[f64], u: &[f64]) -> f64 {
        self.submersions.iter().map(|s| s.deviation(x, u)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_data_are_simple_at_the_origin() {
        for tag in ["linear", "young-euclidean-3", "young-heisenberg", "young-affine-2d", "perturbed-quadratic:0.01"] {
            let nd = lookup(tag).unwrap();
            let r = nd.validate().unwrap();
            assert!(r.simple, "{tag}");
        }
    }

    #[test]
    fn loomis_whitney_linearization_is_not_simple() {
        let nd = registry::from_linear("lw", &BLDatum::loomis_whitney_2d()).unwrap();
        assert!(nd.validate().is_err());
    }
}

//! Linear Brascamp–Lieb data and their basic validity checks.

use std::fmt;

use nalgebra::DMatrix;
use num_rational::Ratio;
use serde::Serialize;

use crate::linalg::{rank, Subspace, RANK_TOL};

/// Tolerance for the scaling equality Σ p_j n_j = n.
pub const SCALING_TOL: f64 = 1e-12;

/// A tuple of linear maps L_j : ℝⁿ → ℝ^{n_j} with exponents p_j.
#[derive(Debug, Clone)]
pub struct BLDatum {
    pub n: usize,
    pub maps: Vec<DMatrix<f64>>,
    pub exponents: Vec<f64>,
    /// Exponents as exact rationals when the input supplied them that way.
    pub exact_exponents: Option<Vec<Ratio<i64>>>,
}

/// One failed datum invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NoMaps,
    LengthMismatch { maps: usize, exponents: usize },
    ZeroDimension,
    WrongColumnCount { index: usize, cols: usize, n: usize },
    TooManyRows { index: usize, rows: usize, n: usize },
    NotSurjective { index: usize, rank: usize, rows: usize },
    NonFinite { index: usize },
    ExponentOutOfRange { index: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoMaps => write!(f, "datum has no maps"),
            Violation::LengthMismatch { maps, exponents } => {
                write!(f, "{maps} maps but {exponents} exponents")
            }
            Violation::ZeroDimension => write!(f, "ambient dimension is zero"),
            Violation::WrongColumnCount { index, cols, n } => {
                write!(f, "map at j={} has {cols} columns, expected {n}", index + 1)
            }
            Violation::TooManyRows { index, rows, n } => {
                write!(f, "map at j={} has {rows} rows, more than n = {n}", index + 1)
            }
            Violation::NotSurjective { index, rank, rows } => {
                write!(f, "not surjective at j={}: rank {rank} < {rows}", index + 1)
            }
            Violation::NonFinite { index } => write!(f, "non-finite entry at j={}", index + 1),
            Violation::ExponentOutOfRange { index, value } => {
                write!(f, "exponent out of range at j={}: {value}", index + 1)
            }
        }
    }
}

impl BLDatum {
    pub fn new(n: usize, maps: Vec<DMatrix<f64>>, exponents: Vec<f64>) -> Self {
        BLDatum { n, maps, exponents, exact_exponents: None }
    }

    /// Build from row-major matrices given as nested vectors.
    pub fn from_rows(n: usize, maps: &[Vec<Vec<f64>>], exponents: &[f64]) -> Self {
        let maps = maps
            .iter()
            .map(|rows| {
                let r = rows.len();
                let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
                let c = if r == 0 { n } else { flat.len() / r };
                DMatrix::from_row_slice(r, c, &flat)
            })
            .collect();
        BLDatum::new(n, maps, exponents.to_vec())
    }

    pub fn m(&self) -> usize {
        self.maps.len()
    }

    /// Output dimensions n_j.
    pub fn dims(&self) -> Vec<usize> {
        self.maps.iter().map(|l| l.nrows()).collect()
    }

    pub fn sigma(&self) -> f64 {
        self.exponents.iter().sum()
    }

    pub fn with_exponents(&self, p: &[f64]) -> Self {
        BLDatum { n: self.n, maps: self.maps.clone(), exponents: p.to_vec(), exact_exponents: None }
    }

    /// Loomis–Whitney datum on ℝ²: coordinate projections with p = (1, 1).
    pub fn loomis_whitney_2d() -> Self {
        BLDatum::from_rows(2, &[vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]], &[1.0, 1.0])
    }

    /// Young convolution datum on ℝ^d × ℝ^d with variables (x, y):
    /// L₁ = y, L₂ = x − y, L₃ = x.
    pub fn young(d: usize, p: [f64; 3]) -> Self {
        let n = 2 * d;
        let mut l1 = DMatrix::zeros(d, n);
        let mut l2 = DMatrix::zeros(d, n);
        let mut l3 = DMatrix::zeros(d, n);
        for i in 0..d {
            l1[(i, d + i)] = 1.0;
            l2[(i, i)] = 1.0;
            l2[(i, d + i)] = -1.0;
            l3[(i, i)] = 1.0;
        }
        BLDatum::new(n, vec![l1, l2, l3], p.to_vec())
    }

    /// Common row scaling of one map, used in invariance tests.
    pub fn scale_map(&self, j: usize, s: f64) -> Self {
        let mut d = self.clone();
        d.maps[j] *= s;
        d
    }
}

/// List every violated datum invariant.
pub fn validate_datum(datum: &BLDatum) -> Vec<Violation> {
    let mut out = Vec::new();
    if datum.n == 0 {
        out.push(Violation::ZeroDimension);
    }
    if datum.maps.is_empty() {
        out.push(Violation::NoMaps);
    }
    if datum.maps.len() != datum.exponents.len() {
        out.push(Violation::LengthMismatch { maps: datum.maps.len(), exponents: datum.exponents.len() });
    }
    for (j, l) in datum.maps.iter().enumerate() {
        if l.ncols() != datum.n {
            out.push(Violation::WrongColumnCount { index: j, cols: l.ncols(), n: datum.n });
            continue;
        }
        if l.iter().any(|x| !x.is_finite()) {
            out.push(Violation::NonFinite { index: j });
            continue;
        }
        if l.nrows() > datum.n {
            out.push(Violation::TooManyRows { index: j, rows: l.nrows(), n: datum.n });
        }
        let r = rank(l, RANK_TOL);
        if r < l.nrows() || l.nrows() == 0 {
            out.push(Violation::NotSurjective { index: j, rank: r, rows: l.nrows() });
        }
    }
    for (j, &p) in datum.exponents.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            out.push(Violation::ExponentOutOfRange { index: j, value: p });
        }
    }
    out
}

/// Scaling condition n = Σ p_j n_j; returns (holds, Σ p_j n_j − n).
pub fn scaling_condition(datum: &BLDatum) -> (bool, f64) {
    if let Some(exact) = &datum.exact_exponents {
        let mut s = Ratio::from_integer(-(datum.n as i64));
        for (p, l) in exact.iter().zip(&datum.maps) {
            s += *p * Ratio::from_integer(l.nrows() as i64);
        }
        let r = *s.numer() as f64 / *s.denom() as f64;
        return (*s.numer() == 0, r);
    }
    let r: f64 = datum
        .exponents
        .iter()
        .zip(&datum.maps)
        .map(|(p, l)| p * l.nrows() as f64)
        .sum::<f64>()
        - datum.n as f64;
    (r.abs() <= SCALING_TOL, r)
}

/// True iff ker L₁ ⊕ … ⊕ ker L_m = ℝⁿ.
pub fn kernel_basis_condition(datum: &BLDatum) -> bool {
    let n = datum.n;
    let kernels: Vec<Subspace> = datum.maps.iter().map(Subspace::kernel).collect();
    let total: usize = kernels.iter().map(Subspace::dim).sum();
    if total != n {
        return false;
    }
    let sum = kernels.iter().fold(Subspace::zero(n), |acc, k| acc.sum(k));
    sum.dim() == n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loomis_whitney_is_valid() {
        assert!(validate_datum(&BLDatum::loomis_whitney_2d()).is_empty());
    }

    #[test]
    fn zero_map_is_not_surjective() {
        let d = BLDatum::new(2, vec![DMatrix::zeros(1, 2)], vec![1.0]);
        let v = validate_datum(&d);
        assert!(v.contains(&Violation::NotSurjective { index: 0, rank: 0, rows: 1 }));
    }

    #[test]
    fn exponent_bounds() {
        let mut d = BLDatum::loomis_whitney_2d();
        d.exponents[0] = 1.5;
        assert_eq!(validate_datum(&d), vec![Violation::ExponentOutOfRange { index: 0, value: 1.5 }]);
    }

    #[test]
    fn scaling_examples() {
        let y = BLDatum::young(1, [2.0 / 3.0; 3]);
        let (ok, r) = scaling_condition(&y);
        assert!(ok && r.abs() < 1e-15);
        let (ok, r) = scaling_condition(&y.with_exponents(&[1.0, 1.0, 1.0]));
        assert!(!ok);
        assert_eq!(r, 1.0);
    }

    #[test]
    fn exact_rational_scaling() {
        let mut y = BLDatum::young(1, [2.0 / 3.0; 3]);
        y.exact_exponents = Some(vec![Ratio::new(2, 3); 3]);
        assert_eq!(scaling_condition(&y), (true, 0.0));
    }

    #[test]
    fn kernel_basis_examples() {
        assert!(kernel_basis_condition(&BLDatum::loomis_whitney_2d()));
        assert!(!kernel_basis_condition(&BLDatum::young(1, [2.0 / 3.0; 3])));
        let id = BLDatum::new(2, vec![DMatrix::identity(2, 2)], vec![1.0]);
        assert!(!kernel_basis_condition(&id));
    }
}

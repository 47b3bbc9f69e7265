//! Finiteness and simplicity certification through the subspace criterion
//! dim V ≤ Σ p_j dim(L_j V).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::datum::{scaling_condition, validate_datum, BLDatum};
use crate::error::{Error, Result};
use crate::linalg::Subspace;

/// Largest m for exhaustive rank-one enumeration.
pub const MAX_RANK_ONE_MAPS: usize = 24;

/// Tolerance used when comparing real-valued slacks with zero.
const SLACK_TOL: f64 = 1e-12;

/// Which family of subspaces is examined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinitenessMode {
    ExactLattice,
    RankOneExact,
    Randomized,
}

impl FinitenessMode {
    pub fn tag(self) -> &'static str {
        match self {
            FinitenessMode::ExactLattice => "exact-lattice",
            FinitenessMode::RankOneExact => "rank-one-exact",
            FinitenessMode::Randomized => "randomized",
        }
    }
}

impl std::str::FromStr for FinitenessMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact-lattice" => Ok(FinitenessMode::ExactLattice),
            "rank-one-exact" => Ok(FinitenessMode::RankOneExact),
            "randomized" => Ok(FinitenessMode::Randomized),
            _ => Err(format!("unknown mode `{s}` (exact-lattice, rank-one-exact, randomized)")),
        }
    }
}

/// Overall finiteness verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Finite,
    Infinite,
    NotCertified,
}

#[derive(Debug, Clone, Serialize)]
pub struct FinitenessReport {
    pub scaling_ok: bool,
    pub scaling_residual: f64,
    pub subspace_ok: bool,
    /// Basis vectors of a subspace with dim V > Σ p_j dim(L_j V).
    pub violating_subspace: Option<Vec<Vec<f64>>>,
    pub simple: bool,
    pub checked_family: FinitenessMode,
    /// Minimum of Σ p_j dim(L_j V) − dim V over checked proper nontrivial V.
    pub slack: Option<f64>,
    /// False when the family examined cannot support a finiteness claim.
    pub certified: bool,
    pub subspaces_checked: usize,
}

impl FinitenessReport {
    pub fn verdict(&self) -> Verdict {
        if !self.scaling_ok || !self.subspace_ok {
            Verdict::Infinite
        } else if self.certified {
            Verdict::Finite
        } else {
            Verdict::NotCertified
        }
    }
}

/// Σ p_j dim(L_j V) − dim V.
pub fn subspace_slack(datum: &BLDatum, v: &Subspace) -> f64 {
    datum
        .maps
        .iter()
        .zip(&datum.exponents)
        .map(|(l, p)| p * v.image_dim(l) as f64)
        .sum::<f64>()
        - v.dim() as f64
}

struct Tally {
    n: usize,
    min_slack: Option<f64>,
    worst: Option<(f64, Subspace)>,
    checked: usize,
}

impl Tally {
    fn new(n: usize) -> Self {
        Tally { n, min_slack: None, worst: None, checked: 0 }
    }

    fn record(&mut self, v: &Subspace, slack: f64) {
        self.checked += 1;
        if slack < -SLACK_TOL && self.worst.as_ref().is_none_or(|(s, _)| slack < *s) {
            self.worst = Some((slack, v.clone()));
        }
        if v.dim() > 0 && v.dim() < self.n {
            self.min_slack = Some(self.min_slack.map_or(slack, |s| s.min(slack)));
        }
    }

    fn finish(self, datum: &BLDatum, mode: FinitenessMode, certified: bool) -> FinitenessReport {
        let (scaling_ok, scaling_residual) = scaling_condition(datum);
        let subspace_ok = self.worst.is_none();
        let strict = match self.min_slack {
            Some(s) => s > SLACK_TOL,
            None => self.n == 1,
        };
        let simple = scaling_ok && subspace_ok && certified && strict;
        FinitenessReport {
            scaling_ok,
            scaling_residual,
            subspace_ok,
            violating_subspace: self.worst.map(|(_, v)| v.basis_vectors()),
            simple,
            checked_family: mode,
            slack: self.min_slack,
            certified,
            subspaces_checked: self.checked,
        }
    }
}

/// Check the subspace criterion on the family selected by `mode`.
///
/// `budget` caps the lattice size (exact-lattice) or the number of random
/// subspaces per dimension (randomized); it is ignored in rank-one mode.
pub fn finiteness_check(
    datum: &BLDatum,
    mode: FinitenessMode,
    budget: usize,
    seed: u64,
) -> Result<FinitenessReport> {
    let v = validate_datum(datum);
    if !v.is_empty() {
        return Err(Error::InvalidDatum(v));
    }
    match mode {
        FinitenessMode::RankOneExact => rank_one_exact(datum),
        FinitenessMode::ExactLattice => exact_lattice(datum, budget),
        FinitenessMode::Randomized => randomized(datum, budget, seed),
    }
}

fn rank_one_exact(datum: &BLDatum) -> Result<FinitenessReport> {
    let n = datum.n;
    let m = datum.m();
    for (j, l) in datum.maps.iter().enumerate() {
        if l.nrows() != 1 {
            return Err(Error::NotRankOne { index: j, rows: l.nrows() });
        }
    }
    if m > MAX_RANK_ONE_MAPS {
        return Err(Error::TooManyMaps { m, limit: MAX_RANK_ONE_MAPS });
    }
    let vecs: Vec<DVector<f64>> = datum.maps.iter().map(|l| l.row(0).transpose()).collect();
    let mut tally = Tally::new(n);
    tally.record(&Subspace::full(n), subspace_slack(datum, &Subspace::full(n)));
    for mask in 1u32..(1u32 << m) {
        let cols: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).collect();
        let mut w = DMatrix::zeros(n, cols.len());
        for (c, &j) in cols.iter().enumerate() {
            w.set_column(c, &vecs[j]);
        }
        let w = Subspace::span(&w);
        if w.dim() == n {
            continue;
        }
        let v = w.complement();
        // dim L_j V is 0 when v_j lies in W and 1 otherwise.
        let s = datum
            .exponents
            .iter()
            .zip(&vecs)
            .map(|(p, vj)| if w.contains(vj) { 0.0 } else { *p })
            .sum::<f64>()
            - v.dim() as f64;
        tally.record(&v, s);
    }
    Ok(tally.finish(datum, FinitenessMode::RankOneExact, true))
}

fn push_unique(family: &mut Vec<Subspace>, s: Subspace) -> bool {
    if family.iter().any(|t| t.same_as(&s)) {
        false
    } else {
        family.push(s);
        true
    }
}

/// Closure of the kernels under sums and intersections, capped at `budget` elements.
/// Returns the family and whether it stabilized.
pub fn kernel_lattice(datum: &BLDatum, budget: usize) -> (Vec<Subspace>, bool) {
    let n = datum.n;
    let mut family = Vec::new();
    for l in &datum.maps {
        if family.len() >= budget {
            return (family, false);
        }
        push_unique(&mut family, Subspace::kernel(l));
    }
    let mut frontier_start = 0;
    loop {
        let len = family.len();
        let mut added = false;
        // Only pairs involving at least one element from the last round are new.
        for k in frontier_start..len {
            for i in 0..=k {
                let a = family[i].clone();
                let b = family[k].clone();
                for c in [a.sum(&b), a.intersection(&b)] {
                    if c.dim() == 0 || c.dim() == n {
                        continue;
                    }
                    if family.iter().any(|t| t.same_as(&c)) {
                        continue;
                    }
                    if family.len() >= budget {
                        return (family, false);
                    }
                    family.push(c);
                    added = true;
                }
            }
        }
        if !added {
            return (family, true);
        }
        frontier_start = len;
    }
}

fn exact_lattice(datum: &BLDatum, budget: usize) -> Result<FinitenessReport> {
    let n = datum.n;
    let (family, stable) = kernel_lattice(datum, budget.max(1));
    let mut tally = Tally::new(n);
    tally.record(&Subspace::full(n), subspace_slack(datum, &Subspace::full(n)));
    let common = common_kernel(datum);
    if common.dim() > 0 {
        tally.record(&common, subspace_slack(datum, &common));
    }
    for v in &family {
        if v.dim() == 0 || v.dim() == n {
            continue;
        }
        tally.record(v, subspace_slack(datum, v));
    }
    Ok(tally.finish(datum, FinitenessMode::ExactLattice, stable))
}

/// ⋂_j ker L_j.
pub fn common_kernel(datum: &BLDatum) -> Subspace {
    let n = datum.n;
    let rows: usize = datum.maps.iter().map(|l| l.nrows()).sum();
    let mut stacked = DMatrix::zeros(rows, n);
    let mut r = 0;
    for l in &datum.maps {
        stacked.view_mut((r, 0), (l.nrows(), n)).copy_from(l);
        r += l.nrows();
    }
    Subspace::kernel(&stacked)
}

fn randomized(datum: &BLDatum, budget: usize, seed: u64) -> Result<FinitenessReport> {
    let n = datum.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new(n);
    tally.record(&Subspace::full(n), subspace_slack(datum, &Subspace::full(n)));
    let common = common_kernel(datum);
    if common.dim() > 0 {
        tally.record(&common, subspace_slack(datum, &common));
    }
    for l in &datum.maps {
        let k = Subspace::kernel(l);
        if k.dim() > 0 && k.dim() < n {
            tally.record(&k, subspace_slack(datum, &k));
        }
    }
    for k in 1..n {
        for _ in 0..budget {
            let m = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
            let v = Subspace::span(&m);
            tally.record(&v, subspace_slack(datum, &v));
        }
    }
    Ok(tally.finish(datum, FinitenessMode::Randomized, false))
}

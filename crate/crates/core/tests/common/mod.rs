//! Shared oracles and generators for the integration tests.
#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use bl_scales::datum::BLDatum;
use nalgebra::DMatrix;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Q = Ratio<i64>;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// Rank of integer vectors by exact elimination over the rationals.
pub fn exact_rank(vectors: &[Vec<i64>]) -> usize {
    let mut rows: Vec<Vec<Q>> = vectors.iter().map(|v| v.iter().map(|&x| Q::from_integer(x)).collect()).collect();
    let ncols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(piv) = (rank..rows.len()).find(|&r| rows[r][col] != Q::from_integer(0)) else { continue };
        rows.swap(rank, piv);
        let p = rows[rank][col];
        for r in 0..rows.len() {
            if r != rank && rows[r][col] != Q::from_integer(0) {
                let f = rows[r][col] / p;
                for c in 0..ncols {
                    let v = rows[rank][c];
                    rows[r][c] -= f * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// A rank-one datum with integer rows and rational exponents.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub n: usize,
    pub rows: Vec<Vec<i64>>,
    pub p: Vec<Q>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteVerdict {
    pub finite: bool,
    pub simple: bool,
}

impl RankOne {
    pub fn datum(&self) -> BLDatum {
        let maps = self
            .rows
            .iter()
            .map(|r| DMatrix::from_row_slice(1, self.n, &r.iter().map(|&x| x as f64).collect::<Vec<_>>()))
            .collect();
        let p = self.p.iter().map(|q| *q.numer() as f64 / *q.denom() as f64).collect();
        let mut d = BLDatum::new(self.n, maps, p);
        d.exact_exponents = Some(self.p.clone());
        d
    }

    /// Enumerate every subset S of the maps. V = ∩_{j∈S} ker L_j has
    /// dimension n − rank(S) and L_j V = 0 exactly when v_j ∈ span(S).
    pub fn brute_force(&self) -> BruteVerdict {
        let n = self.n as i64;
        let m = self.rows.len();
        let total: Q = self.p.iter().sum();
        let scaling = total == Q::from_integer(n);
        let mut finite = scaling;
        let mut simple = scaling;
        for mask in 0u32..(1 << m) {
            let s: Vec<Vec<i64>> = (0..m).filter(|j| mask >> j & 1 == 1).map(|j| self.rows[j].clone()).collect();
            let r = exact_rank(&s) as i64;
            let dim_v = n - r;
            if dim_v == 0 {
                continue;
            }
            let mut sum = Q::from_integer(0);
            for j in 0..m {
                let mut with = s.clone();
                with.push(self.rows[j].clone());
                if exact_rank(&with) as i64 > r {
                    sum += self.p[j];
                }
            }
            let slack = sum - Q::from_integer(dim_v);
            if slack < Q::from_integer(0) {
                finite = false;
            }
            if dim_v < n && slack <= Q::from_integer(0) {
                simple = false;
            }
        }
        BruteVerdict { finite, simple: finite && simple }
    }
}

/// Integer rows in [−2, 2] (nonzero), exponents n·w_j/Σw with integer weights,
/// rejected until every p_j ≤ 1.
pub fn random_rank_one(rng: &mut ChaCha8Rng, max_n: usize) -> RankOne {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(n..=n + 3);
    let mut rows = Vec::with_capacity(m);
    while rows.len() < m {
        let r: Vec<i64> = (0..n).map(|_| rng.random_range(-2..=2)).collect();
        if r.iter().any(|&x| x != 0) {
            rows.push(r);
        }
    }
    loop {
        let w: Vec<i64> = (0..m).map(|_| rng.random_range(1..=5)).collect();
        let s: i64 = w.iter().sum();
        let p: Vec<Q> = w.iter().map(|&wj| Q::new(n as i64 * wj, s)).collect();
        if p.iter().all(|q| *q <= Q::from_integer(1)) {
            return RankOne { n, rows, p };
        }
    }
}

/// Random rank-one data with a common kernel: the last coordinate is never read.
pub fn random_common_kernel(rng: &mut ChaCha8Rng) -> RankOne {
    let n = rng.random_range(2..=4);
    let mut d = random_rank_one_in(rng, n - 1);
    d.n = n;
    for r in &mut d.rows {
        r.push(0);
    }
    d
}

fn random_rank_one_in(rng: &mut ChaCha8Rng, n: usize) -> RankOne {
    loop {
        let d = random_rank_one(rng, n);
        if d.n == n {
            return d;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Simple rank-one data in n ≤ `max_n`, by rejection against the exact oracle.
pub fn random_simple(rng: &mut ChaCha8Rng, max_n: usize) -> RankOne {
    loop {
        let d = random_rank_one(rng, max_n);
        if d.n >= 2 && d.brute_force().simple {
            return d;
        }
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

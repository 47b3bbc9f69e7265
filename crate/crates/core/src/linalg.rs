//! Dense linear-algebra helpers: ranks, subspaces, symmetric matrix functions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative singular-value threshold used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Numerical rank: singular values above `rel_tol` times the largest one.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 || !smax.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Largest singular value.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Symmetric part (A + Aᵀ)/2.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Relative asymmetry ‖A − Aᵀ‖_F / ‖A‖_F.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.norm();
    if n == 0.0 {
        return 0.0;
    }
    (a - a.transpose()).norm() / n
}

/// Log-determinant of a symmetric positive-definite matrix, `None` if not SPD.
pub fn logdet_spd(a: &DMatrix<f64>) -> Option<f64> {
    if a.nrows() == 0 {
        return Some(0.0);
    }
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut s = 0.0;
    for i in 0..a.nrows() {
        let d = l[(i, i)];
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        s += d.ln();
    }
    Some(2.0 * s)
}

/// Inverse of an SPD matrix via Cholesky.
pub fn inv_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = a.clone().cholesky()?;
    Some(symmetrize(&chol.inverse()))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(a)).eigenvalues.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvector of the smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvector(a: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(symmetrize(a));
    let mut k = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
}

/// A^θ for symmetric positive semidefinite A.
pub fn sym_pow(a: &DMatrix<f64>, theta: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(a));
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).powf(theta)));
    symmetrize(&(q * d * q.transpose()))
}

/// Weighted geometric mean A #_θ T = A^{1/2} (A^{-1/2} T A^{-1/2})^θ A^{1/2}.
pub fn geodesic(a: &DMatrix<f64>, t: &DMatrix<f64>, theta: f64) -> DMatrix<f64> {
    if theta == 1.0 {
        return t.clone();
    }
    if theta == 0.0 {
        return a.clone();
    }
    let ah = sym_pow(a, 0.5);
    let aih = sym_pow(a, -0.5);
    let inner = sym_pow(&(&aih * t * &aih), theta);
    symmetrize(&(&ah * inner * &ah))
}

/// Orthonormal basis (as columns) of the column span of `m`.
pub fn column_span(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    let scale = m.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    if scale == 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .collect();
    let mut out = DMatrix::zeros(n, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        out.set_column(c, &u.column(i));
    }
    out
}

/// A linear subspace of ℝⁿ stored through an orthonormal basis.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn zero(n: usize) -> Self {
        Subspace { basis: DMatrix::zeros(n, 0) }
    }

    pub fn full(n: usize) -> Self {
        Subspace { basis: DMatrix::identity(n, n) }
    }

    /// Span of the columns of `m`.
    pub fn span(m: &DMatrix<f64>) -> Self {
        Subspace { basis: column_span(m, RANK_TOL) }
    }

    /// Kernel of a linear map ℝⁿ → ℝᵏ.
    pub fn kernel(l: &DMatrix<f64>) -> Self {
        Subspace::span(&l.transpose()).complement()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    pub fn complement(&self) -> Self {
        let n = self.ambient();
        if self.dim() == 0 {
            return Subspace::full(n);
        }
        if self.dim() == n {
            return Subspace::zero(n);
        }
        let p = DMatrix::identity(n, n) - self.projector();
        let eig = SymmetricEigen::new(symmetrize(&p));
        let idx: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        let mut b = DMatrix::zeros(n, idx.len());
        for (c, &i) in idx.iter().enumerate() {
            b.set_column(c, &eig.eigenvectors.column(i));
        }
        Subspace { basis: b }
    }

    pub fn sum(&self, other: &Subspace) -> Self {
        let n = self.ambient();
        let mut m = DMatrix::zeros(n, self.dim() + other.dim());
        m.view_mut((0, 0), (n, self.dim())).copy_from(&self.basis);
        m.view_mut((0, self.dim()), (n, other.dim())).copy_from(&other.basis);
        Subspace::span(&m)
    }

    pub fn intersection(&self, other: &Subspace) -> Self {
        self.complement().sum(&other.complement()).complement()
    }

    /// Dimension of the image L(V).
    pub fn image_dim(&self, l: &DMatrix<f64>) -> usize {
        if self.dim() == 0 {
            return 0;
        }
        // The basis is orthonormal, so compare against ‖L‖ rather than ‖L·basis‖,
        // which is itself at rounding level when L annihilates V.
        let scale = op_norm(l);
        if scale == 0.0 {
            return 0;
        }
        (l * &self.basis).singular_values().iter().filter(|&&s| s > RANK_TOL * scale).count()
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        let nv = v.norm();
        if nv == 0.0 {
            return true;
        }
        let r = v - &self.basis * (self.basis.transpose() * v);
        r.norm() <= 1e-8 * nv
    }

    pub fn same_as(&self, other: &Subspace) -> bool {
        self.dim() == other.dim() && (self.projector() - other.projector()).norm() <= 1e-8
    }

    /// Basis as row-major list of column vectors.
    pub fn basis_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|c| self.basis.column(c).iter().cloned().collect()).collect()
    }
}


/// Row-major nested-vector view of a matrix.
pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

/// Serialize matrices as row-major nested arrays.
pub mod serde_rows {
    use nalgebra::DMatrix;
    use serde::ser::{SerializeSeq, Serializer};

    pub fn one<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(super::rows_of(m))
    }

    pub fn many<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(ms.len()))?;
        for m in ms {
            seq.serialize_element(&super::rows_of(m))?;
        }
        seq.end()
    }
}

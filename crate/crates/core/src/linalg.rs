//! Sparse assembly helpers, direct and iterative solvers, and rank utilities.

use std::collections::BTreeMap;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{DdrError, Result};

/// Relative threshold on singular values used for numerical ranks.
pub const RANK_TOL: f64 = 1e-9;

/// CSR matrix from triplets; duplicate entries are summed.
pub fn csr_from_triplets(nrows: usize, ncols: usize, trips: &[(usize, usize, f64)]) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(nrows, ncols);
    for &(i, j, v) in trips {
        coo.push(i, j, v);
    }
    CsrMatrix::from(&coo)
}

pub fn csr_to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        out[(i, j)] += *v;
    }
    out
}

pub fn triplets_of(a: &CsrMatrix<f64>) -> Vec<(usize, usize, f64)> {
    a.triplet_iter().map(|(i, j, v)| (i, j, *v)).collect()
}

pub fn spmv(a: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    (0..a.nrows())
        .map(|i| {
            let row = a.row(i);
            row.col_indices().iter().zip(row.values()).map(|(&j, v)| v * x[j]).sum()
        })
        .collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|b - A x| / |b|` (or `|b - A x|` when `b = 0`).
pub fn relative_residual(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> f64 {
    let ax = spmv(a, x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Sparse LU factorization of a square matrix.
pub struct SparseLu<'a> {
    a: &'a CsrMatrix<f64>,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl<'a> SparseLu<'a> {
    pub fn new(a: &'a CsrMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return Err(DdrError::Linalg("LU needs a non-empty square matrix".into()));
        }
        faer::set_global_parallelism(faer::Par::Seq);
        let trips: Vec<Triplet<usize, usize, f64>> =
            a.triplet_iter().map(|(i, j, v)| Triplet::new(i, j, *v)).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| DdrError::Linalg(format!("sparse matrix creation failed: {e:?}")))?;
        let lu = m.sp_lu().map_err(|e| DdrError::Linalg(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { a, lu })
    }

    fn apply_inverse(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut col = faer::Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(col.as_mut());
        (0..n).map(|i| col[(i, 0)]).collect()
    }

    /// Solve with up to three steps of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.a.nrows() {
            return Err(DdrError::Linalg("right-hand side has the wrong length".into()));
        }
        let mut x = self.apply_inverse(b);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DdrError::Singular { nullity: 0 });
        }
        for _ in 0..3 {
            let ax = spmv(self.a, &x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            if norm(&r) <= 1e-14 * norm(b).max(f64::MIN_POSITIVE) {
                break;
            }
            let dx = self.apply_inverse(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        Ok(x)
    }
}

/// Sparse LU solve with a few steps of iterative refinement.
pub fn lu_solve(a: &CsrMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    if a.ncols() != a.nrows() || b.len() != a.nrows() {
        return Err(DdrError::Linalg("LU solve needs a square system".into()));
    }
    if b.is_empty() {
        return Ok(vec![]);
    }
    SparseLu::new(a)?.solve(b)
}

/// Conjugate gradients for a symmetric positive definite matrix, with Jacobi preconditioning.
pub fn cg(a: &CsrMatrix<f64>, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let row = a.row(i);
            row.col_indices().iter().zip(row.values()).find(|(&j, _)| j == i).map_or(1.0, |(_, v)| *v)
        })
        .collect();
    let precond = |r: &[f64]| -> Vec<f64> { r.iter().zip(&diag).map(|(x, d)| x / d).collect() };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let nb = norm(b);
    if nb == 0.0 {
        return Ok((x, 0));
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        let ap = spmv(a, &p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(DdrError::Linalg("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * nb {
            return Ok((x, it + 1));
        }
        z = precond(&r);
        let rz2 = dot(&r, &z);
        let beta = rz2 / rz;
        rz = rz2;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(DdrError::Linalg(format!("CG did not converge in {max_iter} iterations")))
}

/// Numerical rank from singular values. A singular value near the threshold
/// (within a factor 10 either way) makes the rank ambiguous and is reported.
pub fn numerical_rank(sv: &[f64], rel_tol: f64) -> Result<usize> {
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0);
    }
    let thr = rel_tol * max;
    for &s in sv {
        if s > thr / 10.0 && s < thr * 10.0 {
            return Err(DdrError::AmbiguousRank { sigma: s, threshold: thr });
        }
    }
    Ok(sv.iter().filter(|&&s| s > thr).count())
}

pub fn dense_rank(a: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0);
    }
    let sv = a.singular_values();
    numerical_rank(sv.as_slice(), RANK_TOL)
}

/// Orthonormal basis of the null space of a dense matrix.
pub fn nullspace(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    // Pad to at least n rows so that the SVD returns a complete V.
    let rows = a.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.rows_mut(0, a.nrows()).copy_from(a);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| DdrError::Linalg("SVD did not return V".into()))?;
    let sv = svd.singular_values.as_slice();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    numerical_rank(sv, RANK_TOL)?;
    let thr = RANK_TOL * max;
    let cols: Vec<DVector<f64>> =
        (0..n).filter(|&i| sv[i] <= thr).map(|i| vt.row(i).transpose().into_owned()).collect();
    if cols.is_empty() {
        return Ok(DMatrix::zeros(n, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

const PRIME: u64 = 2_147_483_647;

fn inv_mod(a: u64) -> u64 {
    let mut r = 1u64;
    let mut b = a % PRIME;
    let mut e = PRIME - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % PRIME;
        }
        b = b * b % PRIME;
        e >>= 1;
    }
    r
}

fn to_mod(v: f64) -> Result<u64> {
    let r = v.round();
    if (v - r).abs() > 1e-9 {
        return Err(DdrError::Invalid(format!("exact rank needs integer entries, got {v}")));
    }
    let i = r as i64;
    Ok(i.rem_euclid(PRIME as i64) as u64)
}

/// Rank of an integer matrix modulo a large prime, by sparse elimination.
pub fn rank_mod_p(a: &CsrMatrix<f64>) -> Result<usize> {
    let mut pivots: BTreeMap<usize, BTreeMap<usize, u64>> = BTreeMap::new();
    for i in 0..a.nrows() {
        let row = a.row(i);
        let mut v: BTreeMap<usize, u64> = BTreeMap::new();
        for (&j, &x) in row.col_indices().iter().zip(row.values()) {
            let m = to_mod(x)?;
            if m != 0 {
                v.insert(j, m);
            }
        }
        while let Some((&c, &lead)) = v.iter().next() {
            match pivots.get(&c) {
                None => {
                    let inv = inv_mod(lead);
                    for val in v.values_mut() {
                        *val = *val * inv % PRIME;
                    }
                    pivots.insert(c, v);
                    break;
                }
                Some(p) => {
                    for (&j, &pv) in p {
                        let e = v.entry(j).or_insert(0);
                        *e = (*e + PRIME - lead * pv % PRIME) % PRIME;
                        if *e == 0 {
                            v.remove(&j);
                        }
                    }
                }
            }
        }
    }
    Ok(pivots.len())
}

/// Principal submatrix on the listed rows and columns.
pub fn submatrix(a: &CsrMatrix<f64>, rows: &[usize], cols: &[usize]) -> CsrMatrix<f64> {
    let mut cmap = vec![usize::MAX; a.ncols()];
    for (k, &c) in cols.iter().enumerate() {
        cmap[c] = k;
    }
    let mut trips = Vec::new();
    for (ri, &r) in rows.iter().enumerate() {
        let row = a.row(r);
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            if cmap[j] != usize::MAX {
                trips.push((ri, cmap[j], v));
            }
        }
    }
    csr_from_triplets(rows.len(), cols.len(), &trips)
}

/// Generalized symmetric eigenvalues of `A x = lambda M x` with `M` positive definite, ascending.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| DdrError::Linalg("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let n = a.nrows();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| DdrError::Linalg("singular Cholesky factor".into()))?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ev)
}

/// COO text export: a header line `rows cols nnz` then one `i j value` line per entry.
pub fn write_coo<W: std::io::Write>(a: &CsrMatrix<f64>, mut w: W) -> Result<()> {
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplet_iter() {
        writeln!(w, "{i} {j} {v:.17e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        csr_from_triplets(n, n, &t)
    }

    #[test]
    fn lu_and_cg_agree() {
        let a = lap1d(30);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = lu_solve(&a, &b).unwrap();
        let (y, _) = cg(&a, &b, 1e-13, 500).unwrap();
        assert!(relative_residual(&a, &x, &b) < 1e-13);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicate_triplets_sum() {
        let a = csr_from_triplets(1, 1, &[(0, 0, 1.0), (0, 0, 2.5)]);
        assert_eq!(csr_to_dense(&a)[(0, 0)], 3.5);
    }

    #[test]
    fn mod_p_rank_matches_dense() {
        let t = vec![(0, 0, 1.0), (0, 1, -1.0), (1, 1, 1.0), (1, 2, -1.0), (2, 0, 1.0), (2, 2, -1.0)];
        let a = csr_from_triplets(3, 3, &t);
        assert_eq!(rank_mod_p(&a).unwrap(), 2);
        assert_eq!(dense_rank(&csr_to_dense(&a)).unwrap(), 2);
    }

    #[test]
    fn ambiguous_rank_is_reported() {
        assert!(matches!(numerical_rank(&[1.0, 2e-9], 1e-9), Err(DdrError::AmbiguousRank { .. })));
        assert_eq!(numerical_rank(&[1.0, 1e-15], 1e-9).unwrap(), 1);
    }
}

//! Bases of the polynomial form spaces used on a cell: full, trimmed, `U` and `W`.

use nalgebra::DMatrix;

use crate::error::{DdrError, Result};
use crate::forms::{alternators, PolyForm};
use crate::integrate::CellMoments;
use crate::poly::{binom, degree_of, exponents, n_monomials};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    Full,
    Trimmed,
    U,
    W,
}

#[derive(Clone, Debug)]
pub struct SpaceBasis {
    pub kind: SpaceKind,
    pub k: usize,
    pub r: usize,
    pub forms: Vec<PolyForm>,
}

impl SpaceBasis {
    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// Gram matrix in the local scaled coordinates of the cell.
    pub fn gram(&self, cm: &CellMoments) -> DMatrix<f64> {
        cm.gram(&self.forms, &self.forms)
    }
}

pub fn dim_full(d: usize, r: usize, k: usize) -> usize {
    binom(r + d, d) * binom(d, k)
}

/// Dimension of the trimmed space; `r = 0` gives constants for `k = 0` and nothing otherwise.
pub fn dim_trimmed(d: usize, r: usize, k: usize) -> usize {
    if k > d {
        return 0;
    }
    if r == 0 {
        return usize::from(k == 0);
    }
    binom(r + d, r + k) * binom(r + k - 1, k)
}

fn check(d: usize, k: usize) -> Result<()> {
    if k > d || d > 3 {
        return Err(DdrError::OutOfRange(format!("form degree {k} on a cell of dimension {d}")));
    }
    Ok(())
}

/// Monomials times alternators, ordered so that the coefficient vector of a
/// form of degree `r` is its coordinate vector in this basis.
pub fn basis_full(d: usize, r: usize, k: usize) -> Result<SpaceBasis> {
    check(d, k)?;
    let ex = exponents(d);
    let mut forms = Vec::with_capacity(dim_full(d, r, k));
    for &mask in &alternators(d, k) {
        for e in ex.iter().take(n_monomials(d, r)) {
            forms.push(PolyForm::monomial(d, k, &e[..d], mask).with_deg(r));
        }
    }
    Ok(SpaceBasis { kind: SpaceKind::Full, k, r, forms })
}

/// Koszul images of the homogeneous `(k+1)`-forms of degree `s`, reduced to an
/// independent subset. Coefficients are small integers so elimination is exact.
fn koszul_of_homogeneous(d: usize, s: usize, k: usize) -> Vec<PolyForm> {
    if k + 1 > d {
        return vec![];
    }
    let ex = exponents(d);
    let mut cands = Vec::new();
    for &mask in &alternators(d, k + 1) {
        for e in ex.iter().take(n_monomials(d, s)) {
            if degree_of(e) != s {
                continue;
            }
            cands.push(PolyForm::monomial(d, k + 1, &e[..d], mask).with_deg(s).koszul());
        }
    }
    independent_subset(cands)
}

fn independent_subset(cands: Vec<PolyForm>) -> Vec<PolyForm> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    let mut keep = Vec::new();
    for f in cands {
        let mut v = f.coeffs().to_vec();
        for (row, &p) in rows.iter().zip(&pivots) {
            let c = v[p] / row[p];
            if c != 0.0 {
                for (a, b) in v.iter_mut().zip(row) {
                    *a -= c * b;
                }
            }
        }
        if let Some(p) = v.iter().position(|x| x.abs() > 1e-9) {
            rows.push(v);
            pivots.push(p);
            keep.push(f);
        }
    }
    keep
}

/// Basis of the trimmed space: `P^{r-1}` plus Koszul images of homogeneous degree `r - 1` forms.
pub fn basis_trimmed(d: usize, r: usize, k: usize) -> Result<SpaceBasis> {
    check(d, k)?;
    let mut forms = Vec::new();
    if r == 0 {
        if k == 0 {
            forms.push(PolyForm::monomial(d, 0, &[0, 0, 0][..d], 0));
        }
        return Ok(SpaceBasis { kind: SpaceKind::Trimmed, k, r, forms });
    }
    forms.extend(basis_full(d, r - 1, k)?.forms.into_iter().map(|f| f.with_deg(r)));
    forms.extend(koszul_of_homogeneous(d, r - 1, k));
    debug_assert_eq!(forms.len(), dim_trimmed(d, r, k));
    Ok(SpaceBasis { kind: SpaceKind::Trimmed, k, r, forms })
}

/// Basis of `U^k`: elements of the degree `r + 1` trimmed space orthogonal to `P^r`.
pub fn basis_u(cm: &CellMoments, r: usize, k: usize) -> Result<SpaceBasis> {
    let d = cm.dim();
    check(d, k)?;
    let mut forms = Vec::new();
    for v in koszul_of_homogeneous(d, r, k) {
        let p = cm.project(&v, r).with_deg(r + 1);
        forms.push(v.sub(&p));
    }
    let b = SpaceBasis { kind: SpaceKind::U, k, r, forms };
    ensure_independent(cm, &b)?;
    Ok(b)
}

/// Basis of `W^k = d U^{k-1} + U^k`, listed as `d U^{k-1}` first.
pub fn basis_w(cm: &CellMoments, r: usize, k: usize) -> Result<SpaceBasis> {
    let d = cm.dim();
    check(d, k)?;
    let mut forms = Vec::new();
    if k >= 1 {
        for u in basis_u(cm, r, k - 1)?.forms {
            forms.push(u.d().with_deg(r + 1));
        }
    }
    forms.extend(basis_u(cm, r, k)?.forms);
    let b = SpaceBasis { kind: SpaceKind::W, k, r, forms };
    ensure_independent(cm, &b)?;
    Ok(b)
}

/// Ratio of smallest to largest singular value of the normalized Gram matrix.
pub fn gram_conditioning(g: &DMatrix<f64>) -> f64 {
    if g.nrows() == 0 {
        return 1.0;
    }
    let dg: Vec<f64> = (0..g.nrows()).map(|i| g[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
    let n = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)] / (dg[i] * dg[j]));
    let sv = n.singular_values();
    let max = sv.max();
    let min = sv.min();
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

fn ensure_independent(cm: &CellMoments, b: &SpaceBasis) -> Result<()> {
    let c = gram_conditioning(&b.gram(cm));
    if c <= 1e-10 {
        return Err(DdrError::Linalg(format!("{:?} basis is numerically dependent (ratio {c:e})", b.kind)));
    }
    Ok(())
}

/// Orthonormalize a list of forms in the local L2 product.
pub fn orthonormalize(cm: &CellMoments, forms: &[PolyForm]) -> Result<Vec<PolyForm>> {
    if forms.is_empty() {
        return Ok(vec![]);
    }
    let g = cm.gram(forms, forms);
    let chol = g
        .cholesky()
        .ok_or_else(|| DdrError::Linalg("Gram matrix of a basis is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(forms.len(), forms.len()))
        .ok_or_else(|| DdrError::Linalg("singular Cholesky factor".into()))?;
    let deg = forms.iter().map(|f| f.deg()).max().unwrap();
    let mut out = Vec::with_capacity(forms.len());
    for i in 0..forms.len() {
        let mut f = PolyForm::zero(forms[0].dim(), forms[0].k(), deg);
        for j in 0..=i {
            let c = linv[(i, j)];
            if c != 0.0 {
                f.axpy(c, &forms[j]);
            }
        }
        out.push(f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_dimensions() {
        assert_eq!(basis_full(2, 0, 1).unwrap().len(), 2);
        assert_eq!(basis_full(2, 1, 1).unwrap().len(), 6);
        assert_eq!(basis_full(3, 2, 2).unwrap().len(), 30);
    }

    #[test]
    fn trimmed_dimensions() {
        assert_eq!(basis_trimmed(3, 1, 1).unwrap().len(), 6);
        assert_eq!(basis_trimmed(2, 1, 1).unwrap().len(), 3);
        for d in 1..=3 {
            assert_eq!(basis_trimmed(d, 1, 0).unwrap().len(), d + 1);
        }
        for d in 1..=3 {
            for r in 1..=3 {
                for k in 0..=d {
                    assert_eq!(basis_trimmed(d, r, k).unwrap().len(), dim_trimmed(d, r, k), "d={d} r={r} k={k}");
                }
            }
        }
    }

    #[test]
    fn trimmed_membership() {
        for d in 1..=3 {
            for r in 1..=2 {
                for k in 1..=d {
                    for f in basis_trimmed(d, r, k).unwrap().forms {
                        let kf = f.koszul();
                        assert!(kf.actual_degree(0.0).unwrap_or(0) <= r);
                    }
                }
            }
        }
    }
}

//! Polynomial reconstruction of a discrete form on a cell and the stabilized
//! discrete L2 product.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;

use crate::ddr::{DdrComplex, LocalDofs, MomentTable};
use crate::error::{DdrError, Result};
use crate::forms::PolyForm;
use crate::linalg::csr_from_triplets;
use crate::mesh::CellRef;
use crate::spaces::{basis_full, basis_trimmed};

/// Reconstruction operator of a cell: columns map local dofs to coefficients
/// of `gamma u` in the full basis of `P^r Lambda^k(T)` (local coordinates).
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub cell: CellRef,
    pub k: usize,
    pub r: usize,
    pub local: LocalDofs,
    pub matrix: DMatrix<f64>,
    /// Gram matrix of the full basis in local coordinates.
    pub gram: DMatrix<f64>,
}

impl Reconstruction {
    pub fn apply(&self, u: &DVector<f64>) -> PolyForm {
        let c = &self.matrix * u;
        let d = self.cell.dim;
        PolyForm::from_coeffs(d, self.k, self.r, c.as_slice().to_vec())
    }
}

/// Row map of the Hodge star on the full basis: `star e_a = sign * e'_{index}`.
fn star_rows(d: usize, r: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    let full = basis_full(d, r, k)?.forms;
    full.iter()
        .map(|v| {
            let s = v.hodge_star();
            let (i, val) = s
                .coeffs()
                .iter()
                .enumerate()
                .find(|(_, x)| **x != 0.0)
                .ok_or_else(|| DdrError::Linalg("Hodge star of a basis element vanished".into()))?;
            Ok((i, *val))
        })
        .collect()
}

pub fn reconstruction(cx: &DdrComplex<'_>, k: usize, t: CellRef) -> Result<(Reconstruction, MomentTable)> {
    let table = cx.reconstruct_moments(k, t)?;
    let d = t.dim;
    let r = cx.r();
    let m = table.get(t);
    let rows = star_rows(d, r, k)?;
    let rhs = DMatrix::from_fn(rows.len(), table.local.len, |a, j| rows[a].1 * m[(rows[a].0, j)]);
    let full = basis_full(d, r, k)?.forms;
    let cm = cx.cell_moments(t);
    let gram = cm.gram(&full, &full);
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| DdrError::Linalg(format!("Gram matrix of cell {t} is not positive definite")))?;
    let matrix = chol.solve(&rhs);
    Ok((Reconstruction { cell: t, k, r, local: table.local.clone(), matrix, gram }, table))
}

/// Local discrete L2 product `G + S` on a cell.
#[derive(Clone, Debug)]
pub struct LocalProduct {
    pub cell: CellRef,
    pub k: usize,
    pub local: LocalDofs,
    /// Consistent part `Gamma^T M Gamma` in physical scaling.
    pub consistent: DMatrix<f64>,
    /// Stabilization, already multiplied by `tau`.
    pub stabilization: DMatrix<f64>,
}

impl LocalProduct {
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.consistent + &self.stabilization
    }
}

/// Interpolation of the full polynomial basis onto the local dofs, as columns.
pub fn basis_interpolation(cx: &DdrComplex<'_>, k: usize, t: CellRef) -> Result<DMatrix<f64>> {
    let full = basis_full(t.dim, cx.r(), k)?.forms;
    let cols: Vec<DVector<f64>> = full.iter().map(|v| cx.interpolate_local(k, t, v)).collect::<Result<_>>()?;
    let n = LocalDofs::new(cx.mesh(), cx.layout(k), t).len;
    if cols.is_empty() {
        return Ok(DMatrix::zeros(n, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

pub fn local_product(cx: &DdrComplex<'_>, k: usize, t: CellRef, tau: f64) -> Result<LocalProduct> {
    let mesh = cx.mesh();
    let (rec, _) = reconstruction(cx, k, t)?;
    let d = t.dim;
    let h = mesh.cell(t).diameter;
    let phys = h.powi(d as i32 - 2 * k as i32);
    let consistent = rec.matrix.transpose() * &rec.gram * &rec.matrix * phys;
    let pi = basis_interpolation(cx, k, t)?;
    let n = rec.local.len;
    let defect = DMatrix::identity(n, n) - &pi * &rec.matrix;
    let vol = mesh.cell(t).measure;
    let mut sigma = DVector::zeros(n);
    for &(f, _, lo, cnt) in &rec.local.blocks {
        let hf = mesh.cell(f).diameter;
        let w = vol * hf.powi(-2 * k as i32);
        for i in lo..lo + cnt {
            sigma[i] = w;
        }
    }
    let weighted = DMatrix::from_fn(n, n, |i, j| sigma[i] * defect[(i, j)]);
    let stabilization = defect.transpose() * weighted * tau;
    Ok(LocalProduct { cell: t, k, local: rec.local, consistent, stabilization })
}

/// Global discrete L2 product of k-forms, summed over the top cells.
pub fn global_mass(cx: &DdrComplex<'_>, k: usize, tau: f64) -> Result<CsrMatrix<f64>> {
    let mesh = cx.mesh();
    let top = mesh.top_dim();
    let parts: Vec<Vec<(usize, usize, f64)>> = (0..mesh.count(top))
        .into_par_iter()
        .map(|i| {
            let lp = local_product(cx, k, CellRef::new(top, i), tau)?;
            let g = lp.local.global_indices();
            let m = lp.matrix();
            let mut out = Vec::with_capacity(g.len() * g.len());
            for (a, &ga) in g.iter().enumerate() {
                for (b, &gb) in g.iter().enumerate() {
                    let v = m[(a, b)];
                    if v != 0.0 {
                        out.push((ga, gb, v));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let n = cx.layout(k).total();
    let trips: Vec<(usize, usize, f64)> = parts.into_iter().flatten().collect();
    Ok(csr_from_triplets(n, n, &trips))
}

/// The reconstruction of a global dof vector on each top cell, as polynomial
/// forms in ambient coordinates.
pub fn reconstruct_global(cx: &DdrComplex<'_>, k: usize, u: &[f64]) -> Result<Vec<PolyForm>> {
    let mesh = cx.mesh();
    let top = mesh.top_dim();
    (0..mesh.count(top))
        .into_par_iter()
        .map(|i| {
            let t = CellRef::new(top, i);
            let (rec, _) = reconstruction(cx, k, t)?;
            let local = rec.apply(&rec.local.gather(u));
            Ok(to_ambient_form(cx, t, &local))
        })
        .collect()
}

/// Express a form in the local coordinates of a top cell in ambient coordinates.
pub fn to_ambient_form(cx: &DdrComplex<'_>, t: CellRef, u: &PolyForm) -> PolyForm {
    let cell = cx.mesh().cell(t);
    let h = cell.diameter;
    let a = cell.frame.transpose() / h;
    let off = -(&a * &cell.barycenter);
    u.pullback(off.as_slice(), &a)
}

/// Extreme generalized eigenvalues of `I^T (G + S) I` against the exact Gram
/// matrix of `P-^{r+1} Lambda^k(T)`.
///
/// Trimmed forms of degree `r + 1` lie in the local virtual space, so their
/// interpolation is injective and the exact Gram is the L2 norm of the
/// discrete function itself.
pub fn coercivity_proxy(cx: &DdrComplex<'_>, k: usize, t: CellRef, tau: f64) -> Result<(f64, f64)> {
    let d = t.dim;
    let h = cx.mesh().cell(t).diameter;
    let basis = basis_trimmed(d, cx.r() + 1, k)?.forms;
    let cols: Vec<DVector<f64>> = basis.iter().map(|v| cx.interpolate_local(k, t, v)).collect::<Result<_>>()?;
    let interp = DMatrix::from_columns(&cols);
    let exact = cx.cell_moments(t).gram(&basis, &basis) * h.powi(d as i32 - 2 * k as i32);
    let a = interp.transpose() * local_product(cx, k, t, tau)?.matrix() * &interp;
    let ev = crate::linalg::generalized_eigenvalues(&a, &exact)?;
    Ok((ev[0], ev[ev.len() - 1]))
}

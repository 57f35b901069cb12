//! Face-moment degrees of freedom, the discrete exterior derivative and the
//! recursive reconstruction of polynomial moments.
//!
//! Each face `F` of dimension `m >= k` carries the dofs `int_F tr_F u ^ e`
//! for `e` in an orthonormal basis of the trimmed space of `(m-k)`-forms on
//! `F` (for `r = 0` only `k`-faces carry a single dof with `e = 1`). Faces
//! carry their own orientation, so gathering a cell's dofs needs no signs.
//!
//! Moments `int_F u ^ w` against the full space `P^r` are recovered by an
//! ascending pass over the faces of a cell, from the homotopy formula
//! `(j + r) w = d kappa w + kappa d w - Q w` and integration by parts.

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DdrError, Result};
use crate::forms::{alternators, minor_det, wedge_sign, PolyForm};
use crate::integrate::{grundmann_moller, simplex_det, CellMoments};
use crate::linalg::csr_from_triplets;
use crate::mesh::{CellRef, MeshComplex};
use crate::spaces::{basis_full, basis_trimmed, dim_full, dim_trimmed, orthonormalize};

/// Global numbering of the dofs of one form degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofLayout {
    pub k: usize,
    pub r: usize,
    offsets: Vec<Vec<usize>>,
    counts: Vec<Vec<usize>>,
    total: usize,
}

impl DofLayout {
    pub fn new(mesh: &MeshComplex, k: usize, r: usize) -> Result<Self> {
        if k > mesh.top_dim() {
            return Err(DdrError::OutOfRange(format!("form degree {k} exceeds mesh dimension {}", mesh.top_dim())));
        }
        let mut offsets = Vec::new();
        let mut counts = Vec::new();
        let mut total = 0;
        for m in 0..=mesh.top_dim() {
            let per = if m < k {
                0
            } else if r == 0 {
                usize::from(m == k)
            } else {
                dim_trimmed(m, r, m - k)
            };
            let n = mesh.count(m);
            offsets.push((0..n).map(|i| total + i * per).collect());
            counts.push(vec![per; n]);
            total += per * n;
        }
        Ok(DofLayout { k, r, offsets, counts, total })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn count(&self, c: CellRef) -> usize {
        self.counts[c.dim][c.index]
    }

    pub fn range(&self, c: CellRef) -> Range<usize> {
        let o = self.offsets[c.dim][c.index];
        o..o + self.counts[c.dim][c.index]
    }

    /// FNV-1a hash of the layout shape.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(self.k as u64);
        eat(self.r as u64);
        for level in &self.counts {
            eat(level.len() as u64);
            for &c in level {
                eat(c as u64);
            }
        }
        h
    }
}

/// A global dof vector tagged with the layout it belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DofVector {
    pub layout_hash: u64,
    pub k: usize,
    pub r: usize,
    pub values: Vec<f64>,
}

impl DofVector {
    pub fn new(layout: &DofLayout, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), layout.total());
        DofVector { layout_hash: layout.hash(), k: layout.k, r: layout.r, values }
    }

    pub fn check(&self, layout: &DofLayout) -> Result<()> {
        if self.layout_hash != layout.hash() || self.values.len() != layout.total() {
            return Err(DdrError::Invalid("dof vector does not belong to this layout".into()));
        }
        Ok(())
    }
}

/// The dofs of a cell closure, in closure order.
#[derive(Clone, Debug)]
pub struct LocalDofs {
    /// `(face, global range start, local range start, count)`
    pub blocks: Vec<(CellRef, usize, usize, usize)>,
    pub len: usize,
}

impl LocalDofs {
    pub fn new(mesh: &MeshComplex, layout: &DofLayout, t: CellRef) -> Self {
        let mut blocks = Vec::new();
        let mut len = 0;
        for &f in &mesh.cell(t).closure {
            let n = layout.count(f);
            if n > 0 {
                blocks.push((f, layout.range(f).start, len, n));
                len += n;
            }
        }
        LocalDofs { blocks, len }
    }

    pub fn local_range(&self, f: CellRef) -> Option<Range<usize>> {
        self.blocks.iter().find(|b| b.0 == f).map(|b| b.2..b.2 + b.3)
    }

    /// Global index of every local dof.
    pub fn global_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len);
        for &(_, g, _, n) in &self.blocks {
            out.extend(g..g + n);
        }
        out
    }

    pub fn gather(&self, global: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len, self.global_indices().into_iter().map(|i| global[i]))
    }

    fn local_of_global(&self, g: usize) -> Option<usize> {
        self.blocks.iter().find(|b| g >= b.1 && g < b.1 + b.3).map(|b| b.2 + g - b.1)
    }
}

/// Linear maps of one face step of the moment recursion. Rows are indexed by
/// the full basis of `P^r Lambda^j(F)`.
#[derive(Clone, Debug)]
pub struct MomentOps {
    /// Acts on the dofs of the face itself.
    pub own: DMatrix<f64>,
    /// Acts on the moments of each codimension-one face.
    pub boundary: Vec<(usize, DMatrix<f64>)>,
    /// Acts on the moments of `du` on the face.
    pub dom: Option<DMatrix<f64>>,
}

/// Per-face data of one form degree.
#[derive(Clone, Debug, Default)]
pub struct FaceSpace {
    pub dof_basis: Vec<PolyForm>,
    /// Maps coefficient vectors of forms in the trimmed space to dof coefficients.
    pub expand: DMatrix<f64>,
    pub ops: Option<MomentOps>,
}

#[derive(Clone, Debug)]
pub struct DdrSpace {
    pub layout: DofLayout,
    faces: Vec<Vec<FaceSpace>>,
}

impl DdrSpace {
    pub fn face(&self, c: CellRef) -> &FaceSpace {
        &self.faces[c.dim][c.index]
    }
}

/// Reconstructed moments of a cell: for each face `F` in its closure with
/// `dim F >= k`, a matrix mapping local dofs to `int_F u ^ w` for `w` in the
/// full basis of `P^r Lambda^{dim F - k}(F)`.
#[derive(Clone, Debug)]
pub struct MomentTable {
    pub cell: CellRef,
    pub k: usize,
    pub local: LocalDofs,
    pub moments: BTreeMap<CellRef, DMatrix<f64>>,
}

impl MomentTable {
    pub fn get(&self, f: CellRef) -> &DMatrix<f64> {
        self.moments.get(&f).expect("face outside of the moment table")
    }

    /// Moments for a particular local dof vector.
    pub fn apply(&self, f: CellRef, u: &DVector<f64>) -> DVector<f64> {
        self.get(f) * u
    }
}

/// The discrete de Rham complex of order `r` on a mesh.
pub struct DdrComplex<'a> {
    mesh: &'a MeshComplex,
    r: usize,
    moments: Vec<Vec<CellMoments>>,
    spaces: Vec<DdrSpace>,
    d: Vec<CsrMatrix<f64>>,
}

impl<'a> DdrComplex<'a> {
    pub fn new(mesh: &'a MeshComplex, r: usize) -> Result<Self> {
        if r > 3 {
            return Err(DdrError::OutOfRange(format!("order {r} not in 0..=3")));
        }
        let deg = 2 * r + 4;
        let moments: Vec<Vec<CellMoments>> = (0..=mesh.top_dim())
            .map(|m| {
                (0..mesh.count(m))
                    .into_par_iter()
                    .map(|i| CellMoments::new(mesh, CellRef::new(m, i), deg))
                    .collect()
            })
            .collect();
        let mut cx = DdrComplex { mesh, r, moments, spaces: Vec::new(), d: Vec::new() };
        for k in 0..=mesh.top_dim() {
            let s = cx.build_space(k)?;
            cx.spaces.push(s);
        }
        for k in 0..mesh.top_dim() {
            let d = cx.build_d(k)?;
            cx.d.push(d);
        }
        for k in 0..=mesh.top_dim() {
            cx.build_ops(k)?;
        }
        Ok(cx)
    }

    pub fn mesh(&self) -> &'a MeshComplex {
        self.mesh
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn space(&self, k: usize) -> &DdrSpace {
        &self.spaces[k]
    }

    pub fn layout(&self, k: usize) -> &DofLayout {
        &self.spaces[k].layout
    }

    pub fn cell_moments(&self, c: CellRef) -> &CellMoments {
        &self.moments[c.dim][c.index]
    }

    /// Discrete exterior derivative `D_k`, mapping k-dofs to (k+1)-dofs.
    pub fn discrete_d(&self, k: usize) -> Result<&CsrMatrix<f64>> {
        self.d
            .get(k)
            .ok_or_else(|| DdrError::OutOfRange(format!("no discrete derivative from degree {k}")))
    }

    fn build_space(&self, k: usize) -> Result<DdrSpace> {
        let layout = DofLayout::new(self.mesh, k, self.r)?;
        let r = self.r;
        let mut faces = Vec::new();
        for m in 0..=self.mesh.top_dim() {
            let level: Result<Vec<FaceSpace>> = (0..self.mesh.count(m))
                .into_par_iter()
                .map(|i| {
                    let c = CellRef::new(m, i);
                    if layout.count(c) == 0 {
                        return Ok(FaceSpace::default());
                    }
                    let cm = &self.moments[m][i];
                    let raw = basis_trimmed(m, r, m - k)?.forms;
                    let basis = if r == 0 { raw } else { orthonormalize(cm, &raw)? };
                    let basis: Vec<PolyForm> = basis.into_iter().map(|f| f.with_deg(r)).collect();
                    let expand = expansion_matrix(cm, &basis, r)?;
                    Ok(FaceSpace { dof_basis: basis, expand, ops: None })
                })
                .collect();
            faces.push(level?);
        }
        Ok(DdrSpace { layout, faces })
    }

    /// Expand a form in the trimmed space of a face into its dof coefficients.
    fn expand(&self, k: usize, f: CellRef, u: &PolyForm) -> DVector<f64> {
        let fs = self.spaces[k].face(f);
        let v = DVector::from_column_slice(u.with_deg(self.r).coeffs());
        &fs.expand * v
    }

    fn build_d(&self, k: usize) -> Result<CsrMatrix<f64>> {
        let l0 = &self.spaces[k].layout;
        let l1 = &self.spaces[k + 1].layout;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        for m in (k + 1)..=self.mesh.top_dim() {
            let rows: Result<Vec<Vec<(usize, usize, f64)>>> = (0..self.mesh.count(m))
                .into_par_iter()
                .map(|i| {
                    let t = CellRef::new(m, i);
                    let mut out = Vec::new();
                    let fs1 = self.spaces[k + 1].face(t);
                    let rr = l1.range(t);
                    for (a, e) in fs1.dof_basis.iter().enumerate() {
                        let row = rr.start + a;
                        for &(g, s) in &self.mesh.cell(t).faces {
                            let gc = CellRef::new(m - 1, g);
                            if l0.count(gc) == 0 {
                                continue;
                            }
                            let (off, am) = self.mesh.trace_map(t, gc)?;
                            let tr = e.pullback(&off, &am);
                            let x = self.expand(k, gc, &tr);
                            let gr = l0.range(gc);
                            for (j, v) in x.iter().enumerate() {
                                if *v != 0.0 {
                                    out.push((row, gr.start + j, s as f64 * v));
                                }
                            }
                        }
                        if l0.count(t) > 0 && e.k() < m {
                            let de = e.d();
                            let x = self.expand(k, t, &de);
                            let tr = l0.range(t);
                            for (j, v) in x.iter().enumerate() {
                                if *v != 0.0 {
                                    out.push((row, tr.start + j, -sign * v));
                                }
                            }
                        }
                    }
                    Ok(out)
                })
                .collect();
            for r in rows? {
                trips.extend(r);
            }
        }
        Ok(csr_from_triplets(l1.total(), l0.total(), &trips))
    }

    fn build_ops(&mut self, k: usize) -> Result<()> {
        let r = self.r;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for m in k..=self.mesh.top_dim() {
            let ops: Result<Vec<MomentOps>> = (0..self.mesh.count(m))
                .into_par_iter()
                .map(|i| {
                    let f = CellRef::new(m, i);
                    let j = m - k;
                    let fs = self.spaces[k].face(f);
                    let nd = fs.dof_basis.len();
                    if j == 0 {
                        return Ok(MomentOps { own: fs.expand.transpose(), boundary: vec![], dom: None });
                    }
                    let full = basis_full(m, r, j)?.forms;
                    let nrow = full.len();
                    let scale = 1.0 / (j + r) as f64;
                    let cm = &self.moments[m][i];
                    let mut own = DMatrix::zeros(nrow, nd);
                    let faces = &self.mesh.cell(f).faces;
                    let mut bnd: Vec<(usize, DMatrix<f64>)> = faces
                        .iter()
                        .map(|&(g, _)| (g, DMatrix::zeros(nrow, dim_full(m - 1, r, j - 1))))
                        .collect();
                    let mut dom = DMatrix::zeros(nrow, dim_full(m, r, j - 1));
                    let maps: Vec<(Vec<f64>, DMatrix<f64>)> = faces
                        .iter()
                        .map(|&(g, _)| self.mesh.trace_map(f, CellRef::new(m - 1, g)))
                        .collect::<Result<_>>()?;
                    for (a, w) in full.iter().enumerate() {
                        let mut phi = w.homotopy_remainder(r).scaled(-1.0);
                        if j < m {
                            phi.axpy(1.0, &w.d().koszul());
                        }
                        if nd > 0 {
                            let x = &fs.expand * DVector::from_column_slice(phi.with_deg(r).coeffs());
                            own.row_mut(a).copy_from(&(x.transpose() * scale));
                        } else if phi.max_abs() > 1e-12 {
                            return Err(DdrError::Linalg(format!("face {f} has no dofs for a nonzero moment")));
                        }
                        let kw = w.koszul();
                        for (bi, &(g, s)) in faces.iter().enumerate() {
                            let (off, am) = &maps[bi];
                            let mut phi_g = w.contract(off).pullback(off, am);
                            if j < m {
                                let tw = w.pullback(off, am);
                                let kg = tw.koszul();
                                phi_g.axpy(1.0, &self.moments[m - 1][g].project(&kg, r));
                            }
                            let c = phi_g.with_deg(r);
                            let coef = s as f64 * sign * scale;
                            for (t, v) in c.coeffs().iter().enumerate() {
                                bnd[bi].1[(a, t)] = coef * v;
                            }
                        }
                        let psi = cm.project(&kw, r);
                        for (t, v) in psi.coeffs().iter().enumerate() {
                            dom[(a, t)] = -sign * scale * v;
                        }
                    }
                    Ok(MomentOps { own, boundary: bnd, dom: Some(dom) })
                })
                .collect();
            for (i, o) in ops?.into_iter().enumerate() {
                self.spaces[k].faces[m][i].ops = Some(o);
            }
        }
        Ok(())
    }

    /// Dofs of a face from a polynomial form in the face's local coordinates.
    pub fn face_dofs(&self, k: usize, f: CellRef, u: &PolyForm) -> Vec<f64> {
        let cm = &self.moments[f.dim][f.index];
        self.spaces[k].face(f).dof_basis.iter().map(|e| cm.integrate_top(&u.wedge(e))).collect()
    }

    /// Interpolate a polynomial form given in ambient coordinates.
    pub fn interpolate_poly(&self, k: usize, u: &PolyForm) -> Result<Vec<f64>> {
        if u.k() != k || u.dim() != self.mesh.ambient_dim() {
            return Err(DdrError::Degree(format!("expected an ambient {k}-form")));
        }
        let layout = self.layout(k);
        let mut out = vec![0.0; layout.total()];
        for m in k..=self.mesh.top_dim() {
            let vals: Vec<(Range<usize>, Vec<f64>)> = (0..self.mesh.count(m))
                .into_par_iter()
                .filter(|&i| layout.count(CellRef::new(m, i)) > 0)
                .map(|i| {
                    let f = CellRef::new(m, i);
                    let (off, a) = self.mesh.embedding(f);
                    let uf = u.pullback(&off, &a);
                    (layout.range(f), self.face_dofs(k, f, &uf))
                })
                .collect();
            for (rg, v) in vals {
                out[rg].copy_from_slice(&v);
            }
        }
        Ok(out)
    }

    /// Interpolate a polynomial form given in the local coordinates of cell `t`
    /// onto the local dofs of `t`.
    pub fn interpolate_local(&self, k: usize, t: CellRef, u: &PolyForm) -> Result<DVector<f64>> {
        let local = LocalDofs::new(self.mesh, self.layout(k), t);
        let mut out = DVector::zeros(local.len);
        for &(f, _, lo, n) in &local.blocks {
            let (off, a) = self.mesh.trace_map(t, f)?;
            let uf = u.pullback(&off, &a);
            let v = self.face_dofs(k, f, &uf);
            out.rows_mut(lo, n).copy_from_slice(&v);
        }
        Ok(out)
    }

    /// Interpolate a smooth form, sampled as lexicographic ambient components,
    /// with a simplex rule of degree at least `q`.
    pub fn interpolate_fn<F>(&self, k: usize, f: &F, q: usize) -> Result<Vec<f64>>
    where
        F: Fn(&DVector<f64>) -> Vec<f64> + Sync,
    {
        let layout = self.layout(k);
        let n = self.mesh.ambient_dim();
        let amb_alts = alternators(n, k);
        let mut out = vec![0.0; layout.total()];
        let s = q.saturating_sub(1).div_ceil(2);
        for m in k..=self.mesh.top_dim() {
            let rule = grundmann_moller(m, s);
            let loc_alts = alternators(m, k);
            let ealts = alternators(m, m - k);
            let full_mask: u8 = ((1u16 << m) - 1) as u8;
            let vals: Vec<(Range<usize>, Vec<f64>)> = (0..self.mesh.count(m))
                .into_par_iter()
                .filter(|&i| layout.count(CellRef::new(m, i)) > 0)
                .map(|i| {
                    let fc = CellRef::new(m, i);
                    let (_, a) = self.mesh.embedding(fc);
                    let basis = &self.spaces[k].face(fc).dof_basis;
                    let mut acc = vec![0.0; basis.len()];
                    let minors: Vec<Vec<f64>> = amb_alts
                        .iter()
                        .map(|&mi| {
                            let rows = crate::forms::mask_indices(mi);
                            loc_alts
                                .iter()
                                .map(|&mj| minor_det(&a, &rows, &crate::forms::mask_indices(mj)))
                                .collect()
                        })
                        .collect();
                    for simplex in self.mesh.simplex_decomposition(fc) {
                        let loc: Vec<DVector<f64>> = simplex.iter().map(|x| self.mesh.to_local(fc, x)).collect();
                        let vol = simplex_det(&loc).abs() / (1..=m).product::<usize>() as f64;
                        for (bary, w) in &rule {
                            let mut xi = DVector::zeros(m);
                            for (b, v) in bary.iter().zip(&loc) {
                                xi += v * *b;
                            }
                            let x = self.mesh.to_ambient(fc, &xi);
                            let val = f(&x);
                            let mut ul = vec![0.0; loc_alts.len()];
                            for (ia, uv) in val.iter().enumerate() {
                                for (jl, mv) in minors[ia].iter().enumerate() {
                                    ul[jl] += uv * mv;
                                }
                            }
                            let xs: Vec<f64> = xi.iter().copied().collect();
                            for (bi, e) in basis.iter().enumerate() {
                                let ev = e.eval(&xs);
                                let mut top = 0.0;
                                for (jl, &mj) in loc_alts.iter().enumerate() {
                                    let cm = full_mask & !mj;
                                    let ei = ealts.iter().position(|&z| z == cm).unwrap();
                                    top += wedge_sign(mj, cm) * ul[jl] * ev[ei];
                                }
                                acc[bi] += w * vol * top;
                            }
                        }
                    }
                    (layout.range(fc), acc)
                })
                .collect();
            for (rg, v) in vals {
                out[rg].copy_from_slice(&v);
            }
        }
        Ok(out)
    }

    /// Rows of `D_k` for the (k+1)-dofs of the closure of `t`, restricted to the local k-dofs.
    pub fn local_d(&self, k: usize, t: CellRef) -> Result<(LocalDofs, LocalDofs, DMatrix<f64>)> {
        let l0 = LocalDofs::new(self.mesh, self.layout(k), t);
        let l1 = LocalDofs::new(self.mesh, self.layout(k + 1), t);
        let d = self.discrete_d(k)?;
        let mut out = DMatrix::zeros(l1.len, l0.len);
        for (li, gi) in l1.global_indices().into_iter().enumerate() {
            let row = d.row(gi);
            for (&c, &v) in row.col_indices().iter().zip(row.values()) {
                let lj = l0
                    .local_of_global(c)
                    .ok_or_else(|| DdrError::Linalg("discrete derivative couples dofs outside the cell".into()))?;
                out[(li, lj)] = v;
            }
        }
        Ok((l0, l1, out))
    }

    /// Reconstruct the moments of all faces of `t` from the local k-dofs.
    pub fn reconstruct_moments(&self, k: usize, t: CellRef) -> Result<MomentTable> {
        let local = LocalDofs::new(self.mesh, self.layout(k), t);
        let closure = &self.mesh.cell(t).closure;
        let mut du: BTreeMap<CellRef, DMatrix<f64>> = BTreeMap::new();
        if k < t.dim {
            let (_, l1, dl) = self.local_d(k, t)?;
            for &f in closure.iter().filter(|f| f.dim > k) {
                let ops = self.spaces[k + 1].face(f).ops.as_ref().expect("moment operators");
                let mut m = DMatrix::zeros(ops.own.nrows(), local.len);
                if let Some(rg) = l1.local_range(f) {
                    m += &ops.own * dl.rows(rg.start, rg.len());
                }
                for (g, b) in &ops.boundary {
                    let gm = du.get(&CellRef::new(f.dim - 1, *g)).ok_or_else(missing)?;
                    m += b * gm;
                }
                du.insert(f, m);
            }
        }
        let mut mk: BTreeMap<CellRef, DMatrix<f64>> = BTreeMap::new();
        for &f in closure.iter().filter(|f| f.dim >= k) {
            let ops = self.spaces[k].face(f).ops.as_ref().expect("moment operators");
            let mut m = DMatrix::zeros(ops.own.nrows(), local.len);
            if let Some(rg) = local.local_range(f) {
                let mut view = m.columns_mut(rg.start, rg.len());
                view += &ops.own;
            }
            for (g, b) in &ops.boundary {
                let gm = mk.get(&CellRef::new(f.dim - 1, *g)).ok_or_else(missing)?;
                m += b * gm;
            }
            if let Some(dom) = &ops.dom {
                let dm = du.get(&f).ok_or_else(missing)?;
                m += dom * dm;
            }
            mk.insert(f, m);
        }
        Ok(MomentTable { cell: t, k, local, moments: mk })
    }
}

fn missing() -> DdrError {
    DdrError::Linalg("moment recursion visited a face before its boundary".into())
}

/// `(E^T W E)^{-1} E^T W`, with `W` the local Gram matrix of monomials times alternators.
fn expansion_matrix(cm: &CellMoments, basis: &[PolyForm], r: usize) -> Result<DMatrix<f64>> {
    let d = cm.dim();
    let k = basis[0].k();
    let full = basis_full(d, r, k)?.forms;
    let w = cm.gram(&full, &full);
    let e = DMatrix::from_fn(full.len(), basis.len(), |i, j| basis[j].coeffs()[i]);
    let etw = e.transpose() * &w;
    let g = &etw * &e;
    let chol = g
        .cholesky()
        .ok_or_else(|| DdrError::Linalg("dof basis Gram matrix is singular".into()))?;
    Ok(chol.solve(&etw))
}

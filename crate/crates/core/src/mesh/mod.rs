//! Polytopal meshes stored as face lattices with signed incidence.

mod builder;
mod io;

pub use builder::MeshBuilder;
pub use io::{load_mesh, RawCell, RawMesh};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{DdrError, Result};
use crate::integrate::simplex_det;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub dim: usize,
    pub index: usize,
}

impl CellRef {
    pub fn new(dim: usize, index: usize) -> Self {
        CellRef { dim, index }
    }
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-cell #{}", self.dim, self.index)
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub faces: Vec<(usize, i8)>,
    pub vertices: Vec<usize>,
    pub barycenter: DVector<f64>,
    /// Orthonormal tangent frame, `n x dim`.
    pub frame: DMatrix<f64>,
    pub diameter: f64,
    pub measure: f64,
    pub boundary: bool,
    /// All faces of every dimension including the cell itself, sorted.
    pub closure: Vec<CellRef>,
}

/// Simplices of one cell, each listed by its ambient vertex coordinates and
/// positively oriented with respect to the cell frame.
pub type SimplexDecomposition = Vec<Vec<DVector<f64>>>;

#[derive(Clone, Debug)]
pub struct MeshComplex {
    n: usize,
    points: Vec<DVector<f64>>,
    cells: Vec<Vec<Cell>>,
    cofaces: Vec<Vec<Vec<(usize, i8)>>>,
    simplices: Vec<Vec<SimplexDecomposition>>,
}

const FLAT_TOL: f64 = 1e-10;
const FRAME_TOL: f64 = 1e-12;

impl MeshComplex {
    /// Build and validate a complex from vertex coordinates and face lists.
    ///
    /// `faces[m - 1]` lists the cells of dimension `m`, each as a list of
    /// `(m-1)`-cell ids with optional orientation signs.
    pub fn from_parts(
        n: usize,
        points: Vec<Vec<f64>>,
        faces: Vec<Vec<(Vec<usize>, Option<Vec<i8>>)>>,
    ) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(DdrError::OutOfRange(format!("ambient dimension {n} not in 1..=3")));
        }
        if faces.len() > n {
            return Err(DdrError::OutOfRange(format!("cells of dimension {} exceed ambient dimension {n}", faces.len())));
        }
        let mut pts = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != n || p.iter().any(|v| !v.is_finite()) {
                return Err(DdrError::Invariant {
                    cell: CellRef::new(0, i),
                    what: format!("vertex must have {n} finite coordinates"),
                });
            }
            pts.push(DVector::from_vec(p.clone()));
        }
        let mut cells: Vec<Vec<Cell>> = vec![pts
            .iter()
            .enumerate()
            .map(|(i, p)| Cell {
                faces: vec![],
                vertices: vec![i],
                barycenter: p.clone(),
                frame: DMatrix::zeros(n, 0),
                diameter: 1.0,
                measure: 1.0,
                boundary: false,
                closure: vec![CellRef::new(0, i)],
            })
            .collect()];

        for (mi, list) in faces.iter().enumerate() {
            let m = mi + 1;
            let mut level = Vec::with_capacity(list.len());
            for (ci, (ids, signs)) in list.iter().enumerate() {
                let me = CellRef::new(m, ci);
                let below = &cells[m - 1];
                for &f in ids {
                    if f >= below.len() {
                        return Err(DdrError::UnknownFace { cell: me, face: f });
                    }
                }
                if ids.is_empty() {
                    return Err(DdrError::Invariant { cell: me, what: "cell has no faces".into() });
                }
                if let Some(s) = signs {
                    if s.len() != ids.len() || s.iter().any(|&v| v != 1 && v != -1) {
                        return Err(DdrError::Invariant { cell: me, what: "signs must be +1/-1, one per face".into() });
                    }
                }
                let mut vertices = Vec::new();
                let mut seen = BTreeSet::new();
                for &f in ids {
                    for &v in &below[f].vertices {
                        if seen.insert(v) {
                            vertices.push(v);
                        }
                    }
                }
                let mut closure: BTreeSet<CellRef> = BTreeSet::new();
                closure.insert(me);
                for &f in ids {
                    closure.extend(below[f].closure.iter().copied());
                }
                let cell = build_cell(me, n, &pts, below, ids, signs.as_deref(), vertices, closure)?;
                level.push(cell);
            }
            cells.push(level);
        }

        let top = cells.len() - 1;
        let mut cofaces: Vec<Vec<Vec<(usize, i8)>>> = cells.iter().map(|l| vec![Vec::new(); l.len()]).collect();
        for m in 1..cells.len() {
            for (ci, c) in cells[m].iter().enumerate() {
                for &(f, s) in &c.faces {
                    cofaces[m - 1][f].push((ci, s));
                }
            }
        }
        let mut mesh = MeshComplex { n, points: pts, cells, cofaces, simplices: vec![] };
        mesh.check_boundary_squared()?;
        if top == n && n >= 1 {
            mesh.mark_boundary()?;
        }
        mesh.decompose_all()?;
        Ok(mesh)
    }

    fn check_boundary_squared(&self) -> Result<()> {
        for m in 2..self.cells.len() {
            for (ci, c) in self.cells[m].iter().enumerate() {
                let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
                for &(f, s) in &c.faces {
                    for &(g, t) in &self.cells[m - 1][f].faces {
                        *acc.entry(g).or_insert(0) += (s as i64) * (t as i64);
                    }
                }
                if let Some((g, v)) = acc.iter().find(|(_, v)| **v != 0) {
                    return Err(DdrError::Invariant {
                        cell: CellRef::new(m, ci),
                        what: format!(
                            "boundary of boundary nonzero at {}-cell #{g} (coefficient {v}); \
                             the cell may not be star-shaped with respect to its vertex average",
                            m - 2
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    fn mark_boundary(&mut self) -> Result<()> {
        let n = self.n;
        let mut bnd = BTreeSet::new();
        for (fi, cof) in self.cofaces[n - 1].iter().enumerate() {
            let me = CellRef::new(n - 1, fi);
            match cof.len() {
                1 => {
                    bnd.extend(self.cells[n - 1][fi].closure.iter().copied());
                }
                2 => {
                    if cof[0].1 == cof[1].1 {
                        return Err(DdrError::Invariant {
                            cell: me,
                            what: "interior face has two cofaces with equal induced orientation".into(),
                        });
                    }
                }
                k => {
                    return Err(DdrError::Invariant { cell: me, what: format!("face has {k} cofaces (expected 1 or 2)") })
                }
            }
        }
        for c in bnd {
            self.cells[c.dim][c.index].boundary = true;
        }
        Ok(())
    }

    fn decompose_all(&mut self) -> Result<()> {
        let mut simp: Vec<Vec<SimplexDecomposition>> = Vec::with_capacity(self.cells.len());
        simp.push(self.points.iter().map(|p| vec![vec![p.clone()]]).collect());
        let mut measures: Vec<Vec<f64>> = vec![vec![1.0; self.points.len()]];
        for m in 1..self.cells.len() {
            let mut level = Vec::with_capacity(self.cells[m].len());
            let mut meas = Vec::with_capacity(self.cells[m].len());
            for (ci, c) in self.cells[m].iter().enumerate() {
                let me = CellRef::new(m, ci);
                let mut list = Vec::new();
                let mut total = 0.0;
                let scale = c.diameter.powi(m as i32);
                if m == 1 {
                    // A segment is its own simplex, ordered along the frame.
                    let (a, b) = (&self.points[c.vertices[0]], &self.points[c.vertices[1]]);
                    let t = c.frame.tr_mul(&(b - a))[0];
                    if t.abs() <= 1e-12 * scale {
                        return Err(DdrError::Degenerate { cell: me, measure: t.abs() });
                    }
                    let seg = if t > 0.0 { vec![a.clone(), b.clone()] } else { vec![b.clone(), a.clone()] };
                    level.push(vec![seg]);
                    meas.push(t.abs());
                    continue;
                }
                for &(f, s) in &c.faces {
                    for fs in &simp[m - 1][f] {
                        let mut cone = Vec::with_capacity(m + 1);
                        cone.push(c.barycenter.clone());
                        cone.extend(fs.iter().cloned());
                        if s < 0 {
                            cone.swap(0, 1);
                        }
                        let loc: Vec<DVector<f64>> =
                            cone.iter().map(|x| c.frame.tr_mul(&(x - &c.barycenter))).collect();
                        let det = simplex_det(&loc);
                        if det <= 1e-12 * scale {
                            return Err(DdrError::Degenerate { cell: me, measure: det / factorial(m) });
                        }
                        total += det / factorial(m);
                        list.push(cone);
                    }
                }
                level.push(list);
                meas.push(total);
            }
            simp.push(level);
            measures.push(meas);
        }
        for (m, meas) in measures.into_iter().enumerate() {
            for (ci, v) in meas.into_iter().enumerate() {
                self.cells[m][ci].measure = v;
            }
        }
        self.simplices = simp;
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    /// Highest dimension present.
    pub fn top_dim(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn count(&self, dim: usize) -> usize {
        self.cells.get(dim).map_or(0, |l| l.len())
    }

    pub fn counts(&self) -> Vec<usize> {
        self.cells.iter().map(|l| l.len()).collect()
    }

    pub fn cell(&self, c: CellRef) -> &Cell {
        &self.cells[c.dim][c.index]
    }

    pub fn cells(&self, dim: usize) -> &[Cell] {
        &self.cells[dim]
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn cofaces(&self, c: CellRef) -> &[(usize, i8)] {
        &self.cofaces[c.dim][c.index]
    }

    /// Largest diameter of a top-dimensional cell.
    pub fn mesh_size(&self) -> f64 {
        self.cells[self.top_dim()].iter().fold(0.0, |m, c| m.max(c.diameter))
    }

    /// Signed incidence matrix with rows indexed by cells of `dim` and columns by cells of `dim - 1`.
    pub fn incidence_matrix(&self, dim: usize) -> Result<CsrMatrix<f64>> {
        if dim == 0 || dim > self.top_dim() {
            return Err(DdrError::OutOfRange(format!("incidence dimension {dim} not in 1..={}", self.top_dim())));
        }
        let mut coo = CooMatrix::new(self.count(dim), self.count(dim - 1));
        for (ci, c) in self.cells[dim].iter().enumerate() {
            for &(f, s) in &c.faces {
                coo.push(ci, f, s as f64);
            }
        }
        Ok(CsrMatrix::from(&coo))
    }

    pub fn simplex_decomposition(&self, c: CellRef) -> &SimplexDecomposition {
        &self.simplices[c.dim][c.index]
    }

    /// Local scaled coordinates `F^T (x - b) / h` of an ambient point.
    pub fn to_local(&self, c: CellRef, x: &DVector<f64>) -> DVector<f64> {
        let cell = self.cell(c);
        cell.frame.tr_mul(&(x - &cell.barycenter)) / cell.diameter
    }

    pub fn to_ambient(&self, c: CellRef, xi: &DVector<f64>) -> DVector<f64> {
        let cell = self.cell(c);
        &cell.barycenter + &cell.frame * xi * cell.diameter
    }

    /// Affine map `xi_T = offset + a xi_F` from the local coordinates of a face `f`
    /// to those of `t`.
    pub fn trace_map(&self, t: CellRef, f: CellRef) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let ct = self.cell(t);
        if ct.closure.binary_search(&f).is_err() {
            return Err(DdrError::NotAFace { cell: t, face: f });
        }
        let cf = self.cell(f);
        let off = ct.frame.tr_mul(&(&cf.barycenter - &ct.barycenter)) / ct.diameter;
        let a = ct.frame.tr_mul(&cf.frame) * (cf.diameter / ct.diameter);
        Ok((off.iter().copied().collect(), a))
    }

    /// Affine map from the local coordinates of `c` to ambient coordinates.
    pub fn embedding(&self, c: CellRef) -> (Vec<f64>, DMatrix<f64>) {
        let cell = self.cell(c);
        (cell.barycenter.iter().copied().collect(), &cell.frame * cell.diameter)
    }

    /// Signed incidence between a cell and one of its codimension-one faces.
    pub fn incidence(&self, t: CellRef, f: CellRef) -> i8 {
        if f.dim + 1 != t.dim {
            return 0;
        }
        self.cell(t).faces.iter().find(|(g, _)| *g == f.index).map_or(0, |(_, s)| *s)
    }

    /// All cells of a given dimension in the closure of `c`.
    pub fn closure_of_dim(&self, c: CellRef, dim: usize) -> impl Iterator<Item = CellRef> + '_ {
        self.cell(c).closure.iter().copied().filter(move |r| r.dim == dim)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, b| a * b as f64)
}

#[allow(clippy::too_many_arguments)]
fn build_cell(
    me: CellRef,
    n: usize,
    pts: &[DVector<f64>],
    below: &[Cell],
    ids: &[usize],
    signs: Option<&[i8]>,
    vertices: Vec<usize>,
    closure: BTreeSet<CellRef>,
) -> Result<Cell> {
    let m = me.dim;
    let nv = vertices.len() as f64;
    let mut bary = DVector::zeros(n);
    for &v in &vertices {
        bary += &pts[v];
    }
    bary /= nv;
    let mut diam: f64 = 0.0;
    for (a, &va) in vertices.iter().enumerate() {
        for &vb in &vertices[a + 1..] {
            diam = diam.max((&pts[va] - &pts[vb]).norm());
        }
    }
    if diam <= 0.0 {
        return Err(DdrError::Invariant { cell: me, what: "zero diameter".into() });
    }
    let mut frame = if m == n {
        DMatrix::identity(n, n)
    } else {
        let mut cols: Vec<DVector<f64>> = Vec::new();
        let v0 = &pts[vertices[0]];
        for &v in &vertices[1..] {
            if cols.len() == m {
                break;
            }
            let mut w = &pts[v] - v0;
            for _ in 0..2 {
                for c in &cols {
                    let p = c.dot(&w);
                    w -= c * p;
                }
            }
            let nw = w.norm();
            if nw > 1e-8 * diam {
                cols.push(w / nw);
            }
        }
        if cols.len() < m {
            return Err(DdrError::Invariant { cell: me, what: format!("vertices span fewer than {m} dimensions") });
        }
        DMatrix::from_columns(&cols)
    };
    let gram = frame.tr_mul(&frame);
    let dev = (&gram - DMatrix::identity(m, m)).abs().max();
    if dev > FRAME_TOL {
        return Err(DdrError::Invariant { cell: me, what: format!("frame not orthonormal (deviation {dev:e})") });
    }
    for &v in &vertices {
        let r = &pts[v] - &bary;
        let res = &r - &frame * frame.tr_mul(&r);
        if res.norm() > FLAT_TOL * diam {
            return Err(DdrError::Invariant {
                cell: me,
                what: format!("cell is not flat (vertex {v} off the affine hull by {:e})", res.norm()),
            });
        }
    }
    let mut geo = Vec::with_capacity(ids.len());
    for &f in ids {
        let fc = &below[f];
        let mut nu = &fc.barycenter - &bary;
        nu = &frame * frame.tr_mul(&nu);
        nu = &nu - &fc.frame * fc.frame.tr_mul(&nu);
        let mut mat = DMatrix::zeros(m, m);
        mat.set_column(0, &frame.tr_mul(&nu));
        if m > 1 {
            let tf = frame.tr_mul(&fc.frame);
            for j in 0..m - 1 {
                mat.set_column(j + 1, &tf.column(j));
            }
        }
        let det = mat.determinant();
        if det.abs() <= 1e-12 * diam {
            return Err(DdrError::Invariant { cell: me, what: format!("cannot orient face {f}: barycenter lies on it") });
        }
        geo.push(if det > 0.0 { 1i8 } else { -1i8 });
    }
    if let Some(s) = signs {
        let same = s.iter().zip(&geo).all(|(a, b)| a == b);
        let flipped = s.iter().zip(&geo).all(|(a, b)| *a == -*b);
        if flipped && !same {
            let mut c0 = frame.column(0).clone_owned();
            c0.neg_mut();
            frame.set_column(0, &c0);
            geo.iter_mut().for_each(|g| *g = -*g);
        } else if !same {
            return Err(DdrError::Invariant {
                cell: me,
                what: "given incidence signs disagree with the geometric orientation; \
                       the cell may not be star-shaped with respect to its vertex average"
                    .into(),
            });
        }
    }
    Ok(Cell {
        faces: ids.iter().copied().zip(geo).collect(),
        vertices,
        barycenter: bary,
        frame,
        diameter: diam,
        measure: 0.0,
        boundary: false,
        closure: closure.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> MeshComplex {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let edges = vec![(vec![0, 1], None), (vec![1, 2], None), (vec![2, 3], None), (vec![3, 0], None)];
        let quads = vec![(vec![0, 1, 2, 3], None)];
        MeshComplex::from_parts(2, pts, vec![edges, quads]).unwrap()
    }

    #[test]
    fn square_counts_and_incidence() {
        let m = unit_square();
        assert_eq!(m.counts(), vec![4, 4, 1]);
        let d1 = m.incidence_matrix(1).unwrap();
        let d2 = m.incidence_matrix(2).unwrap();
        let prod = &d2 * &d1;
        assert!(prod.values().iter().all(|v| *v == 0.0));
        assert!(m.cells(1).iter().all(|c| c.boundary));
        assert!(!m.cells(2)[0].boundary);
    }

    #[test]
    fn square_decomposition() {
        let m = unit_square();
        let s = m.simplex_decomposition(CellRef::new(2, 0));
        assert_eq!(s.len(), 4);
        for t in s {
            assert!((simplex_det(t).abs() / 2.0 - 0.25).abs() < 1e-15);
        }
        assert!((m.cell(CellRef::new(2, 0)).measure - 1.0).abs() < 1e-14);
    }

    #[test]
    fn segment_incidence() {
        let m = MeshComplex::from_parts(1, vec![vec![0.0], vec![2.0]], vec![vec![(vec![0, 1], None)]]).unwrap();
        let d = m.incidence_matrix(1).unwrap();
        let dense: Vec<f64> = (0..2).map(|j| d.get_entry(0, j).unwrap().into_value()).collect();
        assert_eq!(dense, vec![-1.0, 1.0]);
        let s = m.simplex_decomposition(CellRef::new(1, 0));
        assert_eq!(s.len(), 1);
        assert!((m.cell(CellRef::new(1, 0)).measure - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_face() {
        let err = MeshComplex::from_parts(2, vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![vec![(vec![0, 5], None)]])
            .unwrap_err();
        assert!(err.to_string().contains("unknown face id"));
    }

    #[test]
    fn trace_map_identity_and_edge() {
        let m = unit_square();
        let t = CellRef::new(2, 0);
        let (c, a) = m.trace_map(t, t).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-15));
        assert!((a - DMatrix::identity(2, 2)).abs().max() < 1e-15);
        let e = CellRef::new(1, 0);
        let (_, a) = m.trace_map(t, e).unwrap();
        assert_eq!(a.shape(), (2, 1));
        let rot = m.cell(t).frame.tr_mul(&m.cell(e).frame);
        assert!((rot[(0, 0)] - 1.0).abs() < 1e-15 && rot[(1, 0)].abs() < 1e-15);
        let ratio = m.cell(e).diameter / m.cell(t).diameter;
        assert!((a[(0, 0)] - ratio).abs() < 1e-15);
    }
}

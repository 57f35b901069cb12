//! Mixed Hodge-Laplace problems on the discrete complex, Betti numbers and
//! Poincare constants.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddr::DdrComplex;
use crate::error::{DdrError, Result};
use crate::forms::PolyForm;
use crate::integrate::integrate_simplex;
use crate::linalg::{
    csr_from_triplets, csr_to_dense, dense_rank, generalized_eigenvalues, lu_solve, norm, numerical_rank, rank_mod_p,
    relative_residual, spmv, submatrix, triplets_of, SparseLu, RANK_TOL,
};
use crate::mesh::{CellRef, MeshComplex};
use crate::product::{global_mass, reconstruction, to_ambient_form};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Natural,
    Essential,
}

impl std::str::FromStr for Bc {
    type Err = DdrError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(Bc::Natural),
            "essential" => Ok(Bc::Essential),
            _ => Err(DdrError::Parse(format!("unknown boundary condition '{s}'"))),
        }
    }
}

/// Indices of dofs on boundary faces.
pub fn boundary_dofs(cx: &DdrComplex<'_>, k: usize) -> Vec<bool> {
    let mesh = cx.mesh();
    let layout = cx.layout(k);
    let mut out = vec![false; layout.total()];
    for m in 0..=mesh.top_dim() {
        for (i, c) in mesh.cells(m).iter().enumerate() {
            if c.boundary {
                for g in layout.range(CellRef::new(m, i)) {
                    out[g] = true;
                }
            }
        }
    }
    out
}

/// Betti numbers of the cellular complex, exactly (modulo a large prime).
/// With `relative` the boundary cells are removed.
pub fn cellular_betti(mesh: &MeshComplex, relative: bool) -> Result<Vec<usize>> {
    let top = mesh.top_dim();
    let keep: Vec<Vec<usize>> = (0..=top)
        .map(|m| (0..mesh.count(m)).filter(|&i| !relative || !mesh.cells(m)[i].boundary).collect())
        .collect();
    let mut ranks = vec![0usize; top + 2];
    for m in 1..=top {
        let inc = mesh.incidence_matrix(m)?;
        ranks[m] = rank_mod_p(&submatrix(&inc, &keep[m], &keep[m - 1]))?;
    }
    Ok((0..=top).map(|m| keep[m].len() - ranks[m] - ranks[m + 1]).collect())
}

/// Betti numbers of the discrete complex from numerical ranks of `D_k`.
pub fn betti(cx: &DdrComplex<'_>) -> Result<Vec<usize>> {
    let top = cx.mesh().top_dim();
    let mut ranks = vec![0usize; top + 2];
    for k in 0..top {
        ranks[k + 1] = dense_rank(&csr_to_dense(cx.discrete_d(k)?))?;
    }
    Ok((0..=top).map(|k| cx.layout(k).total() - ranks[k + 1] - ranks[k]).collect())
}

/// Assembled (and reduced) linear system of a Hodge-Laplace problem.
#[derive(Clone, Debug)]
pub struct MixedSystem {
    pub k: usize,
    pub bc: Bc,
    pub matrix: CsrMatrix<f64>,
    pub rhs: Vec<f64>,
    pub free_u: Vec<usize>,
    pub free_p: Vec<usize>,
    pub n_harmonic: usize,
    lift_u: Vec<f64>,
    lift_p: Vec<f64>,
    pub mass_u: CsrMatrix<f64>,
    pub mass_p: Option<CsrMatrix<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Solution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub residual: f64,
}

/// Inputs of a Hodge-Laplace problem, as dof vectors.
pub struct ProblemData<'a> {
    pub k: usize,
    pub bc: Bc,
    pub tau: f64,
    /// Interpolated source `I(f)`.
    pub load: &'a [f64],
    /// Boundary values of `u` and `p` for essential conditions (zero when absent).
    pub lift_u: Option<&'a [f64]>,
    pub lift_p: Option<&'a [f64]>,
}

/// Basis of discrete harmonic forms (columns, full length, zero on fixed dofs).
///
/// The kernel of the reduced mixed matrix `K` consists of the pairs `(h, 0)`
/// with `h` harmonic. It is found by inverse iteration with the shift
/// `K + sigma diag(M, -M')`, whose inverse amplifies the kernel by `1/sigma`.
fn harmonic_basis(
    cx: &DdrComplex<'_>,
    sys: (&CsrMatrix<f64>, &CsrMatrix<f64>, Option<&CsrMatrix<f64>>),
    k: usize,
    bc: Bc,
    free_u: &[usize],
    free_p: &[usize],
) -> Result<DMatrix<f64>> {
    let (reduced, mass_u, mass_p) = sys;
    let mesh = cx.mesh();
    let n_u = cx.layout(k).total();
    let b = cellular_betti(mesh, bc == Bc::Essential)?[k];
    if b == 0 {
        return Ok(DMatrix::zeros(n_u, 0));
    }
    if k == 0 && bc == Bc::Natural {
        let one = PolyForm::monomial(mesh.ambient_dim(), 0, &[0, 0, 0][..mesh.ambient_dim()], 0);
        let v = cx.interpolate_poly(0, &one)?;
        return Ok(DMatrix::from_column_slice(n_u, 1, &v));
    }
    let nu = free_u.len();
    let mut metric = triplets_of(&submatrix(mass_u, free_u, free_u));
    if let Some(mp) = mass_p {
        metric.extend(triplets_of(&submatrix(mp, free_p, free_p)).into_iter().map(|(i, j, v)| (nu + i, nu + j, v)));
    }
    let nf = reduced.nrows();
    let metric = csr_from_triplets(nf, nf, &metric);
    const SIGMA: f64 = 1e-6;
    let mut shifted = triplets_of(reduced);
    shifted.extend(triplets_of(&metric).into_iter().map(|(i, j, v)| (i, j, if i < nu { SIGMA * v } else { -SIGMA * v })));
    let shifted = csr_from_triplets(nf, nf, &shifted);
    let lu = SparseLu::new(&shifted)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x6861726d);
    let mut x: Vec<Vec<f64>> = (0..b).map(|_| (0..nf).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    for _ in 0..4 {
        let mut next = Vec::with_capacity(b);
        for v in &x {
            next.push(lu.solve(&spmv(&metric, v))?);
        }
        x = metric_orthonormalize(&metric, next)?;
    }
    let scale = reduced.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in &x {
        let res = norm(&spmv(reduced, v)) / (scale * norm(v));
        if res > 1e-8 {
            return Err(DdrError::Linalg(format!("harmonic forms not resolved (residual {res:e})")));
        }
    }
    let mut h = DMatrix::zeros(n_u, b);
    for (c, v) in x.iter().enumerate() {
        for (fi, &g) in free_u.iter().enumerate() {
            h[(g, c)] = v[fi];
        }
    }
    Ok(h)
}

/// Gram-Schmidt in the inner product of an SPD matrix, applied twice.
fn metric_orthonormalize(m: &CsrMatrix<f64>, mut vs: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(spmv(m, b)).map(|(x, y)| x * y).sum::<f64>();
    for i in 0..vs.len() {
        for _ in 0..2 {
            for j in 0..i {
                let c = dot(&vs[j], &vs[i]);
                let (head, tail) = vs.split_at_mut(i);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= c * b;
                }
            }
        }
        let n = dot(&vs[i], &vs[i]).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(DdrError::Singular { nullity: i });
        }
        vs[i].iter_mut().for_each(|v| *v /= n);
    }
    Ok(vs)
}

pub fn assemble(cx: &DdrComplex<'_>, data: &ProblemData<'_>) -> Result<MixedSystem> {
    let k = data.k;
    let top = cx.mesh().top_dim();
    if k > top {
        return Err(DdrError::OutOfRange(format!("form degree {k} exceeds mesh dimension {top}")));
    }
    let n_u = cx.layout(k).total();
    let n_p = if k > 0 { cx.layout(k - 1).total() } else { 0 };
    if data.load.len() != n_u {
        return Err(DdrError::Invalid("load vector has the wrong length".into()));
    }
    let mass_u = global_mass(cx, k, data.tau)?;
    let mass_p = if k > 0 { Some(global_mass(cx, k - 1, data.tau)?) } else { None };

    let (bu, bp) = match data.bc {
        Bc::Natural => (vec![false; n_u], vec![false; n_p]),
        Bc::Essential => (boundary_dofs(cx, k), if k > 0 { boundary_dofs(cx, k - 1) } else { vec![] }),
    };
    let free_u: Vec<usize> = (0..n_u).filter(|&i| !bu[i]).collect();
    let free_p: Vec<usize> = (0..n_p).filter(|&i| !bp[i]).collect();
    let mut lift_u = vec![0.0; n_u];
    let mut lift_p = vec![0.0; n_p];
    if let Some(l) = data.lift_u {
        for i in 0..n_u {
            if bu[i] {
                lift_u[i] = l[i];
            }
        }
    }
    if let Some(l) = data.lift_p {
        for i in 0..n_p {
            if bp[i] {
                lift_p[i] = l[i];
            }
        }
    }

    // Full block matrix on (u, p), symmetric:
    // [ D^T M D     M D' ]
    // [ D'^T M     -M'   ]
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    if k < top {
        let d = cx.discrete_d(k)?;
        let m1 = global_mass(cx, k + 1, data.tau)?;
        let a = d.transpose() * &(&m1 * d);
        trips.extend(triplets_of(&a));
    }
    if let Some(mp) = &mass_p {
        let dp = cx.discrete_d(k - 1)?;
        let b = &mass_u * dp;
        for (i, j, v) in triplets_of(&b) {
            trips.push((i, n_u + j, v));
            trips.push((n_u + j, i, v));
        }
        for (i, j, v) in triplets_of(mp) {
            trips.push((n_u + i, n_u + j, -v));
        }
    }
    let full = csr_from_triplets(n_u + n_p, n_u + n_p, &trips);
    let mut full_rhs = vec![0.0; n_u + n_p];
    let l = spmv(&mass_u, data.load);
    full_rhs[..n_u].copy_from_slice(&l);
    let mut lift = lift_u.clone();
    lift.extend_from_slice(&lift_p);
    let al = spmv(&full, &lift);
    for (r, a) in full_rhs.iter_mut().zip(&al) {
        *r -= a;
    }

    let free: Vec<usize> = free_u.iter().copied().chain(free_p.iter().map(|&j| n_u + j)).collect();
    let reduced = submatrix(&full, &free, &free);
    let mut rhs: Vec<f64> = free.iter().map(|&i| full_rhs[i]).collect();

    let h = harmonic_basis(cx, (&reduced, &mass_u, mass_p.as_ref()), k, data.bc, &free_u, &free_p)?;
    let nh = h.ncols();
    let nf = free.len();
    let mut trips = triplets_of(&reduced);
    if nh > 0 {
        let mh: Vec<Vec<f64>> = (0..nh).map(|c| spmv(&mass_u, h.column(c).as_slice())).collect();
        for (c, col) in mh.iter().enumerate() {
            for (fi, &g) in free_u.iter().enumerate() {
                let v = col[g];
                if v != 0.0 {
                    trips.push((fi, nf + c, v));
                    trips.push((nf + c, fi, v));
                }
            }
            rhs.push(-(0..n_u).filter(|&i| bu[i]).map(|i| col[i] * lift_u[i]).sum::<f64>());
        }
    }
    let matrix = csr_from_triplets(nf + nh, nf + nh, &trips);
    Ok(MixedSystem { k, bc: data.bc, matrix, rhs, free_u, free_p, n_harmonic: nh, lift_u, lift_p, mass_u, mass_p })
}

pub fn solve(sys: &MixedSystem) -> Result<Solution> {
    let x = lu_solve(&sys.matrix, &sys.rhs)?;
    let residual = relative_residual(&sys.matrix, &x, &sys.rhs);
    let mut u = sys.lift_u.clone();
    let mut p = sys.lift_p.clone();
    for (i, &g) in sys.free_u.iter().enumerate() {
        u[g] = x[i];
    }
    let nu = sys.free_u.len();
    for (i, &g) in sys.free_p.iter().enumerate() {
        p[g] = x[nu + i];
    }
    let np = sys.free_p.len();
    let multipliers = x[nu + np..].to_vec();
    if residual > 1e-10 {
        return Err(DdrError::Linalg(format!("relative residual {residual:e} exceeds 1e-10")));
    }
    Ok(Solution { u, p, multipliers, residual })
}

/// `sqrt(e^T M e)` for `e = a - b`.
pub fn discrete_norm_error(mass: &CsrMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let e: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let me = spmv(mass, &e);
    e.iter().zip(&me).map(|(x, y)| x * y).sum::<f64>().max(0.0).sqrt()
}

/// Broken L2 error between cellwise reconstructions and an exact form given by
/// its lexicographic ambient components.
pub fn reconstruction_error<F>(cx: &DdrComplex<'_>, k: usize, uh: &[f64], exact: &F, q: usize) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Vec<f64> + Sync,
{
    let mesh = cx.mesh();
    let top = mesh.top_dim();
    let parts: Vec<f64> = (0..mesh.count(top))
        .into_par_iter()
        .map(|i| {
            let t = CellRef::new(top, i);
            let (rec, _) = reconstruction(cx, k, t)?;
            let g = to_ambient_form(cx, t, &rec.apply(&rec.local.gather(uh)));
            let mut acc = 0.0;
            for s in mesh.simplex_decomposition(t) {
                acc += integrate_simplex(s, q, |x| {
                    let a = g.eval(x.as_slice());
                    let b = exact(x);
                    a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum()
                });
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub k: usize,
    pub r: usize,
    pub h: f64,
    pub dofs: usize,
    pub residual: f64,
    pub err_u: f64,
    pub err_p: f64,
    pub err_u_discrete: f64,
    pub err_p_discrete: f64,
}

/// Poincare constant `C` in `|u|_h <= C |D u|_h` on the orthogonal complement of `ker D_k`.
pub fn poincare_constant(cx: &DdrComplex<'_>, k: usize, tau: f64, bc: Bc) -> Result<f64> {
    let top = cx.mesh().top_dim();
    if k >= top {
        return Err(DdrError::OutOfRange(format!("Poincare constant needs k < {top}")));
    }
    let n = cx.layout(k).total();
    let free: Vec<usize> = match bc {
        Bc::Natural => (0..n).collect(),
        Bc::Essential => {
            let b = boundary_dofs(cx, k);
            (0..n).filter(|&i| !b[i]).collect()
        }
    };
    let m = global_mass(cx, k, tau)?;
    let m1 = global_mass(cx, k + 1, tau)?;
    let d = cx.discrete_d(k)?;
    let a = d.transpose() * &(&m1 * d);
    let a = csr_to_dense(&submatrix(&a, &free, &free));
    let m = csr_to_dense(&submatrix(&m, &free, &free));
    let ev = generalized_eigenvalues(&a, &m)?;
    let abs: Vec<f64> = ev.iter().map(|v| v.abs()).collect();
    let rank = numerical_rank(&abs, RANK_TOL)?;
    let kernel = ev.len() - rank;
    let lmin = ev.get(kernel).copied().ok_or_else(|| DdrError::Singular { nullity: kernel })?;
    Ok(1.0 / lmin.sqrt())
}

/// Exact rank check used by diagnostics: dimension of `ker D_k`.
pub fn kernel_dimension(cx: &DdrComplex<'_>, k: usize) -> Result<usize> {
    let d = csr_to_dense(cx.discrete_d(k)?);
    Ok(d.ncols() - dense_rank(&d)?)
}

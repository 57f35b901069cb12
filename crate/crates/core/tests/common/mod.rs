//! Independent oracles and drivers shared by the integration tests.
//!
//! Cells are split into fans from their first vertex (not from the
//! barycenter) and integrated with collapsed tensor Gauss-Legendre rules.

#![allow(dead_code)]

use ddr::ddr::DdrComplex;
use ddr::forms::PolyForm;
use ddr::harness::manufactured::polynomial;
use ddr::hodge::{assemble, discrete_norm_error, solve, Bc, ProblemData};
use ddr::linalg::spmv;
use ddr::mesh::{CellRef, MeshComplex};
use ddr::product::global_mass;
use nalgebra::{DMatrix, DVector};

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out
}

/// Collapsed rule on the reference m-simplex `{x_i >= 0, sum x_i <= 1}`.
pub fn reference_rule(m: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    let g = gauss_legendre(n);
    match m {
        0 => vec![(vec![], 1.0)],
        1 => g.iter().map(|&(x, w)| (vec![x], w)).collect(),
        2 => {
            let mut out = Vec::new();
            for &(u, wu) in &g {
                for &(v, wv) in &g {
                    out.push((vec![u, v * (1.0 - u)], wu * wv * (1.0 - u)));
                }
            }
            out
        }
        3 => {
            let mut out = Vec::new();
            for &(u, wu) in &g {
                for &(v, wv) in &g {
                    for &(w, ww) in &g {
                        let j = (1.0 - u) * (1.0 - u) * (1.0 - v);
                        out.push((vec![u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v)], wu * wv * ww * j));
                    }
                }
            }
            out
        }
        _ => panic!("unsupported simplex dimension"),
    }
}

fn polygon_loop(mesh: &MeshComplex, c: CellRef) -> Vec<usize> {
    let edges: Vec<Vec<usize>> =
        mesh.cell(c).faces.iter().map(|&(e, _)| mesh.cell(CellRef::new(1, e)).vertices.clone()).collect();
    let mut lp = vec![edges[0][0], edges[0][1]];
    let mut used = vec![false; edges.len()];
    used[0] = true;
    while lp.len() < edges.len() {
        let last = *lp.last().unwrap();
        let (i, e) = edges.iter().enumerate().find(|(i, e)| !used[*i] && e.contains(&last)).unwrap();
        used[i] = true;
        lp.push(if e[0] == last { e[1] } else { e[0] });
    }
    lp
}

/// Ambient simplices covering a cell, fanned from its first vertex.
pub fn fan_simplices(mesh: &MeshComplex, c: CellRef) -> Vec<Vec<DVector<f64>>> {
    let p = |i: usize| mesh.points()[i].clone();
    match c.dim {
        0 => vec![vec![p(mesh.cell(c).vertices[0])]],
        1 => vec![mesh.cell(c).vertices.iter().map(|&v| p(v)).collect()],
        2 => {
            let lp = polygon_loop(mesh, c);
            (1..lp.len() - 1).map(|i| vec![p(lp[0]), p(lp[i]), p(lp[i + 1])]).collect()
        }
        3 => {
            let apex = mesh.cell(c).vertices[0];
            let mut out = Vec::new();
            for &(f, _) in &mesh.cell(c).faces {
                let fc = CellRef::new(2, f);
                if mesh.cell(fc).vertices.contains(&apex) {
                    continue;
                }
                let lp = polygon_loop(mesh, fc);
                for i in 1..lp.len() - 1 {
                    out.push(vec![p(apex), p(lp[0]), p(lp[i]), p(lp[i + 1])]);
                }
            }
            out
        }
        _ => unreachable!(),
    }
}

/// Physical m-volume of a simplex embedded in ambient space.
fn simplex_volume(s: &[DVector<f64>]) -> f64 {
    let m = s.len() - 1;
    if m == 0 {
        return 1.0;
    }
    let e = DMatrix::from_fn(s[0].len(), m, |i, j| s[j + 1][i] - s[0][i]);
    let g = e.transpose() * &e;
    let fact: f64 = (1..=m).map(|x| x as f64).product();
    g.determinant().max(0.0).sqrt() / fact
}

/// `int_c f` with respect to the physical measure.
pub fn integrate_cell<F: Fn(&DVector<f64>) -> f64>(mesh: &MeshComplex, c: CellRef, n: usize, f: F) -> f64 {
    let m = c.dim;
    let fact: f64 = (1..=m).map(|x| x as f64).product();
    let rule = reference_rule(m, n);
    let mut acc = 0.0;
    for s in fan_simplices(mesh, c) {
        let vol = simplex_volume(&s) * fact;
        for (x, w) in &rule {
            let mut pt = s[0].clone();
            for (i, xi) in x.iter().enumerate() {
                pt += (&s[i + 1] - &s[0]) * *xi;
            }
            acc += w * vol * f(&pt);
        }
    }
    acc
}

/// Scaled local coordinates of an ambient point on a cell.
pub fn local_coords(mesh: &MeshComplex, c: CellRef, x: &DVector<f64>) -> Vec<f64> {
    let cell = mesh.cell(c);
    (cell.frame.transpose() * (x - &cell.barycenter) / cell.diameter).iter().copied().collect()
}

/// Increasing k-subsets of `0..m` in lexicographic order.
pub fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

fn perm_sign(seq: &[usize]) -> f64 {
    let mut inv = 0;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 { 1.0 } else { -1.0 }
}

fn det_sub(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    if k == 0 {
        return 1.0;
    }
    DMatrix::from_fn(k, k, |i, j| a[(rows[i], cols[j])]).determinant()
}

/// `int_F u ^ w` in the local coordinates of `F`, where `u` is an ambient k-form
/// given by its lexicographic components and `w` is an `(m-k)`-form in the
/// local coordinates of `F`.
pub fn face_moment<U>(mesh: &MeshComplex, f: CellRef, k: usize, u: &U, w: &PolyForm, n: usize) -> f64
where
    U: Fn(&DVector<f64>) -> Vec<f64>,
{
    let m = f.dim;
    let cell = mesh.cell(f);
    let h = cell.diameter;
    let tangent = &cell.frame * h;
    let amb = subsets(mesh.ambient_dim(), k);
    let loc = subsets(m, k);
    let comp = subsets(m, m - k);
    let phys = integrate_cell(mesh, f, n, |x| {
        let ua = u(x);
        let xi = local_coords(mesh, f, x);
        let wv = w.eval(&xi);
        let mut top = 0.0;
        for j in &loc {
            let mut uj = 0.0;
            for (ia, i) in amb.iter().enumerate() {
                uj += ua[ia] * det_sub(&tangent, i, j);
            }
            let jc: Vec<usize> = (0..m).filter(|t| !j.contains(t)).collect();
            let ci = comp.iter().position(|c| *c == jc).unwrap();
            let seq: Vec<usize> = j.iter().chain(&jc).copied().collect();
            top += perm_sign(&seq) * uj * wv[ci];
        }
        top
    });
    phys / h.powi(m as i32)
}

/// Exact `int_T p . q` of ambient forms over a top cell by the fan oracle.
pub fn inner_oracle(mesh: &MeshComplex, t: CellRef, p: &PolyForm, q: &PolyForm, n: usize) -> f64 {
    integrate_cell(mesh, t, n, |x| {
        let a = p.eval(x.as_slice());
        let b = q.eval(x.as_slice());
        a.iter().zip(&b).map(|(s, t)| s * t).sum()
    })
}

/// Relative error helper.
pub fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

/// Barycentric coordinates of `x` in a simplex.
pub fn barycentric(verts: &[DVector<f64>], x: &DVector<f64>) -> Vec<f64> {
    let m = verts.len() - 1;
    let a = DMatrix::from_fn(m, m, |i, j| verts[j + 1][i] - verts[0][i]);
    let l = a.lu().solve(&(x - &verts[0])).unwrap();
    let mut out = vec![1.0 - l.sum()];
    out.extend(l.iter());
    out
}

/// Gradients of the barycentric coordinates, as rows.
pub fn bary_gradients(verts: &[DVector<f64>]) -> Vec<Vec<f64>> {
    let m = verts.len() - 1;
    let a = DMatrix::from_fn(m, m, |i, j| verts[j + 1][i] - verts[0][i]);
    let inv = a.try_inverse().unwrap();
    let mut g = vec![vec![0.0; m]; m + 1];
    for i in 0..m {
        for c in 0..m {
            g[i + 1][c] = inv[(i, c)];
            g[0][c] -= inv[(i, c)];
        }
    }
    g
}

/// Whitney form `k! sum_i (-1)^i l_i dl_0 ^ .. ^ dl_k` (hat omitted) of the
/// vertex sequence `sigma`, as lexicographic components.
pub fn whitney(verts: &[DVector<f64>], sigma: &[usize], x: &DVector<f64>) -> Vec<f64> {
    let m = verts.len() - 1;
    let k = sigma.len() - 1;
    let lam = barycentric(verts, x);
    let grad = bary_gradients(verts);
    let fact: f64 = (1..=k).map(|v| v as f64).product();
    let alts = subsets(m, k);
    let mut out = vec![0.0; alts.len()];
    for i in 0..=k {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let rest: Vec<usize> = sigma.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &v)| v).collect();
        for (ci, cols) in alts.iter().enumerate() {
            let g = DMatrix::from_fn(k, k, |a, b| grad[rest[a]][cols[b]]);
            let det = if k == 0 { 1.0 } else { g.determinant() };
            out[ci] += fact * sign * lam[sigma[i]] * det;
        }
    }
    out
}

/// Relative error of `<I p, I q>_h` against the oracle, summed over top cells.
pub fn consistency_error(cx: &DdrComplex<'_>, k: usize, tau: f64, p: &PolyForm, q: &PolyForm) -> f64 {
    let mesh = cx.mesh();
    let top = mesh.top_dim();
    let r = cx.r();
    let m = global_mass(cx, k, tau).unwrap();
    let ip = cx.interpolate_poly(k, p).unwrap();
    let iq = cx.interpolate_poly(k, q).unwrap();
    let h: f64 = ip.iter().zip(spmv(&m, &iq)).map(|(a, b)| a * b).sum();
    let (mut e, mut np, mut nq) = (0.0, 0.0, 0.0);
    for i in 0..mesh.count(top) {
        let t = CellRef::new(top, i);
        e += inner_oracle(mesh, t, p, q, r + 3);
        np += inner_oracle(mesh, t, p, p, r + 3);
        nq += inner_oracle(mesh, t, q, q, r + 3);
    }
    (h - e).abs() / (np * nq).sqrt()
}

/// Mean of a polynomial top form over the unit cube `[0,1]^n`.
pub fn unit_cube_mean(u: &PolyForm) -> f64 {
    u.terms().iter().map(|(alpha, _, c)| c / alpha.iter().map(|&a| a as f64 + 1.0).product::<f64>()).sum()
}

/// Discrete errors `(u, p)` of the patch test with essential conditions.
pub fn patch_errors(mesh: &MeshComplex, k: usize, r: usize, seed: u64) -> (f64, f64) {
    let n = mesh.ambient_dim();
    let case = polynomial(n, k, r, seed).unwrap();
    let mut u = case.u.clone();
    if k == n {
        // The harmonic top forms are the constants; the solution is orthogonal to them.
        let one = PolyForm::monomial(n, n, &[0u8; 3][..n], (1u8 << n) - 1);
        u.axpy(-unit_cube_mean(&case.u), &one);
    }
    let cx = DdrComplex::new(mesh, r).unwrap();
    let iu = cx.interpolate_poly(k, &u).unwrap();
    let ip = case.p.as_ref().map(|p| cx.interpolate_poly(k - 1, p).unwrap());
    let load = cx.interpolate_poly(k, &case.f).unwrap();
    let data = ProblemData { k, bc: Bc::Essential, tau: 1.0, load: &load, lift_u: Some(&iu), lift_p: ip.as_deref() };
    let sys = assemble(&cx, &data).unwrap();
    let sol = solve(&sys).unwrap();
    assert!(sol.residual <= 1e-10);
    let scale_u = discrete_norm_error(&sys.mass_u, &iu, &vec![0.0; iu.len()]).max(1.0);
    let eu = discrete_norm_error(&sys.mass_u, &iu, &sol.u) / scale_u;
    let ep = match (&ip, &sys.mass_p) {
        (Some(ip), Some(mp)) => discrete_norm_error(mp, ip, &sol.p) / discrete_norm_error(mp, ip, &vec![0.0; ip.len()]).max(1.0),
        _ => 0.0,
    };
    (eu, ep)
}

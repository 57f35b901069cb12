//! Exact monomial integration over simplices and Grundmann-Moller rules.

use nalgebra::{DMatrix, DVector};

use crate::forms::PolyForm;
use crate::mesh::{CellRef, MeshComplex};
use crate::poly::{exponents, monomial_index, n_monomials, Poly, MAX_VARS};

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, b| a * b as f64)
}

/// Signed volume factor `det[v1 - v0, .., vm - v0]` of an m-simplex in m dimensions.
pub fn simplex_det(verts: &[DVector<f64>]) -> f64 {
    let m = verts.len() - 1;
    if m == 0 {
        return 1.0;
    }
    let j = DMatrix::from_fn(m, m, |i, c| verts[c + 1][i] - verts[0][i]);
    j.determinant()
}

/// Integrals `int_S x^alpha dx` for every monomial of degree `<= deg`, where the
/// simplex `S` is given by `m + 1` points in `R^m`. The orientation is ignored.
pub fn simplex_moments(verts: &[DVector<f64>], deg: usize) -> Vec<f64> {
    let m = verts.len() - 1;
    let n = n_monomials(m, deg);
    if m == 0 {
        let mut out = vec![0.0; n];
        out[0] = 1.0;
        return out;
    }
    let vol = simplex_det(verts).abs();
    // x_i as a linear polynomial in the m + 1 barycentric coordinates.
    let lin: Vec<Poly> = (0..m)
        .map(|i| {
            let coefs: Vec<f64> = verts.iter().map(|v| v[i]).collect();
            Poly::linear(0.0, &coefs)
        })
        .collect();
    let lam_ex = exponents(m + 1);
    let lam_weight: Vec<f64> = (0..n_monomials(m + 1, deg))
        .map(|i| {
            let e = &lam_ex[i];
            let s: usize = e[..m + 1].iter().map(|&a| a as usize).sum();
            let num: f64 = e[..m + 1].iter().map(|&a| factorial(a as usize)).product();
            num / factorial(s + m) * vol
        })
        .collect();
    let ex = exponents(m);
    let mut powers: Vec<Poly> = Vec::with_capacity(n);
    let mut out = vec![0.0; n];
    powers.push(Poly::constant(m + 1, 1.0));
    for idx in 0..n {
        if idx > 0 {
            let e = ex[idx];
            let i = (0..m).find(|&t| e[t] > 0).unwrap();
            let mut prev = e;
            prev[i] -= 1;
            let p = powers[monomial_index(&prev[..m])].mul(&lin[i]);
            powers.push(p);
        }
        out[idx] = powers[idx].coeffs().iter().zip(&lam_weight).map(|(a, b)| a * b).sum();
    }
    out
}

/// A Grundmann-Moller rule of degree `2s + 1` on the m-simplex, as barycentric
/// points with weights normalized to sum to one.
pub fn grundmann_moller(m: usize, s: usize) -> Vec<(Vec<f64>, f64)> {
    if m == 0 {
        return vec![(vec![1.0], 1.0)];
    }
    let mut out = Vec::new();
    let d = 2 * s + m + 1;
    for i in 0..=s {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let denom_pt = (d - 2 * i) as f64;
        let w = sign * 2f64.powi(-(2 * s as i32)) * denom_pt.powi(2 * s as i32 + 1)
            / (factorial(i) * factorial(d - i))
            * factorial(m);
        for beta in compositions(m + 1, s - i) {
            let pt: Vec<f64> = beta.iter().map(|&b| (2 * b + 1) as f64 / denom_pt).collect();
            out.push((pt, w));
        }
    }
    out
}

fn compositions(parts: usize, total: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for a in 0..=total {
        for mut rest in compositions(parts - 1, total - a) {
            rest.insert(0, a);
            out.push(rest);
        }
    }
    out
}

/// Integrate a function over a simplex with a rule of degree at least `q`.
pub fn integrate_simplex<F: FnMut(&DVector<f64>) -> f64>(verts: &[DVector<f64>], q: usize, mut f: F) -> f64 {
    let m = verts.len() - 1;
    let vol = simplex_det(verts).abs() / factorial(m);
    let s = q.saturating_sub(1).div_ceil(2);
    let mut acc = 0.0;
    for (bary, w) in grundmann_moller(m, s) {
        let mut x = DVector::zeros(verts[0].len());
        for (b, v) in bary.iter().zip(verts) {
            x += v * *b;
        }
        acc += w * f(&x);
    }
    acc * vol
}

/// Monomial moments `int x^alpha dx` of one mesh cell in its local scaled coordinates.
#[derive(Clone, Debug)]
pub struct CellMoments {
    d: usize,
    deg: usize,
    m: Vec<f64>,
}

impl CellMoments {
    pub fn new(mesh: &MeshComplex, c: CellRef, deg: usize) -> Self {
        let d = c.dim;
        let mut m = vec![0.0; n_monomials(d, deg)];
        for s in mesh.simplex_decomposition(c) {
            let loc: Vec<DVector<f64>> = s.iter().map(|x| mesh.to_local(c, x)).collect();
            for (a, b) in m.iter_mut().zip(simplex_moments(&loc, deg)) {
                *a += b;
            }
        }
        CellMoments { d, deg, m }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn max_degree(&self) -> usize {
        self.deg
    }

    pub fn raw(&self) -> &[f64] {
        &self.m
    }

    pub fn integrate_poly(&self, p: &Poly) -> f64 {
        assert_eq!(p.nvars(), self.d);
        let deg = p.actual_degree(0.0).unwrap_or(0);
        assert!(deg <= self.deg, "integrand degree {deg} exceeds stored moments ({})", self.deg);
        p.coeffs().iter().zip(&self.m).map(|(a, b)| a * b).sum()
    }

    /// Integral of a top-degree form, oriented by the local frame.
    pub fn integrate_top(&self, u: &PolyForm) -> f64 {
        assert_eq!(u.k(), self.d, "integrand is not a top-degree form");
        self.integrate_poly(&u.comp_poly(0))
    }

    /// `int x^(a + b)` over pairs of monomials of degree `<= da` and `<= db`.
    pub fn mono_gram(&self, da: usize, db: usize) -> DMatrix<f64> {
        assert!(da + db <= self.deg, "Gram degree {} exceeds stored moments ({})", da + db, self.deg);
        let d = self.d;
        let ex = exponents(d);
        let na = n_monomials(d, da);
        let nb = n_monomials(d, db);
        DMatrix::from_fn(na, nb, |i, j| {
            let mut e = [0u8; MAX_VARS];
            for t in 0..d {
                e[t] = ex[i][t] + ex[j][t];
            }
            self.m[monomial_index(&e[..d])]
        })
    }

    /// Euclidean L2 product of two forms in local coordinates.
    pub fn inner(&self, a: &PolyForm, b: &PolyForm) -> f64 {
        self.gram(std::slice::from_ref(a), std::slice::from_ref(b))[(0, 0)]
    }

    /// Gram matrix `int a_i . b_j` in local coordinates.
    pub fn gram(&self, a: &[PolyForm], b: &[PolyForm]) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(a.len(), b.len());
        if a.is_empty() || b.is_empty() {
            return g;
        }
        let k = a[0].k();
        assert!(a.iter().chain(b).all(|f| f.k() == k && f.dim() == self.d), "mismatched form degrees");
        let da = a.iter().map(|f| f.deg()).max().unwrap();
        let db = b.iter().map(|f| f.deg()).max().unwrap();
        let w = self.mono_gram(da, db);
        let ncomp = a[0].ncomp();
        let na = n_monomials(self.d, da);
        let nb = n_monomials(self.d, db);
        for c in 0..ncomp {
            let ca = DMatrix::from_fn(a.len(), na, |i, j| {
                let comp = a[i].comp(c);
                if j < comp.len() { comp[j] } else { 0.0 }
            });
            let cb = DMatrix::from_fn(b.len(), nb, |i, j| {
                let comp = b[i].comp(c);
                if j < comp.len() { comp[j] } else { 0.0 }
            });
            g += &ca * &w * cb.transpose();
        }
        g
    }

    /// Matrix of the L2 projection onto polynomials of degree `<= r`, acting on
    /// scalar coefficient vectors of degree `<= deg`.
    pub fn projector(&self, r: usize, deg: usize) -> DMatrix<f64> {
        let wr = self.mono_gram(r, r);
        let rhs = self.mono_gram(r, deg);
        let chol = wr.cholesky().expect("monomial Gram matrix is not positive definite");
        chol.solve(&rhs)
    }

    /// L2 projection of a form onto forms of polynomial degree `<= r`.
    pub fn project(&self, u: &PolyForm, r: usize) -> PolyForm {
        let p = self.projector(r, u.deg());
        let mut out = PolyForm::zero(self.d, u.k(), r);
        for c in 0..u.ncomp() {
            let v = &p * DVector::from_column_slice(u.comp(c));
            out.comp_mut(c).copy_from_slice(v.as_slice());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> Vec<DVector<f64>> {
        vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0])]
    }

    #[test]
    fn reference_triangle_moments() {
        let m = simplex_moments(&tri(), 3);
        assert!((m[0] - 0.5).abs() < 1e-15);
        assert!((m[monomial_index(&[1, 1])] - 1.0 / 24.0).abs() < 1e-15);
        assert!((m[monomial_index(&[2, 0])] - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn gm_weights_and_exactness() {
        for m in 1..=3 {
            for s in 0..4 {
                let w: f64 = grundmann_moller(m, s).iter().map(|p| p.1).sum();
                assert!((w - 1.0).abs() < 1e-12, "m={m} s={s} sum={w}");
            }
        }
        let t = tri();
        let exact = simplex_moments(&t, 5);
        let ex = exponents(2);
        for idx in 0..n_monomials(2, 5) {
            let e = ex[idx];
            let q = integrate_simplex(&t, 5, |x| x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32));
            assert!((q - exact[idx]).abs() < 1e-14, "{idx}");
        }
    }
}

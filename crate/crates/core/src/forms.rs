//! Polynomial differential forms in local coordinates.
//!
//! A k-form on a d-dimensional cell is `sum_I p_I dx_I` with `I` ranging over
//! the k-subsets of `{0..d}` in lexicographic order (stored as bitmasks).
//! Coefficients are flattened as `component * n_monomials + monomial`.
//! The Koszul operator is contraction with the position field `x`, so the
//! coordinates are understood to be centered at the cell barycenter.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::poly::{affine_powers, binom, exponents, monomial_index, n_monomials, Exponent, Poly};

/// k-subsets of `{0..d}` as bitmasks, in lexicographic order of index tuples.
pub fn alternators(d: usize, k: usize) -> Vec<u8> {
    fn rec(d: usize, k: usize, start: usize, mask: u8, out: &mut Vec<u8>) {
        if k == 0 {
            out.push(mask);
            return;
        }
        for i in start..d {
            rec(d, k - 1, i + 1, mask | (1 << i), out);
        }
    }
    let mut out = Vec::with_capacity(binom(d, k));
    if k <= d {
        rec(d, k, 0, 0, &mut out);
    }
    out
}

pub fn alternator_index(d: usize, k: usize, mask: u8) -> usize {
    alternators(d, k)
        .iter()
        .position(|&m| m == mask)
        .expect("alternator outside of the lattice")
}

pub fn mask_indices(mask: u8) -> Vec<usize> {
    (0..8).filter(|i| mask & (1 << i) != 0).collect()
}

fn below(mask: u8, i: usize) -> u32 {
    (mask & ((1u8 << i) - 1)).count_ones()
}

/// Sign of `dx_I ^ dx_J` relative to `dx_{I u J}`; zero if the subsets meet.
pub fn wedge_sign(a: u8, b: u8) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    let mut inv = 0u32;
    for j in mask_indices(b) {
        inv += (a >> (j + 1)).count_ones();
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyForm {
    d: usize,
    k: usize,
    deg: usize,
    c: Vec<f64>,
}

impl PolyForm {
    pub fn zero(d: usize, k: usize, deg: usize) -> Self {
        assert!(k <= d);
        PolyForm { d, k, deg, c: vec![0.0; binom(d, k) * n_monomials(d, deg)] }
    }

    pub fn from_coeffs(d: usize, k: usize, deg: usize, c: Vec<f64>) -> Self {
        assert_eq!(c.len(), binom(d, k) * n_monomials(d, deg));
        PolyForm { d, k, deg, c }
    }

    /// `p dx_I` for one alternator.
    pub fn from_poly(k: usize, mask: u8, p: &Poly) -> Self {
        let d = p.nvars();
        let mut f = PolyForm::zero(d, k, p.deg());
        let comp = alternator_index(d, k, mask);
        f.comp_mut(comp).copy_from_slice(p.coeffs());
        f
    }

    /// `x^alpha dx_I`.
    pub fn monomial(d: usize, k: usize, alpha: &[u8], mask: u8) -> Self {
        PolyForm::from_poly(k, mask, &Poly::monomial(d, alpha, 1.0))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn nmon(&self) -> usize {
        n_monomials(self.d, self.deg)
    }

    pub fn ncomp(&self) -> usize {
        binom(self.d, self.k)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.c
    }

    pub fn comp(&self, i: usize) -> &[f64] {
        let n = self.nmon();
        &self.c[i * n..(i + 1) * n]
    }

    pub fn comp_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.nmon();
        &mut self.c[i * n..(i + 1) * n]
    }

    pub fn comp_poly(&self, i: usize) -> Poly {
        Poly::from_coeffs(self.d, self.deg, self.comp(i).to_vec())
    }

    pub fn components(&self) -> Vec<Poly> {
        (0..self.ncomp()).map(|i| self.comp_poly(i)).collect()
    }

    pub fn from_components(d: usize, k: usize, comps: &[Poly]) -> Self {
        assert_eq!(comps.len(), binom(d, k));
        let deg = comps.iter().map(|p| p.deg()).max().unwrap_or(0);
        let mut f = PolyForm::zero(d, k, deg);
        for (i, p) in comps.iter().enumerate() {
            f.comp_mut(i).copy_from_slice(p.with_deg(deg).coeffs());
        }
        f
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest polynomial degree with a coefficient above `tol`.
    pub fn actual_degree(&self, tol: f64) -> Option<usize> {
        (0..self.ncomp()).filter_map(|i| self.comp_poly(i).actual_degree(tol)).max()
    }

    /// Same form with a different degree bound (truncating if smaller).
    pub fn with_deg(&self, deg: usize) -> Self {
        let comps: Vec<Poly> = self.components().iter().map(|p| p.with_deg(deg)).collect();
        let mut f = PolyForm::zero(self.d, self.k, deg);
        for (i, p) in comps.iter().enumerate() {
            f.comp_mut(i).copy_from_slice(p.coeffs());
        }
        f
    }

    pub fn scale(&mut self, s: f64) {
        self.c.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut f = self.clone();
        f.scale(s);
        f
    }

    /// `self += s * other`, growing the degree bound when needed.
    pub fn axpy(&mut self, s: f64, other: &PolyForm) {
        assert_eq!((self.d, self.k), (other.d, other.k), "form degree mismatch");
        if other.deg > self.deg {
            *self = self.with_deg(other.deg);
        }
        let other = if other.deg < self.deg { other.with_deg(self.deg) } else { other.clone() };
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += s * b;
        }
    }

    pub fn add(&self, other: &PolyForm) -> PolyForm {
        let mut f = self.clone();
        f.axpy(1.0, other);
        f
    }

    pub fn sub(&self, other: &PolyForm) -> PolyForm {
        let mut f = self.clone();
        f.axpy(-1.0, other);
        f
    }

    /// Exterior derivative.
    pub fn d(&self) -> PolyForm {
        assert!(self.k < self.d, "exterior derivative of a top-degree form");
        let alts = alternators(self.d, self.k);
        let mut out = PolyForm::zero(self.d, self.k + 1, self.deg.saturating_sub(1));
        for (ci, &mask) in alts.iter().enumerate() {
            let p = self.comp_poly(ci);
            for i in 0..self.d {
                if mask & (1 << i) != 0 {
                    continue;
                }
                let sign = if below(mask, i) % 2 == 0 { 1.0 } else { -1.0 };
                let dp = p.diff(i);
                let oi = alternator_index(self.d, self.k + 1, mask | (1 << i));
                for (a, b) in out.comp_mut(oi).iter_mut().zip(dp.coeffs()) {
                    *a += sign * b;
                }
            }
        }
        out
    }

    /// Koszul operator: contraction with the position field `x`.
    pub fn koszul(&self) -> PolyForm {
        assert!(self.k >= 1, "Koszul operator of a 0-form");
        let alts = alternators(self.d, self.k);
        let mut out = PolyForm::zero(self.d, self.k - 1, self.deg + 1);
        for (ci, &mask) in alts.iter().enumerate() {
            let p = self.comp_poly(ci);
            for (t, i) in mask_indices(mask).into_iter().enumerate() {
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                let xp = p.mul_coord(i);
                let oi = alternator_index(self.d, self.k - 1, mask & !(1 << i));
                for (a, b) in out.comp_mut(oi).iter_mut().zip(xp.coeffs()) {
                    *a += sign * b;
                }
            }
        }
        out
    }

    /// Contraction with a constant vector.
    pub fn contract(&self, v: &[f64]) -> PolyForm {
        assert!(self.k >= 1, "contraction of a 0-form");
        let alts = alternators(self.d, self.k);
        let mut out = PolyForm::zero(self.d, self.k - 1, self.deg);
        for (ci, &mask) in alts.iter().enumerate() {
            for (t, i) in mask_indices(mask).into_iter().enumerate() {
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 } * v[i];
                if sign == 0.0 {
                    continue;
                }
                let oi = alternator_index(self.d, self.k - 1, mask & !(1 << i));
                let src = self.comp(ci).to_vec();
                for (a, b) in out.comp_mut(oi).iter_mut().zip(&src) {
                    *a += sign * b;
                }
            }
        }
        out
    }

    pub fn wedge(&self, other: &PolyForm) -> PolyForm {
        assert_eq!(self.d, other.d);
        assert!(self.k + other.k <= self.d, "wedge degree overflow");
        let k = self.k + other.k;
        let mut out = PolyForm::zero(self.d, k, self.deg + other.deg);
        let aa = alternators(self.d, self.k);
        let bb = alternators(self.d, other.k);
        for (i, &ma) in aa.iter().enumerate() {
            let p = self.comp_poly(i);
            if p.is_zero() {
                continue;
            }
            for (j, &mb) in bb.iter().enumerate() {
                let s = wedge_sign(ma, mb);
                if s == 0.0 {
                    continue;
                }
                let q = other.comp_poly(j);
                if q.is_zero() {
                    continue;
                }
                let pq = p.mul(&q);
                let oi = alternator_index(self.d, k, ma | mb);
                for (a, b) in out.comp_mut(oi).iter_mut().zip(pq.coeffs()) {
                    *a += s * b;
                }
            }
        }
        out
    }

    /// Hodge star for the Euclidean metric of the coordinates.
    pub fn hodge_star(&self) -> PolyForm {
        let full: u8 = ((1u16 << self.d) - 1) as u8;
        let mut out = PolyForm::zero(self.d, self.d - self.k, self.deg);
        for (ci, &mask) in alternators(self.d, self.k).iter().enumerate() {
            let cmask = full & !mask;
            let s = wedge_sign(mask, cmask);
            let oi = alternator_index(self.d, self.d - self.k, cmask);
            let src = self.comp(ci).to_vec();
            for (a, b) in out.comp_mut(oi).iter_mut().zip(&src) {
                *a += s * b;
            }
        }
        out
    }

    /// Codifferential `(-1)^(n(k+1)+1) * d *` for the Euclidean metric.
    pub fn codifferential(&self) -> PolyForm {
        assert!(self.k >= 1, "codifferential of a 0-form");
        let n = self.d;
        let sign = if (n * (self.k + 1) + 1) % 2 == 0 { 1.0 } else { -1.0 };
        self.hodge_star().d().hodge_star().scaled(sign)
    }

    /// `(d kappa + kappa d) u - (k + top) u`, which has degree `< top` when `u` has degree `<= top`.
    pub fn homotopy_remainder(&self, top: usize) -> PolyForm {
        let mut acc = PolyForm::zero(self.d, self.k, self.deg + 1);
        if self.k >= 1 {
            acc.axpy(1.0, &self.koszul().d());
        }
        if self.k < self.d {
            acc.axpy(1.0, &self.d().koszul());
        }
        acc.axpy(-((self.k + top) as f64), self);
        acc.with_deg(self.deg)
    }

    /// Pullback under `x = offset + a y`, with `a` of shape `d x m`.
    pub fn pullback(&self, offset: &[f64], a: &DMatrix<f64>) -> PolyForm {
        assert_eq!(a.nrows(), self.d);
        let m = a.ncols();
        assert!(self.k <= m, "pullback of a k-form to a cell of dimension < k");
        let powers = affine_powers(offset, a, self.deg);
        let src_alts = alternators(self.d, self.k);
        let dst_alts = alternators(m, self.k);
        let mut out = PolyForm::zero(m, self.k, self.deg);
        for (ci, &mi) in src_alts.iter().enumerate() {
            let mut p = Poly::zero(m, self.deg);
            let coeffs = self.comp(ci);
            for (idx, &v) in coeffs.iter().enumerate() {
                if v != 0.0 {
                    p.axpy(v, &powers[idx]);
                }
            }
            if p.is_zero() {
                continue;
            }
            let rows = mask_indices(mi);
            for (cj, &mj) in dst_alts.iter().enumerate() {
                let cols = mask_indices(mj);
                let minor = minor_det(a, &rows, &cols);
                if minor == 0.0 {
                    continue;
                }
                for (x, y) in out.comp_mut(cj).iter_mut().zip(p.coeffs()) {
                    *x += minor * y;
                }
            }
        }
        out
    }

    /// Component values at a point.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (0..self.ncomp()).map(|i| self.comp_poly(i).eval(x)).collect()
    }

    /// Coefficient of `x^alpha dx_I`.
    pub fn get(&self, alpha: &Exponent, mask: u8) -> f64 {
        let comp = alternator_index(self.d, self.k, mask);
        let idx = monomial_index(&alpha[..self.d]);
        if idx >= self.nmon() {
            return 0.0;
        }
        self.comp(comp)[idx]
    }

    /// Iterator over nonzero terms `(exponent, mask, coefficient)`.
    pub fn terms(&self) -> Vec<(Exponent, u8, f64)> {
        let ex = exponents(self.d);
        let mut out = Vec::new();
        for (ci, &mask) in alternators(self.d, self.k).iter().enumerate() {
            for (idx, &v) in self.comp(ci).iter().enumerate() {
                if v != 0.0 {
                    out.push((ex[idx], mask, v));
                }
            }
        }
        out
    }
}

/// Determinant of the submatrix of `a` with the given rows and columns.
pub fn minor_det(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    match k {
        0 => 1.0,
        1 => a[(rows[0], cols[0])],
        2 => {
            a[(rows[0], cols[0])] * a[(rows[1], cols[1])] - a[(rows[0], cols[1])] * a[(rows[1], cols[0])]
        }
        _ => {
            let sub = DMatrix::from_fn(k, k, |i, j| a[(rows[i], cols[j])]);
            sub.determinant()
        }
    }
}

//! Dense polynomials in up to four variables, stored in graded monomial order.
//!
//! Monomials of total degree `s` come after all monomials of degree `< s`;
//! inside one degree they are ordered by the graded index of their tail
//! `(a_1, .., a_{d-1})`, so `x^s` comes first and `x_{d-1}^s` last.

use std::sync::OnceLock;

use nalgebra::DMatrix;

/// Largest number of variables supported by the monomial tables.
pub const MAX_VARS: usize = 4;
/// Largest total degree supported by the monomial tables.
pub const MAX_DEGREE: usize = 14;

pub type Exponent = [u8; MAX_VARS];

pub fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of monomials of degree at most `deg` in `d` variables.
pub fn n_monomials(d: usize, deg: usize) -> usize {
    binom(deg + d, d)
}

/// Position of a monomial in the graded order.
pub fn monomial_index(alpha: &[u8]) -> usize {
    let d = alpha.len();
    if d == 0 {
        return 0;
    }
    let s: usize = alpha.iter().map(|&a| a as usize).sum();
    let base = if s == 0 { 0 } else { binom(s - 1 + d, d) };
    base + monomial_index(&alpha[1..])
}

fn build_table(d: usize) -> Vec<Exponent> {
    let n = n_monomials(d, MAX_DEGREE);
    let mut out = vec![[0u8; MAX_VARS]; n];
    let mut cur = [0u8; MAX_VARS];
    fn rec(d: usize, pos: usize, left: usize, cur: &mut Exponent, out: &mut Vec<Exponent>) {
        if pos == d {
            let idx = monomial_index(&cur[..d]);
            out[idx] = *cur;
            return;
        }
        for a in 0..=left {
            cur[pos] = a as u8;
            rec(d, pos + 1, left - a, cur, out);
        }
        cur[pos] = 0;
    }
    rec(d, 0, MAX_DEGREE, &mut cur, &mut out);
    out
}

/// Exponents of all monomials in `d` variables up to [`MAX_DEGREE`], in graded order.
pub fn exponents(d: usize) -> &'static [Exponent] {
    static TABLES: OnceLock<Vec<Vec<Exponent>>> = OnceLock::new();
    let t = TABLES.get_or_init(|| (0..=MAX_VARS).map(build_table).collect());
    &t[d]
}

pub fn degree_of(e: &Exponent) -> usize {
    e.iter().map(|&a| a as usize).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    d: usize,
    deg: usize,
    c: Vec<f64>,
}

impl Poly {
    pub fn zero(d: usize, deg: usize) -> Self {
        assert!(d <= MAX_VARS && deg <= MAX_DEGREE, "polynomial table overflow");
        Poly { d, deg, c: vec![0.0; n_monomials(d, deg)] }
    }

    pub fn constant(d: usize, v: f64) -> Self {
        let mut p = Poly::zero(d, 0);
        p.c[0] = v;
        p
    }

    pub fn from_coeffs(d: usize, deg: usize, c: Vec<f64>) -> Self {
        assert_eq!(c.len(), n_monomials(d, deg));
        Poly { d, deg, c }
    }

    pub fn monomial(d: usize, alpha: &[u8], coef: f64) -> Self {
        let deg: usize = alpha.iter().map(|&a| a as usize).sum();
        let mut p = Poly::zero(d, deg);
        p.c[monomial_index(&alpha[..d])] = coef;
        p
    }

    /// The coordinate function `x_i`.
    pub fn coord(d: usize, i: usize) -> Self {
        let mut p = Poly::zero(d, 1);
        p.c[1 + i] = 1.0;
        p
    }

    /// `c0 + sum_j lin[j] x_j`.
    pub fn linear(c0: f64, lin: &[f64]) -> Self {
        let mut p = Poly::zero(lin.len(), 1);
        p.c[0] = c0;
        p.c[1..].copy_from_slice(lin);
        p
    }

    pub fn nvars(&self) -> usize {
        self.d
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.c
    }

    pub fn exps(&self) -> &'static [Exponent] {
        &exponents(self.d)[..self.c.len()]
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    /// Largest degree carrying a coefficient with magnitude above `tol`; `None` for zero.
    pub fn actual_degree(&self, tol: f64) -> Option<usize> {
        let ex = self.exps();
        self.c
            .iter()
            .enumerate()
            .rev()
            .find(|(_, v)| v.abs() > tol)
            .map(|(i, _)| degree_of(&ex[i]))
    }

    /// Same polynomial with a different degree bound. Truncation drops higher terms.
    pub fn with_deg(&self, deg: usize) -> Self {
        let n = n_monomials(self.d, deg);
        let mut c = vec![0.0; n];
        let m = n.min(self.c.len());
        c[..m].copy_from_slice(&self.c[..m]);
        Poly { d: self.d, deg, c }
    }

    pub fn scale(&mut self, s: f64) {
        self.c.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut p = self.clone();
        p.scale(s);
        p
    }

    /// `self += s * other`, growing the degree bound when needed.
    pub fn axpy(&mut self, s: f64, other: &Poly) {
        assert_eq!(self.d, other.d);
        if other.deg > self.deg {
            *self = self.with_deg(other.deg);
        }
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += s * b;
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.d, other.d);
        let d = self.d;
        let mut out = Poly::zero(d, self.deg + other.deg);
        let ea = self.exps();
        let eb = other.exps();
        let mut e = [0u8; MAX_VARS];
        for (i, &a) in self.c.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.c.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                for t in 0..d {
                    e[t] = ea[i][t] + eb[j][t];
                }
                out.c[monomial_index(&e[..d])] += a * b;
            }
        }
        out
    }

    /// Multiplication by the coordinate `x_i`.
    pub fn mul_coord(&self, i: usize) -> Poly {
        let d = self.d;
        let mut out = Poly::zero(d, self.deg + 1);
        for (idx, e) in self.exps().iter().enumerate() {
            let v = self.c[idx];
            if v == 0.0 {
                continue;
            }
            let mut f = *e;
            f[i] += 1;
            out.c[monomial_index(&f[..d])] += v;
        }
        out
    }

    /// Partial derivative along `x_i`; the degree bound drops by one.
    pub fn diff(&self, i: usize) -> Poly {
        let d = self.d;
        let mut out = Poly::zero(d, self.deg.saturating_sub(1));
        for (idx, e) in self.exps().iter().enumerate() {
            let v = self.c[idx];
            if v == 0.0 || e[i] == 0 {
                continue;
            }
            let mut f = *e;
            f[i] -= 1;
            out.c[monomial_index(&f[..d])] += v * e[i] as f64;
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (idx, e) in self.exps().iter().enumerate() {
            let v = self.c[idx];
            if v == 0.0 {
                continue;
            }
            let mut m = v;
            for t in 0..self.d {
                m *= x[t].powi(e[t] as i32);
            }
            acc += m;
        }
        acc
    }

    /// Substitution `x = offset + a y`, giving a polynomial in `y` (`a.ncols()` variables).
    pub fn compose_affine(&self, offset: &[f64], a: &DMatrix<f64>) -> Poly {
        let powers = affine_powers(offset, a, self.deg);
        let m = a.ncols();
        let mut out = Poly::zero(m, self.deg);
        for (idx, &v) in self.c.iter().enumerate() {
            if v != 0.0 {
                out.axpy(v, &powers[idx]);
            }
        }
        out
    }
}

/// The polynomials `(offset + a y)^alpha` for every monomial `alpha` up to degree `deg`.
pub fn affine_powers(offset: &[f64], a: &DMatrix<f64>, deg: usize) -> Vec<Poly> {
    let d = a.nrows();
    let m = a.ncols();
    assert_eq!(offset.len(), d);
    let lin: Vec<Poly> = (0..d)
        .map(|i| Poly::linear(offset[i], &a.row(i).iter().copied().collect::<Vec<_>>()))
        .collect();
    let ex = exponents(d);
    let n = n_monomials(d, deg);
    let mut out: Vec<Poly> = Vec::with_capacity(n);
    out.push(Poly::constant(m, 1.0));
    for idx in 1..n {
        let e = ex[idx];
        let i = (0..d).find(|&t| e[t] > 0).unwrap();
        let mut prev = e;
        prev[i] -= 1;
        let p = out[monomial_index(&prev[..d])].mul(&lin[i]);
        out.push(p);
    }
    out
}

impl std::ops::Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut p = self.clone();
        p.axpy(1.0, rhs);
        p
    }
}

impl std::ops::Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut p = self.clone();
        p.axpy(-1.0, rhs);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_order() {
        assert_eq!(n_monomials(2, 2), 6);
        assert_eq!(n_monomials(3, 2), 10);
        let ex = exponents(2);
        assert_eq!(&ex[..6].iter().map(|e| [e[0], e[1]]).collect::<Vec<_>>(), &[
            [0, 0],
            [1, 0],
            [0, 1],
            [2, 0],
            [1, 1],
            [0, 2]
        ]);
        for d in 0..=MAX_VARS {
            for (i, e) in exponents(d).iter().enumerate().take(200) {
                assert_eq!(monomial_index(&e[..d]), i);
            }
        }
    }

    #[test]
    fn product_and_derivative() {
        let x = Poly::coord(2, 0);
        let y = Poly::coord(2, 1);
        let p = &x.mul(&y) + &x;
        assert_eq!(p.eval(&[2.0, 3.0]), 8.0);
        let dx = p.diff(0);
        assert_eq!(dx.eval(&[2.0, 3.0]), 4.0);
        assert_eq!(p.actual_degree(0.0), Some(2));
        assert_eq!(Poly::zero(2, 3).actual_degree(0.0), None);
    }

    #[test]
    fn affine_composition_matches_evaluation() {
        let p = Poly::from_coeffs(2, 2, vec![1.0, -2.0, 0.5, 3.0, 1.0, -1.0]);
        let a = DMatrix::from_row_slice(2, 1, &[0.3, -0.7]);
        let off = [0.2, 0.4];
        let q = p.compose_affine(&off, &a);
        for t in [-1.0, 0.0, 0.5, 2.0] {
            let x = [off[0] + 0.3 * t, off[1] - 0.7 * t];
            assert!((q.eval(&[t]) - p.eval(&x)).abs() < 1e-13);
        }
    }
}

//! Manufactured solutions of the Hodge-Laplace problem on the unit square and cube.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DdrError, Result};
use crate::forms::PolyForm;
use crate::hodge::Bc;
use crate::spaces::basis_full;

pub type Sampler = Box<dyn Fn(&DVector<f64>) -> Vec<f64> + Send + Sync>;

/// Exact solution `u`, its codifferential `p` (absent for `k = 0`) and the
/// source `f = (d delta + delta d) u`, as lexicographic ambient components.
pub struct Manufactured {
    pub n: usize,
    pub k: usize,
    pub u: Sampler,
    pub p: Option<Sampler>,
    pub f: Sampler,
}

#[derive(Clone, Copy)]
enum Profile {
    Cos,
    Sin,
}

fn value(pr: Profile, x: &DVector<f64>) -> f64 {
    x.iter()
        .map(|&t| match pr {
            Profile::Cos => (PI * t).cos(),
            Profile::Sin => (PI * t).sin(),
        })
        .product()
}

fn grad(pr: Profile, x: &DVector<f64>) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut g = 1.0;
            for (j, &t) in x.iter().enumerate() {
                g *= match (pr, i == j) {
                    (Profile::Cos, false) => (PI * t).cos(),
                    (Profile::Sin, false) => (PI * t).sin(),
                    (Profile::Cos, true) => -PI * (PI * t).sin(),
                    (Profile::Sin, true) => PI * (PI * t).cos(),
                };
            }
            g
        })
        .collect()
}

/// Trigonometric solutions satisfying the chosen boundary conditions on `[0,1]^n`.
pub fn smooth(n: usize, k: usize, bc: Bc) -> Result<Manufactured> {
    let lam = n as f64 * PI * PI;
    let natural = bc == Bc::Natural;
    // Potential whose normal derivative (natural) or value (essential) vanishes.
    let pot = if natural { Profile::Cos } else { Profile::Sin };
    // Profile for top-degree forms and for the 2-form in 3D, which need the opposite choice.
    let dual = if natural { Profile::Sin } else { Profile::Cos };
    let m = match (n, k) {
        (_, 0) if (1..=3).contains(&n) => Manufactured {
            n,
            k,
            u: Box::new(move |x| vec![value(pot, x)]),
            p: None,
            f: Box::new(move |x| vec![lam * value(pot, x)]),
        },
        (2, 1) | (3, 1) => Manufactured {
            n,
            k,
            u: Box::new(move |x| grad(pot, x)),
            p: Some(Box::new(move |x| vec![lam * value(pot, x)])),
            f: Box::new(move |x| grad(pot, x).into_iter().map(|v| lam * v).collect()),
        },
        (3, 2) => {
            let star = move |x: &DVector<f64>| {
                let g = grad(dual, x);
                vec![g[2], -g[1], g[0]]
            };
            Manufactured {
                n,
                k,
                u: Box::new(star),
                p: Some(Box::new(|_| vec![0.0; 3])),
                f: Box::new(move |x| star(x).into_iter().map(|v| lam * v).collect()),
            }
        }
        (2, 2) => Manufactured {
            n,
            k,
            u: Box::new(move |x| vec![value(dual, x)]),
            p: Some(Box::new(move |x| {
                let g = grad(dual, x);
                vec![g[1], -g[0]]
            })),
            f: Box::new(move |x| vec![lam * value(dual, x)]),
        },
        (3, 3) => Manufactured {
            n,
            k,
            u: Box::new(move |x| vec![value(dual, x)]),
            p: Some(Box::new(move |x| {
                let g = grad(dual, x);
                vec![-g[2], g[1], -g[0]]
            })),
            f: Box::new(move |x| vec![lam * value(dual, x)]),
        },
        _ => return Err(DdrError::OutOfRange(format!("no manufactured solution for k = {k} in dimension {n}"))),
    };
    Ok(m)
}

/// Polynomial data for a patch test: a random `u` of degree `r`, `p = delta u`
/// and `f = d delta u + delta d u`, all in ambient coordinates.
pub struct PolynomialCase {
    pub u: PolyForm,
    pub p: Option<PolyForm>,
    pub f: PolyForm,
}

pub fn polynomial(n: usize, k: usize, r: usize, seed: u64) -> Result<PolynomialCase> {
    let basis = basis_full(n, r, k)?.forms;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = PolyForm::zero(n, k, r);
    for b in &basis {
        u.axpy(rng.random_range(-1.0..1.0), b);
    }
    let mut f = PolyForm::zero(n, k, r);
    let p = if k > 0 {
        let p = u.codifferential();
        if k - 1 < n {
            f.axpy(1.0, &p.d());
        }
        Some(p)
    } else {
        None
    };
    if k < n {
        f.axpy(1.0, &u.d().codifferential());
    }
    Ok(PolynomialCase { u, p, f })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_laplacian(s: &Sampler, x: &DVector<f64>, c: usize) -> f64 {
        let h = 1e-4;
        let mut acc = 0.0;
        for i in 0..x.len() {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            acc -= (s(&a)[c] - 2.0 * s(x)[c] + s(&b)[c]) / (h * h);
        }
        acc
    }

    #[test]
    fn sources_are_minus_laplacian() {
        let x2 = DVector::from_vec(vec![0.31, 0.57]);
        let x3 = DVector::from_vec(vec![0.31, 0.57, 0.12]);
        for (n, k) in [(2, 0), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)] {
            for bc in [Bc::Natural, Bc::Essential] {
                let m = smooth(n, k, bc).unwrap();
                let x = if n == 2 { &x2 } else { &x3 };
                let f = (m.f)(x);
                for (c, fc) in f.iter().enumerate() {
                    let lap = fd_laplacian(&m.u, x, c);
                    assert!((lap - fc).abs() < 1e-4 * (1.0 + fc.abs()), "n={n} k={k} c={c}");
                }
            }
        }
    }

    #[test]
    fn polynomial_source_degree() {
        let c = polynomial(2, 1, 2, 3).unwrap();
        assert!(c.f.actual_degree(1e-14).unwrap_or(0) == 0);
        assert!(c.p.unwrap().actual_degree(1e-14).unwrap_or(0) <= 1);
    }
}

//! Built-in mesh families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DdrError, Result};
use crate::mesh::{MeshBuilder, MeshComplex};

pub const KINDS: &[&str] = &[
    "grid-quad-2d",
    "grid-tri-2d",
    "perturbed-quad-2d",
    "annulus-2d",
    "grid-hex-3d",
    "grid-tet-3d",
    "triangle",
    "tetrahedron",
];

/// Generate a mesh of the given kind with `n` cells per direction.
/// `seed` only affects the perturbed family.
pub fn generate(kind: &str, n: usize, seed: u64) -> Result<MeshComplex> {
    if n == 0 {
        return Err(DdrError::Invalid("mesh resolution must be positive".into()));
    }
    match kind {
        "grid-quad-2d" => quads(n, None),
        "perturbed-quad-2d" => quads(n, Some(seed)),
        "grid-tri-2d" => triangles(n),
        "annulus-2d" => annulus(n),
        "grid-hex-3d" => hexes(n),
        "grid-tet-3d" => tets(n),
        "triangle" => {
            let mut b = MeshBuilder::new(2);
            let p: Vec<usize> = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].iter().map(|x| b.add_point(x.to_vec())).collect();
            b.polygon(&p);
            b.build()
        }
        "tetrahedron" => {
            let mut b = MeshBuilder::new(3);
            let p: Vec<usize> = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
                .iter()
                .map(|x| b.add_point(x.to_vec()))
                .collect();
            b.polyhedron(&tet_faces(&p));
            b.build()
        }
        _ => Err(DdrError::Invalid(format!("unknown mesh kind '{kind}' (known: {})", KINDS.join(", ")))),
    }
}

fn grid_points(b: &mut MeshBuilder, n: usize, seed: Option<u64>) -> Vec<usize> {
    let h = 1.0 / n as f64;
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut ids = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let mut x = [i as f64 * h, j as f64 * h];
            if let Some(rng) = rng.as_mut() {
                let rad: f64 = rng.random::<f64>() * 0.2 * h;
                let ang: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                if i > 0 && i < n && j > 0 && j < n {
                    x[0] += rad * ang.cos();
                    x[1] += rad * ang.sin();
                }
            }
            ids.push(b.add_point(x.to_vec()));
        }
    }
    ids
}

fn quads(n: usize, seed: Option<u64>) -> Result<MeshComplex> {
    let mut b = MeshBuilder::new(2);
    let p = grid_points(&mut b, n, seed);
    let at = |i: usize, j: usize| p[j * (n + 1) + i];
    for j in 0..n {
        for i in 0..n {
            b.polygon(&[at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    b.build()
}

fn triangles(n: usize) -> Result<MeshComplex> {
    let mut b = MeshBuilder::new(2);
    let p = grid_points(&mut b, n, None);
    let at = |i: usize, j: usize| p[j * (n + 1) + i];
    for j in 0..n {
        for i in 0..n {
            b.polygon(&[at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            b.polygon(&[at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    b.build()
}

fn annulus(n: usize) -> Result<MeshComplex> {
    let mut b = MeshBuilder::new(2);
    let nt = 8 * n;
    let mut p = Vec::new();
    for j in 0..=n {
        let rad = 0.5 + 0.5 * j as f64 / n as f64;
        for i in 0..nt {
            let a = std::f64::consts::TAU * i as f64 / nt as f64;
            p.push(b.add_point(vec![rad * a.cos(), rad * a.sin()]));
        }
    }
    let at = |i: usize, j: usize| p[j * nt + i % nt];
    for j in 0..n {
        for i in 0..nt {
            b.polygon(&[at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    b.build()
}

fn cube_points(b: &mut MeshBuilder, n: usize) -> Vec<usize> {
    let h = 1.0 / n as f64;
    let mut p = Vec::new();
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                p.push(b.add_point(vec![i as f64 * h, j as f64 * h, k as f64 * h]));
            }
        }
    }
    p
}

fn hexes(n: usize) -> Result<MeshComplex> {
    let mut b = MeshBuilder::new(3);
    let p = cube_points(&mut b, n);
    let at = |i: usize, j: usize, k: usize| p[(k * (n + 1) + j) * (n + 1) + i];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let v = |a: usize, c: usize, d: usize| at(i + a, j + c, k + d);
                b.polyhedron(&[
                    vec![v(0, 0, 0), v(1, 0, 0), v(1, 1, 0), v(0, 1, 0)],
                    vec![v(0, 0, 1), v(1, 0, 1), v(1, 1, 1), v(0, 1, 1)],
                    vec![v(0, 0, 0), v(1, 0, 0), v(1, 0, 1), v(0, 0, 1)],
                    vec![v(0, 1, 0), v(1, 1, 0), v(1, 1, 1), v(0, 1, 1)],
                    vec![v(0, 0, 0), v(0, 1, 0), v(0, 1, 1), v(0, 0, 1)],
                    vec![v(1, 0, 0), v(1, 1, 0), v(1, 1, 1), v(1, 0, 1)],
                ]);
            }
        }
    }
    b.build()
}

fn tet_faces(v: &[usize]) -> Vec<Vec<usize>> {
    vec![vec![v[1], v[2], v[3]], vec![v[0], v[2], v[3]], vec![v[0], v[1], v[3]], vec![v[0], v[1], v[2]]]
}

fn tets(n: usize) -> Result<MeshComplex> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut b = MeshBuilder::new(3);
    let p = cube_points(&mut b, n);
    let at = |c: [usize; 3]| p[(c[2] * (n + 1) + c[1]) * (n + 1) + c[0]];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut v = vec![at(c)];
                    for &axis in &perm {
                        c[axis] += 1;
                        v.push(at(c));
                    }
                    b.polyhedron(&tet_faces(&v));
                }
            }
        }
    }
    b.build()
}

mod common;

use common::consistency_error;
use ddr::ddr::DdrComplex;
use ddr::harness::{generate, random_form};
use ddr::mesh::{CellRef, MeshBuilder, MeshComplex, RawMesh};
use ddr::product::{coercivity_proxy, local_product, to_ambient_form};
use ddr::spaces::basis_trimmed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pentagon() -> MeshComplex {
    let mut b = MeshBuilder::new(2);
    let pts = [[0.0, 0.0], [1.0, 0.1], [1.3, 0.8], [0.6, 1.4], [-0.2, 0.9]];
    let ids: Vec<usize> = pts.iter().map(|p| b.add_point(p.to_vec())).collect();
    b.polygon(&ids);
    b.build().unwrap()
}

fn scaled(mesh: &MeshComplex, lambda: f64) -> MeshComplex {
    let mut raw = RawMesh::from_mesh(mesh);
    for v in &mut raw.vertices {
        for x in v.iter_mut() {
            *x *= lambda;
        }
    }
    raw.into_mesh().unwrap()
}

#[test]
fn product_is_exact_on_polynomials() {
    let meshes = vec![
        generate("grid-quad-2d", 2, 0).unwrap(),
        generate("grid-tri-2d", 2, 0).unwrap(),
        generate("perturbed-quad-2d", 3, 4).unwrap(),
        generate("grid-hex-3d", 1, 0).unwrap(),
        generate("grid-tet-3d", 1, 0).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for mesh in &meshes {
        let n = mesh.ambient_dim();
        for r in 0..=2 {
            let cx = DdrComplex::new(mesh, r).unwrap();
            for k in 0..=mesh.top_dim() {
                for tau in [0.5, 1.0, 2.0] {
                    let p = random_form(n, k, r, &mut rng).unwrap();
                    let q = random_form(n, k, r + 1, &mut rng).unwrap();
                    let err = consistency_error(&cx, k, tau, &p, &q);
                    assert!(err <= 1e-10, "r={r} k={k} tau={tau}: {err:e}");
                }
            }
        }
    }
}

#[test]
fn product_is_exact_on_trimmed_forms_of_a_pentagon() {
    let mesh = pentagon();
    let t = CellRef::new(2, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for r in 0..=2 {
        let cx = DdrComplex::new(&mesh, r).unwrap();
        for k in 0..=2 {
            let trimmed = basis_trimmed(2, r + 1, k).unwrap().forms;
            for tau in [0.5, 1.0, 2.0] {
                let p = random_form(2, k, r, &mut rng).unwrap();
                let mut q = trimmed[0].scaled(0.0);
                for b in &trimmed {
                    q.axpy(rng.random_range(-1.0..1.0), b);
                }
                let q = to_ambient_form(&cx, t, &q);
                let err = consistency_error(&cx, k, tau, &p, &q);
                assert!(err <= 1e-10, "r={r} k={k} tau={tau}: {err:e}");
            }
        }
    }
}

/// Full degree `r + 1` one-forms are not in the local space of a generic
/// polygon: their edge traces have degree `r + 1`, one more than the edge
/// moments see.
#[test]
fn full_degree_r_plus_one_is_not_reproduced_on_a_pentagon() {
    let mesh = pentagon();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for r in 0..=2 {
        let cx = DdrComplex::new(&mesh, r).unwrap();
        let p = random_form(2, 1, r, &mut rng).unwrap();
        let q = random_form(2, 1, r + 1, &mut rng).unwrap();
        let err = consistency_error(&cx, 1, 1.0, &p, &q);
        assert!(err > 1e-8, "r={r}: {err:e}");
    }
}

#[test]
fn local_product_scales_with_the_cell() {
    let cells = vec![pentagon(), generate("triangle", 1, 0).unwrap(), generate("grid-hex-3d", 1, 0).unwrap()];
    for mesh in &cells {
        let d = mesh.top_dim();
        let t = CellRef::new(d, 0);
        for r in 0..=2 {
            let cx = DdrComplex::new(mesh, r).unwrap();
            for k in 0..=d {
                let base = local_product(&cx, k, t, 1.0).unwrap().matrix();
                for lambda in [0.5, 2.0, 10.0] {
                    let big = scaled(mesh, lambda);
                    let cy = DdrComplex::new(&big, r).unwrap();
                    let m = local_product(&cy, k, t, 1.0).unwrap().matrix();
                    let factor = lambda.powi(d as i32 - 2 * k as i32);
                    let err = (&m - &base * factor).abs().max() / (base.abs().max() * factor);
                    assert!(err <= 1e-10, "d={d} r={r} k={k} lambda={lambda}: {err:e}");
                }
            }
        }
    }
}

#[test]
fn local_product_is_positive_definite() {
    let mesh = generate("perturbed-quad-2d", 3, 2).unwrap();
    for r in 0..=2 {
        let cx = DdrComplex::new(&mesh, r).unwrap();
        for k in 0..=2 {
            for i in 0..mesh.count(2) {
                let ev = local_product(&cx, k, CellRef::new(2, i), 1.0).unwrap().matrix().symmetric_eigenvalues();
                assert!(ev.min() > 1e-12 * ev.max(), "r={r} k={k}");
            }
        }
    }
}

#[test]
fn zero_stabilization_loses_definiteness() {
    let mesh = generate("grid-quad-2d", 1, 0).unwrap();
    let cx = DdrComplex::new(&mesh, 0).unwrap();
    let ev = local_product(&cx, 0, CellRef::new(2, 0), 0.0).unwrap().matrix().symmetric_eigenvalues();
    assert!(ev.min() < 1e-12 * ev.max());
}

#[test]
fn coercivity_proxy_is_stable_under_refinement() {
    for kind in ["grid-quad-2d", "grid-tri-2d", "perturbed-quad-2d"] {
        for r in 0..=1 {
            for k in 0..=2 {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for level in 0..3 {
                    let mesh = generate(kind, 2 << level, 3).unwrap();
                    let cx = DdrComplex::new(&mesh, r).unwrap();
                    let (mut a, mut b) = (f64::INFINITY, 0.0f64);
                    for i in 0..mesh.count(2) {
                        let (x, y) = coercivity_proxy(&cx, k, CellRef::new(2, i), 1.0).unwrap();
                        a = a.min(x);
                        b = b.max(y);
                    }
                    assert!(a > 0.0);
                    lo.push(a);
                    hi.push(b);
                }
                for v in [&lo, &hi] {
                    let max = v.iter().cloned().fold(0.0, f64::max);
                    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
                    assert!(max / min <= 10.0, "{kind} r={r} k={k}: {lo:?} {hi:?}");
                }
            }
        }
    }
}

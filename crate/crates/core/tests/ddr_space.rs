mod common;

use common::{face_moment, subsets, whitney};
use ddr::ddr::{DdrComplex, DofLayout};
use ddr::harness::{generate, random_form};
use ddr::linalg::{csr_to_dense, norm, spmv};
use ddr::mesh::{CellRef, MeshComplex};
use ddr::spaces::basis_full;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn meshes_2d() -> Vec<(&'static str, MeshComplex)> {
    vec![
        ("grid-quad-2d", generate("grid-quad-2d", 2, 0).unwrap()),
        ("grid-tri-2d", generate("grid-tri-2d", 2, 0).unwrap()),
        ("perturbed-quad-2d", generate("perturbed-quad-2d", 3, 11).unwrap()),
        ("annulus-2d", generate("annulus-2d", 1, 0).unwrap()),
    ]
}

fn meshes_3d() -> Vec<(&'static str, MeshComplex)> {
    vec![
        ("grid-hex-3d", generate("grid-hex-3d", 1, 0).unwrap()),
        ("grid-tet-3d", generate("grid-tet-3d", 1, 0).unwrap()),
    ]
}

#[test]
fn layout_is_ordered_by_dimension() {
    let m = generate("grid-quad-2d", 2, 0).unwrap();
    let l = DofLayout::new(&m, 1, 1).unwrap();
    // Two dofs per edge (linear weights), three per face (trimmed linear 1-forms).
    assert_eq!(l.total(), 12 * 2 + 4 * 3);
    assert_eq!(l.range(CellRef::new(1, 0)), 0..2);
    assert_eq!(l.range(CellRef::new(2, 0)).start, 24);
}

#[test]
fn derivative_squares_to_zero() {
    for (name, mesh) in meshes_2d().into_iter().chain(meshes_3d()) {
        for r in 0..=2 {
            let cx = DdrComplex::new(&mesh, r).unwrap();
            for k in 0..mesh.top_dim().saturating_sub(1) {
                let a = cx.discrete_d(k).unwrap();
                let b = cx.discrete_d(k + 1).unwrap();
                let prod = csr_to_dense(&(b * a));
                let scale = csr_to_dense(a).abs().max() * csr_to_dense(b).abs().max();
                let v = prod.abs().max() / scale;
                assert!(v <= 1e-12, "{name} r={r} k={k}: {v:e}");
            }
        }
    }
}

#[test]
fn interpolation_commutes_with_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, mesh) in meshes_2d().into_iter().chain(meshes_3d()) {
        for r in 0..=2 {
            let cx = DdrComplex::new(&mesh, r).unwrap();
            for k in 0..mesh.top_dim() {
                for _ in 0..4 {
                    let p = random_form(mesh.ambient_dim(), k, r + 2, &mut rng).unwrap();
                    let idp = cx.interpolate_poly(k + 1, &p.d()).unwrap();
                    let dip = spmv(cx.discrete_d(k).unwrap(), &cx.interpolate_poly(k, &p).unwrap());
                    let e: Vec<f64> = idp.iter().zip(&dip).map(|(a, b)| a - b).collect();
                    assert!(norm(&e) <= 1e-12 * norm(&idp).max(1.0), "{name} r={r} k={k}: {:e}", norm(&e));
                }
            }
        }
    }
}

/// Reconstructed moments of an interpolated polynomial agree with quadrature on every face.
fn check_moments(mesh: &MeshComplex, r: usize, seed: u64) {
    let cx = DdrComplex::new(mesh, r).unwrap();
    let n = mesh.ambient_dim();
    let top = mesh.top_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..=top {
        let p = random_form(n, k, r, &mut rng).unwrap();
        let iu = cx.interpolate_poly(k, &p).unwrap();
        let sampler = |x: &DVector<f64>| p.eval(x.as_slice());
        for t in 0..mesh.count(top).min(3) {
            let t = CellRef::new(top, t);
            let table = cx.reconstruct_moments(k, t).unwrap();
            let local = table.local.gather(&iu);
            for &f in &mesh.cell(t).closure {
                if f.dim < k {
                    continue;
                }
                let got = table.apply(f, &local);
                let ws = basis_full(f.dim, r, f.dim - k).unwrap().forms;
                let want: Vec<f64> = ws.iter().map(|w| face_moment(mesh, f, k, &sampler, w, r + 4)).collect();
                let scale = want.iter().fold(1e-3f64, |m, v| m.max(v.abs()));
                for (a, b) in got.iter().zip(&want) {
                    assert!((a - b).abs() <= 1e-10 * scale, "r={r} k={k} face {f}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn moments_reconstructed_in_2d() {
    for (_, mesh) in meshes_2d() {
        for r in 0..=2 {
            check_moments(&mesh, r, 5 + r as u64);
        }
    }
}

#[test]
fn moments_reconstructed_in_3d() {
    for (_, mesh) in meshes_3d() {
        for r in 0..=2 {
            check_moments(&mesh, r, 9 + r as u64);
        }
    }
}

fn check_whitney(mesh: &MeshComplex) {
    let cx = DdrComplex::new(mesh, 0).unwrap();
    let top = mesh.top_dim();
    let t = CellRef::new(top, 0);
    let vids = mesh.cell(t).vertices.clone();
    let verts: Vec<DVector<f64>> = vids.iter().map(|&v| mesh.points()[v].clone()).collect();
    for k in 0..=top {
        for sigma in subsets(top + 1, k + 1) {
            let w = |x: &DVector<f64>| whitney(&verts, &sigma, x);
            let iu = cx.interpolate_fn(k, &w, 4).unwrap();
            let table = cx.reconstruct_moments(k, t).unwrap();
            let local = table.local.gather(&iu);
            for &f in &mesh.cell(t).closure {
                if f.dim < k {
                    continue;
                }
                let got = table.apply(f, &local);
                for (wi, basis) in basis_full(f.dim, 0, f.dim - k).unwrap().forms.iter().enumerate() {
                    let want = face_moment(mesh, f, k, &w, basis, 4);
                    assert!((got[wi] - want).abs() <= 1e-12, "k={k} face {f}: {} vs {want}", got[wi]);
                }
            }
        }
    }
}

#[test]
fn lowest_order_matches_whitney_forms() {
    check_whitney(&generate("triangle", 1, 0).unwrap());
    check_whitney(&generate("tetrahedron", 1, 0).unwrap());
}

use std::collections::HashMap;

use super::MeshComplex;
use crate::error::Result;

/// Assembles a face lattice from vertex loops, sharing faces by vertex set.
#[derive(Default, Debug)]
pub struct MeshBuilder {
    n: usize,
    points: Vec<Vec<f64>>,
    edges: Vec<Vec<usize>>,
    faces2: Vec<Vec<usize>>,
    cells3: Vec<Vec<usize>>,
    edge_ids: HashMap<(usize, usize), usize>,
    face_ids: HashMap<Vec<usize>, usize>,
}

impl MeshBuilder {
    pub fn new(n: usize) -> Self {
        MeshBuilder { n, ..Default::default() }
    }

    pub fn add_point(&mut self, p: Vec<f64>) -> usize {
        assert_eq!(p.len(), self.n);
        self.points.push(p);
        self.points.len() - 1
    }

    pub fn edge(&mut self, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&id) = self.edge_ids.get(&key) {
            return id;
        }
        self.edges.push(vec![a, b]);
        let id = self.edges.len() - 1;
        self.edge_ids.insert(key, id);
        id
    }

    /// A polygon given by its vertex loop.
    pub fn polygon(&mut self, lp: &[usize]) -> usize {
        let mut key = lp.to_vec();
        key.sort_unstable();
        if let Some(&id) = self.face_ids.get(&key) {
            return id;
        }
        let edges: Vec<usize> = (0..lp.len()).map(|i| self.edge(lp[i], lp[(i + 1) % lp.len()])).collect();
        self.faces2.push(edges);
        let id = self.faces2.len() - 1;
        self.face_ids.insert(key, id);
        id
    }

    /// A polyhedron given by the vertex loops of its faces.
    pub fn polyhedron(&mut self, loops: &[Vec<usize>]) -> usize {
        let faces: Vec<usize> = loops.iter().map(|l| self.polygon(l)).collect();
        self.cells3.push(faces);
        self.cells3.len() - 1
    }

    pub fn build(self) -> Result<MeshComplex> {
        let mut lists = vec![self.edges.into_iter().map(|e| (e, None)).collect::<Vec<_>>()];
        if !self.faces2.is_empty() {
            lists.push(self.faces2.into_iter().map(|f| (f, None)).collect());
        }
        if !self.cells3.is_empty() {
            lists.push(self.cells3.into_iter().map(|f| (f, None)).collect());
        }
        MeshComplex::from_parts(self.n, self.points, lists)
    }
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MeshComplex;
use crate::error::{DdrError, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawCell {
    pub faces: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<i8>>,
}

/// On-disk mesh format: vertices plus, for each dimension `m >= 1`, the cells
/// of that dimension as lists of `(m-1)`-cell ids.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawMesh {
    pub ambient_dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub cells: BTreeMap<String, Vec<RawCell>>,
}

impl RawMesh {
    pub fn into_mesh(self) -> Result<MeshComplex> {
        let mut by_dim: BTreeMap<usize, Vec<RawCell>> = BTreeMap::new();
        for (key, list) in self.cells {
            let dim: usize = key.parse().map_err(|_| DdrError::Parse(format!("cell dimension key {key:?}")))?;
            if dim == 0 {
                return Err(DdrError::Parse("cells of dimension 0 are the vertices".into()));
            }
            by_dim.insert(dim, list);
        }
        let top = by_dim.keys().last().copied().unwrap_or(0);
        let mut faces = Vec::with_capacity(top);
        for m in 1..=top {
            let list = by_dim.remove(&m).unwrap_or_default();
            faces.push(list.into_iter().map(|c| (c.faces, c.signs)).collect());
        }
        MeshComplex::from_parts(self.ambient_dim, self.vertices, faces)
    }

    pub fn from_mesh(mesh: &MeshComplex) -> Self {
        let mut cells = BTreeMap::new();
        for m in 1..=mesh.top_dim() {
            let list = mesh
                .cells(m)
                .iter()
                .map(|c| RawCell { faces: c.faces.iter().map(|f| f.0).collect(), signs: Some(c.faces.iter().map(|f| f.1).collect()) })
                .collect();
            cells.insert(m.to_string(), list);
        }
        RawMesh {
            ambient_dim: mesh.ambient_dim(),
            vertices: mesh.points().iter().map(|p| p.iter().copied().collect()).collect(),
            cells,
        }
    }
}

pub fn load_mesh<P: AsRef<Path>>(path: P) -> Result<MeshComplex> {
    let text = std::fs::read_to_string(path)?;
    let raw: RawMesh = serde_json::from_str(&text)?;
    raw.into_mesh()
}

//! Discrete de Rham (DDR) spaces on polytopal meshes.
//!
//! The crate is organised bottom-up:
//!
//! * [`poly`] and [`forms`]: exact algebra of polynomial differential forms in
//!   the scaled, barycenter-centered frame coordinates of one cell.
//! * [`mesh`]: polytopal face lattices with signed incidence and geometry.
//! * [`integrate`]: exact monomial integration over the barycentric cone
//!   decomposition, plus Grundmann-Moller rules for smooth integrands.
//! * [`spaces`]: bases of the full, trimmed, `U` and `W` polynomial spaces.
//! * [`ddr`]: face-moment degrees of freedom, the discrete exterior
//!   derivative, recursive moment reconstruction and the projection `gamma`.
//! * [`product`]: the stabilized discrete L2 product.
//! * [`hodge`]: the mixed Hodge-Laplace problem, Betti numbers and the
//!   discrete Poincare-Friedrichs constant.
//! * [`harness`]: mesh generators, manufactured solutions and CLI commands.

pub mod ddr;
pub mod error;
pub mod forms;
pub mod harness;
pub mod hodge;
pub mod integrate;
pub mod linalg;
pub mod mesh;
pub mod poly;
pub mod product;
pub mod spaces;

pub use error::{DdrError, Result};

pub mod catalog;
pub mod domain;
pub mod energy;
pub mod error;
pub mod expr;
pub mod io;
pub mod mesh;
pub mod solver;
pub mod symmetry;
pub mod verify;

pub use error::{Error, Result};
pub use mesh::{Point3, SimplicialSurface, Triangle, Vec3, VertexId, VertexKind};

//! Meshes and linear-system assembly.

mod assemble;
mod delaunay;
mod generate;
mod mesh;

pub use assemble::{
    assemble, p1_element_matrices, Coefficient, Discretization, ElementBlock, LinearSystem, Pde,
    ProblemSpec, ScalarField,
};
pub use delaunay::delaunay;
pub use generate::{convex_hull, generate_mesh, make_unstructured_mesh, MeshGenOptions, TARGET_FILL};
pub use mesh::{import_mesh, make_structured_grid, parse_mesh, Mesh, MeshKind};

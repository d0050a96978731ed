//! Finite element discretizations of the time-dependent Poisson–Nernst–Planck
//! system on tetrahedral meshes, decoupled with Gummel iteration.

pub mod assembly;
pub mod gummel;
pub mod linalg;
pub mod manufactured;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod timestepper;

//! Domain integral equation solver for 2D TE scattering by inhomogeneous
//! dielectric cylinders, with RWG basis functions on triangle meshes and a
//! layered-cylinder series solution for reference.
//!
//! The pipeline is [`mesh`] → [`assembly`] → [`solver`] → [`fields`];
//! [`experiment`] strings it together from a [`RunConfig`].

// `!(x > 0.0)` style guards are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod em;
pub mod experiment;
pub mod fields;
pub mod geom;
pub mod linalg;
pub mod mesh;
pub mod mie;
pub mod quadrature;
pub mod solver;
pub mod specfun;

pub use em::{IncidentWave, Material, WaveParams};
pub use experiment::{RunConfig, RunError, RunOutcome};
pub use fields::FieldSample;
pub use geom::Point;
pub use linalg::C64;
pub use mesh::{Mesh, RwgEdge};
pub use mie::{LayeredCylinder, MieSolution};
pub use solver::SolveReport;

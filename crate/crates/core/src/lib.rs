//! Semi-implicit, structure-preserving mixed finite elements for the
//! nonstationary incompressible MHD equations on the unit cube.
//!
//! Velocity and pressure use the P2-P1 Taylor-Hood pair, the electric field
//! (and the auxiliary discrete curl of the magnetic field) lives in the
//! lowest-order second-kind Nédélec space and the magnetic field in the
//! lowest-order BDM space. Because the curl maps the Nédélec space into the
//! BDM space, the magnetic update is exactly divergence free at every step.

pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod forms;
pub mod geom;
pub mod mesh;
pub mod projection;
pub mod quadrature;
pub mod reference;
pub mod scheme;
pub mod space;
pub mod sparse;

pub use error::{Error, Result};
pub use mesh::Mesh;
pub use exact::{ExactSolution, ManufacturedSolution};
pub use scheme::{Forcing, InitialData, MhdScheme, MhdState, SchemeParams, Spaces, StepRecord};
pub use space::{FeField, FunctionSpace, SpaceFamily};

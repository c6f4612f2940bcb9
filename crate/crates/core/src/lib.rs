//! Numerical laboratory for boundary compactified imaginary Liouville
//! theory on the disk and the annulus.

pub mod correlator;
pub mod coulomb;
pub mod error;
pub mod geometry;
pub mod gff;
pub mod gmc;
pub mod mc;
pub mod params;
pub mod quad;
pub mod topology;

pub use error::{Error, Result};
pub use mc::McEstimate;
pub use num_complex::Complex64;
pub use params::{BoundaryCharge, BulkCharge, ChargeConfig, ParamSet};
pub use geometry::{ConformalFactor, SurfaceKind, SurfaceSpec};
pub use gmc::{GmcSpec, Region, Weight};
pub use correlator::{Backend, CorrelatorConfig, CorrelatorResult};

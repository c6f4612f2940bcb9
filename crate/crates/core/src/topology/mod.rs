//! Harmonic 1-forms on the punctured disk and annulus, separating families
//! and the curvature term.

pub mod curvature;
pub mod family;
pub mod form;

pub use curvature::{anomaly, curvature_term, metric_change, regularized_norm, theta_sum, Primitive};
pub use family::{random_family, Curve, Piece, SeparatingFamily, Vertex};
pub use form::{cohomology_lattice, CohomologyLattice, HarmonicForm, Vortex};

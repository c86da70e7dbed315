//! Adaptive P1 finite elements for one implicit time step of a Cahn-Hilliard
//! system whose double-obstacle free energy is relaxed by a penalty term,
//! plus the experiment harness that measures how the constraint violation
//! decays as the penalty parameter grows.
//!
//! Module map:
//! - [`mesh`]: conforming triangulations with newest-vertex bisection
//! - [`fem`]: P1 spaces, sparse operators, integral norms
//! - [`penalty`]: the violation functions and their discrete forms
//! - [`chstep`]: one implicit step solved by semismooth Newton
//! - [`adapt`]: edge-jump estimation, Doerfler marking, adaptive cycle
//! - [`sweep`]: the s-sweep harness with CSV and slope-fit outputs

pub mod adapt;
pub mod chstep;
pub mod fem;
pub mod geom;
pub mod mesh;
pub mod penalty;
pub mod quadrature;
pub mod sweep;

pub use adapt::{AdaptiveOutcome, IndicatorField, MarkParams};
pub use chstep::{
    NewtonConfig, SolveStatus, SphereProfile, StepProblem, StepSolution, ViolationReport,
};
pub use fem::{LumpedMass, P1Function, SparseMatrix};
pub use mesh::{CellGeometry, MarkedSet, Mesh, MeshError, Prolongation};
pub use penalty::{PenaltyPower, PenaltyScheme};
pub use sweep::{SlopeFit, SweepConfig, SweepRecord};

//! Contact between deformable bodies through a shared background grid.
//!
//! Boundary nodes of explicit finite element meshes act as particles that
//! exchange momentum with a quadratic B-spline grid using PIC or APIC
//! transfers. A velocity prediction a short time `τ` ahead is smoothed on the
//! grid and the difference is applied as an acceleration. Because every
//! correction lies in the range of `G = H - I`, linear momentum is conserved
//! exactly, and angular momentum as well with APIC transfers.
//!
//! Entry points:
//!
//! * [`scenario`] builds the benchmark problems,
//! * [`integrator::Simulation`] advances them,
//! * [`diagnostics`] measures momenta, energies and gaps,
//! * [`toy1d`] is the reduced two-particle model,
//! * [`config`] and [`run`] drive file-based runs.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod contact;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod integrator;
pub mod math;
pub mod run;
pub mod scenario;
pub mod spline;
pub mod toy1d;
pub mod transfer;
pub mod verify;
pub mod vtk;

pub use config::{parse_config, parse_config_with, Overrides, RunConfig};
pub use contact::{ContactConfig, ContactLaw};
pub use diagnostics::DiagnosticsRow;
pub use error::{Error, Result};
pub use fem::{FemModel, Material, TetMesh};
pub use integrator::{IntegratorConfig, PredictorBase, SimState, Simulation};
pub use math::{Mat3, Vec3};
pub use scenario::{Scenario, ScenarioKind};
pub use spline::GridSpec;
pub use toy1d::{ToyState, ToyTrajectory};
pub use transfer::{GeneralizedVelocity, TransferMode, TransferOperator};

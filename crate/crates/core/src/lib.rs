//! Variational numerics for the Schrödinger–Poisson energy
//!
//! J(u) = ½‖u‖²_{H¹} + ¼∫ρ φ u² − ∫F(u),   −Δφ = ρu²,
//!
//! on radial and full three-dimensional grids: constant machinery for the
//! nonlinearity, free-space Poisson solvers, Sobolev-gradient descent, a
//! path-deformation mountain-pass solver, and the coupling-threshold and
//! multibump constructions built on top of them.

pub mod dd;
pub mod error;
pub mod field3d;
pub mod functional;
pub mod landscape;
pub mod models;
pub mod numerics;
pub mod oracles;
pub mod radial;
pub mod solvers;

pub use error::{Error, Result};
pub use field3d::{Field3D, FreeSpacePoisson, Grid3D, Problem3D};
pub use functional::Functional;
pub use landscape::{LambdaBounds, MultibumpReport, MultibumpSpec, TrialFamily};
pub use models::{ChargeProfile, NonlinearityKind, NonlinearityModel, ProfileShape};
pub use radial::{PoissonPotential, RadialField, RadialGrid, RadialProblem};
pub use solvers::{Classification, GradTol, Level, SolveOptions, SolveResult};

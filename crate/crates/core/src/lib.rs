//! Lower gradient bounds for viscosity solutions of
//! `u_t + H(x, t, u, D_x u) = 0` with `u`-dependent, `p`-convex Hamiltonians.
//!
//! The crate is organised by subsystem:
//!
//! * [`hamiltonians`]: the [`Hamiltonian`] trait, built-in models, Legendre
//!   transform and mollification.
//! * [`initial_data`]: Lipschitz initial data with exact subgradient sets.
//! * [`bounds`]: closed-form gradient estimates, dependence domains and
//!   vanish times.
//! * [`characteristics`]: RK4 integration of the contact Hamiltonian system
//!   and the propagation inequalities checked along it.
//! * [`herglotz`]: the Carathéodory equation, the action functional and a
//!   desk-scale minimiser for the value function.
//! * [`convolution`]: time-weighted inf/sup-convolutions on grid fields.
//! * [`solver`]: a monotone Lax–Friedrichs scheme and closed-form oracles.
//! * [`harness`]: scenario configs, verification tables and CSV/SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod characteristics;
pub mod convolution;
pub mod hamiltonians;
pub mod harness;
pub mod herglotz;
pub mod initial_data;
pub mod numeric;
pub mod solver;
pub mod vector;

pub use bounds::{BoundInputs, DependenceDomain};
pub use characteristics::{CharacteristicPath, TerminalCondition};
pub use hamiltonians::{
    BuiltinHamiltonian, BuiltinKind, Hamiltonian, LagrangianValue, StructuralConstants,
};
pub use initial_data::{GradientStats, InitialDatum, SubgradientSet};
pub use solver::{ClosedFormOracle, GridSpec, NumericalSolution};

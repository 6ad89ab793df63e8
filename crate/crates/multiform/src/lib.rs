//! Multi-time Hamiltonian hierarchies on finite-dimensional phase space:
//! the phase-space one-form `p dq - H_i dt^i`, its action over paths in the
//! time plane, and the machinery to verify when that action is
//! path-independent.
//!
//! The pieces fit together in layers:
//!
//! - [`expr`]: symbolic expressions with exact differentiation, parsing, and
//!   compiled evaluation; everything downstream works on these.
//! - [`phase`]: phase points, Hamiltonian families over `p1..pm, q1..qm`,
//!   Poisson brackets, and the JSON definition format.
//! - [`flows`]: multi-time integration along piecewise-linear time paths,
//!   the action integral, closure and commutation checks.
//! - [`legendre`]: inverse Legendre transform; damped Newton recovery of
//!   momenta from velocity data and its consistency checks.
//! - [`liegroup`]: the time plane replaced by a Lie group; charts,
//!   Maurer-Cartan coefficients, moment maps, chart-twisted flows.
//! - [`models`]: built-in bundles (oscillator, Toda chains, conformal
//!   particle, Lorentz generators) with reference invariants.
//! - [`cli`]: the `multiform` binary's command surface.
//!
//! Each capability has a runnable demonstration under `examples/`:
//!
//! ```text
//! cargo run --example involutivity        bracket matrices and what they certify
//! cargo run --example one_form_action     the action integral vs a closed form
//! cargo run --example closure_paths       path-independence and its failure mode
//! cargo run --example flow_commutation    interleaving flows in both orders
//! cargo run --example inverse_legendre    momenta recovered from velocities
//! cargo run --example toda_multiform      a chain carried through the full pipeline
//! cargo run --example maurer_cartan       chart coefficients and flatness
//! cargo run --example moment_maps         bracket tables realized by Hamiltonians
//! cargo run --example conformal_invariants  non-autonomous conserved quantities
//! cargo run --example lorentz_action      group flow as a matrix action
//! ```

pub mod cli;
pub mod expr;
pub mod flows;
pub mod legendre;
pub mod liegroup;
pub mod models;
pub mod phase;

pub use expr::Expression;
pub use flows::{integrate_curve, MultiTimeCurve, Trajectory};
pub use legendre::{AlphaVector, MomentumSolver, VelocityField};
pub use liegroup::{GroupChart, LieAlgebra, StructureConstants};
pub use models::{builtin, builtin_names, ModelBundle};
pub use phase::{HamiltonianSystem, PhasePoint, SystemDefinition};

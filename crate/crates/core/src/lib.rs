//! Decomposition of finite normal-form games into potential and harmonic
//! parts, the information geometry of the simplex that makes the harmonic
//! part incompressible, and exponential-weights / replicator trajectories
//! with their conserved quantities.
//!
//! The crate is organized around four pieces:
//!
//! * [`game`]: payoff tensors, mixed and corner-of-cube strategy
//!   coordinates, payoff fields, strategic equivalence.
//! * [`geometry`]: the simplex metric `diag(1/x)` in reduced coordinates,
//!   its gradients and divergence, and simplex volumes under it.
//! * [`decomposition`]: harmonicity tests and the least-squares potential /
//!   harmonic split over the response graph.
//! * [`dynamics`]: score-space integration of the exponential-weights flow,
//!   regret, the conserved energy, volume tracking, recurrence detection,
//!   and interior rest points.

pub mod decomposition;
pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod game;
pub mod geometry;
pub mod json;
mod linalg;

pub use error::{Error, Result};
pub use game::{
    eff_payoff_field, embed, is_non_strategic, is_strategically_equivalent, mixed_payoff,
    payoff_field, reduce, DeviationFlow, EffPayoffField, EffProfile, Game, MixedProfile,
    PayoffField,
};

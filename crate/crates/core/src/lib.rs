//! Simulation, closed forms and convergence bounds for the loop-free
//! birth–death dynamic network.
//!
//! Nodes follow a linear birth–death process with per-capita birth rate
//! `lambda` and death rate `mu`, started from a single node. Every living node
//! `i` carries a social index `S_i` and creates edges at rate `alpha * S_i` to a
//! uniformly chosen other living node; edges die at rate `beta` and vanish with
//! either endpoint.
//!
//! Module map:
//!
//! - [`bdp`]: node process simulation, mass functions, moments, extinction.
//! - [`ages`]: age distributions of a uniformly picked living node.
//! - [`contour`]: contour excursions, planar trees and the bijection between them.
//! - [`netsim`]: network simulation, degrees and mixing parameters `Λ_T`.
//! - [`mixpo`]: mixed Poisson laws and total-variation tools.
//! - [`bounds`]: explicit convergence-rate bounds and lemma checks.
//! - [`stats`]: small statistical helpers shared by the checks.

pub mod ages;
pub mod bdp;
pub mod bounds;
pub mod contour;
mod error;
pub mod mixpo;
pub mod netsim;
pub mod quad;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

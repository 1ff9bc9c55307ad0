//! Skill acquisition on a minefield-navigation grid world.
//!
//! Single-object training modules record how their users react to hidden
//! object behaviours; those traces are induced into cause-effect rules,
//! pooled with equal weight at a skill centre, and finally used by a
//! reactive solver to cross a field of unknown objects.

pub mod bots;
pub mod canonical;
pub mod centre;
pub mod error;
pub mod rules;
pub mod session;
pub mod solver;
pub mod trace;
pub mod transport;
pub mod world;

pub use error::{Error, Result};

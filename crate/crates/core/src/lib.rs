//! Counter programs, zero-test gadgets and hardness constructions for
//! low-dimensional VASS reachability, with a bounded exploration engine to
//! check them.

pub mod cli;
pub mod gadgets;
pub mod lang;
pub mod reach;
pub mod reductions;
pub mod text;
pub mod vass;
pub mod verify;

//! Antiplane screw dislocations on the triangular lattice: energy, topology and relaxation.

pub mod audit;
pub mod elastic;
pub mod energy;
pub mod error;
pub mod forms;
pub mod lattice;
pub mod potential;
pub mod relax;
pub mod topology;

pub use error::{Error, Result};
pub use forms::{Displacement, IntegerForm, OneForm};
pub use lattice::{Bond, Cell, CellShift, Dir, LatticeDomain, Orientation, Site};
pub use potential::{Potential, PotentialSpec};

/// Version stamped into every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

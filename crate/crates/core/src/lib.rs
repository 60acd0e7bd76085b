//! High-dimensional Bell nonlocality: inequality evaluation, local and
//! dimension-restricted quantum bounds, the binarisation loophole, and
//! finite-count statistics of coincidence data.

pub mod binarise;
pub mod convex;
pub mod dimbound;
pub mod error;
pub mod functionals;
pub mod lhv;
pub mod matkernel;
pub mod model;
pub mod seesaw;
pub mod stats;

pub use error::{Error, Result};
pub use functionals::{cglmp_functional, evaluate, satwap_functional, BellFunctional, Family, Layout};
pub use matkernel::{CMatrix, C64};
pub use stats::{CountKind, CountTable, StatsReport};
pub use model::{born_behavior, Behavior, Party, QuantumModel, Scenario, StateSpec};

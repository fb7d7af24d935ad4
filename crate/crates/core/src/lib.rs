//! Local limit theorems for suspension flows.
pub mod groups;
pub mod montecarlo;
pub mod predict;
pub mod quadrature;
pub mod renewal_exact;
pub mod rng;
pub mod spectral;
pub mod systems;

pub use groups::{classify_case, closure_of_group, CaseLabel, ClosedSubgroup2, GroupError, GroupWithShift, LineGroup, QVec, QuadScalar};
pub use systems::{flow_integrate, FlowPoint, MarkovShiftBase, PMTowerBase, RenewalBase, SuspensionSystem, SystemError};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

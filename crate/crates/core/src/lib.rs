//! Thermodynamic formalism for the Manneville-Pomeau map: pressure bounds,
//! inducing schemes, and phase-transition certificates.

pub mod bounds;
pub mod bowen;
pub mod certify;
pub mod error;
pub mod expr;
pub mod ext_float;
pub mod graph;
pub mod induced;
pub mod mp_map;
pub mod potentials;
pub mod pressure;

pub use error::{DivergenceWitness, Error, Result};
pub use mp_map::{Interval, MapParams, MarkedOrbit, MpMap};
pub use potentials::{Norms, PotentialSpec};
pub use pressure::{Method, PressureBracket};
pub use induced::{FiberParams, FiberTable, InducedSystem, ReturnWord, Sign, TwoVarPressurePoint};
pub use certify::{certify_transition, CertifyBudgets, PeriodicOrbit, TransitionCertificate, TransitionVerdict};

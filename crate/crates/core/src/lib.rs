//! Phase-modulated entangling gates for oscillator-mediated qubit couplings.
//!
//! Build closing phase sequences with [`sequence::construct`], turn them into
//! maximally entangling gates with [`design::design_gate`], and probe their
//! robustness with [`noise`] and [`sim`]. Frequencies are angular (rad/s)
//! throughout; [`io`] converts from the Hz used in files.

pub mod design;
pub mod error;
pub mod io;
pub mod model;
pub mod noise;
pub mod parallel;
pub mod quadrature;
pub mod sequence;
pub mod sim;
pub mod trajectory;

pub use design::{design_gate, entangling_phase, solve_rabi, DesignRequest, DesignResult, Ordering, Scheme, Target};
pub use error::{Error, Result};
pub use model::{Basis, GateConfig, Injection, Mode, ModeSpectrum, Noise, NoiseModel};
pub use sequence::{construct, PhaseSequence, Segment};
pub use sim::{analytic_observables, fock_oracle, GateObservables};

//! Simulation library for chains of two-level emitters driven through a
//! one-dimensional waveguide.
//!
//! Units: the total single-emitter decay rate and the group velocity are 1;
//! positions are in units of the resonant wavelength.

pub mod analytic;
pub mod cumulant;
pub mod doppler;
pub mod ensemble;
pub mod error;
pub mod exact;
pub mod io;
pub mod meanfield;
pub mod model;
pub mod ode;
pub mod quad;

pub use error::{Error, Result};
pub use meanfield::{
    effective_drive, field_observables, solve_steady_state, solve_steady_state_from, uwm_saturation_recursion,
    uwm_saturation_recursion_exact, FieldObservables, MeanFieldSolution, Ramp, SolverOptions,
};
pub use model::{
    averaged_phase_factor, build_chain, build_chain_realization, derive, DerivedQuantities, EmitterChain, ModelParams,
    ModelTag,
};
pub use num_complex::Complex64;

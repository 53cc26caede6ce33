//! Numerical laboratory for calculus on the Heisenberg group `H^n` and the
//! asymptotic mean-value characterization of p-harmonic functions.
//!
//! * [`hgroup`]: group law, dilations, gauge norm, horizontal derivatives.
//! * [`fields`]: closed-form test fields with exact derivatives.
//! * [`operators`]: `Delta_H`, `Delta_inf`, `Delta_p` and the Kohn matrix.
//! * [`gaugeball`]: gauge-ball volume, averages, extrema and the constants `C`, `alpha`, `beta`.
//! * [`mvp`]: residual and extrema-limit verification across shrinking radii.
//! * [`solver`]: lattice fixed-point solver for the mean-value relation (`n = 1`).

pub mod error;
pub mod exec;
pub mod extrapolate;
pub mod fields;
pub mod gaugeball;
pub mod hgroup;
pub mod lds;
pub mod mvp;
pub mod operators;
pub mod solver;

pub use error::{HmvpError, Result};
pub use exec::Execution;
pub use fields::ScalarField;
pub use hgroup::Point;

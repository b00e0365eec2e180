//! Closed-form analysis: special functions, eigenvalue statistics, rate
//! bounds and the deterministic equivalent.

pub mod bounds;
pub mod de;
pub mod specfun;
pub mod wishart;

pub use bounds::{bound_inputs, effective_t, rate_lower_bound, rate_upper_bound, sum_rate_bounds, BoundForm, TExponent};
pub use de::{de_sinr, de_sum_rate, DeForm, DeOptions, DeState};
pub use specfun::{bessel_j0, expint_ei, expint_en, EULER_GAMMA};
pub use wishart::{apply_tie_jitter, eigen_pdf, vandermonde_cofactor, BoundInputs, EigenDensity};

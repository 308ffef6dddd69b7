//! Bounds on the probabilities of causation (PNS, PN, PS) for a binary
//! treatment `X` and binary outcome `Y`, together with the expected
//! tightening of the PNS bounds that an observational study would bring.
//!
//! The crate is organised bottom-up:
//!
//! * [`causal`] holds the distribution types, frequentist estimation from
//!   2x2 count tables and the experimental/observational consistency check.
//! * [`bounds`] evaluates the sharp PNS/PN/PS bounds.
//! * [`improvement`] gives the closed-form expected increase of the PNS lower
//!   bound and decrease of the upper bound when `P(y)` (resp.
//!   `P(x,y) + P(x',y')`) is uniform on its feasible interval, plus the
//!   piecewise CDFs those expectations integrate.
//! * [`unit_selection`] lifts all of the above to the benefit function of
//!   the unit-selection problem.
//! * [`oracle`] contains independent validation engines (Monte Carlo,
//!   quadrature, response-type SCM sampling, LP vertex enumeration).
//!
//! ```
//! use pcause::{bounds, causal::CountTable2x2, improvement};
//!
//! let table = CountTable2x2::experimental(795, 705, 720, 780);
//! let exp = pcause::causal::estimate_experimental(&table).unwrap();
//! let pns = bounds::pns_bounds_experimental(&exp);
//! assert!((pns.lower - 0.05).abs() < 1e-12);
//! assert!((improvement::expected_lower_gain(&exp).unwrap() - 0.2231).abs() < 5e-5);
//! ```

pub mod bounds;
pub mod causal;
mod error;
pub mod improvement;
pub mod oracle;
pub mod unit_selection;

pub use error::{Error, Result};

/// Absolute tolerance applied to user-supplied probabilities.
pub const INPUT_TOLERANCE: f64 = 1e-9;

/// Absolute tolerance for identities that hold exactly in real arithmetic.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

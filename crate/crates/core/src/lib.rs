//! Generalized Puiseux expansions over Mal'cev-Neumann series rings.
//!
//! The crate builds the series embedding of a rank one valuation given by a
//! monic polynomial (or an explicit key polynomial chain), together with the
//! truncation calculus used to certify the result.

pub mod coeff;
pub mod embed;
pub mod keypoly;
pub mod series;
pub mod truncalg;
pub mod value_group;

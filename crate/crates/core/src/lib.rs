//! Quantitative invariants of conformal discrete-time dynamics.
//!
//! A [`ConformalSystem`] is an invertible map `psi` on a model space together
//! with a conformal factor `h`. Everything computed here depends on that pair
//! only:
//!
//! * [`birkhoff`]: Birkhoff sums and averages of `h`, the transfer potentials
//!   `f_n` with `A_n(h) = h + f_n o psi - f_n`, truncated envelopes and the
//!   two limits bounding the set of admissible sizes.
//! * [`torus`]: the Z-action `(x, t) -> (psi(x), t + k - h(x))` on `N x R`,
//!   properness probes, and the explicit functions `g` and `mu` that conjugate
//!   it to the unit translation.
//! * [`ergopt`]: the two min-max coboundary problems, solved exactly on finite
//!   permutations through cycle means.
//! * [`elastic`]: elasticity sets from Liouville profiles and LCS ranks of
//!   period groups.

pub mod birkhoff;
pub mod elastic;
pub mod ergopt;
mod error;
pub mod rational;
pub mod sampling;
pub mod space;
pub mod system;
pub mod torus;

pub use error::{Error, Result};
pub use space::{ModelSpace, Point};
pub use system::{builtin_system, ConformalSystem, Factor, MapKind, PresetParams, TrigPoly, TrigTerm};

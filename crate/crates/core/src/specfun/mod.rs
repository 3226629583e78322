//! Special functions for the exact two-level sweep solution.

mod cayley_klein;
mod gamma;
mod pcf;

pub use cayley_klein::{lz_cayley_klein, lz_cayley_klein_nominal_b, lz_cayley_klein_series, CayleyKlein};
pub use gamma::{gamma, log_gamma, rgamma};
pub use pcf::{pcf_d, pcf_d_polar, PcfEvaluation, PcfRegime, MAX_ABS_Z, MAX_IM_NU, MAX_RE_NU};

//! Traveling wave profiles, minimal wave speeds and front dynamics for the
//! reaction-diffusion equation with state-dependent delay
//!
//! ```text
//! u_t = u_xx - d u + b(u(x, t - tau(u(x, t))))
//! ```

pub mod bounds;
pub mod dispersion;
pub mod error;
pub mod model;
pub mod numeric;
pub mod pdesim;
pub mod profile;

pub use error::{Error, Result};

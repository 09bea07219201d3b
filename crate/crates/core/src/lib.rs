//! Ricci flow on compact manifolds with boundary, realised numerically by
//! doubling across the boundary, the Ricci-DeTurck gauge on a fixed background,
//! the DeTurck ODE pullback, and a harmonic-map-heat-flow uniqueness check.

pub mod config;
pub mod curvature;
pub mod deturck;
pub mod doubling;
pub mod drivers;
pub mod error;
pub mod gauge;
pub mod grid;
pub mod harmonicmap;
pub mod io;
mod jets;
pub mod linsolve;
pub mod norms;
pub mod parabolic;
pub mod presets;
pub mod rotsym;
pub mod pic;
pub mod tensor;

pub use error::{Error, Result};

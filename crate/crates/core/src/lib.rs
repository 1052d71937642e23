//! Fourier-mode classification of nonnegative solutions of
//! `-div(A(x') grad u) = u - g` on the half-space `x_N > 0` with `u = 0` on
//! the boundary.

pub mod expr;
pub mod model;
pub mod fourier;
pub mod system;
pub mod elimination;
pub mod verify;
pub mod classify;
pub mod cli;

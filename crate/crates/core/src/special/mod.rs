//! Special functions and seeded random sampling.

mod psi;
mod rng;
mod sample;

pub use psi::{digamma, inv_trigamma, tetragamma, trigamma};
pub use rng::{stream_id_for, RngStream};
pub use sample::Dist;

pub mod basis;
pub mod config;
pub mod beat;
pub mod error;
pub mod eval;
pub mod loudness;
pub mod models;
pub mod score;
pub mod sensitivity;
pub mod synth;
mod table;

pub use error::{Error, Result};

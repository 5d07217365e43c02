//! Normal forms, flip classification and bifurcation diagrams for
//! two-parameter families of Z2-symmetric Hamiltonians near a double flip.

pub mod error;
pub mod jets;
pub mod models;
pub mod normalform;
pub mod singularities;
pub mod flip;
pub mod diagram;
pub mod selftest;
pub mod cli;

pub use error::{Error, Result};
pub use jets::{Jet, SymplecticMap2};
pub use models::{DomainWindow, Model, ModelId, ModelParams, NuSpec};

//! Core algorithms for interacting Brownian particles on a periodic torus,
//! with one tagged particle coupled to its environment.
//!
//! Everything in this crate is deterministic given an RNG seed and free of
//! IO; file formats and statistical reporting live in the companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod audit;
pub mod configuration;
pub mod dynamics;
pub mod functional;
pub mod gibbs;
pub mod potential;
pub mod quad;
pub mod schedule;
pub mod seed;
pub mod torus;

pub use configuration::{Configuration, Point, MAX_DIM};
pub use potential::{PairPotential, PotentialKind};
pub use torus::TorusBox;

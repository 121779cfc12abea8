//! Core engine for dynamic lane-direction allocation on road networks.
//!
//! Everything in this crate is deterministic and IO-free: the same network,
//! demand, parameters and RNG seed always produce bit-identical results.
//! File formats, the CLI and scenario generators live in the companion
//! `lanesim` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod coordinator;
pub mod demand;
pub mod dla;
pub mod engine;
pub mod netgraph;
pub mod pdg;
pub mod qlane;
pub mod simcore;

//! Deterministic simulator of a wireless access point with an adaptive
//! antenna array.
//!
//! The router estimates the direction of arrival of joining nodes (MUSIC or
//! the Matrix Pencil method), serves each node with the narrowest beam the
//! aperture affords while nulling toward other served directions, beacons
//! its SSID intermittently until the client capacity is reached, re-points
//! beams as nodes move, and accounts the energy spent against an always-on
//! omnidirectional baseline. A dual-branch Rayleigh diversity toolkit
//! (branch powers, complex/envelope correlation, selection combining,
//! outage-quantile diversity gain) rounds out the analysis side.
//!
//! Everything is a pure function of explicit inputs plus a seed: repeated
//! runs are bit-identical.

pub mod array;
pub mod beam;
pub mod diversity;
pub mod doa;
pub mod error;
mod linalg;
pub mod mobility;
pub mod power;
pub mod report;
pub mod router;
pub mod scenario;

pub use error::{Error, Result};

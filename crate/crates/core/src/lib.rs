//! Exact-arithmetic engines for the holomorphic bosonic string.

pub mod exactlin;
pub mod vertexalg;
pub mod gelfandfuks;
pub mod anomaly;
pub mod grr;

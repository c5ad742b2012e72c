//! Periodic switching synthesis for discrete-time switched linear systems
//! from trajectory data.

pub mod certify;
pub mod cycle;
pub mod dataset;
pub mod linalg;
pub mod lmi;
pub mod schedule;
pub mod simulate;

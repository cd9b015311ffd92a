//! Certified bounds on the joint spectral radius of a finite set of real
//! matrices, via symmetric-algebra lifts, sum-of-squares Lyapunov functions,
//! and a built-in semidefinite feasibility solver.

pub mod bounds;
pub mod cli;
pub mod input;
pub mod linalg;
pub mod lyapunov;
pub mod sdp;
pub mod symalg;

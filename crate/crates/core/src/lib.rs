pub mod comm;
pub mod engine;
pub mod error;
pub mod grassmann;
pub mod harness;
pub mod losses;
pub mod manifold;
pub mod quadrature;
pub mod rng;
pub mod sphere;

pub mod assembly;
pub mod ball_approx;
pub mod cmap;
pub mod geometry;
pub mod harness;
pub mod quadrature;
pub mod solver;
pub mod sparse;

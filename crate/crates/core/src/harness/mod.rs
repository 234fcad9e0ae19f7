pub mod mesh;
pub mod problem;
pub mod study;

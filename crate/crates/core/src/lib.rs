pub mod cli;
pub mod factorizer;
pub mod fd;
pub mod gauss;
pub mod grid;
pub mod linalg;
pub mod market;
pub mod pricer;
pub mod quadrature;
pub mod solver;
pub mod transform;

pub mod error;
pub mod feshbach;
pub mod fock;
pub mod kernels;
pub mod config;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod rg;
pub mod symmetry;

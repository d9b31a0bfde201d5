//! Sofic approximations, finite-dimensional l^p and Schatten-p actions,
//! ε-dimension brackets, and edge calculus on free-group Cayley trees.

pub mod error;
pub mod group;
pub mod banach;
pub mod epsdim;
pub mod cayley;
pub mod hom;
pub mod sofic;
pub mod lab;

pub use error::{Error, ErrorCategory, Result};

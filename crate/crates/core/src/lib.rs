pub mod cmetric;
pub mod convexrep;
pub mod experiment;
pub mod error;
pub mod estimates;
pub mod linalg;
pub mod pingpong;
pub mod projgeom;
pub mod sampling;
pub mod words;

pub use error::{Error, Result};

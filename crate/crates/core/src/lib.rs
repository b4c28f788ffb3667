pub mod biortho;
pub mod brute;
pub mod error;
pub mod geo;
pub mod kitaev;
pub mod linalg;
pub mod nh_ssh;
pub mod quad;
pub mod scan;
pub mod verify;

pub use error::{Error, Result};

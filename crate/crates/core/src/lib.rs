pub mod analysis;
pub mod confidence;
pub mod design;
pub mod error;
pub mod estimation;
pub mod io;
pub mod linalg;
pub mod plot;
pub mod report;
pub mod resampling;
pub mod statistics;

pub use error::{Error, Result};

pub mod behavior;
pub mod erp;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod signal;
pub mod stats;
pub mod synth;
pub mod task;

pub use error::{Error, Result};

pub mod crosssection;
pub mod dependence;
pub mod dexarb;
pub mod distribution;
pub mod error;
pub mod facts;
pub mod ingestion;
pub mod report;
pub mod stats;
pub mod synth;
pub mod timeseries;

pub use error::{Error, Result};

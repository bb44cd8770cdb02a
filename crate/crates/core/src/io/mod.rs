//! File formats: MRC volumes/stacks, tilt-series text files, and the flat
//! key-value config documents.

pub mod kv;
mod mrc;
mod tilt;

pub use mrc::{MrcData, read_mrc, write_mrc, write_mrc_projections};
pub use tilt::{format_tilt_series, parse_tilt_series, read_tilt_series, write_tilt_series};

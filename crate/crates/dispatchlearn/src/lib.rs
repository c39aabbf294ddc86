//! File formats, data ingestion, reports and the command line around
//! `dispatchlearn-core`.

pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data_io;
pub mod gridfile;
pub mod run;
pub mod report;

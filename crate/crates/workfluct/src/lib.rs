//! File formats, CSV tables and the command-line front end over
//! [`workfluct_core`].

pub mod cli;
pub mod formats;
pub mod tables;

pub use workfluct_core as core;

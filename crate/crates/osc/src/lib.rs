pub mod cache;
pub mod cli;
pub mod config;
pub mod output;
pub mod pool;
pub mod run;

pub use osc_core;

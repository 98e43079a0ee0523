//! Run configuration and text outputs.

mod config;
mod output;

pub use config::{parse_config, parse_config_with, Mode, RunConfig, SweepParameter};
pub use output::{
    format_value, read_snapshot, write_json, write_snapshot, write_table, write_timeseries,
};

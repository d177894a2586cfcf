//! Configuration files, checkpoints, CSV/JSON reports and SVG plots.

pub mod checkpoint;
pub mod config;
pub mod csv;
pub mod float;
pub mod json;
pub mod svg;

pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, read_checkpoint, write_checkpoint};
pub use config::{parse_config, parse_config_str, ConfigFile};
pub use self::csv::{read_trace_csv, trace_csv, trace_from_csv, write_gaps_csv, write_trace_csv};
pub use json::{read_report_json, report_from_json, report_json, write_report_json, RunReport, SCHEMA_VERSION};
pub use svg::{plot_svg, write_plot_svg, Plot, Scale, Series};

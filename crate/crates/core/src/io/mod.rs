//! Configuration parsing and file output.

pub mod config;
pub mod csv;
pub mod vtk;

pub use config::{
    default_output_dir, parse_config, parse_config_str, CaseConfig, GeometryConfig, OutputConfig,
    RunConfig, StudyConfig, CASES, OUTPUT_DIR_ENV,
};
pub use csv::{
    diagnostics_csv, study_csv, write_centerline_csv, write_diagnostics_csv, write_study_csv,
    DIAGNOSTICS_HEADER,
};
pub use vtk::{vtk_string, write_vtk, FieldSnapshot};

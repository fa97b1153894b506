//! Configuration loading, experiment dispatch and mining calibration for
//! the `spectrust` command.

pub mod calibrate;
pub mod config;
pub mod run;

use std::path::{Path, PathBuf};

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "SPECTRUST_OUT";

/// `--out` first, then the environment, then the config, then `default`.
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>, default: &str) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(default))
}

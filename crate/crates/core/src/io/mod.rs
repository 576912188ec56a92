//! File formats, configuration and spatial weights.

pub mod config;
pub mod csv_out;
pub mod draws;
pub mod panel;
pub mod weights;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::Result;

pub use config::{RunConfig, CONFIG_ENV};
pub use csv_out::*;
pub use draws::{load_draws, persist_draws};
pub use panel::{load_panel, raw_covariate, write_panel, LoadOptions, LoadedPanel};
pub use weights::{bhattacharyya_weight, distributions_from_samples, nearest_neighbors};

/// Reads a file, naming it in the error.
pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| with_path(e, path))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| with_path(e, path))
}

fn with_path(e: std::io::Error, path: &Path) -> crate::Error {
    crate::Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

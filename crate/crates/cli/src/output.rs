use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::CliResult;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    /// Seconds.
    pub wall_time: f64,
    pub tool_version: String,
}

/// Output files of one run, in creation order.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    started: Instant,
}

impl Outputs {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path)?;
        if !self.files.contains(&path) {
            self.files.push(path);
        }
        Ok(BufWriter::new(file))
    }

    /// Writes the manifest, always the last file of a run.
    pub fn finish(self, command: &str, config_path: Option<&Path>, seed: Option<u64>) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            seed,
            outputs: self.files,
            wall_time: self.started.elapsed().as_secs_f64(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let file = File::create(self.dir.join(MANIFEST_NAME))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &manifest)?;
        Ok(manifest)
    }
}

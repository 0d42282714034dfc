use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::OutputArgs;
use crate::{CliError, CliResult};

pub struct OutputDir {
    root: PathBuf,
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    windband::Error::Io {
        path: path.display().to_string(),
        source,
    }
    .into()
}

impl OutputDir {
    /// Creates the directory, refusing to reuse a non-empty one unless
    /// `--force` is given.
    pub fn prepare(args: &OutputArgs) -> CliResult<Self> {
        let root = args.out.clone();
        if root.exists() {
            if !root.is_dir() {
                return Err(CliError::Usage(format!("{} is not a directory", root.display())));
            }
            let non_empty = std::fs::read_dir(&root)
                .map_err(|e| io_error(&root, e))?
                .next()
                .is_some();
            if non_empty && !args.force {
                return Err(CliError::Usage(format!(
                    "output directory {} is not empty; pass --force to write into it",
                    root.display()
                )));
            }
        }
        std::fs::create_dir_all(&root).map_err(|e| io_error(&root, e))?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn subdir(&self, name: &str) -> CliResult<OutputDir> {
        let root = self.root.join(name);
        std::fs::create_dir_all(&root).map_err(|e| io_error(&root, e))?;
        Ok(OutputDir { root })
    }

    /// Writes a file through `fill`, flushing at the end.
    pub fn write_with<F>(&self, name: &str, fill: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> CliResult<()>,
    {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| io_error(&path, e))?;
        let mut writer = BufWriter::new(file);
        fill(&mut writer)?;
        writer.flush().map_err(|e| io_error(&path, e))
    }

    /// Pretty-printed JSON followed by a newline.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|source| CliError::Json {
                what: name.to_string(),
                source,
            })?;
            w.write_all(b"\n").map_err(|e| io_error(Path::new(name), e))
        })
    }

    /// CSV with a header row; every record is already formatted.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        self.write_with(name, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(header).map_err(windband::Error::from)?;
            for row in rows {
                csv.write_record(row).map_err(windband::Error::from)?;
            }
            csv.flush().map_err(|e| io_error(Path::new(name), e))
        })
    }
}

/// Reads and deserializes a JSON file.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| {
        windband::Error::Validation(format!("cannot read {}: {e}", path.display())).into()
    })
}

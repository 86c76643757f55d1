use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;

use gifting::{Error, Result};

use crate::config::CliConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes the output files of one command into the configured directory.
/// Every file starts with the tool version, the command and the resolved
/// config.
pub struct Report<'a> {
    command: &'a str,
    config: &'a CliConfig,
    written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    study_seed: u64,
    config: &'a CliConfig,
    result: &'a T,
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

impl<'a> Report<'a> {
    pub fn new(command: &'a str, config: &'a CliConfig) -> Result<Self> {
        fs::create_dir_all(&config.out_dir)
            .map_err(|e| Error::Io(format!("cannot create {}: {e}", config.out_dir.display())))?;
        Ok(Self {
            command,
            config,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.config.out_dir.join(name);
        let file = File::create(&path).map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    fn header(&self) -> Result<String> {
        let mut out = format!(
            "# gifting {VERSION}\n# command: {}\n# study_seed: {}\n# resolved config:\n",
            self.command, self.config.study_seed
        );
        for line in self.config.to_toml()?.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        Ok(out)
    }

    /// Delimited table preceded by `#` header lines.
    pub fn csv<I>(&mut self, name: &str, columns: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let header = self.header()?;
        let mut w = self.create(name)?;
        w.write_all(header.as_bytes())?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(columns).map_err(io_err)?;
        for row in rows {
            csv.write_record(&row).map_err(io_err)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Structured document holding the header fields, the config and `result`.
    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<()> {
        let doc = Document {
            tool: "gifting",
            version: VERSION,
            command: self.command,
            study_seed: self.config.study_seed,
            config: self.config,
            result,
        };
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, &doc).map_err(io_err)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// The resolved config, loadable with `--config`.
    pub fn config_echo(&mut self) -> Result<()> {
        let text = format!(
            "# gifting {VERSION}\n# command: {}\n{}",
            self.command,
            self.config.to_toml()?
        );
        let mut w = self.create("config.toml")?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip form of a float.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

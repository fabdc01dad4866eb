//! Artifacts: a table for CSV, a JSON document, and a one-line summary.

use std::env;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::Value;

use crate::CliError;

/// Environment variable naming the default artifact directory.
pub const OUT_DIR_VAR: &str = "RUIN_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Artifact path. Defaults to `$RUIN_OUT_DIR/<command>.<ext>`, or stdout
    /// when that variable is unset.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub struct Artifact {
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
    pub summary: String,
    /// The computation succeeded but the property it checks does not hold.
    pub violated: bool,
}

impl Artifact {
    pub fn new(name: &'static str, header: &[&str]) -> Self {
        Artifact {
            name,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            json: Value::Null,
            summary: String::new(),
            violated: false,
        }
    }

    pub fn push<I, T>(&mut self, row: I)
    where
        I: IntoIterator<Item = T>,
        T: ToString,
    {
        self.rows.push(row.into_iter().map(|x| x.to_string()).collect());
    }

    fn csv_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }

    fn json_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut bytes = serde_json::to_vec_pretty(&self.json)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    /// Writes the artifact and prints the summary line.
    pub fn emit(&self, out: &OutputArgs) -> Result<(), CliError> {
        let bytes = match out.format {
            Format::Csv => self.csv_bytes()?,
            Format::Json => self.json_bytes()?,
        };
        let path = match (&out.out, env::var_os(OUT_DIR_VAR)) {
            (Some(path), _) => Some(path.clone()),
            (None, Some(dir)) => Some(PathBuf::from(dir).join(format!("{}.{}", self.name, out.format.extension()))),
            (None, None) => None,
        };
        match path {
            Some(path) => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&path, bytes)?;
                println!("{} -> {}", self.summary, path.display());
            }
            None => {
                io::stdout().write_all(&bytes)?;
                eprintln!("{}", self.summary);
            }
        }
        Ok(())
    }
}

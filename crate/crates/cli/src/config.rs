//! `run --config file.toml`: a subcommand name plus its options as keys.
//!
//! ```toml
//! command = "dominance"
//! k = 3
//! p_grid = "0.05:0.5:0.05"
//! format = "json"
//! ```
//!
//! Keys map to `--key value` with underscores read as hyphens. `true` gives a
//! bare flag, `false` omits it, and arrays are joined with commas.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser};
use toml::Value;

use crate::{dispatch, Cli, CliError, Command};

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
}

fn scalar(key: &str, v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(x) => Ok(x.to_string()),
        _ => Err(CliError::Usage(format!("config key {key:?}: unsupported value {v}"))),
    }
}

/// Command line equivalent to a config document.
pub fn to_argv(text: &str) -> Result<Vec<String>, CliError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))?;
    let command = match table.get("command") {
        Some(Value::String(c)) => c.clone(),
        _ => return Err(CliError::Usage("config needs a string `command` key".into())),
    };
    let mut argv = vec!["ruin".to_string(), command];
    for (key, value) in &table {
        if key == "command" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Boolean(true) => argv.push(flag),
            Value::Boolean(false) => {}
            Value::Array(items) => {
                let joined = items.iter().map(|v| scalar(key, v)).collect::<Result<Vec<_>, _>>()?.join(",");
                argv.push(flag);
                argv.push(joined);
            }
            other => {
                argv.push(flag);
                argv.push(scalar(key, other)?);
            }
        }
    }
    Ok(argv)
}

pub fn run(args: &RunArgs) -> Result<bool, CliError> {
    let text = fs::read_to_string(&args.config)?;
    let argv = to_argv(&text)?;
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Usage(e.to_string().trim_end().to_string()))?;
    if matches!(cli.command, Command::Run(_)) {
        return Err(CliError::Usage("a config file cannot run another config file".into()));
    }
    dispatch(cli.command)
}

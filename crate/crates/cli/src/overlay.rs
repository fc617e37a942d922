//! `--config FILE` support: a JSON object of flag values applied wherever
//! the command line (or environment) left a flag unset.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};
use serde_json::Value;

use crate::args::Cli;

#[derive(Debug)]
pub enum ParseError {
    Clap(clap::Error),
    Config(String),
}

impl From<clap::Error> for ParseError {
    fn from(e: clap::Error) -> Self {
        ParseError::Clap(e)
    }
}

fn scalar(key: &str, v: &Value) -> Result<String, ParseError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(ParseError::Config(format!("config value for {key:?} must be a string, number or boolean"))),
    }
}

/// Flags to append for config entries the user did not set explicitly.
fn config_flags(sub: &clap::Command, matches: &ArgMatches, config: &Value) -> Result<Vec<OsString>, ParseError> {
    let Value::Object(obj) = config else {
        return Err(ParseError::Config("config file must hold a JSON object".into()));
    };
    let mut flags = Vec::new();
    for (key, value) in obj {
        let id = key.replace('-', "_");
        let Some(arg) = sub.get_arguments().find(|a| a.get_id().as_str() == id && a.get_long().is_some()) else {
            return Err(ParseError::Config(format!("unknown config key {key:?} for {}", sub.get_name())));
        };
        if id == "config" {
            return Err(ParseError::Config("config files cannot name other config files".into()));
        }
        if matches!(
            matches.value_source(&id),
            Some(ValueSource::CommandLine | ValueSource::EnvVariable)
        ) {
            continue;
        }
        let flag = format!("--{}", arg.get_long().expect("checked"));
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => flags.push(flag.into()),
            Value::Array(items) => {
                let joined: Vec<String> = items.iter().map(|v| scalar(key, v)).collect::<Result<_, _>>()?;
                if arg.get_value_delimiter().is_some() {
                    flags.push(flag.into());
                    flags.push(joined.join(",").into());
                } else {
                    for item in joined {
                        flags.push(flag.clone().into());
                        flags.push(item.into());
                    }
                }
            }
            v => {
                flags.push(flag.into());
                flags.push(scalar(key, v)?.into());
            }
        }
    }
    Ok(flags)
}

/// Parses `argv`, filling unset flags from the subcommand's `--config`
/// file when one is named. The first pass is lenient so that a config file
/// may supply required flags.
pub fn parse_with_config(argv: &[OsString]) -> Result<Cli, ParseError> {
    let strict = |args: &[OsString]| -> Result<Cli, ParseError> {
        let matches = Cli::command().try_get_matches_from(args)?;
        Ok(Cli::from_arg_matches(&matches)?)
    };
    let cmd = Cli::command().ignore_errors(true);
    let Ok(matches) = cmd.clone().try_get_matches_from(argv) else {
        return strict(argv);
    };
    let Some((name, sub_matches)) = matches.subcommand() else {
        return strict(argv);
    };
    let Some(path) = sub_matches.try_get_one::<PathBuf>("config").ok().flatten() else {
        return strict(argv);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| ParseError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| ParseError::Config(format!("config {} is not valid JSON: {e}", path.display())))?;
    let sub = cmd.find_subcommand(name).expect("matched subcommand");
    let mut full = argv.to_vec();
    full.extend(config_flags(sub, sub_matches, &value)?);
    strict(&full)
}

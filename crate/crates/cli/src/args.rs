//! Minimal `--key value` argument parsing. Flags mirror config fields
//! kebab-cased; a handful of presence-only switches take no value.

use std::collections::{BTreeMap, BTreeSet};

use crate::{CliError, CliResult};

const SWITCHES: &[&str] = &["force", "inject-failure", "standardize", "no-standardize"];

#[derive(Debug, Default, Clone)]
pub struct Args {
    pub values: BTreeMap<String, String>,
    pub switches: BTreeSet<String>,
}

impl Args {
    pub fn parse(raw: &[String]) -> CliResult<Args> {
        let mut out = Args::default();
        let mut i = 0;
        while i < raw.len() {
            let token = &raw[i];
            let key = token
                .strip_prefix("--")
                .ok_or_else(|| CliError::user(format!("expected a --flag, got `{token}`")))?;
            if SWITCHES.contains(&key) {
                out.switches.insert(key.to_string());
                i += 1;
                continue;
            }
            let value = raw
                .get(i + 1)
                .ok_or_else(|| CliError::user(format!("flag --{key} needs a value")))?;
            out.values.insert(key.to_string(), value.clone());
            i += 2;
        }
        Ok(out)
    }

    pub fn has(&self, key: &str) -> bool {
        self.switches.contains(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        self.get(key)
            .ok_or_else(|| CliError::user(format!("missing required flag --{key}")))
    }

    pub fn get_f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::user(format!("--{key} expects a number, got `{v}`")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> CliResult<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| CliError::user(format!("--{key} expects a count, got `{v}`")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> CliResult<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| CliError::user(format!("--{key} expects an integer, got `{v}`")))
            })
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> CliResult<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(CliError::user(format!(
                    "--{key} expects true/false, got `{other}`"
                ))),
            })
            .transpose()
    }

    /// Comma-separated list of floats.
    pub fn get_f64_list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim().parse::<f64>().map_err(|_| {
                            CliError::user(format!("--{key}: `{item}` is not a number"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn get_str_list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key)
            .map(|v| v.split(',').map(|s| s.trim().to_string()).collect())
    }
}

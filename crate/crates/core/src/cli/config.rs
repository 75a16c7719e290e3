//! Flat `key = value` configuration files.
//!
//! Keys are long flag names without the leading dashes. Blank lines and
//! lines starting with `#` are ignored. List values are comma separated.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use super::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key=value, got {line:?}", no + 1))
            })?;
            let k = k.trim().to_string();
            if !allowed.contains(&k.as_str()) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key {k:?} (allowed: {})",
                    no + 1,
                    allowed.join(", ")
                )));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Failed(crate::error::Error::io(path, e)))?;
        Self::parse(&text, allowed)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("config key {key}: {e}")))
            })
            .transpose()
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|e| CliError::Usage(format!("config key {key}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }
}

/// Renders settings as a config file that [`ConfigFile::parse`] reads back.
pub fn render(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let c = ConfigFile::parse("# c\nbudget = 0.3\n\nimages=a.pgm, b.pgm\n", &["budget", "images"]).unwrap();
        assert_eq!(c.get::<f64>("budget").unwrap(), Some(0.3));
        assert_eq!(
            c.get_list::<String>("images").unwrap(),
            Some(vec!["a.pgm".to_string(), "b.pgm".to_string()])
        );
        assert_eq!(c.get::<f64>("seed").unwrap(), None);
        assert!(ConfigFile::parse("bogus=1", &["budget"]).is_err());
        assert!(ConfigFile::parse("budget", &["budget"]).is_err());
        assert!(ConfigFile::parse("budget=x", &["budget"]).unwrap().get::<f64>("budget").is_err());
    }

    #[test]
    fn render_round_trips() {
        let text = render(&[("seed", "7".into()), ("densities", "0.1,0.2".into())]);
        let c = ConfigFile::parse(&text, &["seed", "densities"]).unwrap();
        assert_eq!(c.get::<u64>("seed").unwrap(), Some(7));
        assert_eq!(c.get_list::<f64>("densities").unwrap(), Some(vec![0.1, 0.2]));
    }
}

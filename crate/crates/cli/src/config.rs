//! Flat `key = value` run configuration. Command-line flags override file
//! values, which override built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::UsageError;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

/// `layers-factor` and `layers_factor` name the same key.
fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("config line {}: expected key = value", lineno + 1)))?;
            let key = normalize_key(k);
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(UsageError(format!("config line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    /// Rejects keys that the subcommand does not know.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), UsageError> {
        for key in self.values.keys() {
            if !allowed.iter().any(|a| normalize_key(a) == *key) {
                return Err(UsageError(format!("unknown config key `{key}`")));
            }
        }
        Ok(())
    }

    /// Flag value if given, else the file value, else `default`.
    pub fn resolve<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, UsageError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(&normalize_key(key)) {
            Some(raw) => raw
                .parse()
                .map_err(|e| UsageError(format!("config key `{key}`: {e}"))),
            None => Ok(default),
        }
    }

    /// As [`resolve`](Self::resolve) for an optional setting.
    pub fn resolve_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, UsageError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(&normalize_key(key))
            .map(|raw| raw.parse().map_err(|e| UsageError(format!("config key `{key}`: {e}"))))
            .transpose()
    }
}

/// Comma-separated list value, e.g. `--dims 16,32,64`.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<T>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .and_then(|v| {
                if v.is_empty() {
                    Err("empty list".to_string())
                } else {
                    Ok(List(v))
                }
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let cfg = ConfigFile::parse("bins = 64\n# comment\nlayers-factor=8\n").unwrap();
        assert_eq!(cfg.resolve("bins", Some(32usize), 128).unwrap(), 32);
        assert_eq!(cfg.resolve("bins", None, 128usize).unwrap(), 64);
        assert_eq!(cfg.resolve("layers_factor", None, 10.0).unwrap(), 8.0);
        assert_eq!(cfg.resolve("samples", None, 7usize).unwrap(), 7);
    }

    #[test]
    fn unknown_and_malformed() {
        let cfg = ConfigFile::parse("bogus = 1").unwrap();
        assert!(cfg.check_keys(&["bins"]).is_err());
        assert!(ConfigFile::parse("no equals sign").is_err());
        assert!(ConfigFile::parse("a=1\na=2").is_err());
        let cfg = ConfigFile::parse("bins = many").unwrap();
        assert!(cfg.resolve::<usize>("bins", None, 1).is_err());
    }

    #[test]
    fn lists() {
        let l: List<usize> = "16, 32,64".parse().unwrap();
        assert_eq!(l.0, vec![16, 32, 64]);
        assert!("".parse::<List<usize>>().is_err());
        assert!("1,x".parse::<List<usize>>().is_err());
    }
}

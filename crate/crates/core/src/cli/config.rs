use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Origin {
    /// Relative paths resolve against this directory.
    File(PathBuf),
    Flag,
}

/// Flat `key = value` settings from a config file plus flag overrides.
///
/// Lines starting with `#` are comments. Flag overrides win over file
/// values. Relative paths from the file resolve against the file's
/// directory; relative paths from flags resolve against the working
/// directory.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, (String, Origin)>,
}

impl RunConfig {
    pub fn parse_text(text: &str, base_dir: &Path, source: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                source_name: source.to_string(),
                location: format!("line {}", idx + 1),
                message: "expected `key = value`".into(),
            })?;
            let key = k.trim().to_string();
            if values
                .insert(key.clone(), (v.trim().to_string(), Origin::File(base_dir.to_path_buf())))
                .is_some()
            {
                return Err(Error::config(key, format!("set twice in {source}")));
            }
        }
        Ok(Self { values })
    }

    pub fn load(config: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut cfg = match config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
                Self::parse_text(&text, &base, &path.display().to_string())?
            }
            None => Self::default(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o.clone(), "override must look like key=value"))?;
            cfg.set(k.trim(), v.trim());
        }
        if let Some(seed) = seed {
            cfg.set("seed", &seed.to_string());
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values
            .insert(key.to_string(), (value.to_string(), Origin::Flag));
    }

    /// Rejects any key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::config(
                    key.clone(),
                    format!("unknown key; accepted keys: {}", allowed.join(", ")),
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    pub fn get<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(Error::config(key, format!("expected true or false, got `{v}`"))),
        }
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn get_list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        if v.trim().is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|e| Error::config(key, format!("cannot parse `{t}`: {e}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// `lo,hi` pair.
    pub fn get_range(&self, key: &str, default: (f64, f64)) -> Result<(f64, f64)> {
        match self.get_list::<f64>(key)? {
            None => Ok(default),
            Some(v) if v.len() == 2 => Ok((v[0], v[1])),
            Some(_) => Err(Error::config(key, "expected two comma-separated numbers `min,max`")),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(|(v, origin)| match origin {
            Origin::File(base) if Path::new(v).is_relative() => base.join(v),
            _ => PathBuf::from(v),
        })
    }

    /// A path that must name an existing file.
    pub fn input_path(&self, key: &str) -> Result<PathBuf> {
        let p = self
            .path(key)
            .ok_or_else(|| Error::config(key, "required"))?;
        if !p.is_file() {
            return Err(Error::io(
                &p,
                std::io::Error::new(std::io::ErrorKind::NotFound, format!("`{key}` file not found")),
            ));
        }
        Ok(p)
    }

    pub fn optional_input_path(&self, key: &str) -> Result<Option<PathBuf>> {
        if self.contains(key) {
            self.input_path(key).map(Some)
        } else {
            Ok(None)
        }
    }
}

//! Number formatting, config hashing and output files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// `x` rounded to 6 significant digits, printed without trailing zeros.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        round6(x).to_string()
    }
}

fn round6(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Rounds every float in a JSON tree; non-finite values become `null`.
fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *value = serde_json::Number::from_f64(round6(x)).map_or(Value::Null, Value::Number);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut tree = serde_json::to_value(value)?;
    round_json(&mut tree);
    let mut text = serde_json::to_string_pretty(&tree)?;
    text.push('\n');
    Ok(text)
}

/// SHA-256 over the input text and the effective overrides.
pub fn config_hash(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// CSV text with the hash comment line and a header row.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(hash: &str, header: &[&str]) -> Self {
        Self {
            text: format!("# config-hash sha256:{hash}\n{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Where primary outputs go: files in a directory, or stdout.
pub struct Sink {
    dir: Option<PathBuf>,
    printed: bool,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> io::Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            printed: false,
        })
    }

    /// Writes `name` to the output directory. Without one, only the first
    /// output of a command goes to stdout.
    pub fn emit(&mut self, name: &str, contents: &str) -> io::Result<()> {
        match &self.dir {
            Some(d) => fs::write(d.join(name), contents),
            None if !self.printed => {
                self.printed = true;
                io::stdout().lock().write_all(contents.as_bytes())
            }
            None => Ok(()),
        }
    }

    /// Sidecar with the run's timestamp and hash; only written with `--out`.
    pub fn meta(&self, command: &str, hash: &str, files: &[&str]) -> io::Result<()> {
        let Some(d) = &self.dir else {
            return Ok(());
        };
        let seconds = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |t| t.as_secs());
        let meta = serde_json::json!({
            "command": command,
            "config_hash": hash,
            "version": env!("CARGO_PKG_VERSION"),
            "unix_time": seconds,
            "outputs": files,
        });
        fs::write(
            d.join(format!("{command}.meta.json")),
            format!("{meta:#}\n"),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.879_211_234), "0.879211");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(123_456_789.0), "123457000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(f64::INFINITY), "inf");
    }

    #[test]
    fn json_rounding() {
        let text =
            to_json(&serde_json::json!({"a": 0.123_456_789, "b": [1, 2.000_000_1], "c": "x"}))
                .unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["a"], 0.123457);
        assert_eq!(v["b"][0], 1);
        assert_eq!(v["b"][1], 2.0);
    }

    #[test]
    fn hash_separates_parts() {
        assert_ne!(config_hash(&["ab", "c"]), config_hash(&["a", "bc"]));
        assert_eq!(config_hash(&["x"]).len(), 64);
    }
}

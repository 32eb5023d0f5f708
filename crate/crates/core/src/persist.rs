//! Versioned JSON model files.
//!
//! Floats are written in shortest round-trip form, so a load reproduces every
//! weight bit for bit.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "duet-model";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    body: T,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
}

pub fn to_string<T: Serialize>(kind: &str, body: &T) -> Result<String> {
    let env = Envelope {
        format: FORMAT.to_string(),
        version: VERSION,
        kind: kind.to_string(),
        body,
    };
    serde_json::to_string_pretty(&env).map_err(|e| Error::Model(e.to_string()))
}

pub fn from_str<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let header: Header = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
    if header.format != FORMAT {
        return Err(Error::Model(format!("not a {FORMAT} file")));
    }
    if header.version != VERSION {
        return Err(Error::Model(format!(
            "unsupported version {} (expected {VERSION})",
            header.version
        )));
    }
    if header.kind != kind {
        return Err(Error::Model(format!(
            "expected a `{kind}` model, found `{}`",
            header.kind
        )));
    }
    let env: Envelope<T> = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
    Ok(env.body)
}

pub fn save<T: Serialize>(path: &Path, kind: &str, body: &T) -> Result<()> {
    let text = to_string(kind, body)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(kind, &text)
}

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use serde_json::Value;
use sketchcp::Result;

/// Version stamped into every JSON document the CLI writes.
pub const SCHEMA_VERSION: u32 = 1;

pub fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

pub fn dur_ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Writes `text` to `path`, or to stdout when there is no path.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn emit_json(v: &Value, path: Option<&Path>) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    emit(&s, path)
}


//! Deterministic JSON output helpers.

use serde::Serialize;

use crate::error::Result;

/// Serializes with object keys in sorted order and shortest round-trip
/// float formatting, so identical values give identical bytes.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

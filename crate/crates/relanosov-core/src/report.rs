//! Canonical report serialization.
//!
//! Every artifact the toolkit writes is either CSV or JSON in a canonical
//! form: UTF-8, object keys sorted, two-space indentation, trailing newline.
//! Determinism is then checkable by hashing: two runs with the same
//! configuration must produce byte-identical reports once the top-level
//! `timestamp` field is dropped, and [`content_hash`] is exactly that digest.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Serialize with sorted keys and a trailing newline.
///
/// Values are routed through [`serde_json::Value`], whose object map is
/// ordered, so key order in the output never depends on struct declaration
/// order.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let value = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

/// Lowercase hex SHA-256 of raw bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// A copy of the value with the top-level `timestamp` key removed.
pub fn strip_timestamp(value: &Value) -> Value {
    let mut out = value.clone();
    if let Value::Object(map) = &mut out {
        map.remove("timestamp");
    }
    out
}

/// Digest of the canonical JSON after [`strip_timestamp`]; the quantity two
/// identically-configured runs must agree on.
pub fn content_hash<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let value = serde_json::to_value(value)?;
    let canonical = to_canonical_json(&strip_timestamp(&value))?;
    Ok(sha256_hex(canonical.as_bytes()))
}

/// Seconds since the Unix epoch, for the informational `timestamp` field.
pub fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

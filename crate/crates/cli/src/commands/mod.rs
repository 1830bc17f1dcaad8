pub mod estimate;
pub mod oracle;
pub mod pipeline;
pub mod simulate;
pub mod solve;

/// Parses a flag value through the type's serde string representation.
pub fn serde_value<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

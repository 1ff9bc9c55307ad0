//! Canonical JSON: object keys sorted, no insignificant whitespace.

use serde::Serialize;

/// Serialize through `serde_json::Value`, whose maps are ordered, so keys
/// come out sorted regardless of struct field order.
pub fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("domain types always serialize")
}

pub fn to_string<T: Serialize>(value: &T) -> String {
    to_value(value).to_string()
}

pub fn to_string_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(&to_value(value)).expect("value serializes")
}

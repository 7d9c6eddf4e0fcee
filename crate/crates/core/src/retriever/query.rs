use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::Attributes;

/// Detected objects that carry no art-historical signal.
pub const DEFAULT_OBJECT_BLOCKLIST: &[&str] = &[
    "cell phone",
    "laptop",
    "tv",
    "remote",
    "keyboard",
    "mouse",
    "microwave",
    "toaster",
    "refrigerator",
    "hair drier",
    "car",
    "truck",
    "bus",
    "train",
    "airplane",
    "motorcycle",
    "traffic light",
    "fire hydrant",
    "stop sign",
    "parking meter",
    "frisbee",
    "skis",
    "snowboard",
    "sports ball",
    "kite",
    "baseball bat",
    "baseball glove",
    "skateboard",
    "surfboard",
    "tennis racket",
];

/// A retrieval query assembled from metadata and detected objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub text: String,
    /// Objects dropped by the blocklist.
    pub blocked: Vec<String>,
}

impl Query {
    pub fn is_empty(&self) -> bool {
        self.text.trim().is_empty()
    }
}

/// Joins non-empty attribute values (artist, type, timeframe, school) and the
/// detected objects not on `blocklist`.
pub fn build_query<S: AsRef<str>>(
    attrs: &Attributes,
    objects: &[String],
    blocklist: &[S],
) -> Query {
    let mut parts: Vec<String> = attrs
        .entries()
        .into_iter()
        .map(|(_, v)| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    let mut blocked = Vec::new();
    for obj in objects {
        let o = obj.trim();
        if o.is_empty() {
            continue;
        }
        if blocklist
            .iter()
            .any(|b| b.as_ref().trim().eq_ignore_ascii_case(o))
        {
            blocked.push(o.to_string());
        } else {
            parts.push(o.to_string());
        }
    }
    let text = parts.join(" ");
    if text.is_empty() {
        log::warn!("empty retrieval query");
    }
    Query { text, blocked }
}

//! Identifier newtypes for documents and flowchart nodes.

use core::borrow::Borrow;
use core::fmt;
use core::str::FromStr;

use alloc::string::String;
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdError {
    #[error("document id `{0}` must be non-empty and use only [a-z0-9_-]")]
    InvalidDocId(String),
    #[error("node id `{0}` must be non-empty and use only [A-Za-z0-9_]")]
    InvalidNodeId(String),
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident, $check:path, $err:path) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Result<Self, IdError> {
                let value = value.into();
                if !value.is_empty() && value.bytes().all($check) {
                    Ok($name(value))
                } else {
                    Err($err(value))
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $name::new(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl PartialEq<str> for $name {
            fn eq(&self, other: &str) -> bool {
                self.0 == other
            }
        }

        impl PartialEq<&str> for $name {
            fn eq(&self, other: &&str) -> bool {
                self.0 == *other
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(deserializer)?;
                $name::new(raw).map_err(serde::de::Error::custom)
            }
        }
    };
}

fn doc_id_byte(b: u8) -> bool {
    matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_' | b'-')
}

fn node_id_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

string_id!(
    /// Repository-unique document identifier, lowercase `[a-z0-9_-]+` so it
    /// can double as a file name and URL path segment.
    DocId,
    doc_id_byte,
    IdError::InvalidDocId
);

string_id!(
    /// Flowchart node identifier, `[A-Za-z0-9_]+`. Node ids are also FSM
    /// state ids and mermaid node ids.
    NodeId,
    node_id_byte,
    IdError::InvalidNodeId
);

/// FSM states are named after the flowchart nodes they come from.
pub type StateId = NodeId;

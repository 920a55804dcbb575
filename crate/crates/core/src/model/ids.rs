use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                Self(value.into())
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

        impl From<&str> for $name {
            fn from(value: &str) -> Self {
                Self(value.to_owned())
            }
        }
    };
}

string_id!(
    /// Identifier of a co-writing session. Also used as the on-disk file stem.
    SessionId
);
string_id!(MapId);
string_id!(BlockId);
string_id!(ThemeId);

/// Per-session allocator for map, block and theme ids.
///
/// Ids are drawn from one counter so they are unique across entity kinds and
/// never reused after removal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdCounter {
    next: u64,
}

impl IdCounter {
    fn bump(&mut self) -> u64 {
        self.next += 1;
        self.next
    }

    pub fn map(&mut self) -> MapId {
        MapId(format!("map-{}", self.bump()))
    }

    pub fn block(&mut self) -> BlockId {
        BlockId(format!("blk-{}", self.bump()))
    }

    pub fn theme(&mut self) -> ThemeId {
        ThemeId(format!("thm-{}", self.bump()))
    }

    pub fn issued(&self) -> u64 {
        self.next
    }
}

impl SessionId {
    /// Session ids double as file names, so only a conservative alphabet is accepted.
    pub fn is_path_safe(&self) -> bool {
        !self.0.is_empty()
            && self.0.len() <= 128
            && self
                .0
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    }
}

//! Opaque identifiers.

use std::fmt;

use serde::{Deserialize, Serialize};
use smol_str::SmolStr;

macro_rules! opaque_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(SmolStr);

        impl $name {
            pub fn new(id: impl AsRef<str>) -> Self {
                $name(SmolStr::new(id))
            }

            pub fn from_smol(id: SmolStr) -> Self {
                $name(id)
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
            fn from(s: &str) -> Self {
                $name::new(s)
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(SmolStr::from(s))
            }
        }
    };
}

opaque_id!(
    /// Identifies an intermediary network on the exchange. Ordering is
    /// lexicographic and drives the default tie-break.
    NetworkId
);
opaque_id!(
    /// Identifies an advertiser inside one network's book.
    AdvertiserId
);
opaque_id!(CreativeId);
opaque_id!(RequestId);
opaque_id!(PageId);

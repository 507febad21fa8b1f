use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Three-letter uppercase currency or metal code (`USD`, `EUR`, `XAU`).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CurrencyCode([u8; 3]);

impl CurrencyCode {
    pub fn new(code: &str) -> Result<Self> {
        let bytes = code.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(u8::is_ascii_uppercase) {
            return Err(Error::validation(format!(
                "invalid currency code {code:?}: expected three letters A-Z"
            )));
        }
        Ok(CurrencyCode([bytes[0], bytes[1], bytes[2]]))
    }

    /// Deterministic code for the `index`-th synthetic instrument: AAA, AAB, ..., ZZZ.
    pub fn synthetic(index: usize) -> Self {
        assert!(index < 26 * 26 * 26, "synthetic currency index out of range");
        let letter = |k: usize| b'A' + k as u8;
        CurrencyCode([
            letter(index / (26 * 26)),
            letter((index / 26) % 26),
            letter(index % 26),
        ])
    }

    pub fn as_str(&self) -> &str {
        // Always ASCII uppercase by construction.
        std::str::from_utf8(&self.0).expect("currency code is ASCII")
    }
}

impl FromStr for CurrencyCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CurrencyCode::new(s.trim())
    }
}

impl fmt::Display for CurrencyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CurrencyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl Serialize for CurrencyCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CurrencyCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CurrencyCode::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Shorthand for tests and examples; panics on an invalid code.
pub fn code(s: &str) -> CurrencyCode {
    CurrencyCode::new(s).unwrap_or_else(|e| panic!("{e}"))
}

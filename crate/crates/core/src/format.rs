//! File format versioning shared by every JSON artifact.

use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "1.0";
const SUPPORTED_MAJOR: u32 = 1;

pub fn current() -> String {
    FORMAT_VERSION.to_string()
}

/// Rejects any version whose major component differs from the one this
/// build writes. Minor bumps are accepted.
pub fn check(version: &str) -> Result<()> {
    let major = version
        .split('.')
        .next()
        .and_then(|m| m.trim().parse::<u32>().ok());
    match major {
        Some(SUPPORTED_MAJOR) => Ok(()),
        _ => Err(Error::UnsupportedFormatVersion {
            found: version.to_string(),
            supported: SUPPORTED_MAJOR,
        }),
    }
}

//! Instance builders and experiment drivers.

pub mod builders;
pub mod criteria;
pub mod repro;
pub mod sweep;

use serde::Serialize;

use crate::error::{Error, Result};

/// Rows serialized as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

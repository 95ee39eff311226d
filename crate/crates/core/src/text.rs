//! Plain-text number formatting and CSV helpers shared by the serializers.

use crate::error::{Error, Result};

/// Scientific notation with 17 significant digits, which round-trips every `f64`.
pub fn sig17(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0" surprises in diffs.
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Splits CSV text into rows of fields, checking the header.
pub(crate) fn csv_rows<'a>(text: &'a str, header: &str) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == header => {}
        other => {
            return Err(Error::InvalidParameter {
                name: "csv",
                reason: format!("expected header `{header}`, found {other:?}"),
            })
        }
    }
    let width = header.split(',').count();
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let fields: Vec<&str> = l.trim_end().split(',').collect();
            if fields.len() == width {
                Ok(fields)
            } else {
                Err(Error::InvalidParameter {
                    name: "csv",
                    reason: format!(
                        "row {} has {} fields, expected {width}",
                        i + 2,
                        fields.len()
                    ),
                })
            }
        })
        .collect()
}

pub(crate) fn parse_field<F: std::str::FromStr>(s: &str, name: &'static str) -> Result<F> {
    s.trim().parse().map_err(|_| Error::InvalidParameter {
        name,
        reason: format!("cannot parse `{s}`"),
    })
}

//! Annotation-map files: canonical JSON with sorted keys and a strict reader.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use taj_core::annotate::{Annotation, AnnotationMap};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    start: usize,
    length: usize,
    slot: u32,
}

#[derive(Debug)]
pub enum MapError {
    Json(serde_json::Error),
    Shape(String),
}

impl fmt::Display for MapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapError::Json(e) => write!(f, "malformed map: {e}"),
            MapError::Shape(m) => write!(f, "malformed map: {m}"),
        }
    }
}

impl std::error::Error for MapError {}

/// Canonical JSON text: keys sorted, entries sorted by span, no whitespace.
pub fn to_json(map: &AnnotationMap) -> String {
    let records: BTreeMap<&str, Vec<Record>> = map
        .iter()
        .map(|(sig, anns)| {
            let rows = anns
                .iter()
                .map(|a| Record { start: a.start, length: a.length, slot: a.slot })
                .collect();
            (sig.as_str(), rows)
        })
        .collect();
    serde_json::to_string(&records).expect("annotation maps always serialize")
}

/// Parses a map file, rejecting unknown fields, unsorted entries, and
/// duplicate spans.
pub fn from_json(text: &str) -> Result<AnnotationMap, MapError> {
    let records: BTreeMap<String, Vec<Record>> =
        serde_json::from_str(text).map_err(MapError::Json)?;
    let mut map = AnnotationMap::new();
    for (sig, rows) in records {
        let anns: Vec<Annotation> = rows
            .into_iter()
            .map(|r| Annotation { start: r.start, length: r.length, slot: r.slot })
            .collect();
        if anns.is_empty() {
            return Err(MapError::Shape(format!("`{sig}` has an empty annotation list")));
        }
        for pair in anns.windows(2) {
            if pair[1] <= pair[0] {
                return Err(MapError::Shape(format!(
                    "`{sig}` entries are not sorted and distinct"
                )));
            }
        }
        map.insert(sig, anns);
    }
    Ok(map)
}

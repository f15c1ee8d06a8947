//! Native label text format.
//!
//! One box per line, whitespace separated:
//!
//! ```text
//! # class cx cy cz l w h yaw [instance_id]
//! Car 1 2 0.5 4 2 1.5 0.3 7
//! ```
//!
//! Lines starting with `#` and blank lines are ignored. Yaw is normalized to
//! `(-pi, pi]` on read. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, DataError};
use crate::geometry::{Box7, Point};

/// Ordered class names; a class id is a position in this list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCatalog {
    pub names: Vec<String>,
}

impl Default for ClassCatalog {
    fn default() -> Self {
        Self {
            names: vec!["Car".into(), "Pedestrian".into(), "Cyclist".into()],
        }
    }
}

impl ClassCatalog {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }
}

pub fn parse_scene_labels(
    text: &str,
    catalog: &ClassCatalog,
    origin: &str,
) -> Result<Vec<Box7>, DataError> {
    let mut boxes = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| DataError::Parse {
            origin: origin.to_string(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 && fields.len() != 9 {
            return Err(parse_err(format!(
                "expected 8 or 9 fields, found {}",
                fields.len()
            )));
        }
        let class_id = catalog
            .id(fields[0])
            .ok_or_else(|| DataError::UnknownClass {
                origin: origin.to_string(),
                line: lineno + 1,
                name: fields[0].to_string(),
            })?;
        let mut v = [0.0; 7];
        for (slot, f) in v.iter_mut().zip(&fields[1..8]) {
            *slot = f
                .parse::<f64>()
                .map_err(|e| parse_err(format!("bad number '{f}': {e}")))?;
            if !slot.is_finite() {
                return Err(parse_err(format!("non-finite value '{f}'")));
            }
        }
        let b = Box7::new(
            Point::new(v[0], v[1], v[2]),
            [v[3], v[4], v[5]],
            v[6],
            class_id,
        )
        .map_err(|e| parse_err(e.to_string()))?;
        let b = match fields.get(8) {
            Some(f) => b.with_instance(
                f.parse::<u32>()
                    .map_err(|e| parse_err(format!("bad instance id '{f}': {e}")))?,
            ),
            None => b,
        };
        boxes.push(b);
    }
    Ok(boxes)
}

pub fn format_scene_labels(boxes: &[Box7], catalog: &ClassCatalog) -> String {
    let mut out = String::from("# class cx cy cz l w h yaw instance_id\n");
    for b in boxes {
        let name = catalog.name(b.class_id()).unwrap_or("Unknown");
        let c = b.center();
        let [l, w, h] = b.size();
        let _ = write!(
            out,
            "{name} {} {} {} {l} {w} {h} {}",
            c.x,
            c.y,
            c.z,
            b.yaw()
        );
        if let Some(id) = b.instance_id() {
            let _ = write!(out, " {id}");
        }
        out.push('\n');
    }
    out
}

pub fn read_scene_labels(
    path: impl AsRef<Path>,
    catalog: &ClassCatalog,
) -> Result<Vec<Box7>, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_scene_labels(&text, catalog, &path.display().to_string())
}

pub fn write_scene_labels(
    path: impl AsRef<Path>,
    boxes: &[Box7],
    catalog: &ClassCatalog,
) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::write(path, format_scene_labels(boxes, catalog)).map_err(io_err(path))
}

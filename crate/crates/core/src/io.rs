//! Quiver/attractor file parsing.
//!
//! Format (TOML):
//!
//! ```toml
//! vertices = 2
//! arrows = [[0, 3], [0, 0]]
//!
//! # optional attractor table; omit for the acyclic default
//! [[attractor]]
//! gamma = [1, 1]
//! omega = 2
//! ```

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::dt::{DTTable, DtError, TableKind};
use crate::quiver::{DimVector, Quiver, QuiverError};
use crate::rational::rat;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("vertices = {vertices} but arrow matrix has {rows} rows")]
    VertexCountMismatch { vertices: usize, rows: usize },
    #[error(transparent)]
    Quiver(#[from] QuiverError),
    #[error("bad attractor entry: {0}")]
    Attractor(#[from] DtError),
}

/// Parsed quiver file: the quiver and, when present, an explicit attractor
/// table (absent means the acyclic default applies).
#[derive(Debug, Clone)]
pub struct QuiverFile {
    pub quiver: Quiver,
    pub attractor: Option<DTTable>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    vertices: usize,
    arrows: Vec<Vec<i64>>,
    attractor: Option<Vec<RawAttractor>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttractor {
    gamma: Vec<i64>,
    omega: i64,
}

pub fn parse_quiver_str(input: &str) -> Result<QuiverFile, IoError> {
    let raw: RawFile = toml::from_str(input).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => offset_to_line_col(input, span.start),
            None => (1, 1),
        };
        IoError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    if raw.vertices != raw.arrows.len() {
        return Err(IoError::VertexCountMismatch {
            vertices: raw.vertices,
            rows: raw.arrows.len(),
        });
    }
    let quiver = Quiver::new(raw.arrows)?;
    let attractor = match raw.attractor {
        None => None,
        Some(entries) => {
            let mut table = DTTable::new(TableKind::AttractorOmega);
            for e in entries {
                table.insert(DimVector(e.gamma), rat(e.omega))?;
            }
            Some(table)
        }
    };
    Ok(QuiverFile { quiver, attractor })
}

pub fn load_quiver_file(path: &Path) -> Result<QuiverFile, IoError> {
    let input = std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_quiver_str(&input)
}

fn offset_to_line_col(input: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, c) in input.char_indices() {
        if i >= offset {
            break;
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

//! File formats: flow files (JSON or CSV with a node sidecar) and the
//! ordering JSON emitted and consumed by the CLI.
//!
//! Files use 1-based level indices; the conversion to the library's 0-based
//! levels happens here.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::{FlowLink, FlowNode, GraphError, LayeredGraph, Ordering};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("JSON parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{file}: expected header `{expected}`, got `{got}`")]
    CsvHeader {
        file: &'static str,
        expected: &'static str,
        got: String,
    },
    #[error("{file} line {line}: expected {expected} comma-separated fields, got {got}")]
    CsvShape {
        file: &'static str,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("{file} line {line}: field `{field}`: {message}")]
    CsvField {
        file: &'static str,
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("node `{id}` declares level {level}; file levels are 1-based")]
    BadLevel { id: String, level: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("ordering file misses level {0}")]
    OrderingMissingLevel(usize),
    #[error("ordering file level {level} names unknown vertex `{id}`")]
    OrderingUnknownVertex { level: usize, id: String },
    #[error("ordering file level {level} does not list every vertex exactly once")]
    OrderingIncomplete { level: usize },
}

/// Flow file contents: node declarations with 1-based levels, links, and
/// the cycle flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowFile {
    pub nodes: Vec<FlowFileNode>,
    pub links: Vec<FlowFileLink>,
    #[serde(default)]
    pub cycle: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowFileNode {
    pub id: String,
    pub level: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowFileLink {
    pub source: String,
    pub target: String,
    pub value: f64,
}

impl FlowFile {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    /// CSV form: a `source,target,value` file plus an `id,level` sidecar.
    pub fn from_csv(links_text: &str, nodes_text: &str) -> Result<Self, IoError> {
        let nodes = parse_csv(nodes_text, "nodes csv", "id,level", |line, fields| {
            let level: usize = fields[1].trim().parse().map_err(|_| IoError::CsvField {
                file: "nodes csv",
                line,
                field: "level",
                message: format!("`{}` is not a positive integer", fields[1].trim()),
            })?;
            Ok(FlowFileNode {
                id: fields[0].trim().to_string(),
                level,
            })
        })?;
        let links = parse_csv(
            links_text,
            "links csv",
            "source,target,value",
            |line, fields| {
                let value: f64 = fields[2].trim().parse().map_err(|_| IoError::CsvField {
                    file: "links csv",
                    line,
                    field: "value",
                    message: format!("`{}` is not a number", fields[2].trim()),
                })?;
                Ok(FlowFileLink {
                    source: fields[0].trim().to_string(),
                    target: fields[1].trim().to_string(),
                    value,
                })
            },
        )?;
        Ok(FlowFile {
            nodes,
            links,
            cycle: false,
        })
    }

    /// Ingest into a layered graph. The effective cycle flag is the file's
    /// flag OR-ed with the caller's.
    pub fn into_graph<S: Scalar>(&self, cycle: bool) -> Result<LayeredGraph<S>, IoError> {
        let nodes: Vec<FlowNode> = self
            .nodes
            .iter()
            .map(|n| {
                if n.level == 0 {
                    Err(IoError::BadLevel {
                        id: n.id.clone(),
                        level: n.level,
                    })
                } else {
                    Ok(FlowNode {
                        id: n.id.clone(),
                        level: n.level - 1,
                    })
                }
            })
            .collect::<Result<_, _>>()?;
        let links: Vec<FlowLink> = self
            .links
            .iter()
            .map(|l| FlowLink {
                source: l.source.clone(),
                target: l.target.clone(),
                value: l.value,
            })
            .collect();
        Ok(LayeredGraph::ingest(&nodes, &links, cycle || self.cycle)?)
    }
}

fn parse_csv<T>(
    text: &str,
    file: &'static str,
    header: &'static str,
    mut row: impl FnMut(usize, &[&str]) -> Result<T, IoError>,
) -> Result<Vec<T>, IoError> {
    let expected = header.split(',').count();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == header => {}
        other => {
            return Err(IoError::CsvHeader {
                file,
                expected: header,
                got: other.map(|(_, l)| l.trim().to_string()).unwrap_or_default(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            return Err(IoError::CsvShape {
                file,
                line: idx + 1,
                expected,
                got: fields.len(),
            });
        }
        out.push(row(idx + 1, &fields)?);
    }
    Ok(out)
}

/// Ordering as JSON: `{"1": ["a", "b", ...], ...}`, one key per 1-based
/// level, vertex ids top to bottom (dummies included).
pub fn ordering_to_json<S: Scalar>(g: &LayeredGraph<S>, ordering: &Ordering) -> Value {
    let mut map = serde_json::Map::new();
    for level in 0..g.level_count() {
        let ids: Vec<Value> = ordering
            .level(level)
            .iter()
            .map(|&idx| json!(g.vertex(level, idx).name))
            .collect();
        map.insert((level + 1).to_string(), Value::Array(ids));
    }
    Value::Object(map)
}

/// Parse an ordering JSON against a graph, requiring every level to list
/// every vertex exactly once.
pub fn ordering_from_json<S: Scalar>(
    g: &LayeredGraph<S>,
    text: &str,
) -> Result<Ordering, IoError> {
    let parsed: HashMap<String, Vec<String>> = serde_json::from_str(text)?;
    let mut per_level = Vec::with_capacity(g.level_count());
    for level in 0..g.level_count() {
        let key = (level + 1).to_string();
        let names = parsed
            .get(&key)
            .ok_or(IoError::OrderingMissingLevel(level + 1))?;
        let lookup: HashMap<&str, usize> = g
            .level_vertices(level)
            .iter()
            .enumerate()
            .map(|(idx, v)| (v.name.as_str(), idx))
            .collect();
        let mut perm = Vec::with_capacity(names.len());
        let mut seen = vec![false; g.level_size(level)];
        for name in names {
            let &idx = lookup
                .get(name.as_str())
                .ok_or_else(|| IoError::OrderingUnknownVertex {
                    level: level + 1,
                    id: name.clone(),
                })?;
            if seen[idx] {
                return Err(IoError::OrderingIncomplete { level: level + 1 });
            }
            seen[idx] = true;
            perm.push(idx);
        }
        if perm.len() != g.level_size(level) {
            return Err(IoError::OrderingIncomplete { level: level + 1 });
        }
        per_level.push(perm);
    }
    Ok(Ordering::new(per_level))
}

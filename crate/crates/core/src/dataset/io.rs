//! Text formats: edge lists, node-id maps and feature matrices.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::NodePair;

/// Edges with string tokens mapped to dense ids in first-seen order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeList {
    pub num_nodes: usize,
    pub edges: Vec<NodePair>,
    /// `names[id]` is the original token of node `id`.
    pub names: Vec<String>,
}

impl EdgeList {
    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a whitespace-separated edge list. Blank lines and lines starting
/// with `#` are skipped.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<EdgeList> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut names = Vec::new();
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected two node tokens, found {}", tokens.len()),
            ));
        }
        let mut id = |tok: &str| -> usize {
            if let Some(&i) = ids.get(tok) {
                return i;
            }
            let i = names.len();
            ids.insert(tok.to_string(), i);
            names.push(tok.to_string());
            i
        };
        let a = id(tokens[0]);
        let b = id(tokens[1]);
        let pair = NodePair::new(a, b)
            .map_err(|_| parse_err(path, lineno, format!("self-loop on node {}", tokens[0])))?;
        edges.push(pair);
    }
    Ok(EdgeList {
        num_nodes: names.len(),
        edges,
        names,
    })
}

/// Writes `id<TAB>name` lines.
pub fn write_node_map(path: impl AsRef<Path>, names: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for (i, n) in names.iter().enumerate() {
        writeln!(w, "{i}\t{n}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_edge_list(path: impl AsRef<Path>, edges: &[NodePair]) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for p in edges {
        writeln!(w, "{} {}", p.u(), p.v()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a comma-separated dense feature matrix, one row per node id.
pub fn load_features(path: impl AsRef<Path>, num_nodes: usize) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(num_nodes);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, lineno + 1, e.to_string()))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("row has {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.len() != num_nodes {
        return Err(Error::Shape(format!(
            "{}: {} feature rows for {num_nodes} nodes",
            path.display(),
            rows.len()
        )));
    }
    let dim = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((num_nodes, dim), flat).map_err(|e| Error::Shape(e.to_string()))
}

pub fn write_features(path: impl AsRef<Path>, features: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for row in features.rows() {
        let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a LINQS-style content file (`<node> <f_1> ... <f_d> <class>`) and
/// orders its rows by the ids of `edges`. Returns the features and the class
/// label of every node.
pub fn load_linqs_content(
    path: impl AsRef<Path>,
    edges: &EdgeList,
) -> Result<(Array2<f64>, Vec<String>)> {
    let path = path.as_ref();
    let reader = open(path)?;
    let index = edges.index();
    let mut rows: Vec<Option<(Vec<f64>, String)>> = vec![None; edges.num_nodes];
    let mut dim = None;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < 3 {
            return Err(parse_err(path, lineno, "expected id, features and class"));
        }
        let feats = tokens[1..tokens.len() - 1]
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, lineno, e.to_string()))?;
        if *dim.get_or_insert(feats.len()) != feats.len() {
            return Err(parse_err(path, lineno, "inconsistent feature width"));
        }
        if let Some(&id) = index.get(tokens[0]) {
            rows[id] = Some((feats, tokens[tokens.len() - 1].to_string()));
        }
    }
    let dim = dim.unwrap_or(0);
    let mut out = Array2::zeros((edges.num_nodes, dim));
    let mut classes = Vec::with_capacity(edges.num_nodes);
    for (id, row) in rows.into_iter().enumerate() {
        let (feats, class) = row.ok_or_else(|| {
            Error::InvalidInput(format!("node {} has no content row", edges.names[id]))
        })?;
        out.row_mut(id).assign(&ndarray::ArrayView1::from(&feats));
        classes.push(class);
    }
    Ok((out, classes))
}

/// One-hot identity-like features of width `min(n, 1433)`; node `v` sets
/// column `v mod width`.
pub fn one_hot_features(num_nodes: usize) -> Array2<f64> {
    let dim = num_nodes.clamp(1, 1433);
    let mut x = Array2::zeros((num_nodes, dim));
    for v in 0..num_nodes {
        x[[v, v % dim]] = 1.0;
    }
    x
}

/// Scales every non-zero row to unit sum.
pub fn row_normalize(features: &mut Array2<f64>) {
    for mut row in features.rows_mut() {
        let sum = row.sum();
        if sum != 0.0 {
            row /= sum;
        }
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex_string(&hasher.finalize()))
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

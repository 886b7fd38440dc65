//! Versioned little-endian binary container of named f64 tensors.
//!
//! Layout:
//!
//! ```text
//! magic    8 bytes  "LTLPCKPT"
//! version  u32
//! count    u32
//! count x { name_len u32, name utf-8, ndim u32, dims u64 x ndim, data f64 x prod(dims) }
//! digest   32 bytes SHA-256 of every preceding byte
//! ```
//!
//! Readers load and verify the whole file before building any value, so a
//! failed load never yields partial state.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::encoder::ModelParams;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodePair};
use crate::trainer::SnapshotSet;

pub const MAGIC: &[u8; 8] = b"LTLPCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!(
                "tensor {name}: shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        Ok(Tensor { name, shape, data })
    }

    pub fn scalar(name: impl Into<String>, value: f64) -> Tensor {
        Tensor {
            name: name.into(),
            shape: vec![1],
            data: vec![value],
        }
    }
}

pub fn encode(tensors: &[Tensor]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        buf.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(t.name.as_bytes());
        buf.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in &t.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Corrupt(format!("unexpected end of data at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Tensor>> {
    if bytes.len() < MAGIC.len() + 8 + 32 {
        return Err(Error::Corrupt(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Corrupt("bad magic header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Corrupt("digest mismatch (truncated or modified file)".into()));
    }

    let mut cur = Cursor { bytes: body, pos: 12 };
    let count = cur.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::Corrupt("tensor name is not utf-8".into()))?
            .to_string();
        let ndim = cur.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(16));
        for _ in 0..ndim {
            shape.push(cur.u64()? as usize);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Corrupt(format!("tensor {name}: shape overflow")))?;
        let raw = cur.take(len.checked_mul(8).ok_or_else(|| Error::Corrupt("size overflow".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(Tensor { name, shape, data });
    }
    if cur.pos != body.len() {
        return Err(Error::Corrupt("trailing bytes after last tensor".into()));
    }
    Ok(tensors)
}

pub fn write_tensors(path: impl AsRef<Path>, tensors: &[Tensor]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(tensors)).map_err(|e| Error::io(path, e))
}

pub fn read_tensors(path: impl AsRef<Path>) -> Result<Vec<Tensor>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(crate) fn find<'a>(tensors: &'a [Tensor], name: &str) -> Result<&'a Tensor> {
    tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::Corrupt(format!("missing tensor {name}")))
}

pub fn graph_to_tensors(g: &Graph) -> Vec<Tensor> {
    let edges: Vec<f64> = g
        .edges()
        .flat_map(|p| [p.u() as f64, p.v() as f64])
        .collect();
    vec![
        Tensor::scalar("graph.num_nodes", g.num_nodes() as f64),
        Tensor {
            name: "graph.edges".into(),
            shape: vec![g.num_edges(), 2],
            data: edges,
        },
    ]
}

pub fn graph_from_tensors(tensors: &[Tensor]) -> Result<Graph> {
    let n = find(tensors, "graph.num_nodes")?.data[0];
    let edges = find(tensors, "graph.edges")?;
    if n < 0.0 || n.fract() != 0.0 || edges.shape.len() != 2 || edges.shape[1] != 2 {
        return Err(Error::Corrupt("malformed graph tensors".into()));
    }
    let pairs = edges
        .data
        .chunks_exact(2)
        .map(|c| NodePair::new(c[0] as usize, c[1] as usize))
        .collect::<Result<Vec<_>>>()?;
    Graph::build(n as usize, &pairs)
}

pub fn save_graph(path: impl AsRef<Path>, g: &Graph) -> Result<()> {
    write_tensors(path, &graph_to_tensors(g))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    graph_from_tensors(&read_tensors(path)?)
}

pub fn save_params(path: impl AsRef<Path>, params: &ModelParams) -> Result<()> {
    write_tensors(path, &params.to_tensors(""))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    ModelParams::from_tensors(&read_tensors(path)?, "")
}

pub fn save_snapshots(path: impl AsRef<Path>, snaps: &SnapshotSet) -> Result<()> {
    let mut tensors = vec![Tensor {
        name: "snapshots.epochs".into(),
        shape: vec![snaps.epochs().len()],
        data: snaps.epochs().iter().map(|&e| e as f64).collect(),
    }];
    for (i, p) in snaps.params().iter().enumerate() {
        tensors.extend(p.to_tensors(&format!("snap{i}.")));
    }
    write_tensors(path, &tensors)
}

pub fn load_snapshots(path: impl AsRef<Path>) -> Result<SnapshotSet> {
    let tensors = read_tensors(path)?;
    let epochs: Vec<usize> = find(&tensors, "snapshots.epochs")?
        .data
        .iter()
        .map(|&e| e as usize)
        .collect();
    let params = (0..epochs.len())
        .map(|i| ModelParams::from_tensors(&tensors, &format!("snap{i}.")))
        .collect::<Result<Vec<_>>>()?;
    SnapshotSet::new(epochs, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{Decoder, EncoderConfig};

    #[test]
    fn params_roundtrip_bit_exact() {
        let cfg = EncoderConfig { layers: 3, hidden: 8, decoder: Decoder::HadamardLinear, init_seed: 4 };
        let mut p = ModelParams::init(&cfg, 5);
        p.decoder_bias = -0.123456789;
        p.centers[[1, 3]] = std::f64::consts::PI;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        save_params(&path, &p).unwrap();
        let q = load_params(&path).unwrap();
        assert_eq!(p, q);
        for (a, b) in p.layers.iter().zip(&q.layers) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn graph_roundtrip() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (4, 5), (0, 5)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.bin");
        save_graph(&path, &g).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
    }

    #[test]
    fn truncated_and_tampered_files_fail_cleanly() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let bytes = encode(&graph_to_tensors(&g));
        for cut in [0, 5, 12, 20, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(Error::Corrupt(_))), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[30] ^= 0x40;
        assert!(matches!(decode(&flipped), Err(Error::Corrupt(_))));

        let mut wrong_version = bytes.clone();
        wrong_version[8] = 9;
        assert!(matches!(
            decode(&wrong_version),
            Err(Error::VersionMismatch { found: 9, expected: 1 })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn container_roundtrip(
                tensors in proptest::collection::vec(
                    ("[a-z.]{0,12}", proptest::collection::vec(any::<f64>(), 0..20)),
                    0..5,
                )
            ) {
                let ts: Vec<Tensor> = tensors
                    .into_iter()
                    .map(|(name, data)| Tensor { name, shape: vec![data.len()], data })
                    .collect();
                let back = decode(&encode(&ts)).unwrap();
                prop_assert_eq!(back.len(), ts.len());
                for (a, b) in ts.iter().zip(&back) {
                    prop_assert_eq!(&a.name, &b.name);
                    prop_assert_eq!(&a.shape, &b.shape);
                    prop_assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
                }
            }
        }
    }
}

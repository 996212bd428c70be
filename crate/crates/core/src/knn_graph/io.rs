//! Binary graph format, all integers and floats little-endian:
//!
//! ```text
//! "KNNG" | version: u16 | k: u32 | node count: u64 | dimension: u32
//! per node: id: u64 | coords: dimension × f64 | min(k, count-1) × (id: u64, distance: f64)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GraphNode, KnnGraph, Neighbor};
use crate::{Error, Result, StatePoint};

const MAGIC: &[u8; 4] = b"KNNG";
const VERSION: u16 = 1;

impl KnnGraph {
    pub fn save(&self) -> Vec<u8> {
        let dim = self.dim.unwrap_or(0);
        let per_node = 8 + 8 * dim + 16 * self.k;
        let mut out = Vec::with_capacity(22 + per_node * self.nodes.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.nodes.len() as u64).to_le_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        for node in &self.nodes {
            out.extend_from_slice(&(node.id as u64).to_le_bytes());
            for x in node.point.coords() {
                out.extend_from_slice(&x.to_le_bytes());
            }
            for e in &node.edges {
                out.extend_from_slice(&(e.id as u64).to_le_bytes());
                out.extend_from_slice(&e.distance.to_le_bytes());
            }
        }
        out
    }

    /// Parses a stream written by [`save`](Self::save). The search RNG of the
    /// loaded graph is seeded with `seed`.
    pub fn load(bytes: &[u8], seed: u64) -> Result<KnnGraph> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(r.error(0, "bad magic, expected \"KNNG\""));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(r.error(4, format!("unsupported version {version}")));
        }
        let k = r.u32()? as usize;
        if k == 0 {
            return Err(r.error(6, "k must be >= 1"));
        }
        let count = r.u64()? as usize;
        let dim = r.u32()? as usize;
        let edges_per_node = k.min(count.saturating_sub(1));

        let mut nodes = Vec::with_capacity(count.min(bytes.len() / 8));
        for expected in 0..count {
            let at = r.pos;
            let id = r.u64()? as usize;
            if id != expected {
                return Err(r.error(at, format!("node id {id} out of order, expected {expected}")));
            }
            let coords = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let mut edges = Vec::with_capacity(edges_per_node);
            for _ in 0..edges_per_node {
                let at = r.pos;
                let nid = r.u64()? as usize;
                if nid >= count || nid == id {
                    return Err(r.error(at, format!("invalid edge target {nid} on node {id}")));
                }
                edges.push(Neighbor {
                    id: nid,
                    distance: r.f64()?,
                });
            }
            nodes.push(GraphNode {
                id,
                point: StatePoint::new(coords),
                edges,
            });
        }
        if r.pos != bytes.len() {
            return Err(r.error(r.pos, "trailing bytes after last node"));
        }
        Ok(KnnGraph {
            k,
            dim: (count > 0).then_some(dim),
            nodes,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::GraphFormat {
            offset,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(self.error(self.pos, format!("unexpected end of stream, needed {n} bytes")));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

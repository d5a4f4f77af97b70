//! JSON graph container.
//!
//! Adjacency rows are packed to `ceil(n / 8)` bytes, most significant bit
//! first, and the whole matrix is base64 encoded with padding.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::check_dim;
use crate::latent::{Graph, LatentChain};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    n: usize,
    d: usize,
    zeta: f64,
    adjacency: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// A graph with its dimension and, for simulated graphs, the latent points.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphContainer {
    pub graph: Graph,
    pub dim: usize,
    /// Row-major `n x d` latent positions.
    pub points: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

pub fn encode_adjacency(g: &Graph) -> String {
    let n = g.n();
    let stride = n.div_ceil(8);
    let mut bytes = vec![0u8; n * stride];
    for i in 0..n {
        for (j, &v) in g.row(i).iter().enumerate() {
            if v != 0 {
                bytes[i * stride + j / 8] |= 0x80 >> (j % 8);
            }
        }
    }
    STANDARD.encode(bytes)
}

/// Unpacks an encoded adjacency into one byte per entry.
pub fn decode_adjacency(n: usize, encoded: &str) -> Result<Vec<u8>> {
    let bytes = STANDARD.decode(encoded).map_err(|e| Error::Format(format!("adjacency: {e}")))?;
    let stride = n.div_ceil(8);
    if bytes.len() != n * stride {
        return Err(Error::Format(format!(
            "adjacency holds {} bytes, expected {} for n = {n}",
            bytes.len(),
            n * stride
        )));
    }
    let mut out = vec![0u8; n * n];
    for i in 0..n {
        let row = &bytes[i * stride..(i + 1) * stride];
        for j in 0..stride * 8 {
            let bit = row[j / 8] & (0x80 >> (j % 8)) != 0;
            if j >= n {
                if bit {
                    return Err(Error::Format(format!("padding bit set in row {i}")));
                }
            } else {
                out[i * n + j] = bit as u8;
            }
        }
    }
    Ok(out)
}

impl GraphContainer {
    pub fn new(graph: Graph, dim: usize) -> Self {
        GraphContainer { graph, dim, points: None, seed: None }
    }

    pub fn from_chain(graph: Graph, chain: &LatentChain) -> Self {
        GraphContainer {
            graph,
            dim: chain.dim(),
            points: Some(chain.points().to_vec()),
            seed: Some(chain.seed()),
        }
    }

    /// Latent chain rebuilt from the stored points, if any.
    pub fn chain(&self) -> Result<Option<LatentChain>> {
        self.points
            .as_ref()
            .map(|p| LatentChain::from_points(p.clone(), self.dim, self.seed.unwrap_or(0)))
            .transpose()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = GraphFile {
            n: self.graph.n(),
            d: self.dim,
            zeta: self.graph.zeta(),
            adjacency: encode_adjacency(&self.graph),
            points: self.points.clone(),
            seed: self.seed,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(s)?;
        check_dim(file.d)?;
        let adjacency = decode_adjacency(file.n, &file.adjacency)?;
        let graph = Graph::from_adjacency(file.n, adjacency, file.zeta)?;
        if let Some(p) = &file.points {
            if p.len() != file.n * file.d {
                return Err(Error::Format(format!("{} coordinates for {} points of dimension {}", p.len(), file.n, file.d)));
            }
            LatentChain::from_points(p.clone(), file.d, file.seed.unwrap_or(0))?;
        }
        Ok(GraphContainer { graph, dim: file.d, points: file.points, seed: file.seed })
    }
}

//! Versioned binary checkpoint container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "PIDRCKPT"
//! 8       4     format version, u32 little-endian (currently 1)
//! 12      4     header length H in bytes, u32 little-endian
//! 16      H     UTF-8 JSON header (see `Header`)
//! 16+H    ...   every tensor listed in the header, in order, as
//!               little-endian IEEE-754 f64
//! ```
//!
//! The header records the variant, layer widths, loss weights, the layout
//! the network was built for, the training episode counter, and the name and
//! shape of every tensor. Values round-trip bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{AgentNetwork, NetworkDims, VariantParams};
use super::variant::AgentVariant;
use crate::env::{GridLayout, LayoutConfig};
use crate::error::{Error, Result};
use crate::nn::Parameterized;

pub const MAGIC: &[u8; 8] = b"PIDRCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    variant: AgentVariant,
    dims: NetworkDims,
    params: VariantParams,
    layout: LayoutConfig,
    episode: usize,
    tensors: Vec<TensorEntry>,
}

/// A network restored from disk together with its context.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub network: AgentNetwork,
    pub layout: LayoutConfig,
    pub episode: usize,
}

pub fn encode_checkpoint(net: &AgentNetwork, layout: &LayoutConfig, episode: usize) -> Result<Vec<u8>> {
    let params = net.params();
    let header = Header {
        variant: net.variant,
        dims: net.dims,
        params: net.params,
        layout: layout.clone(),
        episode,
        tensors: params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                shape: p.shape.clone(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let payload: usize = params.iter().map(|p| p.len() * 8).sum();
    let mut out = Vec::with_capacity(16 + header.len() + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for p in params {
        for v in &p.value {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |msg: String| Error::Checkpoint(msg);
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let header_end = 16 + header_len;
    if bytes.len() < header_end {
        return Err(bad("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[16..header_end])?;
    let layout = GridLayout::build(&header.layout)?;
    let mut network = AgentNetwork::build(header.variant, &layout, header.dims, header.params, 0)?;
    let mut params = network.params_mut();
    if params.len() != header.tensors.len() {
        return Err(bad(format!(
            "header lists {} tensors, the architecture has {}",
            header.tensors.len(),
            params.len()
        )));
    }
    let mut cursor = header_end;
    for (p, entry) in params.iter_mut().zip(&header.tensors) {
        if p.name != entry.name || p.shape != entry.shape {
            return Err(bad(format!(
                "tensor {} {:?} does not match architecture tensor {} {:?}",
                entry.name, entry.shape, p.name, p.shape
            )));
        }
        let end = cursor + p.len() * 8;
        if bytes.len() < end {
            return Err(bad(format!("truncated payload in tensor {}", entry.name)));
        }
        for (v, chunk) in p.value.iter_mut().zip(bytes[cursor..end].chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        cursor = end;
    }
    if cursor != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - cursor)));
    }
    Ok(Checkpoint {
        network,
        layout: header.layout,
        episode: header.episode,
    })
}

pub fn save_checkpoint(path: &Path, net: &AgentNetwork, layout: &LayoutConfig, episode: usize) -> Result<()> {
    let bytes = encode_checkpoint(net, layout, episode)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

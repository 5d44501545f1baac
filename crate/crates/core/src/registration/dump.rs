//! Binary flow dump: `SWFL`, u32 width, u32 height, then `du` and `dv` as
//! little-endian f32, row-major.

use std::path::Path;

use super::FlowField;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SWFL";

pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * flow.du.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(flow.width as u32).to_le_bytes());
    out.extend_from_slice(&(flow.height as u32).to_le_bytes());
    for v in flow.du.iter().chain(flow.dv.iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_flow(bytes: &[u8]) -> Result<FlowField> {
    let bad = |m: &str| Error::InvalidImage(format!("flow dump: {m}"));
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("missing SWFL header"));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n = width * height;
    if bytes.len() != 12 + 8 * n {
        return Err(bad("payload length does not match header"));
    }
    let floats: Vec<f32> = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let (du, dv) = floats.split_at(n);
    FlowField::new(width, height, du.to_vec(), dv.to_vec())
}

pub fn write_flow(path: &Path, flow: &FlowField) -> Result<()> {
    std::fs::write(path, encode_flow(flow)).map_err(|e| Error::io(path, e))
}

pub fn read_flow(path: &Path) -> Result<FlowField> {
    decode_flow(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

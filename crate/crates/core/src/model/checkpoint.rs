//! Binary weight checkpoints.
//!
//! Layout (all little-endian): magic `PVW1`, `u32` layer count, then
//! `u32 inputs, u32 outputs` per layer, then for each layer its weights
//! (row-major, `f64`) followed by its bias (`f64`).

use super::network::{Dense, Network};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PVW1";

pub fn encode(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for l in &net.layers {
        out.extend_from_slice(&(l.inputs as u32).to_le_bytes());
        out.extend_from_slice(&(l.outputs as u32).to_le_bytes());
    }
    for l in &net.layers {
        for v in l.weights.iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("size overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let n_layers = r.u32()?;
    if n_layers == 0 {
        return Err(Error::Checkpoint("no layers".into()));
    }
    let mut dims = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        dims.push((r.u32()?, r.u32()?));
    }
    if dims.windows(2).any(|w| w[0].1 != w[1].0) || dims.last().unwrap().1 != 1 {
        return Err(Error::Checkpoint("inconsistent layer dimensions".into()));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for (inputs, outputs) in dims {
        let weights = r.f64s(inputs * outputs)?;
        let bias = r.f64s(outputs)?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(Network { layers })
}

//! IIDC checkpoint files.
//!
//! Layout, little-endian:
//!
//! ```text
//! "IIDC" | version u32 | n_params u32
//! per param: name_len u32 | name bytes | ndim u32 | dims u32 × ndim | f32 data
//! has_optimizer u32
//! if set: step u64 | per param: m f32 data | v f32 data
//! ```

use std::fs;
use std::path::Path;

use super::adam::Adam;
use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"IIDC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: Vec<(String, Tensor)>,
    pub optimizer: Option<OptimizerState>,
}

impl Checkpoint {
    pub fn from_network(net: &Network, opt: Option<&Adam>) -> Self {
        let params = net.params().iter().map(|p| (p.name.clone(), p.value.clone())).collect();
        let optimizer = opt.filter(|o| o.steps() > 0).map(|o| {
            let (m, v) = o.moments();
            OptimizerState {
                step: o.steps(),
                m: m.to_vec(),
                v: v.to_vec(),
            }
        });
        Self { params, optimizer }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let u32le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
        let floats = |out: &mut Vec<u8>, d: &[f32]| d.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        out.extend_from_slice(CHECKPOINT_MAGIC);
        u32le(&mut out, CHECKPOINT_VERSION as usize);
        u32le(&mut out, self.params.len());
        for (name, t) in &self.params {
            u32le(&mut out, name.len());
            out.extend_from_slice(name.as_bytes());
            u32le(&mut out, 4);
            t.shape().iter().for_each(|&d| u32le(&mut out, d));
            floats(&mut out, t.data());
        }
        match &self.optimizer {
            None => u32le(&mut out, 0),
            Some(o) => {
                u32le(&mut out, 1);
                out.extend_from_slice(&o.step.to_le_bytes());
                for (m, v) in o.m.iter().zip(&o.v) {
                    floats(&mut out, m);
                    floats(&mut out, v);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err("bad magic, not an IIDC checkpoint".into());
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let n = r.u32()? as usize;
        let mut params = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| "parameter name is not UTF-8")?;
            let ndim = r.u32()? as usize;
            if ndim == 0 || ndim > 4 {
                return Err(format!("parameter `{name}` has {ndim} dimensions"));
            }
            let mut shape = [1usize; 4];
            for i in 0..ndim {
                shape[4 - ndim + i] = r.u32()? as usize;
            }
            let count = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or("parameter size overflows")?;
            let data = r.floats(count)?;
            params.push((name, Tensor::from_vec(shape, data).map_err(|e| e.to_string())?));
        }
        let optimizer = match r.u32()? {
            0 => None,
            1 => {
                let step = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
                let mut m = Vec::with_capacity(params.len());
                let mut v = Vec::with_capacity(params.len());
                for (_, t) in &params {
                    m.push(r.floats(t.len())?);
                    v.push(r.floats(t.len())?);
                }
                Some(OptimizerState { step, m, v })
            }
            f => return Err(format!("bad optimizer flag {f}")),
        };
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(Self { params, optimizer })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|reason| Error::format(path, reason))
    }

    /// Copies the parameters into `net`, checking names and shapes.
    pub fn apply(&self, net: &mut Network) -> Result<()> {
        net.set_params(self.params.clone())
    }

    /// Restores optimizer moments into `opt`, if present.
    pub fn apply_optimizer(&self, opt: &mut Adam) {
        if let Some(o) = &self.optimizer {
            opt.restore(o.step, o.m.clone(), o.v.clone());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or("truncated checkpoint")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn floats(&mut self, n: usize) -> std::result::Result<Vec<f32>, String> {
        let bytes = self.take(n.checked_mul(4).ok_or("parameter size overflows")?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic   "DGRC1"
//! version u8 (= 1)
//! count   u64                      number of named entries
//! entry*  name_len u64, name bytes (UTF-8),
//!         rank u64, dims u64 × rank,
//!         data f32 × prod(dims)    row-major
//! step    u64                      optimizer step counter (0 without optimizer state)
//! ```
//!
//! Optimizer moments are stored as ordinary entries named `<param>/m` and
//! `<param>/v`, following the parameters they belong to.

use std::io::{self, Read, Write};

use super::adam::{Adam, AdamConfig};
use super::params::ParamStore;
use super::{Real, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"DGRC1";
const VERSION: u8 = 1;

/// Decoded checkpoint contents.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub params: ParamStore<f32>,
    /// Moments `(m, v)` aligned with `params`, if the file carried them.
    pub moments: Option<(Vec<Tensor<f32>>, Vec<Tensor<f32>>)>,
    pub step: u64,
}

impl Checkpoint {
    pub fn params_as<T: Real>(&self) -> ParamStore<T> {
        self.params.cast()
    }

    pub fn adam_as<T: Real>(&self, config: AdamConfig) -> Option<Adam<T>> {
        self.moments.as_ref().map(|(m, v)| {
            Adam::from_state(
                config,
                m.iter().map(Tensor::cast).collect(),
                v.iter().map(Tensor::cast).collect(),
                self.step,
            )
        })
    }
}

pub fn write_checkpoint<T: Real, W: Write>(
    mut w: W,
    params: &ParamStore<T>,
    adam: Option<&Adam<T>>,
) -> io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&[VERSION])?;
    let count = params.len() * if adam.is_some() { 3 } else { 1 };
    w.write_all(&(count as u64).to_le_bytes())?;
    for (_, name, value) in params.iter() {
        write_entry(&mut w, name, value)?;
    }
    if let Some(adam) = adam {
        let (m, v) = adam.moments();
        for (id, name, _) in params.iter() {
            write_entry(&mut w, &format!("{name}/m"), &m[id.index()])?;
            write_entry(&mut w, &format!("{name}/v"), &v[id.index()])?;
        }
    }
    let step = adam.map_or(0, Adam::step_count);
    w.write_all(&step.to_le_bytes())?;
    w.flush()
}

fn write_entry<T: Real, W: Write>(w: &mut W, name: &str, t: &Tensor<T>) -> io::Result<()> {
    w.write_all(&(name.len() as u64).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(t.rank() as u64).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.numel() * 4);
    for &x in t.data() {
        buf.extend_from_slice(&(x.f64() as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> io::Result<Checkpoint> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(invalid("not a checkpoint (bad magic)"));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != VERSION {
        return Err(invalid(format!("unsupported checkpoint version {}", version[0])));
    }
    let count = read_u64(&mut r)?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let len = read_u64(&mut r)? as usize;
        if len > 1 << 16 {
            return Err(invalid("parameter name too long"));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| invalid("parameter name is not UTF-8"))?;
        let rank = read_u64(&mut r)? as usize;
        if rank > 8 {
            return Err(invalid(format!("implausible rank {rank} for {name}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut r)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        entries.push((name, Tensor::new(shape, data).map_err(|e| invalid(e.to_string()))?));
    }
    let step = read_u64(&mut r)?;

    let mut params = ParamStore::new();
    let mut m = Vec::new();
    let mut v = Vec::new();
    for (name, t) in entries {
        if let Some(base) = name.strip_suffix("/m") {
            check_moment(&params, base, &t)?;
            m.push(t);
        } else if let Some(base) = name.strip_suffix("/v") {
            check_moment(&params, base, &t)?;
            v.push(t);
        } else {
            params.add(name, t);
        }
    }
    let moments = match (m.len(), v.len()) {
        (0, 0) => None,
        (a, b) if a == params.len() && b == params.len() => Some((m, v)),
        _ => return Err(invalid("incomplete optimizer state")),
    };
    Ok(Checkpoint {
        params,
        moments,
        step,
    })
}

fn check_moment(params: &ParamStore<f32>, base: &str, t: &Tensor<f32>) -> io::Result<()> {
    let id = params
        .id(base)
        .ok_or_else(|| invalid(format!("optimizer state for unknown parameter {base}")))?;
    if params.get(id).shape() != t.shape() {
        return Err(invalid(format!("optimizer state shape mismatch for {base}")));
    }
    Ok(())
}

//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! "BWCK" | format version u32 | kind tag u8 | ip flag u8 | tensor count u32
//! per tensor: name length u16 | UTF-8 name | rank u8 | dims u32 * rank | f32 data
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{ModelConfig, ModelKind, ModelParameters};
use crate::autodiff::{ParamStore, Real, Tensor};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BWCK";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_checkpoint<T: Real, W: Write>(model: &ModelParameters<T>, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[model.kind().tag(), model.ip() as u8])?;
    let params = model.params();
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, t) in params.iter() {
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&[t.rank() as u8])?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.numel() * 4);
        for &x in t.data() {
            buf.extend_from_slice(&x.as_f32().to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()
}

pub fn checkpoint_bytes<T: Real>(model: &ModelParameters<T>) -> Vec<u8> {
    let mut out = Vec::new();
    write_checkpoint(model, &mut out).expect("in-memory write");
    out
}

pub fn save_checkpoint<T: Real>(model: &ModelParameters<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(model, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

struct Cursor<R> {
    r: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r
            .read_exact(&mut b)
            .map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
}

pub fn read_checkpoint<T: Real, R: Read>(r: R) -> Result<ModelParameters<T>> {
    let mut c = Cursor { r };
    if &c.bytes::<4>()? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let tag = c.u8()?;
    let kind = ModelKind::from_tag(tag).ok_or_else(|| Error::Checkpoint(format!("unknown model kind tag {tag}")))?;
    let ip = match c.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Checkpoint(format!("bad ip flag {other}"))),
    };
    let count = c.u32()? as usize;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let len = c.u16()? as usize;
        let mut name = vec![0u8; len];
        c.r.read_exact(&mut name)
            .map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let rank = c.u8()? as usize;
        let shape = (0..rank).map(|_| c.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 4];
        c.r.read_exact(&mut raw)
            .map_err(|e| Error::Checkpoint(format!("truncated tensor {name}: {e}")))?;
        let data = raw
            .chunks_exact(4)
            .map(|b| T::from_f32(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        if params.get(&name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
        }
        params.insert(name, Tensor::new(shape, data)?);
    }
    let mut trailing = [0u8; 1];
    if c.r.read(&mut trailing).map_err(|e| Error::Checkpoint(e.to_string()))? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let config = infer_config(kind, ip, &params)?;
    ModelParameters::from_parts(config, params)
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<ModelParameters<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}

/// Recovers dimensions from tensor shapes; full validation happens in
/// [`ModelParameters::from_parts`].
fn infer_config<T: Real>(kind: ModelKind, ip: bool, p: &ParamStore<T>) -> Result<ModelConfig> {
    let dim = |name: &str, axis: usize| -> Result<usize> {
        p.get(name)
            .and_then(|t| t.shape().get(axis).copied())
            .ok_or_else(|| Error::Checkpoint(format!("missing or malformed tensor {name}")))
    };
    let mut c = ModelConfig::new(kind, dim("embedding", 0)?);
    c.ip = ip;
    c.d_emb = dim("embedding", 1)?;
    match kind {
        ModelKind::Rde => c.d_word = dim("head.gru.u_z", 0)?,
        ModelKind::Cde => c.conv_filters = dim("head.conv.b3", 0)?,
        ModelKind::Hrde => {
            c.d_word = dim("head.word.u_z", 0)?;
            c.d_para = dim("head.para.u_z", 0)?;
        }
        ModelKind::Ahde => {
            c.d_word = dim("head.word.u_z", 0)?;
            c.d_para = dim("head.para_fwd.u_z", 0)?;
            c.d_attn = dim("attn.v", 0)?;
        }
        ModelKind::Hre => c.d_para = dim("body.para.u_z", 0)?,
    }
    Ok(c.canonical())
}

//! Portable checkpoints.
//!
//! Layout: the 7-byte magic `POSTRA1`, a `u32` format version, a `u32`
//! length followed by a TOML header, a `u32` entry count, then per entry a
//! `u16` name length, the ASCII name, a `u8` rank, `u64` dims and the data
//! as little-endian `f64`. All integers are little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, RelationMsg, TMsgKind};

pub const MAGIC: &[u8; 7] = b"POSTRA1";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub d: usize,
    pub d_pe: usize,
    pub relation_layers: usize,
    pub entity_layers: usize,
    pub t_msg_kind: TMsgKind,
    pub relation_msg: RelationMsg,
    pub alpha: f64,
    pub k: usize,
    pub temporal_mode: String,
    pub beta: f64,
    pub share_local_global: bool,
    pub trainable_omega: bool,
    pub self_loops: bool,
    pub seed: u64,
}

impl CheckpointHeader {
    pub fn new(config: &ModelConfig, seed: u64) -> Self {
        Self {
            d: config.d,
            d_pe: config.d,
            relation_layers: config.relation_layers,
            entity_layers: config.entity_layers,
            t_msg_kind: config.t_msg_kind,
            relation_msg: config.relation_msg,
            alpha: config.alpha,
            k: config.k,
            temporal_mode: "geometric".into(),
            beta: config.beta,
            share_local_global: config.share_local_global,
            trainable_omega: config.trainable_omega,
            self_loops: config.self_loops,
            seed,
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        if self.d_pe != self.d || self.temporal_mode != "geometric" {
            return Err(Error::Config(format!(
                "unsupported temporal setup {} with d_pe {}",
                self.temporal_mode, self.d_pe
            )));
        }
        Ok(ModelConfig {
            d: self.d,
            relation_layers: self.relation_layers,
            entity_layers: self.entity_layers,
            t_msg_kind: self.t_msg_kind,
            relation_msg: self.relation_msg,
            alpha: self.alpha,
            k: self.k,
            beta: self.beta,
            share_local_global: self.share_local_global,
            trainable_omega: self.trainable_omega,
            self_loops: self.self_loops,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams,
}

/// Serialize. Refuses parameters whose layout differs from the one implied
/// by their config, so nothing dataset-shaped can be stored.
pub fn encode(params: &ModelParams, seed: u64) -> Result<Vec<u8>> {
    let reference = ModelParams::init(params.config(), 0)?;
    if reference.shape_manifest() != params.shape_manifest() {
        return Err(Error::Config(
            "parameter table does not match the config-derived layout".into(),
        ));
    }
    let header = toml::to_string(&CheckpointHeader::new(params.config(), seed))
        .map_err(|e| Error::Config(format!("cannot encode header: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.names().iter().zip(params.values()) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let fmt = |m: String| Error::format(path, m);
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len()).map_err(fmt)? != MAGIC {
        return Err(fmt("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32().map_err(fmt)?;
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: VERSION,
        });
    }
    let hlen = r.u32().map_err(fmt)? as usize;
    let text = std::str::from_utf8(r.take(hlen).map_err(fmt)?)
        .map_err(|_| fmt("header is not UTF-8".into()))?;
    let header: CheckpointHeader =
        toml::from_str(text).map_err(|e| fmt(format!("bad header: {e}")))?;
    let config = header.model_config().map_err(|e| fmt(e.to_string()))?;
    let count = r.u32().map_err(fmt)? as usize;
    let mut entries = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let nlen = r.u16().map_err(fmt)? as usize;
        let name = std::str::from_utf8(r.take(nlen).map_err(fmt)?)
            .ok()
            .filter(|s| s.is_ascii())
            .ok_or_else(|| fmt("parameter name is not ASCII".into()))?
            .to_string();
        let rank = r.u8().map_err(fmt)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64().map_err(fmt)? as usize);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| fmt(format!("implausible shape {shape:?} for {name}")))?;
        let raw = r.take(len * 8).map_err(fmt)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| fmt(e.to_string()))?;
        entries.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(fmt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let params = ModelParams::from_tensors(&config, entries).map_err(|e| fmt(e.to_string()))?;
    Ok(Checkpoint { header, params })
}

pub fn save(params: &ModelParams, seed: u64, path: &Path) -> Result<()> {
    let bytes = encode(params, seed)?;
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        let c = ModelConfig {
            d: 4,
            relation_layers: 2,
            entity_layers: 1,
            t_msg_kind: TMsgKind::TNTComplEx,
            alpha: 0.3,
            trainable_omega: true,
            ..ModelConfig::default()
        };
        ModelParams::init(&c, 5).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let p = params();
        let bytes = encode(&p, 42).unwrap();
        let c = decode(&bytes, Path::new("x")).unwrap();
        assert_eq!(c.params, p);
        assert_eq!(c.header.seed, 42);
        assert_eq!(encode(&c.params, 42).unwrap(), bytes);
        assert_eq!(&bytes[..7], b"POSTRA1");
    }

    #[test]
    fn rejects_damage() {
        let bytes = encode(&params(), 0).unwrap();
        let p = Path::new("x");
        assert!(matches!(decode(&bytes[..bytes.len() - 3], p), Err(Error::Format { .. })));
        let mut v = bytes.clone();
        v[7] = 9;
        assert!(matches!(decode(&v, p), Err(Error::CheckpointVersion { found: 9, .. })));
        let mut m = bytes.clone();
        m[0] = b'X';
        assert!(matches!(decode(&m, p), Err(Error::Format { .. })));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(decode(&extra, p), Err(Error::Format { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/model.ckpt");
        let p = params();
        save(&p, 1, &path).unwrap();
        assert_eq!(load(&path).unwrap().params, p);
        assert!(matches!(load(&dir.path().join("none")), Err(Error::Io { .. })));
    }
}

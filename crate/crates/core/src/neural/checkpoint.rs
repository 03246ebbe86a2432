//! NNCK checkpoint files.
//!
//! Layout (little-endian): magic `NNCK`, version `u32 = 1`, arch id `u8`,
//! hyperparameter block (`u32` byte length + UTF-8 `key=value` lines), tensor
//! count `u32`, then per tensor: name (`u16` length + UTF-8), rank `u8`, dims
//! (`u32` each), `f32` data. A CRC-32 of all preceding bytes closes the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::model::{Arch, Hyper, SequenceModel};
use super::params::{ParamSet, ParamSpec};
use super::NeuralError;

pub const NNCK_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &SequenceModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"NNCK");
    out.extend_from_slice(&NNCK_VERSION.to_le_bytes());
    out.push(model.arch().id());
    let mut hyper = String::new();
    for (k, v) in model.hyper().to_pairs() {
        hyper.push_str(&format!("{k}={v}\n"));
    }
    hyper.push_str(&format!("param_count={}\n", model.param_count()));
    out.extend_from_slice(&(hyper.len() as u32).to_le_bytes());
    out.extend_from_slice(hyper.as_bytes());
    let params = model.params();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (spec, values) in params.specs().iter().zip(params.values()) {
        out.extend_from_slice(&(spec.name.len() as u16).to_le_bytes());
        out.extend_from_slice(spec.name.as_bytes());
        out.push(spec.shape.len() as u8);
        for &d in &spec.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], NeuralError> {
        if self.pos + n > self.bytes.len() {
            return Err(NeuralError::Truncated(what));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self, what: &'static str) -> Result<u8, NeuralError> {
        Ok(self.take(1, what)?[0])
    }
    fn u16(&mut self, what: &'static str) -> Result<u16, NeuralError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &'static str) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<SequenceModel, NeuralError> {
    if bytes.len() < 4 || &bytes[..4] != b"NNCK" {
        return Err(NeuralError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(NeuralError::Truncated("header"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(NeuralError::ChecksumFailed);
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32("version")?;
    if version != NNCK_VERSION {
        return Err(NeuralError::VersionUnsupported(version));
    }
    let arch_id = r.u8("arch id")?;
    let arch = Arch::from_id(arch_id)
        .ok_or_else(|| NeuralError::ArchMismatch(format!("unknown arch id {arch_id}")))?;
    let hyper_len = r.u32("hyperparameter length")? as usize;
    let text = std::str::from_utf8(r.take(hyper_len, "hyperparameters")?)
        .map_err(|_| NeuralError::BadHyper("hyperparameter block is not UTF-8".into()))?;
    let mut pairs = BTreeMap::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| NeuralError::BadHyper(format!("line without '=': {line}")))?;
        pairs.insert(k.to_string(), v.to_string());
    }
    let hyper = Hyper::from_pairs(arch, &pairs)?;
    let n_tensors = r.u32("tensor count")? as usize;
    let mut specs = Vec::with_capacity(n_tensors);
    let mut values = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let name_len = r.u16("tensor name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| NeuralError::ArchMismatch("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8("tensor rank")? as usize;
        let shape = (0..rank)
            .map(|_| r.u32("tensor dims").map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let data = r
            .take(4 * n, "tensor data")?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        specs.push(ParamSpec { name, shape });
        values.push(data);
    }
    if r.pos != body.len() {
        return Err(NeuralError::Truncated("trailing bytes before checksum"));
    }

    let mut model = SequenceModel::new(hyper, 0);
    let loaded = ParamSet { specs, values };
    let expected = model.params().specs();
    if expected.len() != loaded.specs.len() {
        return Err(NeuralError::ArchMismatch(format!(
            "{arch} expects {} tensors, file has {}",
            expected.len(),
            loaded.specs.len()
        )));
    }
    for (want, got) in expected.iter().zip(&loaded.specs) {
        if want != got {
            return Err(NeuralError::ArchMismatch(format!(
                "expected tensor {} {:?}, found {} {:?}",
                want.name, want.shape, got.name, got.shape
            )));
        }
    }
    if let Some(stored) = pairs.get("param_count") {
        if stored.parse::<usize>().ok() != Some(loaded.count()) {
            return Err(NeuralError::ArchMismatch(format!(
                "stored param_count {stored} differs from tensor total {}",
                loaded.count()
            )));
        }
    }
    if !loaded.all_finite() {
        return Err(NeuralError::NonFiniteParameter);
    }
    model.params = loaded;
    Ok(model)
}

pub fn save_checkpoint(model: &SequenceModel, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(model)).map_err(|source| NeuralError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SequenceModel, NeuralError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| NeuralError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_checkpoint(&bytes)
}

/// CRC-32 stored at the end of an encoded checkpoint.
pub fn checkpoint_crc(bytes: &[u8]) -> Option<u32> {
    let tail = bytes.get(bytes.len().checked_sub(4)?..)?;
    Some(u32::from_le_bytes(tail.try_into().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureMatrix, FeatureSource};
    use crate::neural::model::{build_gd_backbone_seeded, build_tcn_seeded, GdHead};

    #[test]
    fn round_trip_preserves_outputs_bitwise() {
        let m = build_tcn_seeded(16, 2, 9);
        let back = decode_checkpoint(&encode_checkpoint(&m)).unwrap();
        assert_eq!(back.param_count(), m.param_count());
        assert_eq!(back.hyper(), m.hyper());
        let f = FeatureMatrix::new((0..16 * 30).map(|i| (i as f32).sin()).collect(), 16, 10, FeatureSource::External)
            .unwrap();
        let (a, b) = (m.forward(&f).unwrap(), back.forward(&f).unwrap());
        assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn renamed_tensor_is_an_arch_mismatch() {
        let mut m = build_gd_backbone_seeded(12, GdHead::Scalar, 1);
        m.params.specs[0].name = "lstm.w_xx".into();
        let err = decode_checkpoint(&encode_checkpoint(&m)).unwrap_err();
        assert!(matches!(err, NeuralError::ArchMismatch(_)), "{err}");
    }

    #[test]
    fn corruption_fails_the_checksum() {
        let mut bytes = encode_checkpoint(&build_gd_backbone_seeded(12, GdHead::TwoWay, 1));
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(decode_checkpoint(&bytes), Err(NeuralError::ChecksumFailed)));
        assert!(matches!(decode_checkpoint(b"XXXXabcd"), Err(NeuralError::BadMagic)));
    }
}

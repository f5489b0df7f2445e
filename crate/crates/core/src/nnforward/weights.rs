//! Generator architecture description and the `LLGW` weight file.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! 0..4     b"LLGW"
//! 4..8     u32 version (1)
//! 8..12    u32 header length H
//! 12..12+H UTF-8 JSON {"arch": {...}, "tensors": [{name, shape, offset, dtype}]}
//! rest     f32le tensor blob; offsets are relative to its start, 4-byte aligned
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ops::{Conv, Norm};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"LLGW";
pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("truncated weight file: {0}")]
    Truncated(&'static str),
    #[error("bad magic {0:?}, expected \"LLGW\"")]
    BadMagic([u8; 4]),
    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("tensor {name}: unsupported dtype {dtype:?}")]
    Dtype { name: String, dtype: String },
    #[error("tensor {0} is missing")]
    MissingTensor(String),
    #[error("tensor {0} is not part of the architecture")]
    UnexpectedTensor(String),
    #[error("tensor {0} is listed twice")]
    DuplicateTensor(String),
    #[error("tensor {name}: shape {found:?} does not match architecture shape {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor {name}: offset {offset} is not 4-byte aligned")]
    Misaligned { name: String, offset: usize },
    #[error("tensor {name}: data range exceeds the blob")]
    OutOfBounds { name: String },
    #[error("tensor {name}: non-finite value at element {index}")]
    NonFinite { name: String, index: usize },
}

/// Hyperparameters fixing every tensor shape of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorArch {
    pub in_channels: usize,
    pub out_channels: usize,
    pub base_filters: usize,
    pub n_encoder_blocks: usize,
    pub n_resnet_blocks: usize,
    pub n_decoder_blocks: usize,
}

impl Default for GeneratorArch {
    fn default() -> Self {
        Self {
            in_channels: 6,
            out_channels: 6,
            base_filters: 64,
            n_encoder_blocks: 3,
            n_resnet_blocks: 9,
            n_decoder_blocks: 3,
        }
    }
}

impl GeneratorArch {
    pub fn with_base_filters(base_filters: usize) -> Self {
        Self {
            base_filters,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), WeightsError> {
        let bad = |m: String| Err(WeightsError::InvalidArch(m));
        if self.in_channels == 0 || self.out_channels == 0 || self.base_filters == 0 {
            return bad("channel counts must be positive".into());
        }
        if self.n_encoder_blocks == 0 || self.n_encoder_blocks > 8 {
            return bad(format!(
                "n_encoder_blocks = {} outside 1..=8",
                self.n_encoder_blocks
            ));
        }
        if self.n_decoder_blocks != self.n_encoder_blocks {
            return bad(format!(
                "n_decoder_blocks = {} must equal n_encoder_blocks = {} to restore resolution",
                self.n_decoder_blocks, self.n_encoder_blocks
            ));
        }
        if self
            .base_filters
            .checked_shl(self.n_encoder_blocks as u32)
            .is_none()
            || self.bottleneck_channels() > 1 << 16
        {
            return bad("channel widths overflow".into());
        }
        Ok(())
    }

    /// Spatial sides must be a multiple of this.
    pub fn size_multiple(&self) -> usize {
        1 << self.n_encoder_blocks
    }

    pub fn encoder_channels(&self, block: usize) -> (usize, usize) {
        let input = if block == 0 {
            self.in_channels
        } else {
            self.base_filters << (block - 1)
        };
        (input, self.base_filters << block)
    }

    pub fn bottleneck_channels(&self) -> usize {
        self.base_filters << (self.n_encoder_blocks - 1)
    }

    /// Decoder halves the width per block but never drops below `base_filters`.
    pub fn decoder_channels(&self, block: usize) -> (usize, usize) {
        let n = self.n_encoder_blocks;
        let input = self.base_filters << (n - 1 - block);
        let output = self.base_filters << (n.saturating_sub(2 + block));
        (input, output)
    }

    /// Every tensor the file must contain, in canonical order.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let mut m = Vec::new();
        let conv = |m: &mut Vec<(String, Vec<usize>)>, prefix: String, o: usize, i: usize| {
            m.push((format!("{prefix}.weight"), vec![o, i, 3, 3]));
            m.push((format!("{prefix}.bias"), vec![o]));
        };
        let norm = |m: &mut Vec<(String, Vec<usize>)>, prefix: String, c: usize| {
            m.push((format!("{prefix}.gamma"), vec![c]));
            m.push((format!("{prefix}.beta"), vec![c]));
        };
        for b in 0..self.n_encoder_blocks {
            let (i, o) = self.encoder_channels(b);
            conv(&mut m, format!("enc.{b}.conv"), o, i);
            norm(&mut m, format!("enc.{b}.norm"), o);
            m.push((format!("enc.{b}.shrink.lambda"), vec![o]));
        }
        let c = self.bottleneck_channels();
        for b in 0..self.n_resnet_blocks {
            conv(&mut m, format!("res.{b}.conv1"), c, c);
            norm(&mut m, format!("res.{b}.norm1"), c);
            conv(&mut m, format!("res.{b}.conv2"), c, c);
            norm(&mut m, format!("res.{b}.norm2"), c);
        }
        for b in 0..self.n_decoder_blocks {
            let (i, o) = self.decoder_channels(b);
            conv(&mut m, format!("dec.{b}.conv"), o, i);
            norm(&mut m, format!("dec.{b}.norm"), o);
        }
        conv(
            &mut m,
            "head.conv".into(),
            self.out_channels,
            self.base_filters,
        );
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlock {
    pub conv: Conv,
    pub norm: Norm,
    pub shrink: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResnetBlock {
    pub conv1: Conv,
    pub norm1: Norm,
    pub conv2: Conv,
    pub norm2: Norm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderBlock {
    pub conv: Conv,
    pub norm: Norm,
}

/// All parameters of one generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorWeights {
    pub arch: GeneratorArch,
    pub encoder: Vec<EncoderBlock>,
    pub resnet: Vec<ResnetBlock>,
    pub decoder: Vec<DecoderBlock>,
    pub head: Conv,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    dtype: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    arch: GeneratorArch,
    tensors: Vec<TensorEntry>,
}

impl GeneratorWeights {
    /// All-zero convolutions, identity norms, zero shrink thresholds.
    pub fn zeros(arch: GeneratorArch) -> Result<Self, WeightsError> {
        arch.validate()?;
        let encoder = (0..arch.n_encoder_blocks)
            .map(|b| {
                let (i, o) = arch.encoder_channels(b);
                EncoderBlock {
                    conv: Conv::zeros(o, i, 3),
                    norm: Norm::identity(o),
                    shrink: vec![0.0; o],
                }
            })
            .collect();
        let c = arch.bottleneck_channels();
        let resnet = (0..arch.n_resnet_blocks)
            .map(|_| ResnetBlock {
                conv1: Conv::zeros(c, c, 3),
                norm1: Norm::identity(c),
                conv2: Conv::zeros(c, c, 3),
                norm2: Norm::identity(c),
            })
            .collect();
        let decoder = (0..arch.n_decoder_blocks)
            .map(|b| {
                let (i, o) = arch.decoder_channels(b);
                DecoderBlock {
                    conv: Conv::zeros(o, i, 3),
                    norm: Norm::identity(o),
                }
            })
            .collect();
        Ok(Self {
            arch,
            encoder,
            resnet,
            decoder,
            head: Conv::zeros(arch.out_channels, arch.base_filters, 3),
        })
    }

    /// Flat `(name, data)` views in manifest order.
    pub fn named_tensors(&self) -> Vec<(String, &[f32])> {
        let mut out: Vec<(String, &[f32])> = Vec::new();
        for (b, blk) in self.encoder.iter().enumerate() {
            out.push((format!("enc.{b}.conv.weight"), &blk.conv.weight));
            out.push((format!("enc.{b}.conv.bias"), &blk.conv.bias));
            out.push((format!("enc.{b}.norm.gamma"), &blk.norm.gamma));
            out.push((format!("enc.{b}.norm.beta"), &blk.norm.beta));
            out.push((format!("enc.{b}.shrink.lambda"), &blk.shrink));
        }
        for (b, blk) in self.resnet.iter().enumerate() {
            out.push((format!("res.{b}.conv1.weight"), &blk.conv1.weight));
            out.push((format!("res.{b}.conv1.bias"), &blk.conv1.bias));
            out.push((format!("res.{b}.norm1.gamma"), &blk.norm1.gamma));
            out.push((format!("res.{b}.norm1.beta"), &blk.norm1.beta));
            out.push((format!("res.{b}.conv2.weight"), &blk.conv2.weight));
            out.push((format!("res.{b}.conv2.bias"), &blk.conv2.bias));
            out.push((format!("res.{b}.norm2.gamma"), &blk.norm2.gamma));
            out.push((format!("res.{b}.norm2.beta"), &blk.norm2.beta));
        }
        for (b, blk) in self.decoder.iter().enumerate() {
            out.push((format!("dec.{b}.conv.weight"), &blk.conv.weight));
            out.push((format!("dec.{b}.conv.bias"), &blk.conv.bias));
            out.push((format!("dec.{b}.norm.gamma"), &blk.norm.gamma));
            out.push((format!("dec.{b}.norm.beta"), &blk.norm.beta));
        }
        out.push(("head.conv.weight".into(), &self.head.weight));
        out.push(("head.conv.bias".into(), &self.head.bias));
        out
    }

    /// Mutable flat views in manifest order.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Vec<f32>)> {
        let mut out: Vec<(String, &mut Vec<f32>)> = Vec::new();
        for (b, blk) in self.encoder.iter_mut().enumerate() {
            out.push((format!("enc.{b}.conv.weight"), &mut blk.conv.weight));
            out.push((format!("enc.{b}.conv.bias"), &mut blk.conv.bias));
            out.push((format!("enc.{b}.norm.gamma"), &mut blk.norm.gamma));
            out.push((format!("enc.{b}.norm.beta"), &mut blk.norm.beta));
            out.push((format!("enc.{b}.shrink.lambda"), &mut blk.shrink));
        }
        for (b, blk) in self.resnet.iter_mut().enumerate() {
            out.push((format!("res.{b}.conv1.weight"), &mut blk.conv1.weight));
            out.push((format!("res.{b}.conv1.bias"), &mut blk.conv1.bias));
            out.push((format!("res.{b}.norm1.gamma"), &mut blk.norm1.gamma));
            out.push((format!("res.{b}.norm1.beta"), &mut blk.norm1.beta));
            out.push((format!("res.{b}.conv2.weight"), &mut blk.conv2.weight));
            out.push((format!("res.{b}.conv2.bias"), &mut blk.conv2.bias));
            out.push((format!("res.{b}.norm2.gamma"), &mut blk.norm2.gamma));
            out.push((format!("res.{b}.norm2.beta"), &mut blk.norm2.beta));
        }
        for (b, blk) in self.decoder.iter_mut().enumerate() {
            out.push((format!("dec.{b}.conv.weight"), &mut blk.conv.weight));
            out.push((format!("dec.{b}.conv.bias"), &mut blk.conv.bias));
            out.push((format!("dec.{b}.norm.gamma"), &mut blk.norm.gamma));
            out.push((format!("dec.{b}.norm.beta"), &mut blk.norm.beta));
        }
        out.push(("head.conv.weight".into(), &mut self.head.weight));
        out.push(("head.conv.bias".into(), &mut self.head.bias));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, d)| d.len()).sum()
    }

    /// Serialises to `LLGW` v1 bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = self.arch.manifest();
        let tensors = self.named_tensors();
        let mut entries = Vec::with_capacity(manifest.len());
        let mut offset = 0;
        for ((name, shape), (_, data)) in manifest.into_iter().zip(&tensors) {
            entries.push(TensorEntry {
                name,
                shape,
                offset,
                dtype: "f32le".into(),
            });
            offset += data.len() * 4;
        }
        let header = Header {
            arch: self.arch,
            tensors: entries,
        };
        let mut json = serde_json::to_vec(&header).expect("header serialises");
        // Pad with JSON whitespace so the blob itself starts 4-byte aligned.
        while !(12 + json.len()).is_multiple_of(4) {
            json.push(b' ');
        }
        let mut out = Vec::with_capacity(12 + json.len() + offset);
        out.extend_from_slice(WEIGHTS_MAGIC);
        out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, data) in &tensors {
            for v in data.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WeightsError> {
        if bytes.len() < 4 {
            return Err(WeightsError::Truncated("magic"));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if &magic != WEIGHTS_MAGIC {
            return Err(WeightsError::BadMagic(magic));
        }
        if bytes.len() < 12 {
            return Err(WeightsError::Truncated("fixed header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != WEIGHTS_VERSION {
            return Err(WeightsError::UnsupportedVersion(version));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header_bytes = bytes
            .get(12..12 + header_len)
            .ok_or(WeightsError::Truncated("JSON header"))?;
        let header: Header = serde_json::from_slice(header_bytes)
            .map_err(|e| WeightsError::Header(e.to_string()))?;
        let blob = &bytes[12 + header_len..];

        header.arch.validate()?;
        let expected: BTreeMap<String, Vec<usize>> = header.arch.manifest().into_iter().collect();
        let mut found: BTreeMap<String, Vec<f32>> = BTreeMap::new();
        for entry in &header.tensors {
            let Some(shape) = expected.get(&entry.name) else {
                return Err(WeightsError::UnexpectedTensor(entry.name.clone()));
            };
            if entry.dtype != "f32le" {
                return Err(WeightsError::Dtype {
                    name: entry.name.clone(),
                    dtype: entry.dtype.clone(),
                });
            }
            if &entry.shape != shape {
                return Err(WeightsError::ShapeMismatch {
                    name: entry.name.clone(),
                    expected: shape.clone(),
                    found: entry.shape.clone(),
                });
            }
            if entry.offset % 4 != 0 {
                return Err(WeightsError::Misaligned {
                    name: entry.name.clone(),
                    offset: entry.offset,
                });
            }
            let count: usize = shape.iter().product();
            let data_bytes = entry
                .offset
                .checked_add(count * 4)
                .and_then(|end| blob.get(entry.offset..end))
                .ok_or_else(|| WeightsError::OutOfBounds {
                    name: entry.name.clone(),
                })?;
            let data: Vec<f32> = data_bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if let Some(index) = data.iter().position(|v| !v.is_finite()) {
                return Err(WeightsError::NonFinite {
                    name: entry.name.clone(),
                    index,
                });
            }
            if found.insert(entry.name.clone(), data).is_some() {
                return Err(WeightsError::DuplicateTensor(entry.name.clone()));
            }
        }

        let mut weights = Self::zeros(header.arch)?;
        for (name, slot) in weights.named_tensors_mut() {
            let data = found
                .remove(&name)
                .ok_or_else(|| WeightsError::MissingTensor(name.clone()))?;
            *slot = data;
        }
        // Negative shrink thresholds have no meaning; project them to zero.
        for blk in &mut weights.encoder {
            blk.shrink.iter_mut().for_each(|l| *l = l.max(0.0));
        }
        Ok(weights)
    }

    pub fn load(path: &Path) -> Result<Self, WeightsError> {
        let bytes = fs::read(path).map_err(|source| WeightsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Writes through a temporary sibling file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), WeightsError> {
        let io_err = |source| WeightsError::Io {
            path: path.to_path_buf(),
            source,
        };
        let tmp = path.with_extension("llgw.tmp");
        let mut file = fs::File::create(&tmp).map_err(io_err)?;
        file.write_all(&self.to_bytes()).map_err(io_err)?;
        file.sync_all().map_err(io_err)?;
        fs::rename(&tmp, path).map_err(io_err)
    }
}

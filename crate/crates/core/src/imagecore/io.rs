use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Rgb};
use thiserror::Error;

use super::{Frame, ShapeError};

/// Magic bytes of the raw planar float frame format.
pub const RAW_MAGIC: &[u8; 4] = b"LLFR";

#[derive(Debug, Error)]
pub enum FrameIoError {
    #[error("{path}: file not found")]
    Missing { path: PathBuf },
    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("{path}: expected 3 colour channels, found {channels}")]
    NotRgb { path: PathBuf, channels: u8 },
    #[error("{path}: file is {found}-bit but {expected}-bit was requested")]
    BitDepthMismatch {
        path: PathBuf,
        expected: u8,
        found: u8,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot encode image: {message}")]
    Encode { path: PathBuf, message: String },
    #[error("{path}: malformed raw frame: {message}")]
    Raw { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Shape {
        path: PathBuf,
        #[source]
        source: ShapeError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u8 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn max_value(self) -> f32 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }

    #[inline]
    pub fn encode(self, v: f32) -> u16 {
        (v.clamp(0.0, 1.0) * self.max_value()).round() as u16
    }

    #[inline]
    pub fn decode(self, q: u16) -> f32 {
        q as f32 / self.max_value()
    }
}

impl TryFrom<u8> for BitDepth {
    type Error = String;

    fn try_from(bits: u8) -> Result<Self, Self::Error> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(format!("unsupported bit depth {other} (expected 8 or 16)")),
        }
    }
}

impl From<BitDepth> for u8 {
    fn from(d: BitDepth) -> u8 {
        d.bits()
    }
}

/// On-disk container, chosen from the file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameFormat {
    Png,
    /// `LLFR`: magic, u32 width, u32 height, then `3*H*W` little-endian f32.
    Raw,
}

impl FrameFormat {
    pub fn from_path(path: &Path) -> FrameFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("llfr") => FrameFormat::Raw,
            _ => FrameFormat::Png,
        }
    }

    /// Whether writing through this format loses precision.
    pub fn quantizes(self) -> bool {
        matches!(self, FrameFormat::Png)
    }
}

/// Reads a frame whose PNG bit depth must equal `depth`. Raw frames carry no
/// depth and are accepted as is.
pub fn load_frame(path: &Path, depth: BitDepth) -> Result<Frame, FrameIoError> {
    match load_frame_detect(path)? {
        (_, Some(found)) if found != depth => Err(FrameIoError::BitDepthMismatch {
            path: path.to_path_buf(),
            expected: depth.bits(),
            found: found.bits(),
        }),
        (frame, _) => Ok(frame),
    }
}

/// Reads a PNG of either bit depth, or a raw float frame (depth `None`).
pub fn load_frame_detect(path: &Path) -> Result<(Frame, Option<BitDepth>), FrameIoError> {
    if !path.exists() {
        return Err(FrameIoError::Missing {
            path: path.to_path_buf(),
        });
    }
    if FrameFormat::from_path(path) == FrameFormat::Raw {
        return load_raw(path).map(|f| (f, None));
    }
    let decode_err = |message: String| FrameIoError::Decode {
        path: path.to_path_buf(),
        message,
    };
    let img = ImageReader::open(path)
        .map_err(|source| FrameIoError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| FrameIoError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .decode()
        .map_err(|e| decode_err(e.to_string()))?;

    let color = img.color();
    if color.channel_count() != 3 {
        return Err(FrameIoError::NotRgb {
            path: path.to_path_buf(),
            channels: color.channel_count(),
        });
    }
    let depth = match color.bits_per_pixel() / 3 {
        8 => BitDepth::Eight,
        16 => BitDepth::Sixteen,
        bits => return Err(decode_err(format!("unsupported {bits}-bit samples"))),
    };

    let (width, height) = (img.width() as usize, img.height() as usize);
    let n = width * height;
    let mut data = vec![0.0f32; 3 * n];
    match img {
        DynamicImage::ImageRgb8(buf) => {
            for (i, px) in buf.pixels().enumerate() {
                for c in 0..3 {
                    data[c * n + i] = depth.decode(px[c] as u16);
                }
            }
        }
        DynamicImage::ImageRgb16(buf) => {
            for (i, px) in buf.pixels().enumerate() {
                for c in 0..3 {
                    data[c * n + i] = depth.decode(px[c]);
                }
            }
        }
        other => {
            return Err(decode_err(format!(
                "unsupported pixel layout {:?}",
                other.color()
            )))
        }
    }
    let frame = Frame::new(width, height, data).map_err(|source| FrameIoError::Shape {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((frame, Some(depth)))
}

/// Writes `frame` as PNG at `depth`, or losslessly when the extension is `.llfr`.
pub fn save_frame(frame: &Frame, path: &Path, depth: BitDepth) -> Result<(), FrameIoError> {
    if FrameFormat::from_path(path) == FrameFormat::Raw {
        return save_raw(frame, path);
    }
    let (w, h) = (frame.width(), frame.height());
    let n = w * h;
    let data = frame.data();
    let encode_err = |e: image::ImageError| match e {
        image::ImageError::IoError(source) => FrameIoError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => FrameIoError::Encode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    match depth {
        BitDepth::Eight => {
            let buf = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
                let i = y as usize * w + x as usize;
                Rgb([0, 1, 2].map(|c| depth.encode(data[c * n + i]) as u8))
            });
            buf.save_with_format(path, ImageFormat::Png)
                .map_err(encode_err)
        }
        BitDepth::Sixteen => {
            let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
                ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
                    let i = y as usize * w + x as usize;
                    Rgb([0, 1, 2].map(|c| depth.encode(data[c * n + i])))
                });
            buf.save_with_format(path, ImageFormat::Png)
                .map_err(encode_err)
        }
    }
}

pub fn save_raw(frame: &Frame, path: &Path) -> Result<(), FrameIoError> {
    let io_err = |source| FrameIoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    out.write_all(RAW_MAGIC).map_err(io_err)?;
    out.write_all(&(frame.width() as u32).to_le_bytes())
        .map_err(io_err)?;
    out.write_all(&(frame.height() as u32).to_le_bytes())
        .map_err(io_err)?;
    for v in frame.data() {
        out.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn load_raw(path: &Path) -> Result<Frame, FrameIoError> {
    let raw_err = |message: &str| FrameIoError::Raw {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let file = File::open(path).map_err(|source| FrameIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|source| FrameIoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    if bytes.len() < 12 {
        return Err(raw_err("truncated header"));
    }
    if &bytes[0..4] != RAW_MAGIC {
        return Err(raw_err("bad magic"));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != 3 * width * height * 4 {
        return Err(raw_err("payload length does not match header dimensions"));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Frame::new(width, height, data).map_err(|source| FrameIoError::Shape {
        path: path.to_path_buf(),
        source,
    })
}

/// printf-style frame path template such as `frames/shot_%06d.png`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencePattern {
    prefix: String,
    suffix: String,
    width: usize,
}

impl SequencePattern {
    pub fn parse(pattern: &str) -> Result<Self, String> {
        let start = pattern
            .find('%')
            .ok_or_else(|| format!("pattern {pattern:?} has no %d placeholder"))?;
        let rest = &pattern[start + 1..];
        let end = rest
            .find('d')
            .ok_or_else(|| format!("pattern {pattern:?} has an unterminated placeholder"))?;
        let spec = &rest[..end];
        let width = if spec.is_empty() {
            0
        } else {
            if !spec.starts_with('0') || !spec[1..].chars().all(|c| c.is_ascii_digit()) {
                return Err(format!(
                    "pattern {pattern:?}: unsupported placeholder %{spec}d"
                ));
            }
            spec[1..].parse().unwrap_or(0)
        };
        let suffix = &rest[end + 1..];
        if suffix.contains('%') {
            return Err(format!("pattern {pattern:?} has more than one placeholder"));
        }
        Ok(Self {
            prefix: pattern[..start].to_string(),
            suffix: suffix.to_string(),
            width,
        })
    }

    pub fn path(&self, index: usize) -> PathBuf {
        PathBuf::from(format!(
            "{}{:0width$}{}",
            self.prefix,
            index,
            self.suffix,
            width = self.width
        ))
    }
}

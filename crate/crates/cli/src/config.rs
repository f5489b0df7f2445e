use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use lowlight::imagecore::{BitDepth, SequencePattern};
use lowlight::patchwork::PatchConfig;
use lowlight::temporalsmooth::SmoothingConfig;
use serde::{Deserialize, Serialize};

pub const DEFAULT_LOCAL_SIZE: usize = 360;
pub const DEFAULT_REGION_SIZE: usize = 1000;

/// Half-open `a..b` or inclusive `a..=b` frame indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FrameRange {
    pub start: usize,
    pub end: usize,
}

impl FrameRange {
    pub fn indices(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FromStr for FrameRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid frame range {s:?}, expected a..b or a..=b");
        let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
            (a, b, true)
        } else if let Some((a, b)) = s.split_once("..") {
            (a, b, false)
        } else {
            return Err(bad());
        };
        let start: usize = a.trim().parse().map_err(|_| bad())?;
        let end: usize = b.trim().parse().map_err(|_| bad())?;
        let end = if inclusive {
            end.checked_add(1).ok_or_else(bad)?
        } else {
            end
        };
        Ok(Self { start, end })
    }
}

impl TryFrom<String> for FrameRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FrameRange> for String {
    fn from(r: FrameRange) -> String {
        r.to_string()
    }
}

impl fmt::Display for FrameRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

fn parse_bit_depth(s: &str) -> Result<BitDepth, String> {
    let bits: u8 = s.parse().map_err(|_| format!("invalid bit depth {s:?}"))?;
    BitDepth::try_from(bits).map_err(|e| e.to_string())
}

/// Flags shared by the frame-processing commands. Every field is optional so
/// that a `--config` file can supply it instead.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Input frame pattern, e.g. `in/frame_%04d.png`.
    #[arg(long)]
    pub input: Option<String>,
    /// Output frame pattern; `.png` or `.llfr` selects the format.
    #[arg(long)]
    pub output: Option<String>,
    /// Generator weights in LLGW format.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Frame indices, `a..b` (exclusive) or `a..=b` (inclusive).
    #[arg(long)]
    pub frames: Option<FrameRange>,
    /// Local patch side in pixels.
    #[arg(long)]
    pub local_size: Option<usize>,
    /// Region patch side in pixels.
    #[arg(long)]
    pub region_size: Option<usize>,
    /// Largest temporal half-window in frames.
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Motion in pixels at which no neighbours are averaged.
    #[arg(long)]
    pub motion_cutoff: Option<f32>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON file with any of these settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bit depth of written PNG frames (8 or 16).
    #[arg(long, value_parser = parse_bit_depth)]
    pub bit_depth: Option<BitDepth>,
}

/// Settings file layout, same keys as the long flags with underscores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<String>,
    pub output: Option<String>,
    pub weights: Option<PathBuf>,
    pub frames: Option<FrameRange>,
    pub local_size: Option<usize>,
    pub region_size: Option<usize>,
    pub nmax: Option<usize>,
    pub motion_cutoff: Option<f32>,
    pub jobs: Option<usize>,
    pub bit_depth: Option<BitDepth>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub input: SequencePattern,
    pub output: SequencePattern,
    pub weights: Option<PathBuf>,
    pub frames: FrameRange,
    pub patch: PatchConfig,
    pub smoothing: SmoothingConfig,
    pub jobs: Option<usize>,
    pub bit_depth: BitDepth,
}

impl PipelineConfig {
    /// Merges flags over the optional config file and validates the result.
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let input = args
            .input
            .clone()
            .or(file.input)
            .ok_or_else(|| anyhow!("missing --input"))?;
        let output = args
            .output
            .clone()
            .or(file.output)
            .ok_or_else(|| anyhow!("missing --output"))?;
        let frames = args
            .frames
            .or(file.frames)
            .ok_or_else(|| anyhow!("missing --frames"))?;
        if frames.is_empty() {
            bail!("frame range {frames} is empty");
        }
        let local = args
            .local_size
            .or(file.local_size)
            .unwrap_or(DEFAULT_LOCAL_SIZE);
        let region = args
            .region_size
            .or(file.region_size)
            .unwrap_or(DEFAULT_REGION_SIZE);
        if local == 0 || !local.is_multiple_of(8) {
            bail!("local size {local} must be a positive multiple of 8");
        }
        let patch = PatchConfig::new(local, region)?;
        let smoothing = SmoothingConfig {
            n_max: args
                .nmax
                .or(file.nmax)
                .unwrap_or(SmoothingConfig::default().n_max),
            motion_cutoff: args
                .motion_cutoff
                .or(file.motion_cutoff)
                .unwrap_or(SmoothingConfig::default().motion_cutoff),
        };
        smoothing.validate()?;
        let jobs = args.jobs.or(file.jobs);
        if jobs == Some(0) {
            bail!("--jobs must be at least 1");
        }
        Ok(Self {
            input: SequencePattern::parse(&input).map_err(|e| anyhow!("--input: {e}"))?,
            output: SequencePattern::parse(&output).map_err(|e| anyhow!("--output: {e}"))?,
            weights: args.weights.clone().or(file.weights),
            frames,
            patch,
            smoothing,
            jobs,
            bit_depth: args
                .bit_depth
                .or(file.bit_depth)
                .unwrap_or(BitDepth::Sixteen),
        })
    }
}

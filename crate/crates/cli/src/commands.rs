use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use lowlight::imagecore::{load_frame_detect, save_frame, Frame, FrameFormat};
use lowlight::nnforward::{enhance_frame_with, Execution, GeneratorWeights};
use lowlight::temporalsmooth::{smooth_window, SmoothingConfig};
use serde::Serialize;

use crate::config::PipelineConfig;

#[derive(Debug, Serialize)]
struct EnhanceRecord<'a> {
    command: &'static str,
    frame: usize,
    tiles: usize,
    seconds: f64,
    output: &'a Path,
}

#[derive(Debug, Serialize)]
struct SmoothRecord<'a> {
    command: &'static str,
    frame: usize,
    window: usize,
    seconds: f64,
    output: &'a Path,
}

#[derive(Debug, Serialize)]
struct PipelineRecord<'a> {
    command: &'static str,
    frame: usize,
    tiles: usize,
    enhance_seconds: f64,
    smooth_seconds: f64,
    window: usize,
    output: &'a Path,
}

fn emit(out: &mut (dyn Write + Send), record: &impl Serialize) -> Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Runs `f` on a pool with `jobs` threads, or on the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot start worker threads")?
            .install(f),
    }
}

fn load_weights(cfg: &PipelineConfig) -> Result<GeneratorWeights> {
    let path = cfg
        .weights
        .as_ref()
        .ok_or_else(|| anyhow!("missing --weights"))?;
    let weights = GeneratorWeights::load(path)
        .with_context(|| format!("cannot load weights {}", path.display()))?;
    let multiple = weights.arch.size_multiple();
    if !cfg.patch.local().is_multiple_of(multiple) {
        bail!(
            "local size {} is not a multiple of {multiple} required by {}",
            cfg.patch.local(),
            path.display()
        );
    }
    Ok(weights)
}

fn read_input(cfg: &PipelineConfig, index: usize) -> Result<Frame> {
    let path = cfg.input.path(index);
    let (frame, _) =
        load_frame_detect(&path).with_context(|| format!("frame {index}: cannot read input"))?;
    Ok(frame)
}

fn write_output(cfg: &PipelineConfig, index: usize, frame: &Frame) -> Result<()> {
    let path = cfg.output.path(index);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("frame {index}: cannot create {}", parent.display()))?;
    }
    save_frame(frame, &path, cfg.bit_depth)
        .with_context(|| format!("frame {index}: cannot write output"))
}

/// What a written-then-reread frame looks like, so that in-memory hand-offs
/// match a run that goes through files.
fn as_written(frame: Frame, cfg: &PipelineConfig) -> Frame {
    if FrameFormat::from_path(&cfg.output.path(cfg.frames.start)).quantizes() {
        frame.quantized(cfg.bit_depth)
    } else {
        frame
    }
}

fn enhance_one(
    cfg: &PipelineConfig,
    weights: &GeneratorWeights,
    index: usize,
) -> Result<(Frame, usize, f64)> {
    let frame = read_input(cfg, index)?;
    let start = Instant::now();
    let (out, stats) = enhance_frame_with(&frame, weights, &cfg.patch, Execution::Parallel)
        .with_context(|| {
            format!(
                "frame {index}: enhancement failed ({})",
                cfg.input.path(index).display()
            )
        })?;
    Ok((out, stats.tiles, start.elapsed().as_secs_f64()))
}

pub fn enhance(cfg: &PipelineConfig, progress: &mut (dyn Write + Send)) -> Result<()> {
    let weights = load_weights(cfg)?;
    with_jobs(cfg.jobs, || {
        for index in cfg.frames.indices() {
            let (out, tiles, seconds) = enhance_one(cfg, &weights, index)?;
            write_output(cfg, index, &out)?;
            emit(
                progress,
                &EnhanceRecord {
                    command: "enhance",
                    frame: index,
                    tiles,
                    seconds,
                    output: &cfg.output.path(index),
                },
            )?;
        }
        Ok(())
    })
}

/// Sliding window over a frame sequence that pulls frames on demand and keeps
/// at most `2 * n_max + 1` of them resident.
struct Window<M> {
    frames: VecDeque<Frame>,
    meta: VecDeque<M>,
    first: usize,
    loaded: usize,
    size: Option<(usize, usize, usize)>,
}

impl<M> Window<M> {
    fn new() -> Self {
        Self {
            frames: VecDeque::new(),
            meta: VecDeque::new(),
            first: 0,
            loaded: 0,
            size: None,
        }
    }

    /// Advances to position `t` of a sequence of `len` frames starting at
    /// index `base`, and smooths it.
    fn smooth_at(
        &mut self,
        t: usize,
        len: usize,
        base: usize,
        cfg: &SmoothingConfig,
        mut next: impl FnMut(usize) -> Result<(Frame, M)>,
    ) -> Result<(Frame, &M, usize)> {
        while self.loaded < len && self.loaded <= t + cfg.n_max {
            let index = base + self.loaded;
            let (frame, meta) = next(index)?;
            match self.size {
                None => self.size = Some((frame.width(), frame.height(), index)),
                Some((w, h, first)) if (w, h) != (frame.width(), frame.height()) => bail!(
                    "frame {index}: size {}x{} differs from {w}x{h} of frame {first}",
                    frame.width(),
                    frame.height()
                ),
                Some(_) => {}
            }
            self.frames.push_back(frame);
            self.meta.push_back(meta);
            self.loaded += 1;
        }
        while self.first + cfg.n_max < t {
            self.frames.pop_front();
            self.meta.pop_front();
            self.first += 1;
        }
        let center = t - self.first;
        let window = self.frames.make_contiguous();
        let out = smooth_window(window, center, cfg)
            .with_context(|| format!("frame {}: smoothing failed", base + t))?;
        Ok((out, &self.meta[center], window.len()))
    }
}

pub fn smooth(cfg: &PipelineConfig, progress: &mut (dyn Write + Send)) -> Result<()> {
    with_jobs(cfg.jobs, || {
        let mut window = Window::<()>::new();
        let (base, len) = (cfg.frames.start, cfg.frames.len());
        for t in 0..len {
            let start = Instant::now();
            let (out, _, size) = window.smooth_at(t, len, base, &cfg.smoothing, |i| {
                Ok((read_input(cfg, i)?, ()))
            })?;
            let seconds = start.elapsed().as_secs_f64();
            write_output(cfg, base + t, &out)?;
            emit(
                progress,
                &SmoothRecord {
                    command: "smooth",
                    frame: base + t,
                    window: size,
                    seconds,
                    output: &cfg.output.path(base + t),
                },
            )?;
        }
        Ok(())
    })
}

pub fn pipeline(cfg: &PipelineConfig, progress: &mut (dyn Write + Send)) -> Result<()> {
    let weights = load_weights(cfg)?;
    with_jobs(cfg.jobs, || {
        let mut window = Window::<(usize, f64)>::new();
        let (base, len) = (cfg.frames.start, cfg.frames.len());
        for t in 0..len {
            let start = Instant::now();
            let mut enhance_seconds_here = 0.0;
            let (out, &(tiles, enhance_seconds), size) =
                window.smooth_at(t, len, base, &cfg.smoothing, |i| {
                    let (frame, tiles, seconds) = enhance_one(cfg, &weights, i)?;
                    enhance_seconds_here += seconds;
                    Ok((as_written(frame, cfg), (tiles, seconds)))
                })?;
            let smooth_seconds = start.elapsed().as_secs_f64() - enhance_seconds_here;
            write_output(cfg, base + t, &out)?;
            emit(
                progress,
                &PipelineRecord {
                    command: "pipeline",
                    frame: base + t,
                    tiles,
                    enhance_seconds,
                    smooth_seconds,
                    window: size,
                    output: &cfg.output.path(base + t),
                },
            )?;
        }
        Ok(())
    })
}

/// Prints the architecture and tensor manifest of a weight file.
pub fn validate_weights(path: &Path, out: &mut dyn Write) -> Result<()> {
    let weights = GeneratorWeights::load(path)
        .with_context(|| format!("invalid weight file {}", path.display()))?;
    let a = weights.arch;
    writeln!(out, "file={}", path.display())?;
    writeln!(out, "in_channels={}", a.in_channels)?;
    writeln!(out, "out_channels={}", a.out_channels)?;
    writeln!(out, "base_filters={}", a.base_filters)?;
    writeln!(out, "n_encoder_blocks={}", a.n_encoder_blocks)?;
    writeln!(out, "n_resnet_blocks={}", a.n_resnet_blocks)?;
    writeln!(out, "n_decoder_blocks={}", a.n_decoder_blocks)?;
    writeln!(out, "tensors={}", a.manifest().len())?;
    writeln!(out, "parameters={}", weights.parameter_count())?;
    for (name, shape) in a.manifest() {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        writeln!(out, "  {name} [{}]", dims.join(", "))?;
    }
    Ok(())
}

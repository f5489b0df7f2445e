#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lowlight::imagecore::{load_frame_detect, save_frame, BitDepth, Frame};
use lowlight::nnforward::testing::random_weights;
use lowlight::nnforward::GeneratorArch;

pub fn small_arch() -> GeneratorArch {
    GeneratorArch {
        base_filters: 8,
        n_resnet_blocks: 2,
        ..GeneratorArch::default()
    }
}

pub fn lowlight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowlight"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn write_weights(dir: &Path, arch: GeneratorArch) -> PathBuf {
    let path = dir.join("g.llgw");
    random_weights(arch, 7, 0.1).save(&path).unwrap();
    path
}

/// A drifting textured scene, frame `t` shifted by `t` px horizontally.
pub fn scene(w: usize, h: usize, t: usize) -> Frame {
    let mut data = Vec::with_capacity(3 * w * h);
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let (xf, yf) = ((x + 100 - t) as f32, y as f32);
                let v = 0.35
                    + 0.15 * (0.19 * xf + c as f32).sin() * (0.13 * yf).cos()
                    + 0.1 * (0.031 * xf * yf).sin();
                data.push(v * (0.3 + 0.1 * t as f32 % 0.3));
            }
        }
    }
    Frame::new(w, h, data).unwrap()
}

pub fn write_sequence(dir: &Path, name: &str, frames: &[Frame]) -> String {
    for (i, f) in frames.iter().enumerate() {
        save_frame(
            f,
            &dir.join(format!("{name}_{i:03}.png")),
            BitDepth::Sixteen,
        )
        .unwrap();
    }
    dir.join(format!("{name}_%03d.png"))
        .to_string_lossy()
        .into_owned()
}

pub fn read(path: &Path) -> Frame {
    load_frame_detect(path).unwrap().0
}

pub fn pattern(dir: &Path, name: &str, ext: &str) -> String {
    dir.join(format!("{name}_%03d.{ext}"))
        .to_string_lossy()
        .into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

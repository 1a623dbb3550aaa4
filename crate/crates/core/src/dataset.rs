//! Supervised samples from daily heatmap sequences: sliding windows,
//! chronological train/test split, intensity scaling, and the binary
//! dataset cache.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{SmoothedHeatMap, MAX_INTENSITY};
use crate::tensor::Tensor;

/// One training/test pair: `n` consecutive daily grids stacked as the
/// input volume, and the following day's grid as the label. `t` is the
/// 1-based start day.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub t: u32,
    /// `[n, H, W]`, raw intensities in `[0, 255]`.
    pub input: Tensor,
    /// `[H, W]`, raw intensities in `[0, 255]`.
    pub label: Tensor,
}

/// Window length and train/test boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Window length; searched range is 2..=8 with 6 the default.
    pub n: usize,
    /// Last start index that belongs to the training split.
    pub s: usize,
}

/// Intensity scaling applied before a model sees the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    /// `[0, 255] -> [0, 1]`; used by the supervised baselines.
    Unit,
    /// `[0, 255] -> [-1, 1]`; used by the adversarial pair.
    Symmetric,
}

impl ScalingMode {
    pub fn name(&self) -> &'static str {
        match self {
            ScalingMode::Unit => "unit",
            ScalingMode::Symmetric => "symmetric",
        }
    }

    pub fn parse(s: &str) -> Result<ScalingMode> {
        match s {
            "unit" => Ok(ScalingMode::Unit),
            "symmetric" => Ok(ScalingMode::Symmetric),
            other => Err(Error::config(format!(
                "unknown scaling mode '{other}' (expected unit|symmetric)"
            ))),
        }
    }

    /// Intensity -> model range.
    ///
    /// Symmetric uses `(v - 127.5) / 127.5` rather than `v/127.5 - 1`:
    /// algebraically identical, but bit-exact under `unscale` for every
    /// byte-valued intensity.
    pub fn scale_value(&self, v: f64) -> f64 {
        match self {
            ScalingMode::Unit => v / MAX_INTENSITY,
            ScalingMode::Symmetric => (v - 127.5) / 127.5,
        }
    }

    /// Model range -> intensity, clamping model outputs to the valid
    /// range first.
    pub fn unscale_value(&self, v: f64) -> f64 {
        match self {
            ScalingMode::Unit => v.clamp(0.0, 1.0) * MAX_INTENSITY,
            ScalingMode::Symmetric => v.clamp(-1.0, 1.0) * 127.5 + 127.5,
        }
    }

    /// Model range -> common `[0, 1]` metric basis (clamped).
    pub fn to_unit_basis(&self, v: f64) -> f64 {
        match self {
            ScalingMode::Unit => v.clamp(0.0, 1.0),
            ScalingMode::Symmetric => (v.clamp(-1.0, 1.0) + 1.0) / 2.0,
        }
    }
}

/// Build all sliding windows: samples for `t = 1..=D-n`, in order.
/// Blank (all-zero) days participate like any other day. The input maps
/// must cover consecutive days starting at 1.
pub fn make_windows(maps: &[SmoothedHeatMap], n: usize) -> Result<Vec<SequenceSample>> {
    if !(2..=8).contains(&n) {
        return Err(Error::config(format!("window length n={n} outside 2..=8")));
    }
    if maps.len() < n + 1 {
        return Err(Error::data(format!(
            "{} day(s) available but windowing needs at least n+1 = {}",
            maps.len(),
            n + 1
        )));
    }
    for (i, m) in maps.iter().enumerate() {
        if m.day as usize != i + 1 {
            return Err(Error::data(format!(
                "heatmap at position {i} has day {}, expected consecutive days from 1",
                m.day
            )));
        }
        if m.grid.shape() != maps[0].grid.shape() {
            return Err(Error::shape(format!(
                "day {} grid {:?} differs from day 1 grid {:?}",
                m.day,
                m.grid.shape(),
                maps[0].grid.shape()
            )));
        }
    }
    let (h, w) = (maps[0].grid.shape()[0], maps[0].grid.shape()[1]);
    let count = maps.len() - n;
    let mut samples = Vec::with_capacity(count);
    for t0 in 0..count {
        let mut input = Vec::with_capacity(n * h * w);
        for k in 0..n {
            input.extend_from_slice(maps[t0 + k].grid.data());
        }
        samples.push(SequenceSample {
            t: (t0 + 1) as u32,
            input: Tensor::from_op(vec![n, h, w], input),
            label: maps[t0 + n].grid.clone(),
        });
    }
    Ok(samples)
}

/// Chronological split: train takes `t <= s`, test takes `t >= s+1`.
/// No shuffling across the boundary.
pub fn split(
    samples: Vec<SequenceSample>,
    cfg: &SplitConfig,
) -> Result<(Vec<SequenceSample>, Vec<SequenceSample>)> {
    if cfg.s < 1 || cfg.s >= samples.len() {
        return Err(Error::config(format!(
            "split index s={} outside 1..={} for {} samples",
            cfg.s,
            samples.len().saturating_sub(1),
            samples.len()
        )));
    }
    let mut train = samples;
    let test = train.split_off(cfg.s);
    Ok((train, test))
}

/// Default split boundary: 80% of the samples train, chronologically.
pub fn default_split_index(sample_count: usize) -> usize {
    ((0.8 * sample_count as f64).floor() as usize).clamp(1, sample_count.saturating_sub(1))
}

/// Scale a sample's intensities into the model range.
pub fn scale_sample(sample: &SequenceSample, mode: ScalingMode) -> SequenceSample {
    SequenceSample {
        t: sample.t,
        input: sample.input.map(|v| mode.scale_value(v)),
        label: sample.label.map(|v| mode.scale_value(v)),
    }
}

/// Convert a model output grid back to `[0, 255]` intensities.
pub fn unscale_grid(pred: &Tensor, mode: ScalingMode) -> Tensor {
    pred.map(|v| mode.unscale_value(v))
}

/// In-memory dataset cache: raw-intensity samples plus the scaling mode
/// models trained from this dataset should apply.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetCache {
    pub n: usize,
    pub height: usize,
    pub width: usize,
    pub mode: ScalingMode,
    pub samples: Vec<SequenceSample>,
}

const CACHE_MAGIC: &[u8; 4] = b"HGD1";

impl DatasetCache {
    pub fn new(samples: Vec<SequenceSample>, mode: ScalingMode) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::data("dataset cache needs at least one sample".to_string()))?;
        let n = first.input.shape()[0];
        let (h, w) = (first.input.shape()[1], first.input.shape()[2]);
        for s in &samples {
            if s.input.shape() != [n, h, w] || s.label.shape() != [h, w] {
                return Err(Error::shape("inconsistent sample shapes in cache".to_string()));
            }
        }
        Ok(DatasetCache {
            n,
            height: h,
            width: w,
            mode,
            samples,
        })
    }

    /// Binary encoding: magic, header (n, H, W, count, scaling mode),
    /// then per sample the start index and the input/label values as
    /// 64-bit little-endian runs. Reload is bit-exact.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CACHE_MAGIC);
        for v in [
            self.n as u32,
            self.height as u32,
            self.width as u32,
            self.samples.len() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(match self.mode {
            ScalingMode::Unit => 0,
            ScalingMode::Symmetric => 1,
        });
        for s in &self.samples {
            out.extend_from_slice(&s.t.to_le_bytes());
            for &v in s.input.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for &v in s.label.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 21 || &bytes[..4] != CACHE_MAGIC {
            return Err(Error::data("not a dataset cache file".to_string()));
        }
        let u32_at = |off: usize| -> usize {
            u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize
        };
        let n = u32_at(4);
        let height = u32_at(8);
        let width = u32_at(12);
        let count = u32_at(16);
        let mode = match bytes[20] {
            0 => ScalingMode::Unit,
            1 => ScalingMode::Symmetric,
            other => return Err(Error::data(format!("bad scaling mode byte {other}"))),
        };
        let input_len = n * height * width;
        let label_len = height * width;
        let per_sample = 4 + 8 * (input_len + label_len);
        let expected = 21 + count * per_sample;
        if bytes.len() != expected {
            return Err(Error::data(format!(
                "dataset cache is {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let mut samples = Vec::with_capacity(count);
        let mut pos = 21;
        for _ in 0..count {
            let t = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
            pos += 4;
            let mut read_run = |len: usize| -> Vec<f64> {
                let mut data = Vec::with_capacity(len);
                for _ in 0..len {
                    data.push(f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()));
                    pos += 8;
                }
                data
            };
            let input = Tensor::from_op(vec![n, height, width], read_run(input_len));
            let label = Tensor::from_op(vec![height, width], read_run(label_len));
            samples.push(SequenceSample { t, input, label });
        }
        Ok(DatasetCache {
            n,
            height,
            width,
            mode,
            samples,
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)
            .map_err(|e| Error::data(format!("cannot read dataset {}: {e}", path.display())))?;
        Self::decode(&bytes)
    }
}

/// Shuffled batch index lists for one epoch. The final short batch is
/// kept. The caller owns the seeded generator so successive epochs draw
/// from one deterministic stream.
pub fn shuffled_batches(count: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    order.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

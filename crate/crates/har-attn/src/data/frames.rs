//! Sliding-window frame extraction with fixed fractional overlap.

use crate::error::{Error, Result};
use crate::ndcore::Tensor;

use super::TimeSeriesDataset;

/// Windowed frames cut from one series: the frame stack, one label per
/// frame, and the source sample range each frame covers.
#[derive(Debug, Clone)]
pub struct FrameBatch {
    /// `frames x window x channels`.
    pub frames: Tensor,
    pub labels: Vec<usize>,
    /// Half-open `(start, end)` sample indices per frame.
    pub ranges: Vec<(usize, usize)>,
}

impl FrameBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.frames.shape()[2]
    }

    /// Copies frame `i` out as a `window x channels` tensor.
    pub fn frame(&self, i: usize) -> Tensor {
        let (w, d) = (self.window(), self.channels());
        let start = i * w * d;
        Tensor::new(&[w, d], self.frames.data()[start..start + w * d].to_vec())
            .expect("frame slice is well-formed")
    }
}

/// Cuts `window`-sample frames at stride `window * (1 - overlap)`.
///
/// Frame labels are the majority sample label; ties go to the larger class
/// id, which also steers away from the null class 0.
pub fn extract_frames(ds: &TimeSeriesDataset, window: usize, overlap: f64) -> Result<FrameBatch> {
    if window == 0 {
        return Err(Error::Config("window must be positive".into()));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Config(format!("overlap must be in [0,1), got {overlap}")));
    }
    let n = ds.len();
    if n < window {
        return Err(Error::WindowTooShort { len: n, window });
    }
    let stride = ((window as f64) * (1.0 - overlap)).round() as usize;
    if stride == 0 {
        return Err(Error::Config(format!(
            "window {window} with overlap {overlap} gives stride 0"
        )));
    }
    let count = (n - window) / stride + 1;
    let d = ds.channels();

    let mut data = Vec::with_capacity(count * window * d);
    let mut labels = Vec::with_capacity(count);
    let mut ranges = Vec::with_capacity(count);
    let max_label = ds.labels.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max_label + 1];
    for f in 0..count {
        let start = f * stride;
        let end = start + window;
        data.extend_from_slice(&ds.samples.data()[start * d..end * d]);
        counts.iter_mut().for_each(|c| *c = 0);
        for &l in &ds.labels[start..end] {
            counts[l] += 1;
        }
        let mut best = 0usize;
        for (label, &c) in counts.iter().enumerate() {
            if c > counts[best] || (c == counts[best] && label > best) {
                best = label;
            }
        }
        labels.push(best);
        ranges.push((start, end));
    }

    Ok(FrameBatch {
        frames: Tensor::new(&[count, window, d], data)?,
        labels,
        ranges,
    })
}

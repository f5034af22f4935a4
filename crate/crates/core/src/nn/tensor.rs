use crate::error::{Error, Result};

/// Dense `(batch, channels, length)` array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    batch: usize,
    channels: usize,
    len: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(batch: usize, channels: usize, len: usize) -> Self {
        Self {
            batch,
            channels,
            len,
            data: vec![0.0; batch * channels * len],
        }
    }

    pub fn from_vec(batch: usize, channels: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * channels * len {
            return Err(Error::Shape(format!(
                "{} values for shape ({batch}, {channels}, {len})",
                data.len()
            )));
        }
        Ok(Self {
            batch,
            channels,
            len,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.channels, self.len)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn idx(&self, b: usize, c: usize, l: usize) -> usize {
        (b * self.channels + c) * self.len + l
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, l: usize) -> f64 {
        self.data[self.idx(b, c, l)]
    }

    /// Contiguous samples of channel `c` in batch row `b`.
    #[inline]
    pub fn lane(&self, b: usize, c: usize) -> &[f64] {
        let start = (b * self.channels + c) * self.len;
        &self.data[start..start + self.len]
    }

    #[inline]
    pub fn lane_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let start = (b * self.channels + c) * self.len;
        &mut self.data[start..start + self.len]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub(crate) fn same_shape(&self, other: &Tensor3, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{what}: expected {:?}, got {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

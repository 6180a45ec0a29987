use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// `T × D` matrix of feature vectors, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence {
    data: Array2<f64>,
}

impl ObservationSequence {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::InvalidObservations("no frames".into()));
        }
        if data.ncols() == 0 {
            return Err(Error::InvalidObservations("zero-dimensional frames".into()));
        }
        if let Some(((t, i), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidObservations(format!(
                "non-finite value {v} at frame {}, dimension {}",
                t + 1,
                i + 1
            )));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidObservations(format!(
                "frame {} has {} values, expected {dim}",
                bad + 1,
                rows[bad].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), dim), flat)
            .map_err(|e| Error::InvalidObservations(e.to_string()))?;
        Self::new(data)
    }

    /// Number of frames, `T`.
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// Frame `t`, 0-based.
    pub fn frame(&self, t: usize) -> ArrayView1<'_, f64> {
        self.data.row(t)
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }
}

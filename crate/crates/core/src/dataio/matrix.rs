use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2};

use crate::error::{EffcodeError, Result};

/// Dense column-major collection of examples: `rows` features by `cols`
/// examples, one example per column. All values are finite f64.
///
/// `cols == 0` is permitted so that an empty ingestion (e.g. `max_images=0`)
/// has a well-typed result; operations that need data state their own
/// minimum column counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    /// Wraps an array after checking every entry is finite.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(EffcodeError::invalid("rows", "feature count must be >= 1"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(EffcodeError::invalid(
                "values",
                "matrix contains NaN or infinite entries",
            ));
        }
        Ok(DataMatrix { values })
    }

    /// Wraps an array produced by arithmetic already known to be finite.
    pub(crate) fn from_finite(values: Array2<f64>) -> Self {
        debug_assert!(values.nrows() >= 1);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        DataMatrix { values }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1, "feature count must be >= 1");
        DataMatrix {
            values: Array2::zeros((rows, cols)),
        }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn array(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn array_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.values.view_mut()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// Feature row `i` across all examples.
    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn into_array(self) -> Array2<f64> {
        self.values
    }

    /// Copies the selected columns, preserving the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<DataMatrix> {
        for &j in indices {
            if j >= self.cols() {
                return Err(EffcodeError::invalid(
                    "indices",
                    format!("column {} out of range (cols={})", j, self.cols()),
                ));
            }
        }
        let mut out = Array2::zeros((self.rows(), indices.len()));
        for (k, &j) in indices.iter().enumerate() {
            out.column_mut(k).assign(&self.values.column(j));
        }
        Ok(DataMatrix { values: out })
    }

    /// Copies the selected feature rows, preserving the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<DataMatrix> {
        if indices.is_empty() {
            return Err(EffcodeError::invalid("indices", "row selection is empty"));
        }
        for &i in indices {
            if i >= self.rows() {
                return Err(EffcodeError::invalid(
                    "indices",
                    format!("row {} out of range (rows={})", i, self.rows()),
                ));
            }
        }
        let mut out = Array2::zeros((indices.len(), self.cols()));
        for (k, &i) in indices.iter().enumerate() {
            out.row_mut(k).assign(&self.values.row(i));
        }
        Ok(DataMatrix { values: out })
    }
}

/// Examples paired with integer class labels in `[0, classes)`.
#[derive(Debug, Clone)]
pub struct LabeledData {
    pub data: DataMatrix,
    pub labels: Vec<u32>,
    pub classes: u32,
}

impl LabeledData {
    pub fn new(data: DataMatrix, labels: Vec<u32>, classes: u32) -> Result<Self> {
        if labels.len() != data.cols() {
            return Err(EffcodeError::shape(
                "labeled data",
                format!("{} labels", data.cols()),
                format!("{} labels", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(EffcodeError::invalid(
                "labels",
                format!("label {} outside [0, {})", bad, classes),
            ));
        }
        Ok(LabeledData {
            data,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Copies the selected examples, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> Result<LabeledData> {
        let data = self.data.select_columns(indices)?;
        let labels = indices.iter().map(|&j| self.labels[j]).collect();
        LabeledData::new(data, labels, self.classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_finite() {
        let bad = array![[1.0, f64::NAN], [0.0, 2.0]];
        assert!(DataMatrix::new(bad).is_err());
    }

    #[test]
    fn empty_column_set_is_allowed() {
        let m = DataMatrix::new(Array2::zeros((3, 0))).unwrap();
        assert_eq!(m.rows(), 3);
        assert_eq!(m.cols(), 0);
    }

    #[test]
    fn label_count_must_match() {
        let m = DataMatrix::new(array![[1.0, 2.0]]).unwrap();
        assert!(LabeledData::new(m, vec![0], 10).is_err());
    }

    #[test]
    fn select_preserves_order() {
        let m = DataMatrix::new(array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let s = m.select_columns(&[2, 0]).unwrap();
        assert_eq!(s.array()[[0, 0]], 3.0);
        assert_eq!(s.array()[[1, 1]], 4.0);
    }
}

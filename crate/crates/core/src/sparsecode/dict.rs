//! Dictionary learning: alternating sparse inference and projected-gradient
//! dictionary updates on the objective ½‖X − DᵀA‖²_F + λΩ(A).

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataio::DataMatrix;
use crate::error::{EffcodeError, Result};
use crate::rng;
use crate::sparsecode::fista::{fista_encode_warm, CodingConfig};

/// An atoms × input-dim matrix; row i is atom i, so reconstruction of an
/// example is Dᵀ·codes. Every atom has l2 norm ≤ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    values: Array2<f64>,
}

impl Dictionary {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(EffcodeError::invalid("values", "dictionary must be non-empty"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(EffcodeError::invalid("values", "non-finite dictionary entry"));
        }
        for (i, row) in values.axis_iter(Axis(0)).enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm > 1.0 + 1e-9 {
                return Err(EffcodeError::invalid(
                    "values",
                    format!("atom {} has norm {} > 1", i, norm),
                ));
            }
        }
        Ok(Dictionary { values })
    }

    pub fn atoms(&self) -> usize {
        self.values.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn array(&self) -> ndarray::ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_array(self) -> Array2<f64> {
        self.values
    }

    /// Dᵀ·codes: reconstructs examples from code columns.
    pub fn reconstruct(&self, codes: &DataMatrix) -> Result<DataMatrix> {
        if codes.rows() != self.atoms() {
            return Err(EffcodeError::shape(
                "reconstruct",
                format!("{} code rows", self.atoms()),
                format!("{}", codes.rows()),
            ));
        }
        DataMatrix::new(self.values.t().dot(&codes.array()))
    }
}

/// Scales any atom row with norm > 1 back onto the unit sphere.
fn project_rows(values: &mut Array2<f64>) {
    for mut row in values.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm > 1.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
}

fn reconstruction_error(d: &Array2<f64>, x: &ndarray::ArrayView2<'_, f64>, codes: &ndarray::ArrayView2<'_, f64>) -> f64 {
    let resid = x - &d.t().dot(codes);
    0.5 * resid.iter().map(|v| v * v).sum::<f64>()
}

/// One projected gradient step on ½‖X − DᵀA‖²_F with respect to D, followed
/// by projection of atom rows onto the unit ball. The step is halved (at
/// most 20 times) until the post-projection reconstruction error does not
/// increase; if no such step exists the dictionary is returned unchanged.
pub fn dict_update(d: &Dictionary, x: &DataMatrix, codes: &DataMatrix, step: f64) -> Result<Dictionary> {
    if x.rows() != d.input_dim() || codes.rows() != d.atoms() || x.cols() != codes.cols() {
        return Err(EffcodeError::shape(
            "dict_update",
            format!("X {}x{}, codes {}x{}", d.input_dim(), x.cols(), d.atoms(), x.cols()),
            format!("X {}x{}, codes {}x{}", x.rows(), x.cols(), codes.rows(), codes.cols()),
        ));
    }
    let xv = x.array();
    let av = codes.array();
    let before = reconstruction_error(&d.values, &xv, &av);
    // ∇_D ½‖X − DᵀA‖² = −A·(X − DᵀA)ᵀ
    let resid = &xv - &d.values.t().dot(&av);
    let grad = -av.dot(&resid.t());
    if grad.iter().all(|&g| g == 0.0) {
        return Ok(d.clone());
    }

    let mut step = step;
    for _ in 0..=20 {
        let mut candidate = &d.values - &(&grad * step);
        project_rows(&mut candidate);
        let after = reconstruction_error(&candidate, &xv, &av);
        if after <= before {
            return Dictionary::new(candidate);
        }
        step *= 0.5;
    }
    Ok(d.clone())
}

/// The initialization `learn_dictionary` uses: m data columns drawn without
/// replacement (with replacement when fewer columns exist), each normalized
/// to unit norm. A zero column is replaced by a normalized Gaussian draw.
pub fn initial_dictionary(x: &DataMatrix, m: usize, seed: u64) -> Result<Dictionary> {
    if m < 1 {
        return Err(EffcodeError::invalid("m", "need at least one atom"));
    }
    if x.cols() < 1 {
        return Err(EffcodeError::invalid("x", "no data columns"));
    }
    let mut stream = rng::stream(seed, 0);
    let picks: Vec<usize> = if x.cols() >= m {
        let mut all: Vec<usize> = (0..x.cols()).collect();
        all.shuffle(&mut stream);
        all.truncate(m);
        all
    } else {
        (0..m).map(|_| stream.gen_range(0..x.cols())).collect()
    };
    let mut values = Array2::zeros((m, x.rows()));
    for (a, &j) in picks.iter().enumerate() {
        let col = x.column(j);
        let norm = col.dot(&col).sqrt();
        if norm > 1e-12 {
            for (t, &v) in col.iter().enumerate() {
                values[[a, t]] = v / norm;
            }
        } else {
            let mut draw: Vec<f64> = (0..x.rows())
                .map(|_| StandardNormal.sample(&mut stream))
                .collect();
            let dnorm = draw.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (t, v) in draw.drain(..).enumerate() {
                values[[a, t]] = v / dnorm;
            }
        }
    }
    Dictionary::new(values)
}

/// λ calibration: `scale` × the mean over data columns of the maximum
/// absolute atom correlation |(D·x_j)_a| at the given dictionary. With
/// `scale` = 0.1 and the seed-matched initial dictionary this is the
/// default training λ.
pub fn calibrate_lambda(d: &Dictionary, x: &DataMatrix, scale: f64) -> Result<f64> {
    if x.cols() == 0 {
        return Err(EffcodeError::invalid("x", "no data columns"));
    }
    let corr = d.array().dot(&x.array());
    let mean_max = corr
        .axis_iter(Axis(1))
        .map(|col| col.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
        .sum::<f64>()
        / x.cols() as f64;
    if mean_max <= 0.0 {
        return Err(EffcodeError::invalid(
            "x",
            "data has no correlation with the dictionary; cannot calibrate lambda",
        ));
    }
    Ok(scale * mean_max)
}

/// Per-epoch objective values plus the learned dictionary and codes.
#[derive(Debug, Clone)]
pub struct DictLearnResult {
    pub dictionary: Dictionary,
    pub codes: DataMatrix,
    /// ½‖X − DᵀU‖² + λΩ(U) on the full data at each epoch's end.
    pub objective_trace: Vec<f64>,
}

pub const DEFAULT_MINIBATCH: usize = 256;

/// Alternates warm-started FISTA on minibatches with projected-gradient
/// dictionary steps. Initialization is seeded data columns; batch order is
/// reshuffled per epoch from the same seed. After the final epoch the full
/// data is re-encoded against the final dictionary so the returned codes
/// match it.
pub fn learn_dictionary(
    x: &DataMatrix,
    m: usize,
    cfg: &CodingConfig,
    epochs: usize,
) -> Result<DictLearnResult> {
    learn_dictionary_batched(x, m, cfg, epochs, DEFAULT_MINIBATCH)
}

pub fn learn_dictionary_batched(
    x: &DataMatrix,
    m: usize,
    cfg: &CodingConfig,
    epochs: usize,
    batch_size: usize,
) -> Result<DictLearnResult> {
    cfg.validate()?;
    if epochs < 1 {
        return Err(EffcodeError::invalid("epochs", "must be >= 1"));
    }
    if batch_size < 1 {
        return Err(EffcodeError::invalid("batch_size", "must be >= 1"));
    }
    let n = x.cols();
    let mut dict = initial_dictionary(x, m, cfg.seed)?;
    let mut codes = DataMatrix::zeros(m, n);
    let mut step = 1.0;
    let mut trace = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(cfg.seed, 1 + epoch as u64));
        for batch in order.chunks(batch_size) {
            let x_batch = x.select_columns(batch)?;
            let warm = codes.select_columns(batch)?;
            let batch_codes = fista_encode_warm(&dict, &x_batch, &warm, cfg)?;
            for (pos, &j) in batch.iter().enumerate() {
                codes
                    .array_mut()
                    .column_mut(j)
                    .assign(&batch_codes.column(pos));
            }
            dict = dict_update(&dict, &x_batch, &batch_codes, step)?;
            // Grow the trial step back so backtracking stays cheap.
            step = (step * 2.0).min(1e6);
        }
        if epoch == epochs - 1 {
            codes = fista_encode_warm(&dict, x, &codes, cfg)?;
        }
        let objective = reconstruction_error(&dict.clone().into_array(), &x.array(), &codes.array())
            + (0..n)
                .map(|j| cfg.penalty(codes.column(j)))
                .sum::<f64>();
        trace.push(objective);
    }

    Ok(DictLearnResult {
        dictionary: dict,
        codes,
        objective_trace: trace,
    })
}

/// Fraction of nonzero code entries.
pub fn code_sparsity(codes: &DataMatrix) -> f64 {
    if codes.cols() == 0 {
        return 0.0;
    }
    let nonzero = codes.array().iter().filter(|&&v| v != 0.0).count();
    nonzero as f64 / (codes.rows() * codes.cols()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_codes_leave_dictionary_unchanged() {
        let d = Dictionary::new(Array2::eye(3)).unwrap();
        let x = DataMatrix::zeros(3, 4);
        let codes = DataMatrix::zeros(3, 4);
        let updated = dict_update(&d, &x, &codes, 1.0).unwrap();
        assert_eq!(updated.array(), d.array());
    }

    #[test]
    fn stationary_point_stays_put() {
        // X = DᵀA exactly, D feasible: gradient is 0.
        let d = Dictionary::new(Array2::eye(3)).unwrap();
        let codes = DataMatrix::new(
            Array2::from_shape_vec((3, 2), vec![1.0, 0.0, 0.0, 2.0, 0.5, -1.0]).unwrap(),
        )
        .unwrap();
        let x = d.reconstruct(&codes).unwrap();
        let updated = dict_update(&d, &x, &codes, 0.5).unwrap();
        let diff = (&updated.array() - &d.array())
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-10);
    }

    #[test]
    fn update_never_increases_reconstruction_error() {
        let mut stream = rng::stream(31, 0);
        for _ in 0..5 {
            let mut d_values = Array2::from_shape_fn((6, 10), |_| stream.gen_range(-1.0..1.0));
            project_rows(&mut d_values);
            let d = Dictionary::new(d_values).unwrap();
            let x = DataMatrix::new(Array2::from_shape_fn((10, 12), |_| {
                stream.gen_range(-1.0..1.0)
            }))
            .unwrap();
            let codes = DataMatrix::new(Array2::from_shape_fn((6, 12), |_| {
                stream.gen_range(-0.5..0.5)
            }))
            .unwrap();
            let before = reconstruction_error(&d.clone().into_array(), &x.array(), &codes.array());
            let updated = dict_update(&d, &x, &codes, 2.0).unwrap();
            let after =
                reconstruction_error(&updated.clone().into_array(), &x.array(), &codes.array());
            assert!(after <= before + 1e-12, "{} -> {}", before, after);
        }
    }

    #[test]
    fn initial_dictionary_is_deterministic_and_normalized() {
        let mut stream = rng::stream(9, 0);
        let x = DataMatrix::new(Array2::from_shape_fn((8, 20), |_| {
            stream.gen_range(-2.0..2.0)
        }))
        .unwrap();
        let a = initial_dictionary(&x, 5, 3).unwrap();
        let b = initial_dictionary(&x, 5, 3).unwrap();
        assert_eq!(a.array(), b.array());
        for row in a.array().axis_iter(Axis(0)) {
            let norm = row.dot(&row).sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}

//! FISTA inference for lasso and group lasso.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::dataio::DataMatrix;
use crate::error::{EffcodeError, Result};
use crate::rng;
use crate::sparsecode::dict::Dictionary;
use crate::sparsecode::shrink::{shrink_l1_inplace, shrink_group_inplace, GroupSpec};

/// Settings for sparse-coding inference.
#[derive(Debug, Clone, Copy)]
pub struct CodingConfig {
    /// Sparsity weight λ > 0.
    pub lambda: f64,
    pub max_iter: usize,
    /// Relative objective-change stopping threshold.
    pub tol: f64,
    pub group: Option<GroupSpec>,
    pub seed: u64,
}

impl CodingConfig {
    pub fn new(lambda: f64) -> Self {
        CodingConfig {
            lambda,
            max_iter: 300,
            tol: 1e-5,
            group: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(EffcodeError::invalid("lambda", "must be positive"));
        }
        if self.max_iter < 1 {
            return Err(EffcodeError::invalid("max_iter", "must be >= 1"));
        }
        if !(self.tol > 0.0) {
            return Err(EffcodeError::invalid("tol", "must be positive"));
        }
        Ok(())
    }

    fn prox(&self, u: &mut Array1<f64>, scaled_lambda: f64) {
        let buf = u.as_slice_mut().expect("contiguous");
        match &self.group {
            None => shrink_l1_inplace(buf, scaled_lambda),
            Some(g) => shrink_group_inplace(buf, g, scaled_lambda),
        }
    }

    /// λ·Ω(u): l1 or group l2,1 penalty.
    pub fn penalty(&self, u: ArrayView1<'_, f64>) -> f64 {
        let omega = match &self.group {
            None => u.iter().map(|v| v.abs()).sum::<f64>(),
            Some(g) => u
                .as_slice()
                .expect("contiguous")
                .chunks(g.group_size)
                .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
                .sum::<f64>(),
        };
        self.lambda * omega
    }
}

/// Largest eigenvalue of D·Dᵀ via matrix-free power iteration (relative
/// tolerance 1e-6), times a 1.01 safety factor.
pub fn lipschitz_estimate(d: &Dictionary) -> f64 {
    let m = d.atoms();
    let dv = d.array();
    let mut v: Array1<f64> = Array1::from_shape_fn(m, {
        let mut stream = rng::stream(0xd1c7, 0);
        move |_| rand::Rng::gen_range(&mut stream, -1.0..1.0)
    });
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    v /= norm;
    let mut lambda_prev = 0.0;
    for _ in 0..10_000 {
        let w = dv.dot(&dv.t().dot(&v));
        let lambda = v.dot(&w);
        let w_norm = w.dot(&w).sqrt();
        if w_norm == 0.0 {
            return 0.0; // D v = 0 for the iterate: spectrum is 0 on its span
        }
        v = w / w_norm;
        if (lambda - lambda_prev).abs() <= 1e-6 * lambda.abs() {
            lambda_prev = lambda;
            break;
        }
        lambda_prev = lambda;
    }
    1.01 * lambda_prev.max(0.0)
}

/// Minimizes ½‖x_j − Dᵀu‖² + λΩ(u) per column with FISTA (step 1/L,
/// standard momentum, monotone restart) and returns the m×N code matrix.
/// Stops each column at relative objective change < tol or max_iter.
pub fn fista_encode(d: &Dictionary, x: &DataMatrix, cfg: &CodingConfig) -> Result<DataMatrix> {
    let warm = DataMatrix::zeros(d.atoms(), x.cols());
    fista_encode_warm(d, x, &warm, cfg)
}

/// `fista_encode` starting each column from the matching column of `warm`
/// instead of zero. The monotone safeguard makes each column's final
/// objective ≤ its warm start's objective.
pub fn fista_encode_warm(
    d: &Dictionary,
    x: &DataMatrix,
    warm: &DataMatrix,
    cfg: &CodingConfig,
) -> Result<DataMatrix> {
    cfg.validate()?;
    if x.rows() != d.input_dim() {
        return Err(EffcodeError::shape(
            "fista_encode",
            format!("{} rows", d.input_dim()),
            format!("{} rows", x.rows()),
        ));
    }
    if warm.rows() != d.atoms() || warm.cols() != x.cols() {
        return Err(EffcodeError::shape(
            "fista_encode",
            format!("{}x{} warm codes", d.atoms(), x.cols()),
            format!("{}x{}", warm.rows(), warm.cols()),
        ));
    }
    if let Some(g) = &cfg.group {
        g.check_len(d.atoms())?;
    }

    let lip = lipschitz_estimate(d);
    let columns: Vec<Array1<f64>> = (0..x.cols())
        .into_par_iter()
        .map(|j| fista_column(d, x.column(j), warm.column(j), cfg, lip))
        .collect();

    let mut codes = Array2::zeros((d.atoms(), x.cols()));
    for (j, col) in columns.iter().enumerate() {
        codes.column_mut(j).assign(col);
    }
    Ok(DataMatrix::from_finite(codes))
}

fn objective(d: &Dictionary, x: ArrayView1<'_, f64>, u: &Array1<f64>, cfg: &CodingConfig) -> f64 {
    let resid = &x - &d.array().t().dot(u);
    0.5 * resid.dot(&resid) + cfg.penalty(u.view())
}

/// Σ_j ½‖x_j − Dᵀu_j‖² + λΩ(u_j) over all columns.
pub fn coding_objective(d: &Dictionary, x: &DataMatrix, codes: &DataMatrix, cfg: &CodingConfig) -> Result<f64> {
    if x.rows() != d.input_dim() || codes.rows() != d.atoms() || x.cols() != codes.cols() {
        return Err(EffcodeError::shape(
            "coding_objective",
            format!("X {}xN, codes {}xN", d.input_dim(), d.atoms()),
            format!("X {}x{}, codes {}x{}", x.rows(), x.cols(), codes.rows(), codes.cols()),
        ));
    }
    let resid = &x.array() - &d.array().t().dot(&codes.array());
    let fit = 0.5 * resid.iter().map(|v| v * v).sum::<f64>();
    let penalty: f64 = (0..codes.cols()).map(|j| cfg.penalty(codes.column(j))).sum();
    Ok(fit + penalty)
}

fn fista_column(
    d: &Dictionary,
    x: ArrayView1<'_, f64>,
    warm: ArrayView1<'_, f64>,
    cfg: &CodingConfig,
    lip: f64,
) -> Array1<f64> {
    if lip <= 0.0 {
        // All-zero dictionary: the penalty alone fixes the minimizer at 0.
        return Array1::zeros(d.atoms());
    }
    let step = 1.0 / lip;
    let scaled_lambda = cfg.lambda * step;
    let dv = d.array();

    let mut u_prev = warm.to_owned();
    let mut f_prev = objective(d, x, &u_prev, cfg);
    let mut y = u_prev.clone();
    let mut t: f64 = 1.0;

    for _ in 0..cfg.max_iter {
        let mut u_new = proximal_step(&dv, x, &y, step, scaled_lambda, cfg);
        let mut f_new = objective(d, x, &u_new, cfg);
        if f_new > f_prev {
            // Momentum overshoot: restart with a plain ISTA step, which the
            // majorization bound makes non-increasing.
            u_new = proximal_step(&dv, x, &u_prev, step, scaled_lambda, cfg);
            f_new = objective(d, x, &u_new, cfg);
            t = 1.0;
            if f_new > f_prev {
                break; // numerically converged; keep the better iterate
            }
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        y = &u_new + &((&u_new - &u_prev) * momentum);
        let rel = (f_prev - f_new) / f_prev.max(1e-300);
        u_prev = u_new;
        f_prev = f_new;
        t = t_next;
        if rel < cfg.tol {
            break;
        }
    }
    u_prev
}

fn proximal_step(
    dv: &ndarray::ArrayView2<'_, f64>,
    x: ArrayView1<'_, f64>,
    at: &Array1<f64>,
    step: f64,
    scaled_lambda: f64,
    cfg: &CodingConfig,
) -> Array1<f64> {
    let grad = dv.dot(&(&dv.t().dot(at) - &x));
    let mut u = at - &(grad * step);
    cfg.prox(&mut u, scaled_lambda);
    u
}

/// Maximum violation of the lasso optimality conditions for an l1 code:
/// on zero coordinates |[D(x − Dᵀu)]_i| must not exceed λ, on nonzero
/// coordinates [D(x − Dᵀu)]_i must equal λ·sign(u_i).
pub fn kkt_residual_l1(d: &Dictionary, x: ArrayView1<'_, f64>, u: ArrayView1<'_, f64>, lambda: f64) -> f64 {
    let resid = &x.to_owned() - &d.array().t().dot(&u);
    let corr = d.array().dot(&resid);
    let mut worst: f64 = 0.0;
    for (i, &c) in corr.iter().enumerate() {
        let violation = if u[i] == 0.0 {
            (c.abs() - lambda).max(0.0)
        } else {
            (c - lambda * u[i].signum()).abs()
        };
        worst = worst.max(violation);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn identity_dictionary_reduces_to_shrinkage() {
        let d = Dictionary::new(Array2::eye(4)).unwrap();
        let x = DataMatrix::new(
            Array2::from_shape_vec((4, 1), vec![2.0, -0.3, 0.9, -4.0]).unwrap(),
        )
        .unwrap();
        let mut cfg = CodingConfig::new(0.5);
        cfg.tol = 1e-12;
        cfg.max_iter = 2000;
        let codes = fista_encode(&d, &x, &cfg).unwrap();
        let want = [1.5, 0.0, 0.4, -3.5];
        // Objective-change stopping resolves iterates to about sqrt(eps),
        // so exactness beyond 1e-7 is not claimed.
        for (got, want) in codes.column(0).iter().zip(want) {
            assert!((got - want).abs() < 1e-7, "{} vs {}", got, want);
        }
    }

    #[test]
    fn huge_lambda_gives_zero_codes() {
        let d = Dictionary::new(Array2::eye(3)).unwrap();
        let x = DataMatrix::new(
            Array2::from_shape_vec((3, 2), vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.25]).unwrap(),
        )
        .unwrap();
        let cfg = CodingConfig::new(100.0);
        let codes = fista_encode(&d, &x, &cfg).unwrap();
        assert!(codes.array().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lipschitz_on_identity_rows() {
        let d = Dictionary::new(Array2::eye(5)).unwrap();
        let l = lipschitz_estimate(&d);
        assert!((l - 1.01).abs() < 1e-5, "L = {}", l);
    }

    #[test]
    fn lipschitz_single_short_atom() {
        let d = Dictionary::new(Array2::from_shape_vec((1, 3), vec![0.5, 0.0, 0.0]).unwrap())
            .unwrap();
        let l = lipschitz_estimate(&d);
        assert!((l - 0.2525).abs() < 1e-6, "L = {}", l);
    }
}

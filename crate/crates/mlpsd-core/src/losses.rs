//! Classification and distillation losses, with exact logit gradients.
//!
//! The asymmetric loss decouples the focusing exponents of positive and
//! negative terms and shifts negative probabilities down by `mu` before
//! focusing, so easy negatives stop contributing entirely. The distillation
//! loss is a masked mean-square error between student logits and the merged
//! logits of two teacher ensembles.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Floor for log arguments; the losses are exact gradients of the clamped
/// expressions.
const LOG_FLOOR: f64 = 1e-12;

/// Asymmetric-loss hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AslConfig {
    /// Positive focusing exponent (gamma_plus >= 0).
    pub gamma_pos: f64,
    /// Negative focusing exponent (gamma_minus >= 0).
    pub gamma_neg: f64,
    /// Probability shift applied to negatives, in [0, 1).
    pub mu: f64,
}

impl Default for AslConfig {
    /// The cited defaults: gamma_pos = 0, gamma_neg = 4, mu = 0.05.
    fn default() -> Self {
        Self {
            gamma_pos: 0.0,
            gamma_neg: 4.0,
            mu: 0.05,
        }
    }
}

impl AslConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma_pos.is_finite() || self.gamma_pos < 0.0 {
            return Err(Error::InvalidAslConfig("gamma_pos must be >= 0"));
        }
        if !self.gamma_neg.is_finite() || self.gamma_neg < 0.0 {
            return Err(Error::InvalidAslConfig("gamma_neg must be >= 0"));
        }
        if !self.mu.is_finite() || !(0.0..1.0).contains(&self.mu) {
            return Err(Error::InvalidAslConfig("mu must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Pre-sigmoid predictions with a validity mask (1 = entry meaningful).
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    pub values: Array2<f64>,
    pub mask: Array2<u8>,
}

impl LogitMatrix {
    /// Wraps fully valid logits (mask all ones).
    pub fn full(values: Array2<f64>) -> Self {
        let mask = Array2::ones(values.raw_dim());
        Self { values, mask }
    }

    /// An all-masked-out matrix; contributes nothing to any masked loss.
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            values: Array2::zeros((rows, cols)),
            mask: Array2::zeros((rows, cols)),
        }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    /// Checks that every unmasked entry is finite.
    pub fn validate(&self) -> Result<()> {
        if self.mask.raw_dim() != self.values.raw_dim() {
            return Err(Error::ShapeMismatch {
                context: "logit mask",
                expected_rows: self.values.nrows(),
                expected_cols: self.values.ncols(),
                got_rows: self.mask.nrows(),
                got_cols: self.mask.ncols(),
            });
        }
        for ((i, j), &m) in self.mask.indexed_iter() {
            if m == 1 && !self.values[[i, j]].is_finite() {
                return Err(Error::NonFiniteInput("logit matrix"));
            }
        }
        Ok(())
    }

    /// Copies the selected rows into a new matrix, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let cols = self.cols();
        let mut values = Array2::zeros((indices.len(), cols));
        let mut mask = Array2::zeros((indices.len(), cols));
        for (out, &i) in indices.iter().enumerate() {
            for j in 0..cols {
                values[[out, j]] = self.values[[i, j]];
                mask[[out, j]] = self.mask[[i, j]];
            }
        }
        Self { values, mask }
    }
}

/// Logistic function.
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

/// Asymmetric loss over a batch of logits, averaged over samples.
///
/// Positive entries contribute `-(1-p)^g+ * ln p`; negative entries contribute
/// `-(pm)^g- * ln(1-pm)` with `pm = max(p - mu, 0)`. Returns the scalar loss
/// and its exact gradient with respect to every logit, using the convention
/// that `d pm / d p = 0` at and below the shift kink.
pub fn asl(
    logits: &Array2<f64>,
    labels: &Array2<u8>,
    cfg: &AslConfig,
) -> Result<(f64, Array2<f64>)> {
    cfg.validate()?;
    if logits.raw_dim() != labels.raw_dim() {
        return Err(Error::ShapeMismatch {
            context: "asl labels",
            expected_rows: logits.nrows(),
            expected_cols: logits.ncols(),
            got_rows: labels.nrows(),
            got_cols: labels.ncols(),
        });
    }
    let n = logits.nrows() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    for ((i, j), &z) in logits.indexed_iter() {
        let (term, dz) = if labels[[i, j]] == 1 {
            asl_positive(z, cfg.gamma_pos)
        } else {
            asl_negative(z, cfg.gamma_neg, cfg.mu)
        };
        loss += term;
        grad[[i, j]] = dz / n;
    }
    Ok((loss / n, grad))
}

fn asl_positive(z: f64, gamma_pos: f64) -> (f64, f64) {
    let p = sigmoid(z);
    let lp = libm::log(p.max(LOG_FLOOR));
    let w = libm::pow(1.0 - p, gamma_pos);
    let term = -w * lp;
    let mut dz = gamma_pos * p * w * lp;
    if p > LOG_FLOOR {
        dz -= w * (1.0 - p);
    }
    (term, dz)
}

fn asl_negative(z: f64, gamma_neg: f64, mu: f64) -> (f64, f64) {
    let p = sigmoid(z);
    let pm = p - mu;
    if pm <= 0.0 {
        return (0.0, 0.0);
    }
    let lm = libm::log((1.0 - pm).max(LOG_FLOOR));
    let w = libm::pow(pm, gamma_neg);
    let term = -w * lm;
    let mut d_pm = -gamma_neg * (w / pm) * lm;
    if 1.0 - pm > LOG_FLOOR {
        d_pm += w / (1.0 - pm);
    }
    (term, d_pm * p * (1.0 - p))
}

/// Masked MSE distillation loss against two teacher ensembles.
///
/// `L = 1/(2n) * sum_i [ sum_j M+_ij (s_ij - t+_ij)^2 + sum_j M-_ij (s_ij - t-_ij)^2 ]`.
/// Masked entries contribute zero loss and zero gradient. The returned
/// gradient is with respect to the student logits only.
pub fn kd_mse(
    student: &LogitMatrix,
    teacher_plus: &LogitMatrix,
    teacher_minus: &LogitMatrix,
) -> Result<(f64, Array2<f64>)> {
    let (rows, cols) = (student.rows(), student.cols());
    for t in [teacher_plus, teacher_minus] {
        if t.rows() != rows || t.cols() != cols {
            return Err(Error::ShapeMismatch {
                context: "kd teacher logits",
                expected_rows: rows,
                expected_cols: cols,
                got_rows: t.rows(),
                got_cols: t.cols(),
            });
        }
    }
    // Each entry's two teacher contributions are combined first, so the
    // result is bit-for-bit symmetric under swapping the teachers.
    let n = rows as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let mut sq = 0.0;
            let mut lin = 0.0;
            for teacher in [teacher_plus, teacher_minus] {
                if teacher.mask[[i, j]] == 1 {
                    let diff = student.values[[i, j]] - teacher.values[[i, j]];
                    sq += diff * diff;
                    lin += diff;
                }
            }
            loss += sq;
            grad[[i, j]] = lin / n;
        }
    }
    Ok((loss / (2.0 * n), grad))
}

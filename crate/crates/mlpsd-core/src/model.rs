//! Feed-forward multi-label classifier with analytic gradients.
//!
//! Teachers and the student share this architecture; only the output width
//! (and the category subset it maps to) differs. Hidden layers use
//! rectified-linear activations; the final layer is linear, so `forward`
//! returns pre-sigmoid logits and losses apply the sigmoid themselves.

use alloc::vec::Vec;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::losses::LogitMatrix;
use crate::rng::substream;

/// Architecture plus initialization seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub init_seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidModelDims);
        }
        Ok(())
    }

    /// The (fan_in, fan_out) of every affine layer, in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }
}

/// One affine layer; `weights` is output x input.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// A classifier over an ordered subset of the original categories.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelModel {
    pub config: ModelConfig,
    pub layers: Vec<Layer>,
    pub category_subset: Vec<usize>,
}

/// Per-layer gradients, shaped exactly like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

/// Adam accumulators with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: Vec<Layer>,
    pub second_moment: Vec<Layer>,
    pub step: u64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    /// Zeroed accumulators for `model`, with beta = (0.9, 0.999), eps = 1e-8.
    pub fn new(model: &MultiLabelModel, learning_rate: f64, weight_decay: f64) -> Self {
        let zeros = |l: &Layer| Layer {
            weights: Array2::zeros(l.weights.raw_dim()),
            bias: Array1::zeros(l.bias.raw_dim()),
        };
        Self {
            first_moment: model.layers.iter().map(zeros).collect(),
            second_moment: model.layers.iter().map(zeros).collect(),
            step: 0,
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Initializes weights uniformly in +-sqrt(6 / (fan_in + fan_out)), biases
/// zero. Deterministic given `config.init_seed`.
pub fn init_model(config: &ModelConfig, category_subset: &[usize]) -> Result<MultiLabelModel> {
    config.validate()?;
    if category_subset.len() != config.output_dim {
        return Err(Error::ShapeMismatch {
            context: "category subset",
            expected_rows: config.output_dim,
            expected_cols: 1,
            got_rows: category_subset.len(),
            got_cols: 1,
        });
    }
    let mut rng = substream(config.init_seed, 0);
    let layers = config
        .layer_dims()
        .iter()
        .map(|&(fan_in, fan_out)| {
            let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let weights =
                Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-bound..=bound));
            Layer {
                weights,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(MultiLabelModel {
        config: config.clone(),
        layers,
        category_subset: category_subset.to_vec(),
    })
}

/// Computes pre-sigmoid logits for a batch of feature rows.
pub fn forward(model: &MultiLabelModel, features: &Array2<f64>) -> Result<LogitMatrix> {
    check_features(model, features)?;
    let mut activation = features.clone();
    let last = model.layers.len() - 1;
    for (l, layer) in model.layers.iter().enumerate() {
        let mut z = activation.dot(&layer.weights.t());
        for mut row in z.rows_mut() {
            row += &layer.bias;
        }
        if l < last {
            z.mapv_inplace(|v| v.max(0.0));
        }
        activation = z;
    }
    Ok(LogitMatrix::full(activation))
}

/// Exact reverse-mode gradients of `sum(upstream * logits)` with respect to
/// every parameter. `upstream` is typically a loss gradient d loss / d logits.
pub fn backward(
    model: &MultiLabelModel,
    features: &Array2<f64>,
    upstream: &Array2<f64>,
) -> Result<Gradients> {
    check_features(model, features)?;
    let n = features.nrows();
    if upstream.nrows() != n || upstream.ncols() != model.config.output_dim {
        return Err(Error::ShapeMismatch {
            context: "backward upstream",
            expected_rows: n,
            expected_cols: model.config.output_dim,
            got_rows: upstream.nrows(),
            got_cols: upstream.ncols(),
        });
    }

    // Forward pass, keeping each layer's input and pre-activation.
    let last = model.layers.len() - 1;
    let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(model.layers.len());
    let mut pre_activations: Vec<Array2<f64>> = Vec::with_capacity(model.layers.len());
    let mut activation = features.clone();
    for (l, layer) in model.layers.iter().enumerate() {
        inputs.push(activation.clone());
        let mut z = activation.dot(&layer.weights.t());
        for mut row in z.rows_mut() {
            row += &layer.bias;
        }
        pre_activations.push(z.clone());
        if l < last {
            z.mapv_inplace(|v| v.max(0.0));
        }
        activation = z;
    }

    let mut grads: Vec<Layer> = model
        .layers
        .iter()
        .map(|l| Layer {
            weights: Array2::zeros(l.weights.raw_dim()),
            bias: Array1::zeros(l.bias.raw_dim()),
        })
        .collect();

    let mut delta = upstream.clone();
    for l in (0..model.layers.len()).rev() {
        grads[l].weights = delta.t().dot(&inputs[l]);
        grads[l].bias = delta.sum_axis(ndarray::Axis(0));
        if l > 0 {
            let mut back = delta.dot(&model.layers[l].weights);
            // ReLU subgradient: zero at and below the origin.
            back.zip_mut_with(&pre_activations[l - 1], |b, &z| {
                if z <= 0.0 {
                    *b = 0.0;
                }
            });
            delta = back;
        }
    }
    Ok(Gradients { layers: grads })
}

/// One Adam update with decoupled weight decay applied first
/// (`theta <- theta - lr * wd * theta`), then the bias-corrected moment step.
pub fn adam_step(
    model: &mut MultiLabelModel,
    grads: &Gradients,
    state: &mut OptimizerState,
) -> Result<()> {
    if grads.layers.len() != model.layers.len() {
        return Err(Error::ShapeMismatch {
            context: "adam gradients",
            expected_rows: model.layers.len(),
            expected_cols: 0,
            got_rows: grads.layers.len(),
            got_cols: 0,
        });
    }
    for (layer, grad) in model.layers.iter().zip(&grads.layers) {
        if grad.weights.raw_dim() != layer.weights.raw_dim()
            || grad.bias.raw_dim() != layer.bias.raw_dim()
        {
            return Err(Error::ShapeMismatch {
                context: "adam gradients",
                expected_rows: layer.weights.nrows(),
                expected_cols: layer.weights.ncols(),
                got_rows: grad.weights.nrows(),
                got_cols: grad.weights.ncols(),
            });
        }
    }

    state.step += 1;
    let bias1 = 1.0 - libm::pow(state.beta1, state.step as f64);
    let bias2 = 1.0 - libm::pow(state.beta2, state.step as f64);
    let (lr, wd) = (state.learning_rate, state.weight_decay);
    let (beta1, beta2, eps) = (state.beta1, state.beta2, state.epsilon);

    let update = move |theta: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *theta -= lr * wd * *theta;
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *theta -= lr * m_hat / (libm::sqrt(v_hat) + eps);
    };

    for (l, layer) in model.layers.iter_mut().enumerate() {
        let g = &grads.layers[l];
        let m = &mut state.first_moment[l];
        let v = &mut state.second_moment[l];
        for ((theta, &gw), (mw, vw)) in layer
            .weights
            .iter_mut()
            .zip(g.weights.iter())
            .zip(m.weights.iter_mut().zip(v.weights.iter_mut()))
        {
            update(theta, gw, mw, vw);
        }
        for ((theta, &gb), (mb, vb)) in layer
            .bias
            .iter_mut()
            .zip(g.bias.iter())
            .zip(m.bias.iter_mut().zip(v.bias.iter_mut()))
        {
            update(theta, gb, mb, vb);
        }
    }
    Ok(())
}

fn check_features(model: &MultiLabelModel, features: &Array2<f64>) -> Result<()> {
    if features.ncols() != model.config.input_dim {
        return Err(Error::ShapeMismatch {
            context: "forward features",
            expected_rows: features.nrows(),
            expected_cols: model.config.input_dim,
            got_rows: features.nrows(),
            got_cols: features.ncols(),
        });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("forward features"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use ndarray::array;

    fn config(input: usize, hidden: &[usize], output: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            input_dim: input,
            hidden_dims: hidden.to_vec(),
            output_dim: output,
            init_seed: seed,
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = config(3, &[4], 2, 9);
        let a = init_model(&cfg, &[0, 1]).unwrap();
        let b = init_model(&cfg, &[0, 1]).unwrap();
        assert_eq!(a, b);

        for (layer, &(fan_in, fan_out)) in a.layers.iter().zip(cfg.layer_dims().iter()) {
            let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            assert!(layer.weights.iter().all(|w| w.abs() <= bound));
            assert!(layer.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn no_hidden_layers_is_one_affine_map() {
        let model = init_model(&config(3, &[], 2, 0), &[0, 1]).unwrap();
        assert_eq!(model.layers.len(), 1);
        assert_eq!(model.layers[0].weights.dim(), (2, 3));
    }

    #[test]
    fn zero_model_maps_everything_to_zero() {
        let mut model = init_model(&config(2, &[3], 2, 0), &[0, 1]).unwrap();
        for layer in &mut model.layers {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
        let out = forward(&model, &array![[1.0, -2.0], [0.5, 3.0]]).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
        assert!(out.mask.iter().all(|&m| m == 1));
    }

    #[test]
    fn identity_weights_pass_features_through() {
        let mut model = init_model(&config(2, &[], 2, 0), &[0, 1]).unwrap();
        model.layers[0].weights = array![[1.0, 0.0], [0.0, 1.0]];
        model.layers[0].bias.fill(0.0);
        let x = array![[0.3, -1.2], [5.0, 0.0]];
        let out = forward(&model, &x).unwrap();
        assert_eq!(out.values, x);
    }

    // Oracle: naive triple-loop forward pass, independent of ndarray dot.
    fn naive_forward(model: &MultiLabelModel, x: &Array2<f64>) -> Array2<f64> {
        let mut act: Vec<Vec<f64>> = (0..x.nrows())
            .map(|i| (0..x.ncols()).map(|j| x[[i, j]]).collect())
            .collect();
        let last = model.layers.len() - 1;
        for (l, layer) in model.layers.iter().enumerate() {
            let out_dim = layer.bias.len();
            act = act
                .iter()
                .map(|row| {
                    (0..out_dim)
                        .map(|o| {
                            let mut z = layer.bias[o];
                            for (i, &v) in row.iter().enumerate() {
                                z += layer.weights[[o, i]] * v;
                            }
                            if l < last && z < 0.0 {
                                0.0
                            } else {
                                z
                            }
                        })
                        .collect()
                })
                .collect();
        }
        let out_dim = model.config.output_dim;
        Array2::from_shape_fn((x.nrows(), out_dim), |(i, j)| act[i][j])
    }

    #[test]
    fn forward_matches_naive_matrix_multiply() {
        let model = init_model(&config(4, &[5], 3, 1234), &[0, 1, 2]).unwrap();
        let mut rng = crate::rng::substream(7, 0);
        let x = Array2::from_shape_fn((6, 4), |_| rng.gen_range(-2.0..2.0));
        let got = forward(&model, &x).unwrap();
        let want = naive_forward(&model, &x);
        for (a, b) in got.values.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let model = init_model(&config(3, &[4], 2, 5), &[0, 1]).unwrap();
        let x = array![[1.0, 2.0, 3.0]];
        let grads = backward(&model, &x, &Array2::zeros((1, 2))).unwrap();
        for layer in &grads.layers {
            assert!(layer.weights.iter().all(|&g| g == 0.0));
            assert!(layer.bias.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn linear_layer_gradient_closed_form() {
        // Single affine layer: d(sum upstream * (X W^T + b)) / dW = upstream^T X.
        let model = init_model(&config(3, &[], 2, 5), &[0, 1]).unwrap();
        let x = array![[1.0, 2.0, 3.0], [-1.0, 0.5, 2.0]];
        let upstream = array![[0.2, -0.4], [1.0, 0.3]];
        let grads = backward(&model, &x, &upstream).unwrap();
        let expected = upstream.t().dot(&x);
        assert_eq!(grads.layers[0].weights, expected);
        assert_eq!(grads.layers[0].bias, upstream.sum_axis(ndarray::Axis(0)));
    }

    fn contraction(model: &MultiLabelModel, x: &Array2<f64>, upstream: &Array2<f64>) -> f64 {
        let out = forward(model, x).unwrap();
        out.values
            .iter()
            .zip(upstream.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    #[test]
    fn backward_matches_central_differences() {
        let mut rng = crate::rng::substream(99, 0);
        for case in 0..5u64 {
            let model = init_model(&config(3, &[4], 2, 100 + case), &[0, 1]).unwrap();
            let x = Array2::from_shape_fn((3, 3), |_| rng.gen_range(-1.5..1.5));
            let upstream = Array2::from_shape_fn((3, 2), |_| rng.gen_range(-1.0..1.0));
            let grads = backward(&model, &x, &upstream).unwrap();

            let h = 1e-6;
            for l in 0..model.layers.len() {
                let (rows, cols) = model.layers[l].weights.dim();
                for r in 0..rows {
                    for c in 0..cols {
                        let mut plus = model.clone();
                        plus.layers[l].weights[[r, c]] += h;
                        let mut minus = model.clone();
                        minus.layers[l].weights[[r, c]] -= h;
                        let fd = (contraction(&plus, &x, &upstream)
                            - contraction(&minus, &x, &upstream))
                            / (2.0 * h);
                        let g = grads.layers[l].weights[[r, c]];
                        let denom = fd.abs().max(g.abs()).max(1e-3);
                        assert!((fd - g).abs() / denom < 1e-5, "w[{l}][{r},{c}]: {fd} vs {g}");
                    }
                    let mut plus = model.clone();
                    plus.layers[l].bias[r] += h;
                    let mut minus = model.clone();
                    minus.layers[l].bias[r] -= h;
                    let fd = (contraction(&plus, &x, &upstream)
                        - contraction(&minus, &x, &upstream))
                        / (2.0 * h);
                    let g = grads.layers[l].bias[r];
                    let denom = fd.abs().max(g.abs()).max(1e-3);
                    assert!((fd - g).abs() / denom < 1e-5, "b[{l}][{r}]: {fd} vs {g}");
                }
            }
        }
    }

    #[test]
    fn adam_zero_gradient_zero_decay_is_identity() {
        let mut model = init_model(&config(2, &[3], 2, 11), &[0, 1]).unwrap();
        let reference = model.clone();
        let zero = Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        };
        let mut state = OptimizerState::new(&model, 1e-3, 0.0);
        adam_step(&mut model, &zero, &mut state).unwrap();
        assert_eq!(model, reference);
        assert_eq!(state.step, 1);
        adam_step(&mut model, &zero, &mut state).unwrap();
        assert_eq!(state.step, 2);
    }

    #[test]
    fn adam_first_step_matches_hand_computation() {
        // Scalar parameter, g = 1, wd = 0: m_hat = v_hat = 1, so the first
        // update is -lr / (1 + eps) regardless of the starting value.
        let mut model = init_model(&config(1, &[], 1, 3), &[0]).unwrap();
        model.layers[0].weights[[0, 0]] = 0.25;
        model.layers[0].bias[0] = 0.0;
        let g = Gradients {
            layers: vec![Layer {
                weights: array![[1.0]],
                bias: array![0.0],
            }],
        };
        let mut state = OptimizerState::new(&model, 1e-3, 0.0);
        adam_step(&mut model, &g, &mut state).unwrap();
        let delta = model.layers[0].weights[[0, 0]] - 0.25;
        assert!((delta - (-9.999_999_900_000_003e-4)).abs() < 1e-18);
    }

    #[test]
    fn student_and_teacher_share_hidden_shapes() {
        let teacher_cfg = config(8, &[16, 8], 3, 1);
        let student_cfg = config(8, &[16, 8], 10, 2);
        let teacher = init_model(&teacher_cfg, &[2, 4, 6]).unwrap();
        let student = init_model(&student_cfg, &(0..10).collect::<Vec<_>>()).unwrap();
        assert_eq!(teacher.layers.len(), student.layers.len());
        for (t, s) in teacher.layers.iter().zip(&student.layers).take(2) {
            assert_eq!(t.weights.dim(), s.weights.dim());
        }
        assert_eq!(student.layers.last().unwrap().weights.dim(), (10, 8));
    }

    #[test]
    fn non_finite_features_are_rejected() {
        let model = init_model(&config(2, &[], 2, 0), &[0, 1]).unwrap();
        let err = forward(&model, &array![[f64::NAN, 0.0]]);
        assert!(matches!(err, Err(Error::NonFiniteInput(_))));
    }

    #[test]
    fn invalid_dims_are_rejected() {
        assert!(init_model(&config(0, &[], 2, 0), &[0, 1]).is_err());
        assert!(init_model(&config(2, &[0], 2, 0), &[0, 1]).is_err());
        // category subset length must equal output width
        assert!(init_model(&config(2, &[], 2, 0), &[0]).is_err());
    }
}

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::NUM_ROLES;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_HIDDEN: [usize; 2] = [2048, 1024];

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    /// `in x out`
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }
}

/// Dense classification head: rectified hidden layers and a softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead<T> {
    layers: Vec<DenseLayer<T>>,
}

/// Whether a forward pass applies dropout.
pub enum Mode<'a> {
    Eval,
    Train { dropout: f64, rng: &'a mut ChaCha8Rng },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Array2<T>>,
    pub bias: Vec<Array1<T>>,
}

struct Cache<T> {
    /// Input to each layer (post-activation, post-dropout).
    inputs: Vec<Array2<T>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Array2<T>>,
    /// Inverted-dropout multipliers per hidden layer (`None` in eval mode).
    masks: Vec<Option<Array2<T>>>,
    probs: Array2<T>,
}

impl<T: Scalar> MlpHead<T> {
    /// Default head: `input_dim -> 2048 -> 1024 -> 5`.
    pub fn init(input_dim: usize, seed: u64) -> Result<Self> {
        Self::with_shape(input_dim, &DEFAULT_HIDDEN, NUM_ROLES, seed)
    }

    /// Uniform fan-in scaled weights (`sqrt(6 / fan_in)` for rectified
    /// layers, `sqrt(3 / fan_in)` for the output layer) and zero biases.
    pub fn with_shape(input_dim: usize, hidden: &[usize], outputs: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || outputs < 2 || hidden.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "invalid head shape {input_dim} -> {hidden:?} -> {outputs}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(outputs);
        let n_layers = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let gain = if i + 1 == n_layers { 3.0 } else { 6.0 };
                let limit = (gain / w[0] as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                DenseLayer {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        T::of(dist.sample(&mut rng))
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(MlpHead { layers })
    }

    pub fn from_layers(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("head needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].output_dim(),
                    actual: pair[1].input_dim(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.output_dim() {
                return Err(Error::DimensionMismatch {
                    expected: l.output_dim(),
                    actual: l.bias.len(),
                });
            }
        }
        Ok(MlpHead { layers })
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Sum of squared weights over all layers; biases excluded.
    pub fn weight_norm_sq(&self) -> T {
        self.layers
            .iter()
            .map(|l| l.weights.iter().map(|&w| w * w).sum::<T>())
            .sum()
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients {
            weights: self
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.raw_dim()))
                .collect(),
            bias: self.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }

    fn check_input(&self, x: &ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    fn forward_cached(&self, x: ArrayView2<T>, mode: Mode<'_>) -> Cache<T> {
        let (dropout, mut rng) = match mode {
            Mode::Eval => (0.0, None),
            Mode::Train { dropout, rng } => (dropout, Some(rng)),
        };
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        let mut current = x.to_owned();

        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = current.dot(&layer.weights);
            z += &layer.bias;
            inputs.push(current);
            if i == last {
                current = z;
                break;
            }
            let mut a = z.mapv(|v| if v > T::zero() { v } else { T::zero() });
            let mask = match rng.as_deref_mut() {
                Some(rng) if dropout > 0.0 => {
                    let keep = T::of(1.0 / (1.0 - dropout));
                    let m = Array2::from_shape_simple_fn(a.raw_dim(), || {
                        if rng.gen::<f64>() < dropout {
                            T::zero()
                        } else {
                            keep
                        }
                    });
                    a *= &m;
                    Some(m)
                }
                _ => None,
            };
            pre.push(z);
            masks.push(mask);
            current = a;
        }

        softmax_rows(&mut current);
        Cache {
            inputs,
            pre,
            masks,
            probs: current,
        }
    }

    /// Class probabilities, one row per input row.
    pub fn forward(&self, x: ArrayView2<T>, mode: Mode<'_>) -> Result<Array2<T>> {
        self.check_input(&x)?;
        Ok(self.forward_cached(x, mode).probs)
    }

    pub fn predict_proba(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.forward(x, Mode::Eval)
    }

    /// Mean cross-entropy plus `l2 * sum(W^2)`, and its exact gradient.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<T>,
        labels: &[usize],
        l2: f64,
        mode: Mode<'_>,
    ) -> Result<(T, Gradients<T>)> {
        self.check_input(&x)?;
        let k = self.output_dim();
        if labels.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!("label {bad} >= {k} outputs")));
        }
        let batch = T::of(x.nrows() as f64);
        let cache = self.forward_cached(x, mode);
        let floor = T::of(PROB_FLOOR);

        let mut ce = T::zero();
        let mut delta = cache.probs.clone();
        for (mut row, &y) in delta.axis_iter_mut(Axis(0)).zip(labels) {
            let p = row[y];
            if p < floor {
                // clamped: the loss is flat in the logits for this row
                ce -= floor.ln();
                row.fill(T::zero());
            } else {
                ce -= p.ln();
                row[y] -= T::one();
            }
        }
        delta.mapv_inplace(|v| v / batch);
        let l2t = T::of(l2);
        let loss = ce / batch + l2t * self.weight_norm_sq();

        let mut grads = self.zero_gradients();
        let two_l2 = T::of(2.0 * l2);
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let mut gw = cache.inputs[i].t().dot(&delta);
            Zip::from(&mut gw)
                .and(&layer.weights)
                .for_each(|g, &w| *g += two_l2 * w);
            grads.weights[i] = gw;
            grads.bias[i] = delta.sum_axis(Axis(0));
            if i == 0 {
                break;
            }
            let mut upstream = delta.dot(&layer.weights.t());
            if let Some(mask) = &cache.masks[i - 1] {
                upstream *= mask;
            }
            Zip::from(&mut upstream)
                .and(&cache.pre[i - 1])
                .for_each(|u, &z| {
                    if z <= T::zero() {
                        *u = T::zero();
                    }
                });
            delta = upstream;
        }
        Ok((loss, grads))
    }
}

pub(crate) fn softmax_rows<T: Scalar>(m: &mut Array2<T>) {
    for mut row in m.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: T = row.iter().copied().sum();
        row.mapv_inplace(|v| v / sum);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny(seed: u64) -> MlpHead<f64> {
        MlpHead::with_shape(3, &[4, 3], 5, seed).unwrap()
    }

    #[test]
    fn init_is_seeded_with_zero_bias() {
        assert_eq!(tiny(1), tiny(1));
        assert_ne!(tiny(1), tiny(2));
        assert!(tiny(1).layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn default_shape() {
        let head = MlpHead::<f32>::init(4, 0).unwrap();
        let dims: Vec<_> = head.layers().iter().map(|l| l.weights.dim()).collect();
        assert_eq!(dims, vec![(4, 2048), (2048, 1024), (1024, 5)]);
        assert_eq!(head.layers()[0].weights.len(), 4 * 2048);
    }

    #[test]
    fn rows_are_distributions() {
        let head = tiny(3);
        let x = array![[1.0, -2.0, 0.5], [0.0, 0.0, 0.0], [10.0, 3.0, -7.0]];
        let p = head.forward(x.view(), Mode::Eval).unwrap();
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let mut head = tiny(3);
        for l in head.layers_mut() {
            l.weights.fill(0.0);
        }
        let p = head.forward(array![[1.0, 2.0, 3.0]].view(), Mode::Eval).unwrap();
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-12));
    }

    #[test]
    fn eval_mode_is_pure() {
        let head = tiny(5);
        let x = array![[0.3, -0.1, 0.9]];
        let a = head.forward(x.view(), Mode::Eval).unwrap();
        let b = head.forward(x.view(), Mode::Eval).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn train_mode_drops_units() {
        let head = MlpHead::<f64>::with_shape(3, &[64], 5, 1).unwrap();
        let x = array![[0.3, -0.1, 0.9]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = head
            .forward(x.view(), Mode::Train { dropout: 0.5, rng: &mut rng })
            .unwrap();
        let b = head.forward(x.view(), Mode::Eval).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let head = tiny(0);
        assert!(head.forward(array![[1.0, 2.0]].view(), Mode::Eval).is_err());
    }

    #[test]
    fn uniform_prediction_loss_is_ln5() {
        let mut head = tiny(0);
        for l in head.layers_mut() {
            l.weights.fill(0.0);
        }
        let (loss, _) = head
            .loss_and_grad(array![[1.0, 1.0, 1.0]].view(), &[2], 0.0, Mode::Eval)
            .unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_has_near_zero_loss() {
        let mut head = MlpHead::<f64>::with_shape(1, &[1], 5, 0).unwrap();
        let layers = head.layers_mut();
        layers[0].weights.fill(1.0);
        layers[1].weights.fill(0.0);
        layers[1].weights[[0, 3]] = 100.0;
        let (loss, _) = head
            .loss_and_grad(array![[1.0]].view(), &[3], 0.0, Mode::Eval)
            .unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn l2_term_is_linear_in_strength() {
        let head = tiny(9);
        let x = array![[0.2, 0.4, -0.3], [1.0, -1.0, 0.0]];
        let (base, _) = head.loss_and_grad(x.view(), &[0, 4], 0.0, Mode::Eval).unwrap();
        let (one, _) = head.loss_and_grad(x.view(), &[0, 4], 0.09, Mode::Eval).unwrap();
        let (two, _) = head.loss_and_grad(x.view(), &[0, 4], 0.18, Mode::Eval).unwrap();
        let norm = head.weight_norm_sq();
        assert!((one - base - 0.09 * norm).abs() < 1e-12);
        assert!((two - one - 0.09 * norm).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_labels() {
        let head = tiny(0);
        assert!(head
            .loss_and_grad(array![[1.0, 1.0, 1.0]].view(), &[5], 0.0, Mode::Eval)
            .is_err());
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RandomSource};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Rectified linear unit, `max(0, v)`.
    Relu,
    None,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::None => v,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::None => 1.0,
        }
    }
}

/// Layer widths from input to embedding, and the nonlinearity after every
/// hidden layer. The last layer is always affine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub layer_widths: Vec<usize>,
    pub hidden_activations: Vec<Activation>,
}

impl EncoderSpec {
    /// `widths` with a rectifier after every hidden layer.
    pub fn relu_mlp(widths: &[usize]) -> Self {
        Self {
            layer_widths: widths.to_vec(),
            hidden_activations: vec![Activation::Relu; widths.len().saturating_sub(2)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::config("layer_widths", "need an input and an output width"));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::config("layer_widths", "every width must be >= 1"));
        }
        if self.hidden_activations.len() != self.layer_widths.len() - 2 {
            return Err(Error::config(
                "hidden_activations",
                format!(
                    "{} hidden layers need {} activations, got {}",
                    self.layer_widths.len() - 2,
                    self.layer_widths.len() - 2,
                    self.hidden_activations.len()
                ),
            ));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().expect("validated spec")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    fn activation(&self, layer: usize) -> Activation {
        self.hidden_activations
            .get(layer)
            .copied()
            .unwrap_or(Activation::None)
    }
}

/// Affine map `X·W + b` with `W` of shape `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub layers: Vec<Layer>,
}

/// Gradients share the parameter layout.
pub type EncoderGrads = EncoderParams;

impl EncoderParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    /// All parameters as mutable slices, weights then bias per layer.
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weights.data_mut());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push(l.weights.data());
            out.push(l.bias.as_slice());
        }
        out
    }
}

/// Values saved by a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of every layer (the first is the encoder input).
    inputs: Vec<Matrix>,
    /// Pre-activation output of every layer.
    pre: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub spec: EncoderSpec,
    pub params: EncoderParams,
}

impl Encoder {
    /// Weights uniform in `±1/√fan_in`, zero biases.
    pub fn init(spec: EncoderSpec, rng: &mut RandomSource) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.uniform_in(-bound, bound))
                    .collect();
                Layer {
                    weights: Matrix::from_raw(fan_in, fan_out, data),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            spec,
            params: EncoderParams { layers },
        })
    }

    pub fn new(spec: EncoderSpec, params: EncoderParams) -> Result<Self> {
        let enc = Self { spec, params };
        enc.validate()?;
        Ok(enc)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.params.layers.len() != self.spec.num_layers() {
            return Err(Error::Shape(format!(
                "spec has {} layers, params have {}",
                self.spec.num_layers(),
                self.params.layers.len()
            )));
        }
        for (i, (l, w)) in self.params.layers.iter().zip(self.spec.layer_widths.windows(2)).enumerate() {
            if l.weights.shape() != (w[0], w[1]) || l.bias.len() != w[1] {
                return Err(Error::Shape(format!(
                    "layer {i}: expected {}x{} weights and {} biases, got {}x{} and {}",
                    w[0],
                    w[1],
                    w[1],
                    l.weights.rows(),
                    l.weights.cols(),
                    l.bias.len()
                )));
            }
            if !l.weights.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::Numerical(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<Matrix> {
        self.forward_cached(inputs).map(|(out, _)| out)
    }

    pub fn forward_cached(&self, inputs: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if inputs.cols() != self.spec.input_dim() {
            return Err(Error::Shape(format!(
                "encoder expects {} input columns, got {}",
                self.spec.input_dim(),
                inputs.cols()
            )));
        }
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.params.layers.len()),
            pre: Vec::with_capacity(self.params.layers.len()),
        };
        let mut current = inputs.clone();
        for (i, layer) in self.params.layers.iter().enumerate() {
            let mut pre = current.matmul(&layer.weights)?;
            let width = pre.cols();
            par::for_each_row_mut(pre.data_mut(), width, |_, row| {
                row.iter_mut().zip(&layer.bias).for_each(|(v, b)| *v += b);
            });
            let act = self.spec.activation(i);
            let out = Matrix::from_raw(
                pre.rows(),
                width,
                pre.data().iter().map(|&v| act.apply(v)).collect(),
            );
            cache.inputs.push(current);
            cache.pre.push(pre);
            current = out;
        }
        Ok((current, cache))
    }

    /// Reverse-mode gradients of a scalar whose gradient w.r.t. the
    /// embeddings is `grad_out`. Returns parameter and input gradients.
    pub fn backward(&self, inputs: &Matrix, grad_out: &Matrix) -> Result<(EncoderGrads, Matrix)> {
        let (_, cache) = self.forward_cached(inputs)?;
        self.backward_cached(&cache, grad_out)
    }

    pub fn backward_cached(
        &self,
        cache: &ForwardCache,
        grad_out: &Matrix,
    ) -> Result<(EncoderGrads, Matrix)> {
        let last = cache.pre.last().expect("encoder has at least one layer");
        if grad_out.shape() != last.shape() {
            return Err(Error::Shape(format!(
                "gradient is {}x{} but embeddings are {}x{}",
                grad_out.rows(),
                grad_out.cols(),
                last.rows(),
                last.cols()
            )));
        }
        let mut grads = self.params.zeros_like();
        let mut upstream = grad_out.clone();
        for i in (0..self.params.layers.len()).rev() {
            let act = self.spec.activation(i);
            let pre = &cache.pre[i];
            let delta = Matrix::from_raw(
                pre.rows(),
                pre.cols(),
                upstream
                    .data()
                    .iter()
                    .zip(pre.data())
                    .map(|(g, &p)| g * act.derivative(p))
                    .collect(),
            );
            grads.layers[i].weights = cache.inputs[i].t_matmul(&delta)?;
            let bias = &mut grads.layers[i].bias;
            for row in delta.iter_rows() {
                bias.iter_mut().zip(row).for_each(|(b, d)| *b += d);
            }
            upstream = delta.matmul_t(&self.params.layers[i].weights)?;
        }
        Ok((grads, upstream))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_difference_gradient, relative_error};

    fn linear(weights: Matrix, bias: Vec<f64>) -> Encoder {
        let (i, o) = weights.shape();
        Encoder::new(
            EncoderSpec { layer_widths: vec![i, o], hidden_activations: vec![] },
            EncoderParams { layers: vec![Layer { weights, bias }] },
        )
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input() {
        let enc = linear(Matrix::identity(3), vec![0.0; 3]);
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.5], [0.0, 4.0, -1.0]]).unwrap();
        assert_eq!(enc.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_weights_emit_bias() {
        let enc = linear(Matrix::zeros(2, 3), vec![0.5, -1.0, 2.0]);
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        for row in enc.forward(&x).unwrap().iter_rows() {
            assert_eq!(row, &[0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn rectifier_clips_negative() {
        let enc = Encoder::new(
            EncoderSpec { layer_widths: vec![2, 2, 2], hidden_activations: vec![Activation::Relu] },
            EncoderParams {
                layers: vec![
                    Layer { weights: Matrix::identity(2), bias: vec![0.0; 2] },
                    Layer { weights: Matrix::identity(2), bias: vec![0.0; 2] },
                ],
            },
        )
        .unwrap();
        let out = enc.forward(&Matrix::from_rows(&[[-1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(out.row(0), &[0.0, 2.0]);

        // no gradient flows back through the clipped unit
        let (grads, gin) = enc.backward(
            &Matrix::from_rows(&[[-1.0, 2.0]]).unwrap(),
            &Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(gin.row(0), &[0.0, 1.0]);
        assert_eq!(grads.layers[0].bias, vec![0.0, 1.0]);
    }

    #[test]
    fn linear_weight_gradient_is_input_transpose_times_upstream() {
        let w = Matrix::from_rows(&[[0.5, -1.0], [2.0, 0.25], [1.0, 1.0]]).unwrap();
        let enc = linear(w, vec![0.1, 0.2]);
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0]]).unwrap();
        let g = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]).unwrap();
        let (grads, _) = enc.backward(&x, &g).unwrap();
        assert_eq!(grads.layers[0].weights, x.transpose().matmul(&g).unwrap());
        assert_eq!(grads.layers[0].bias, vec![1.5, 1.0]);
    }

    #[test]
    fn full_network_matches_finite_differences() {
        let mut rng = RandomSource::new(11);
        let enc = Encoder::init(EncoderSpec::relu_mlp(&[4, 6, 5, 3]), &mut rng).unwrap();
        let x = Matrix::new(5, 4, (0..20).map(|_| rng.gaussian()).collect()).unwrap();
        let target = Matrix::new(5, 3, (0..15).map(|_| rng.gaussian()).collect()).unwrap();
        // L = Σ target ⊙ out + ½‖out‖², so ∂L/∂out = target + out
        let loss = |e: &Encoder| {
            let out = e.forward(&x).unwrap();
            out.data().iter().zip(target.data()).map(|(o, t)| o * t + 0.5 * o * o).sum::<f64>()
        };
        let out = enc.forward(&x).unwrap();
        let (grads, _) = enc.backward(&x, &out.add_scaled(&target, 1.0).unwrap()).unwrap();
        for (li, layer) in enc.params.layers.iter().enumerate() {
            let fd = finite_difference_gradient(
                |w| {
                    let mut e = enc.clone();
                    e.params.layers[li].weights.data_mut().copy_from_slice(w);
                    loss(&e)
                },
                layer.weights.data(),
                1e-5,
            )
            .unwrap();
            let err = relative_error(grads.layers[li].weights.data(), &fd, 1e-8);
            assert!(err < 1e-4, "layer {li}: {err}");
        }
    }

    #[test]
    fn shape_mismatch() {
        let enc = linear(Matrix::identity(3), vec![0.0; 3]);
        assert!(matches!(enc.forward(&Matrix::zeros(1, 2)), Err(Error::Shape(_))));
        assert!(matches!(
            enc.backward(&Matrix::zeros(1, 3), &Matrix::zeros(1, 2)),
            Err(Error::Shape(_))
        ));
    }
}

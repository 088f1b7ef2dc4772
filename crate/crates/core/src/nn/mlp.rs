use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

/// One dense layer; `weights` is `outputs x inputs`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Weights and biases of a feedforward network.
///
/// The same type doubles as a gradient container: a gradient has exactly
/// the parameter layout of the network it was taken from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

/// Hidden layers use tanh, the output layer is linear.
pub fn standard_specs(inputs: usize, hidden: &[usize], outputs: usize) -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(hidden.len() + 1);
    let mut width = inputs;
    for &h in hidden {
        specs.push(LayerSpec {
            inputs: width,
            outputs: h,
            activation: Activation::Tanh,
        });
        width = h;
    }
    specs.push(LayerSpec {
        inputs: width,
        outputs,
        activation: Activation::Identity,
    });
    specs
}

impl MlpParams {
    /// All-zero parameters for the given layer stack.
    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        ensure!(!specs.is_empty(), "network needs at least one layer");
        for (i, s) in specs.iter().enumerate() {
            ensure!(
                s.inputs > 0 && s.outputs > 0,
                "layer {i} has a zero width ({} -> {})",
                s.inputs,
                s.outputs
            );
        }
        for (i, pair) in specs.windows(2).enumerate() {
            ensure!(
                pair[0].outputs == pair[1].inputs,
                "layer {i} outputs {} but layer {} expects {}",
                pair[0].outputs,
                i + 1,
                pair[1].inputs
            );
        }
        Ok(Self {
            layers: specs
                .iter()
                .map(|&spec| Layer {
                    spec,
                    weights: vec![0.0; spec.inputs * spec.outputs],
                    biases: vec![0.0; spec.outputs],
                })
                .collect(),
        })
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases.
    pub fn init(specs: &[LayerSpec], rng: &mut RngStream) -> Result<Self> {
        let mut p = Self::zeros(specs)?;
        for layer in &mut p.layers {
            let bound = 1.0 / libm::sqrt(layer.spec.inputs as f64);
            for w in &mut layer.weights {
                *w = (2.0 * rng.uniform() - 1.0) * bound;
            }
        }
        Ok(p)
    }

    /// Rebuilds a network from stored layers, re-validating shapes and values.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        Self::zeros(&specs)?;
        for (i, l) in layers.iter().enumerate() {
            ensure!(
                l.weights.len() == l.spec.inputs * l.spec.outputs
                    && l.biases.len() == l.spec.outputs,
                "layer {i} buffers do not match its spec"
            );
        }
        let p = Self { layers };
        p.check_finite()?;
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec,
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Parameters in layer order, weights before biases within a layer.
    pub fn iter(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    /// Mutable reference to the `index`-th parameter in [`iter`](Self::iter) order.
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            if index < nw {
                return &mut layer.weights[index];
            }
            index -= nw;
            let nb = layer.biases.len();
            if index < nb {
                return &mut layer.biases[index];
            }
            index -= nb;
        }
        panic!("parameter index out of range");
    }

    /// `self += alpha * other`. Shapes must match.
    pub fn add_scaled(&mut self, alpha: f64, other: &MlpParams) {
        debug_assert_eq!(self.specs(), other.specs());
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.iter_mut().for_each(|p| *p *= c);
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, p| m.max(libm::fabs(*p)))
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric("non-finite network parameter".into()))
        }
    }

    /// Raw outputs of the final (linear) layer.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut acts = self.forward_cached(input)?;
        Ok(acts.pop().unwrap_or_default())
    }

    /// Activations of every layer, input first, output last.
    pub fn forward_cached(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        ensure!(
            input.len() == self.input_dim(),
            "input width {} does not match network input {}",
            input.len(),
            self.input_dim()
        );
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for layer in &self.layers {
            let x = &acts[acts.len() - 1];
            let n_in = layer.spec.inputs;
            let y: Vec<f64> = layer
                .weights
                .chunks_exact(n_in)
                .zip(&layer.biases)
                .map(|(row, b)| {
                    let z = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
                    layer.spec.activation.apply(z)
                })
                .collect();
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite activation in a {}-wide layer",
                    layer.spec.outputs
                )));
            }
            acts.push(y);
        }
        Ok(acts)
    }

    /// Reverse-mode gradient of `sum_k output_grad[k] * output[k]` with
    /// respect to every parameter, evaluated at `input`.
    pub fn backprop(&self, input: &[f64], output_grad: &[f64]) -> Result<MlpParams> {
        let acts = self.forward_cached(input)?;
        let mut grad = self.zeros_like();
        self.backprop_into(&acts, output_grad, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Accumulates `scale * backprop` into `grad` using precomputed activations.
    pub fn backprop_into(
        &self,
        acts: &[Vec<f64>],
        output_grad: &[f64],
        scale: f64,
        grad: &mut MlpParams,
    ) -> Result<()> {
        ensure!(
            output_grad.len() == self.output_dim(),
            "output gradient width {} does not match network output {}",
            output_grad.len(),
            self.output_dim()
        );
        ensure!(
            acts.len() == self.layers.len() + 1,
            "activation cache does not match network depth"
        );
        // delta = dL/d(output of current layer)
        let mut delta: Vec<f64> = output_grad.iter().map(|g| g * scale).collect();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let x = &acts[li];
            let y = &acts[li + 1];
            let n_in = layer.spec.inputs;
            // dL/dz through the activation.
            for (d, &yo) in delta.iter_mut().zip(y) {
                *d *= layer.spec.activation.derivative_from_output(yo);
            }
            let g = &mut grad.layers[li];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                for (gw, xi) in g.weights[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                    *gw += d * xi;
                }
            }
            if li > 0 {
                let mut prev = vec![0.0; n_in];
                for (row, &d) in layer.weights.chunks_exact(n_in).zip(&delta) {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                delta = prev;
            }
        }
        if grad.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric("non-finite gradient".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(inputs: usize, outputs: usize) -> MlpParams {
        MlpParams::zeros(&[LayerSpec {
            inputs,
            outputs,
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    #[test]
    fn inconsistent_widths_are_rejected() {
        let specs = [
            LayerSpec {
                inputs: 3,
                outputs: 4,
                activation: Activation::Tanh,
            },
            LayerSpec {
                inputs: 5,
                outputs: 1,
                activation: Activation::Identity,
            },
        ];
        assert!(MlpParams::zeros(&specs).is_err());
    }

    #[test]
    fn param_count_matches_layout() {
        let p = MlpParams::zeros(&standard_specs(3, &[20, 20, 20, 20], 2)).unwrap();
        assert_eq!(p.param_count(), 3 * 20 + 20 + 3 * (20 * 20 + 20) + 20 * 2 + 2);
        assert_eq!(p.iter().count(), p.param_count());
    }

    #[test]
    fn input_width_mismatch_is_contract_error() {
        let p = linear(3, 1);
        assert!(matches!(p.forward(&[1.0, 2.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn non_finite_activation_is_numeric_error() {
        let mut p = linear(1, 1);
        p.layers[0].weights[0] = f64::MAX;
        assert!(matches!(p.forward(&[10.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        // y = W x + b, L = g . y  =>  dL/dW = g x^T, dL/db = g
        let mut p = linear(3, 2);
        p.layers[0].weights = vec![0.5, -1.0, 2.0, 0.25, 0.0, -0.75];
        p.layers[0].biases = vec![0.1, -0.2];
        let x = [1.5, -2.0, 0.5];
        let g = [2.0, -3.0];
        let grad = p.backprop(&x, &g).unwrap();
        let expected_w = [3.0, -4.0, 1.0, -4.5, 6.0, -1.5];
        assert_eq!(grad.layers[0].weights, expected_w);
        assert_eq!(grad.layers[0].biases, g);
    }

    #[test]
    fn two_layer_identity_network_gradient_closed_form() {
        // y = W2 (W1 x + b1) + b2 with scalar output.
        let specs = [
            LayerSpec {
                inputs: 2,
                outputs: 2,
                activation: Activation::Identity,
            },
            LayerSpec {
                inputs: 2,
                outputs: 1,
                activation: Activation::Identity,
            },
        ];
        let mut p = MlpParams::zeros(&specs).unwrap();
        p.layers[0].weights = vec![1.0, 2.0, -1.0, 0.5];
        p.layers[0].biases = vec![0.5, -0.5];
        p.layers[1].weights = vec![3.0, -2.0];
        let x = [1.0, 2.0];
        let h = [1.0 + 4.0 + 0.5, -1.0 + 1.0 - 0.5];
        let grad = p.backprop(&x, &[1.0]).unwrap();
        assert_eq!(grad.layers[1].weights, vec![h[0], h[1]]);
        assert_eq!(grad.layers[1].biases, vec![1.0]);
        // dL/dW1[o][i] = W2[o] * x[i]
        assert_eq!(grad.layers[0].weights, vec![3.0, 6.0, -2.0, -4.0]);
        assert_eq!(grad.layers[0].biases, vec![3.0, -2.0]);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero() {
        let mut rng = RngStream::new(1, "init");
        let p = MlpParams::init(&standard_specs(3, &[5, 5], 2), &mut rng).unwrap();
        let g = p.backprop(&[0.3, -0.1, 1.0], &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = RngStream::new(2, "init");
        let p = MlpParams::init(&standard_specs(16, &[4], 1), &mut rng).unwrap();
        assert!(p.layers[0].weights.iter().all(|w| w.abs() <= 0.25));
        assert!(p.layers[0].weights.iter().any(|w| *w != 0.0));
    }

    #[test]
    fn param_mut_follows_iter_order() {
        let mut rng = RngStream::new(4, "init");
        let mut p = MlpParams::init(&standard_specs(2, &[3], 2), &mut rng).unwrap();
        let flat: Vec<f64> = p.iter().copied().collect();
        for (i, v) in flat.iter().enumerate() {
            assert_eq!(*p.param_mut(i), *v);
        }
    }
}
